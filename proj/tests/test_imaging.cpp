#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <png.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "fbtex/error.hpp"
#include "fbtex/imaging.hpp"
#include "oracles.hpp"

using namespace fbtex;

namespace {

std::vector<std::uint8_t> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

GrayImage random_gray(std::mt19937_64& g, int w, int h) {
  return GrayImage(w, h, oracle::random_vector(g, static_cast<std::size_t>(w) * h));
}

std::vector<std::uint8_t> libpng_encode(const RgbImage& img) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  REQUIRE(png_image_write_to_memory(&image, nullptr, &size, 0, img.pixels.data(), 0, nullptr));
  std::vector<std::uint8_t> out(size);
  REQUIRE(png_image_write_to_memory(&image, out.data(), &size, 0, img.pixels.data(), 0, nullptr));
  out.resize(size);
  return out;
}

std::vector<std::uint8_t> libpng_decode_gray(const std::vector<std::uint8_t>& bytes, int& w, int& h) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  REQUIRE(png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()));
  image.format = PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> px(PNG_IMAGE_SIZE(image));
  REQUIRE(png_image_finish_read(&image, nullptr, px.data(), 0, nullptr));
  w = static_cast<int>(image.width);
  h = static_cast<int>(image.height);
  return px;
}

}  // namespace

TEST_CASE("PPM with red pixels decodes to red") {
  auto img = decode_image(bytes_of("P3\n2 2\n255\n255 0 0 255 0 0\n255 0 0 255 0 0\n"));
  CHECK(img.width == 2);
  CHECK(img.height == 2);
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 2; ++x) {
      CHECK(img.at(x, y)[0] == 255);
      CHECK(img.at(x, y)[1] == 0);
      CHECK(img.at(x, y)[2] == 0);
    }
  std::string raw = "P6\n2 2\n255\n";
  for (int i = 0; i < 4; ++i) raw += std::string("\xff\x00\x00", 3);
  CHECK(decode_image(bytes_of(raw)).pixels == img.pixels);
}

TEST_CASE("PGM replicates the gray value into three channels") {
  auto img = decode_image(bytes_of("P2\n# comment\n1 1\n255\n128\n"));
  REQUIRE(img.pixels.size() == 3);
  CHECK(img.pixels == std::vector<std::uint8_t>{128, 128, 128});
  std::string raw = "P5\n1 1\n255\n";
  raw.push_back(static_cast<char>(128));
  CHECK(decode_image(bytes_of(raw)).pixels == img.pixels);
}

TEST_CASE("PNG written by libpng decodes to the same pixels") {
  std::mt19937_64 g(11);
  RgbImage src(64, 64);
  for (auto& p : src.pixels) p = static_cast<std::uint8_t>(g() & 0xff);
  const auto decoded = decode_image(libpng_encode(src));
  CHECK(decoded.width == 64);
  CHECK(decoded.height == 64);
  CHECK(decoded.pixels == src.pixels);
}

TEST_CASE("PNG written by the encoder is readable by libpng") {
  std::mt19937_64 g(12);
  GrayImage src(37, 21);
  for (auto& v : src.pixels()) v = static_cast<double>(g() % 256) / 255.0;
  int w = 0, h = 0;
  const auto px = libpng_decode_gray(encode_png(src), w, h);
  REQUIRE(w == 37);
  REQUIRE(h == 21);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      CHECK(px[static_cast<std::size_t>(y) * w + x] == std::lround(src(x, y) * 255.0));
  // and back through our own decoder
  const auto round = to_grayscale(decode_image(encode_png(src)));
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) CHECK(round(x, y) == doctest::Approx(src(x, y)).epsilon(1e-12));
}

TEST_CASE("malformed inputs raise decode errors with offsets") {
  CHECK_THROWS_AS(decode_image(bytes_of("P6\n2 2\n255\n\x01\x02")), DecodeError);
  CHECK_THROWS_AS(decode_image(bytes_of("GIF89a")), UnsupportedFormatError);
  CHECK_THROWS_AS(decode_image(bytes_of("P5\n1 1\n65535\n\x01\x02")), UnsupportedFormatError);

  RgbImage src(4, 4);
  auto png = encode_png(src);
  auto truncated = std::vector<std::uint8_t>(png.begin(), png.begin() + 40);
  try {
    decode_image(truncated);
    FAIL("expected a decode error");
  } catch (const DecodeError& e) {
    CHECK(e.offset() <= truncated.size());
  }
  auto corrupt = png;
  corrupt[20] ^= 0x40;  // inside IHDR, breaks the CRC
  CHECK_THROWS_AS(decode_image(corrupt), DecodeError);
}

TEST_CASE("16-bit PNG is unsupported") {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = 2;
  image.height = 2;
  image.format = PNG_FORMAT_LINEAR_Y;
  std::vector<std::uint16_t> px(4, 1000);
  png_alloc_size_t size = 0;
  REQUIRE(png_image_write_to_memory(&image, nullptr, &size, 0, px.data(), 0, nullptr));
  std::vector<std::uint8_t> out(size);
  REQUIRE(png_image_write_to_memory(&image, out.data(), &size, 0, px.data(), 0, nullptr));
  out.resize(size);
  CHECK_THROWS_AS(decode_image(out), UnsupportedFormatError);
}

TEST_CASE("grayscale uses BT.601 luma") {
  RgbImage img(3, 1);
  const std::uint8_t px[] = {255, 255, 255, 0, 0, 0, 255, 0, 0};
  std::copy(std::begin(px), std::end(px), img.pixels.begin());
  const auto g = to_grayscale(img);
  CHECK(g(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(g(1, 0) == 0.0);
  CHECK(g(2, 0) == doctest::Approx(0.299).epsilon(1e-15));

  std::mt19937_64 r(3);
  RgbImage rnd(50, 50);
  for (auto& p : rnd.pixels) p = static_cast<std::uint8_t>(r() & 0xff);
  for (double v : to_grayscale(rnd).pixels()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("crop returns the addressed window") {
  GrayImage img(4, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) img(x, y) = (y * 4 + x) / 16.0;
  CHECK(crop(img, {0, 0, 4, 4, BlockId::Forehead}) == img);
  const auto c = crop(img, {1, 1, 2, 2, BlockId::Nose});
  CHECK(c.width() == 2);
  CHECK(c(0, 0) == img(1, 1));
  CHECK(c(1, 0) == img(2, 1));
  CHECK(c(0, 1) == img(1, 2));
  CHECK(c(1, 1) == img(2, 2));
}

TEST_CASE("crop matches index-by-index extraction and composes") {
  std::mt19937_64 g(5);
  for (int t = 0; t < 50; ++t) {
    const auto img = random_gray(g, 10, 10);
    const int x = static_cast<int>(g() % 10), y = static_cast<int>(g() % 10);
    const int w = 1 + static_cast<int>(g() % (10 - x)), h = 1 + static_cast<int>(g() % (10 - y));
    const auto c = crop(img, {x, y, w, h, BlockId::Forehead});
    for (int j = 0; j < h; ++j)
      for (int i = 0; i < w; ++i) CHECK(c(i, j) == img.pixels()[(y + j) * 10 + (x + i)]);
    const int x2 = static_cast<int>(g() % w), y2 = static_cast<int>(g() % h);
    const int w2 = 1 + static_cast<int>(g() % (w - x2)), h2 = 1 + static_cast<int>(g() % (h - y2));
    CHECK(crop(c, {x2, y2, w2, h2, BlockId::Nose}) ==
          crop(img, {x + x2, y + y2, w2, h2, BlockId::Nose}));
  }
}

TEST_CASE("crop outside the image names the coordinates") {
  GrayImage img(8, 8);
  try {
    crop(img, {5, 2, 4, 4, BlockId::LeftCheek});
    FAIL("expected a bounds error");
  } catch (const BoundsError& e) {
    const std::string msg = e.what();
    CHECK(msg.find('5') != std::string::npos);
  }
  CHECK_THROWS_AS(crop(img, {-1, 0, 2, 2, BlockId::Forehead}), BoundsError);
  CHECK_THROWS_AS(crop(img, {0, 0, 0, 2, BlockId::Forehead}), BoundsError);
}

TEST_CASE("bilinear resize") {
  std::mt19937_64 g(9);
  const auto img = random_gray(g, 64, 64);
  CHECK(resize_bilinear(img, 64, 64) == img);

  const GrayImage flat(13, 7, 0.37);
  for (double v : resize_bilinear(flat, 64, 64).pixels()) CHECK(v == doctest::Approx(0.37).epsilon(1e-15));

  const auto up = resize_bilinear(GrayImage(2, 1, std::vector<double>{0.0, 1.0}), 4, 1);
  CHECK(up(0, 0) == doctest::Approx(0.0));
  CHECK(up(1, 0) == doctest::Approx(0.25));
  CHECK(up(2, 0) == doctest::Approx(0.75));
  CHECK(up(3, 0) == doctest::Approx(1.0));

  for (int t = 0; t < 20; ++t) {
    const auto src = random_gray(g, 3 + static_cast<int>(g() % 40), 3 + static_cast<int>(g() % 40));
    const auto [lo, hi] = std::minmax_element(src.pixels().begin(), src.pixels().end());
    const auto out = resize_bilinear(src, 1 + static_cast<int>(g() % 80), 1 + static_cast<int>(g() % 80));
    for (double v : out.pixels()) {
      CHECK(v >= *lo - 1e-12);
      CHECK(v <= *hi + 1e-12);
    }
  }
}

TEST_CASE("resize matches the pixel-centre mapping") {
  std::mt19937_64 g(21);
  const auto src = random_gray(g, 9, 5);
  const int ow = 14, oh = 11;
  const auto out = resize_bilinear(src, ow, oh);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      const double sx = std::clamp((x + 0.5) * 9.0 / ow - 0.5, 0.0, 8.0);
      const double sy = std::clamp((y + 0.5) * 5.0 / oh - 0.5, 0.0, 4.0);
      const int x0 = static_cast<int>(sx), y0 = static_cast<int>(sy);
      const int x1 = std::min(x0 + 1, 8), y1 = std::min(y0 + 1, 4);
      const double fx = sx - x0, fy = sy - y0;
      const double want = (1 - fy) * ((1 - fx) * src(x0, y0) + fx * src(x1, y0)) +
                          fy * ((1 - fx) * src(x0, y1) + fx * src(x1, y1));
      CHECK(out(x, y) == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("extract_blocks") {
  std::mt19937_64 g(17);
  const auto img = random_gray(g, 120, 90);
  const std::vector<RoiRect> rois = {{10, 5, 50, 20, BlockId::Forehead},
                                     {40, 30, 16, 30, BlockId::Nose},
                                     {5, 50, 30, 30, BlockId::RightCheek},
                                     {70, 45, 25, 40, BlockId::LeftCheek}};
  const auto b = extract_blocks(img, rois);
  for (const auto* blk : {&b.forehead, &b.nose, &b.cheek}) {
    CHECK(blk->width() == kBlockSize);
    CHECK(blk->height() == kBlockSize);
  }
  CHECK(b.forehead == resize_bilinear(crop(img, rois[0]), 64, 64));
  CHECK(b.nose == resize_bilinear(crop(img, rois[1]), 64, 64));
  const auto r = resize_bilinear(crop(img, rois[2]), 64, 64);
  const auto l = resize_bilinear(crop(img, rois[3]), 64, 64);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) CHECK(b.cheek(x, y) == doctest::Approx((r(x, y) + l(x, y)) / 2).epsilon(1e-15));

  CHECK(extract_blocks(img, rois, CheekMode::RightOnly).cheek == r);
  CHECK(extract_blocks(img, rois, CheekMode::LeftOnly).cheek == l);

  auto same = rois;
  same[3] = {5, 50, 30, 30, BlockId::LeftCheek};
  CHECK(extract_blocks(img, same).cheek == r);

  const GrayImage flat(80, 80, 0.6);
  const auto fb = extract_blocks(flat, std::vector<RoiRect>{{0, 0, 10, 10, BlockId::Forehead},
                                                           {10, 10, 7, 30, BlockId::Nose},
                                                           {20, 20, 60, 60, BlockId::RightCheek},
                                                           {0, 40, 3, 3, BlockId::LeftCheek}});
  for (const auto* blk : {&fb.forehead, &fb.nose, &fb.cheek})
    for (double v : blk->pixels()) CHECK(v == doctest::Approx(0.6).epsilon(1e-15));

  auto dup = rois;
  dup[3].block = BlockId::RightCheek;
  CHECK_THROWS_AS(extract_blocks(img, dup), ManifestError);
  CHECK_THROWS_AS(extract_blocks(img, std::span(rois).first(3)), ManifestError);
  auto outside = rois;
  outside[0].x = 100;
  CHECK_THROWS_AS(extract_blocks(img, outside), BoundsError);
}

TEST_CASE("ROI manifest parsing") {
  const auto entries = parse_roi_manifest(R"({
    "a.png": [{"block":"F","x":0,"y":0,"w":4,"h":4},{"block":"N","x":1,"y":1,"w":2,"h":2},
              {"block":"R","x":0,"y":0,"w":2,"h":2},{"block":"L","x":2,"y":2,"w":2,"h":2}],
    "b.png": {"precropped": true}})");
  REQUIRE(entries.size() == 2);
  CHECK(entries[0].first == "a.png");
  CHECK(entries[0].second.rois.size() == 4);
  CHECK(entries[1].second.precropped);
  CHECK_THROWS_AS(parse_roi_manifest("[1,2]"), ManifestError);
  CHECK_THROWS_AS(parse_roi_manifest(R"({"a.png": [{"block":"Q","x":0,"y":0,"w":1,"h":1}]})"),
                  ManifestError);
  CHECK_THROWS_AS(parse_roi_manifest("{nope"), ManifestError);
}

TEST_CASE("blocks load from a full image and from pre-cropped files") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "fbtex_imaging_test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::mt19937_64 g(23);
  GrayImage img(40, 40);
  for (auto& v : img.pixels()) v = static_cast<double>(g() % 256) / 255.0;
  write_png(dir / "face.png", img);
  RoiEntry entry;
  entry.rois = {{0, 0, 20, 10, BlockId::Forehead},
                {15, 10, 10, 20, BlockId::Nose},
                {0, 20, 15, 15, BlockId::RightCheek},
                {25, 20, 15, 15, BlockId::LeftCheek}};
  const auto direct = load_facial_blocks(dir / "face.png", entry, CheekMode::Mean);
  CHECK(direct.forehead == resize_bilinear(crop(img, entry.rois[0]), 64, 64));

  for (const auto& r : entry.rois)
    write_png(dir / (std::string("face_") + block_letter(r.block) + ".png"), crop(img, r));
  const auto pre = load_facial_blocks(dir / "face.png", RoiEntry{true, {}}, CheekMode::Mean);
  CHECK(pre.forehead == direct.forehead);
  CHECK(pre.nose == direct.nose);
  CHECK(pre.cheek == direct.cheek);
  CHECK_THROWS_AS(load_facial_blocks(dir / "missing.png", RoiEntry{true, {}}, CheekMode::Mean), Error);
  fs::remove_all(dir);
}
