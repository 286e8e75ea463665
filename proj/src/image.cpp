#include "fbtex/imaging.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "fbtex/error.hpp"

namespace fbtex {

RgbImage::RgbImage(int w, int h) : width(w), height(h) {
  if (w < 1 || h < 1) throw ParameterError("image dimensions must be positive");
  pixels.assign(3 * static_cast<std::size_t>(w) * h, 0);
}

GrayImage::GrayImage(int width, int height, double fill) : width_(width), height_(height) {
  if (width < 1 || height < 1) throw ParameterError("image dimensions must be positive");
  pixels_.assign(static_cast<std::size_t>(width) * height, fill);
}

GrayImage::GrayImage(int width, int height, std::vector<double> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  if (width < 1 || height < 1) throw ParameterError("image dimensions must be positive");
  if (pixels_.size() != static_cast<std::size_t>(width) * height)
    throw ShapeError("pixel count does not match " + std::to_string(width) + "x" +
                     std::to_string(height));
}

char block_letter(BlockId id) {
  switch (id) {
    case BlockId::Forehead: return 'F';
    case BlockId::Nose: return 'N';
    case BlockId::RightCheek: return 'R';
    case BlockId::LeftCheek: return 'L';
  }
  return '?';
}

BlockId parse_block_id(std::string_view letter) {
  if (letter == "F") return BlockId::Forehead;
  if (letter == "N") return BlockId::Nose;
  if (letter == "R") return BlockId::RightCheek;
  if (letter == "L") return BlockId::LeftCheek;
  throw ManifestError("unknown block id '" + std::string(letter) + "'");
}

CheekMode parse_cheek_mode(std::string_view name) {
  if (name == "mean") return CheekMode::Mean;
  if (name == "right") return CheekMode::RightOnly;
  if (name == "left") return CheekMode::LeftOnly;
  throw ConfigError("unknown cheek mode '" + std::string(name) + "'");
}

std::string_view to_string(CheekMode mode) {
  switch (mode) {
    case CheekMode::Mean: return "mean";
    case CheekMode::RightOnly: return "right";
    case CheekMode::LeftOnly: return "left";
  }
  return "mean";
}

GrayImage to_grayscale(const RgbImage& img) {
  GrayImage out(img.width, img.height);
  auto dst = out.pixels();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    const std::uint8_t* p = &img.pixels[3 * i];
    // gray pixels skip the weighted sum so they round-trip exactly
    double v = p[0] == p[1] && p[1] == p[2] ? p[0] / 255.0
                                            : (0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]) / 255.0;
    dst[i] = std::clamp(v, 0.0, 1.0);
  }
  return out;
}

GrayImage crop(const GrayImage& img, const RoiRect& roi) {
  if (roi.w < 1 || roi.h < 1 || roi.x < 0 || roi.y < 0 || roi.x + roi.w > img.width() ||
      roi.y + roi.h > img.height()) {
    throw BoundsError("roi " + std::string(1, block_letter(roi.block)) + " (x=" +
                      std::to_string(roi.x) + ", y=" + std::to_string(roi.y) +
                      ", w=" + std::to_string(roi.w) + ", h=" + std::to_string(roi.h) +
                      ") exceeds image " + std::to_string(img.width()) + "x" +
                      std::to_string(img.height()));
  }
  GrayImage out(roi.w, roi.h);
  for (int y = 0; y < roi.h; ++y)
    for (int x = 0; x < roi.w; ++x) out(x, y) = img(roi.x + x, roi.y + y);
  return out;
}

namespace {

struct Tap {
  int lo;
  int hi;
  double frac;
};

std::vector<Tap> bilinear_taps(int in, int out) {
  std::vector<Tap> taps(out);
  const double scale = static_cast<double>(in) / out;
  for (int d = 0; d < out; ++d) {
    double s = std::clamp((d + 0.5) * scale - 0.5, 0.0, static_cast<double>(in - 1));
    int lo = static_cast<int>(std::floor(s));
    taps[d] = {lo, std::min(lo + 1, in - 1), s - lo};
  }
  return taps;
}

}  // namespace

GrayImage resize_bilinear(const GrayImage& img, int out_w, int out_h) {
  if (out_w < 1 || out_h < 1) throw ParameterError("resize target must be at least 1x1");
  if (out_w == img.width() && out_h == img.height()) return img;

  const auto xs = bilinear_taps(img.width(), out_w);
  const auto ys = bilinear_taps(img.height(), out_h);
  GrayImage out(out_w, out_h);
  for (int y = 0; y < out_h; ++y) {
    const Tap& ty = ys[y];
    for (int x = 0; x < out_w; ++x) {
      const Tap& tx = xs[x];
      double top = img(tx.lo, ty.lo) * (1.0 - tx.frac) + img(tx.hi, ty.lo) * tx.frac;
      double bot = img(tx.lo, ty.hi) * (1.0 - tx.frac) + img(tx.hi, ty.hi) * tx.frac;
      out(x, y) = top * (1.0 - ty.frac) + bot * ty.frac;
    }
  }
  return out;
}

FacialBlocks blocks_from_crops(const GrayImage& forehead, const GrayImage& nose,
                               const GrayImage& right, const GrayImage& left, CheekMode cheek) {
  FacialBlocks b;
  b.forehead = resize_bilinear(forehead, kBlockSize, kBlockSize);
  b.nose = resize_bilinear(nose, kBlockSize, kBlockSize);
  switch (cheek) {
    case CheekMode::RightOnly:
      b.cheek = resize_bilinear(right, kBlockSize, kBlockSize);
      break;
    case CheekMode::LeftOnly:
      b.cheek = resize_bilinear(left, kBlockSize, kBlockSize);
      break;
    case CheekMode::Mean: {
      GrayImage r = resize_bilinear(right, kBlockSize, kBlockSize);
      GrayImage l = resize_bilinear(left, kBlockSize, kBlockSize);
      auto rp = r.pixels();
      auto lp = l.pixels();
      for (std::size_t i = 0; i < rp.size(); ++i) rp[i] = (rp[i] + lp[i]) / 2.0;
      b.cheek = std::move(r);
      break;
    }
  }
  return b;
}

FacialBlocks extract_blocks(const GrayImage& img, std::span<const RoiRect> rois, CheekMode cheek) {
  std::array<const RoiRect*, 4> by_id{};
  for (const RoiRect& r : rois) {
    auto& slot = by_id[static_cast<int>(r.block)];
    if (slot) throw ManifestError(std::string("duplicate roi for block ") + block_letter(r.block));
    slot = &r;
  }
  for (int i = 0; i < 4; ++i)
    if (!by_id[i])
      throw ManifestError(std::string("missing roi for block ") +
                          block_letter(static_cast<BlockId>(i)));

  return blocks_from_crops(crop(img, *by_id[0]), crop(img, *by_id[1]), crop(img, *by_id[2]),
                           crop(img, *by_id[3]), cheek);
}

}  // namespace fbtex
