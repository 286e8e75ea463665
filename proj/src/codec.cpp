#include <zlib.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cctype>
#include <cstring>
#include <fstream>
#include <iterator>

#include "fbtex/error.hpp"
#include "fbtex/imaging.hpp"

namespace fbtex {
namespace {

constexpr std::array<std::uint8_t, 8> kPngSignature = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

std::uint32_t read_be32(std::span<const std::uint8_t> b, std::size_t off) {
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) |
         (std::uint32_t{b[off + 2]} << 8) | std::uint32_t{b[off + 3]};
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::uint8_t paeth(int a, int b, int c) {
  int p = a + b - c;
  int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return static_cast<std::uint8_t>(a);
  if (pb <= pc) return static_cast<std::uint8_t>(b);
  return static_cast<std::uint8_t>(c);
}

struct PngHeader {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  int bit_depth = 0;
  int color_type = 0;
  int interlace = 0;
};

int channels_for(int color_type) {
  switch (color_type) {
    case 0: return 1;  // gray
    case 2: return 3;  // rgb
    case 3: return 1;  // palette index
    case 4: return 2;  // gray + alpha
    case 6: return 4;  // rgba
    default: return 0;
  }
}

std::vector<std::uint8_t> inflate_all(std::span<const std::uint8_t> data, std::size_t expected,
                                      std::size_t idat_offset) {
  std::vector<std::uint8_t> out(expected);
  z_stream zs{};
  if (inflateInit(&zs) != Z_OK) throw DecodeError("zlib init failed", idat_offset);
  zs.next_in = const_cast<Bytef*>(data.data());
  zs.avail_in = static_cast<uInt>(data.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  int rc = inflate(&zs, Z_FINISH);
  std::size_t produced = zs.total_out;
  std::size_t consumed = zs.total_in;
  inflateEnd(&zs);
  if (rc != Z_STREAM_END || produced != expected) {
    throw DecodeError("corrupt or truncated image data (inflated " + std::to_string(produced) +
                          " of " + std::to_string(expected) + " bytes)",
                      idat_offset + consumed);
  }
  return out;
}

RgbImage decode_png(std::span<const std::uint8_t> bytes) {
  PngHeader hdr;
  bool have_header = false;
  bool have_end = false;
  std::vector<std::uint8_t> palette;
  std::vector<std::uint8_t> idat;
  std::size_t first_idat = 0;

  std::size_t off = kPngSignature.size();
  while (off < bytes.size() && !have_end) {
    if (bytes.size() - off < 12) throw DecodeError("truncated chunk header", off);
    std::uint32_t len = read_be32(bytes, off);
    if (len > bytes.size() - off - 12) throw DecodeError("chunk length exceeds file size", off);
    std::string type(reinterpret_cast<const char*>(&bytes[off + 4]), 4);
    auto body = bytes.subspan(off + 8, len);
    std::uint32_t want_crc = read_be32(bytes, off + 8 + len);
    std::uint32_t got_crc = static_cast<std::uint32_t>(
        crc32(crc32(0L, Z_NULL, 0), &bytes[off + 4], static_cast<uInt>(len + 4)));
    if (want_crc != got_crc) throw DecodeError("crc mismatch in " + type + " chunk", off + 8 + len);

    if (type == "IHDR") {
      if (len != 13) throw DecodeError("IHDR length must be 13", off);
      hdr.width = read_be32(body, 0);
      hdr.height = read_be32(body, 4);
      hdr.bit_depth = body[8];
      hdr.color_type = body[9];
      hdr.interlace = body[12];
      if (hdr.width == 0 || hdr.height == 0 || hdr.width > (1u << 24) || hdr.height > (1u << 24))
        throw DecodeError("invalid image dimensions", off + 8);
      if (channels_for(hdr.color_type) == 0)
        throw DecodeError("invalid color type " + std::to_string(hdr.color_type), off + 17);
      if (hdr.bit_depth != 8)
        throw UnsupportedFormatError("unsupported PNG bit depth " + std::to_string(hdr.bit_depth));
      if (hdr.interlace != 0) throw UnsupportedFormatError("interlaced PNG is not supported");
      have_header = true;
    } else if (!have_header) {
      throw DecodeError("first chunk must be IHDR", off);
    } else if (type == "PLTE") {
      if (len % 3 != 0 || len == 0) throw DecodeError("malformed palette", off);
      palette.assign(body.begin(), body.end());
    } else if (type == "IDAT") {
      if (idat.empty()) first_idat = off + 8;
      idat.insert(idat.end(), body.begin(), body.end());
    } else if (type == "IEND") {
      have_end = true;
    }
    off += 12 + len;
  }
  if (!have_header) throw DecodeError("missing IHDR chunk", off);
  if (idat.empty()) throw DecodeError("missing image data", off);
  if (!have_end) throw DecodeError("missing IEND chunk", off);
  if (hdr.color_type == 3 && palette.empty()) throw DecodeError("palette image without PLTE", off);

  const int ch = channels_for(hdr.color_type);
  const std::size_t stride = static_cast<std::size_t>(hdr.width) * ch;
  auto raw = inflate_all(idat, (stride + 1) * hdr.height, first_idat);

  std::vector<std::uint8_t> cur(stride), prev(stride, 0);
  RgbImage img(static_cast<int>(hdr.width), static_cast<int>(hdr.height));
  for (std::uint32_t y = 0; y < hdr.height; ++y) {
    const std::uint8_t* line = &raw[y * (stride + 1)];
    int filter = line[0];
    for (std::size_t i = 0; i < stride; ++i) {
      int x = line[1 + i];
      int a = i >= static_cast<std::size_t>(ch) ? cur[i - ch] : 0;
      int b = prev[i];
      int c = i >= static_cast<std::size_t>(ch) ? prev[i - ch] : 0;
      switch (filter) {
        case 0: break;
        case 1: x += a; break;
        case 2: x += b; break;
        case 3: x += (a + b) / 2; break;
        case 4: x += paeth(a, b, c); break;
        default:
          throw DecodeError("invalid filter type " + std::to_string(filter) + " on row " +
                                std::to_string(y),
                            first_idat);
      }
      cur[i] = static_cast<std::uint8_t>(x);
    }
    for (std::uint32_t x = 0; x < hdr.width; ++x) {
      std::uint8_t* px = img.at(static_cast<int>(x), static_cast<int>(y));
      const std::uint8_t* s = &cur[x * ch];
      switch (hdr.color_type) {
        case 0:
        case 4: px[0] = px[1] = px[2] = s[0]; break;
        case 2:
        case 6: std::copy_n(s, 3, px); break;
        case 3: {
          std::size_t idx = 3 * std::size_t{s[0]};
          if (idx + 3 > palette.size())
            throw DecodeError("palette index out of range", first_idat);
          std::copy_n(&palette[idx], 3, px);
          break;
        }
      }
    }
    std::swap(cur, prev);
  }
  return img;
}

// Netpbm tokenizer: whitespace and '#' comments between header fields.
class PnmReader {
 public:
  explicit PnmReader(std::span<const std::uint8_t> b) : bytes_(b) {}

  unsigned long next_uint() {
    skip_space();
    std::size_t start = pos_;
    unsigned long v = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_] - '0');
      if (v > (1ul << 30)) throw DecodeError("numeric field too large", start);
      ++pos_;
    }
    if (pos_ == start) {
      if (pos_ >= bytes_.size()) throw DecodeError("unexpected end of file", pos_);
      throw DecodeError("expected a decimal number", pos_);
    }
    return v;
  }

  void skip_single_space() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_]))
      throw DecodeError("expected whitespace after header", pos_);
    ++pos_;
  }

  std::size_t pos() const { return pos_; }
  void seek(std::size_t p) { pos_ = p; }

 private:
  void skip_space() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

RgbImage decode_pnm(std::span<const std::uint8_t> bytes) {
  const char kind = static_cast<char>(bytes[1]);
  const bool ascii = kind == '2' || kind == '3';
  const int ch = (kind == '2' || kind == '5') ? 1 : 3;

  PnmReader rd(bytes);
  rd.seek(2);
  auto w = rd.next_uint();
  auto h = rd.next_uint();
  std::size_t maxval_pos = rd.pos();
  auto maxval = rd.next_uint();
  if (w == 0 || h == 0) throw DecodeError("invalid image dimensions", 2);
  if (maxval == 0) throw DecodeError("maxval must be positive", maxval_pos);
  if (maxval > 255)
    throw UnsupportedFormatError("unsupported bit depth: maxval " + std::to_string(maxval));

  auto scale = [maxval](unsigned long v) -> std::uint8_t {
    if (maxval == 255) return static_cast<std::uint8_t>(v);
    return static_cast<std::uint8_t>(std::lround(v * 255.0 / maxval));
  };

  RgbImage img(static_cast<int>(w), static_cast<int>(h));
  const std::size_t count = static_cast<std::size_t>(w) * h * ch;
  std::vector<std::uint8_t> samples(count);
  if (ascii) {
    for (std::size_t i = 0; i < count; ++i) {
      std::size_t at = rd.pos();
      auto v = rd.next_uint();
      if (v > maxval) throw DecodeError("sample exceeds maxval", at);
      samples[i] = scale(v);
    }
  } else {
    rd.skip_single_space();
    std::size_t start = rd.pos();
    if (bytes.size() - start < count)
      throw DecodeError("truncated pixel data: need " + std::to_string(count) + " bytes, have " +
                            std::to_string(bytes.size() - start),
                        bytes.size());
    for (std::size_t i = 0; i < count; ++i) {
      std::uint8_t v = bytes[start + i];
      if (v > maxval) throw DecodeError("sample exceeds maxval", start + i);
      samples[i] = scale(v);
    }
  }
  for (std::size_t p = 0; p < static_cast<std::size_t>(w) * h; ++p) {
    for (int c = 0; c < 3; ++c) img.pixels[3 * p + c] = samples[p * ch + (ch == 1 ? 0 : c)];
  }
  return img;
}

std::vector<std::uint8_t> encode_png_raw(int width, int height, int color_type,
                                         std::span<const std::uint8_t> samples) {
  const int ch = channels_for(color_type);
  const std::size_t stride = static_cast<std::size_t>(width) * ch;
  std::vector<std::uint8_t> raw;
  raw.reserve((stride + 1) * height);
  for (int y = 0; y < height; ++y) {
    raw.push_back(0);
    auto row = samples.subspan(y * stride, stride);
    raw.insert(raw.end(), row.begin(), row.end());
  }
  uLongf zlen = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> z(zlen);
  if (compress2(z.data(), &zlen, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
    throw Error("zlib compression failed");
  z.resize(zlen);

  std::vector<std::uint8_t> out(kPngSignature.begin(), kPngSignature.end());
  auto chunk = [&out](const char* type, std::span<const std::uint8_t> body) {
    put_be32(out, static_cast<std::uint32_t>(body.size()));
    std::size_t type_at = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), body.begin(), body.end());
    put_be32(out, static_cast<std::uint32_t>(crc32(crc32(0L, Z_NULL, 0), &out[type_at],
                                                   static_cast<uInt>(body.size() + 4))));
  };
  std::vector<std::uint8_t> ihdr;
  put_be32(ihdr, static_cast<std::uint32_t>(width));
  put_be32(ihdr, static_cast<std::uint32_t>(height));
  ihdr.insert(ihdr.end(), {8, static_cast<std::uint8_t>(color_type), 0, 0, 0});
  chunk("IHDR", ihdr);
  chunk("IDAT", z);
  chunk("IEND", {});
  return out;
}

}  // namespace

RgbImage decode_image(std::span<const std::uint8_t> bytes) {
  if (bytes.size() >= kPngSignature.size() &&
      std::equal(kPngSignature.begin(), kPngSignature.end(), bytes.begin()))
    return decode_png(bytes);
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '2' || bytes[1] == '3' || bytes[1] == '5' || bytes[1] == '6'))
    return decode_pnm(bytes);
  throw UnsupportedFormatError("unrecognized image format (expected PNG, PGM or PPM)");
}

RgbImage read_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open image " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_image(bytes);
}

std::vector<std::uint8_t> encode_png(const RgbImage& img) {
  return encode_png_raw(img.width, img.height, 2, img.pixels);
}

std::vector<std::uint8_t> encode_png(const GrayImage& img) {
  std::vector<std::uint8_t> samples(img.pixels().size());
  std::transform(img.pixels().begin(), img.pixels().end(), samples.begin(), [](double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
  });
  return encode_png_raw(img.width(), img.height(), 0, samples);
}

void write_png(const std::filesystem::path& path, const GrayImage& img) {
  auto bytes = encode_png(img);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace fbtex
