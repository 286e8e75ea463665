#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fbtex {

/// Interleaved 8-bit RGB raster, row-major.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // 3 * width * height

  RgbImage() = default;
  RgbImage(int w, int h);

  std::uint8_t* at(int x, int y) { return &pixels[3 * (static_cast<std::size_t>(y) * width + x)]; }
  const std::uint8_t* at(int x, int y) const {
    return &pixels[3 * (static_cast<std::size_t>(y) * width + x)];
  }
};

/// Single-channel raster with luminance in [0, 1].
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(int width, int height, double fill = 0.0);
  GrayImage(int width, int height, std::vector<double> pixels);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool empty() const noexcept { return pixels_.empty(); }

  double operator()(int x, int y) const { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
  double& operator()(int x, int y) { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }

  std::span<const double> pixels() const noexcept { return pixels_; }
  std::span<double> pixels() noexcept { return pixels_; }

  bool operator==(const GrayImage&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> pixels_;
};

enum class BlockId { Forehead, Nose, RightCheek, LeftCheek };

char block_letter(BlockId id);
BlockId parse_block_id(std::string_view letter);

struct RoiRect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;
  BlockId block = BlockId::Forehead;
};

inline constexpr int kBlockSize = 64;

/// The three classified regions of one sample, each kBlockSize square.
struct FacialBlocks {
  GrayImage forehead;
  GrayImage nose;
  GrayImage cheek;
};

/// How the right and left cheek crops reduce to the single cheek block.
enum class CheekMode { Mean, RightOnly, LeftOnly };

CheekMode parse_cheek_mode(std::string_view name);
std::string_view to_string(CheekMode mode);

// Codecs. PNG (8-bit, non-interlaced) and binary/ASCII PGM/PPM are decoded;
// the format is sniffed from the magic bytes.
RgbImage decode_image(std::span<const std::uint8_t> bytes);
RgbImage read_image(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_png(const RgbImage& img);
/// Writes an 8-bit grayscale PNG, quantizing [0,1] to 0..255 with rounding.
std::vector<std::uint8_t> encode_png(const GrayImage& img);
void write_png(const std::filesystem::path& path, const GrayImage& img);

/// BT.601 luma scaled to [0,1].
GrayImage to_grayscale(const RgbImage& img);

GrayImage crop(const GrayImage& img, const RoiRect& roi);

/// Bilinear resampling with pixel-center alignment and edge clamping.
GrayImage resize_bilinear(const GrayImage& img, int out_w, int out_h);

/// Crops the F, N, R and L regions, resizes each to kBlockSize and folds the
/// two cheeks into one block according to `cheek`.
FacialBlocks extract_blocks(const GrayImage& img, std::span<const RoiRect> rois,
                            CheekMode cheek = CheekMode::Mean);

/// Combines already-cropped region images (any size) into FacialBlocks.
FacialBlocks blocks_from_crops(const GrayImage& forehead, const GrayImage& nose,
                               const GrayImage& right, const GrayImage& left, CheekMode cheek);

/// One entry of the ROI manifest: explicit rectangles or pre-cropped files.
struct RoiEntry {
  bool precropped = false;
  std::vector<RoiRect> rois;
};

/// Parses the ROI manifest JSON text: image path -> RoiEntry.
std::vector<std::pair<std::string, RoiEntry>> parse_roi_manifest(std::string_view json_text);

/// Loads the blocks of one image following its ROI entry. In pre-cropped mode
/// `<stem>_F.png`, `_N.png`, `_R.png`, `_L.png` beside `image_path` are read.
FacialBlocks load_facial_blocks(const std::filesystem::path& image_path, const RoiEntry& entry,
                                CheekMode cheek);

}  // namespace fbtex
