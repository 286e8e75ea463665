#pragma once

#include <memory>
#include <numbers>
#include <span>
#include <string_view>
#include <vector>

#include "fbtex/imaging.hpp"

namespace fbtex {

/// Real (cosine) Gabor parameters. Orientation is kept in degrees so that
/// half-turn pairs (θ, θ+180°) reduce exactly and give bit-identical kernels.
struct GaborParams {
  double wavelength = 8.0;       // pixels
  double orientation_deg = 0.0;  // degrees
  double phase = 0.0;            // radians
  double aspect_ratio = 0.5;
  double bandwidth = 1.0;        // octaves

  double orientation() const noexcept { return orientation_deg * std::numbers::pi / 180.0; }

  /// Gaussian scale tied to wavelength through the half-response bandwidth.
  double sigma() const;

  /// Throws ParameterError on non-finite or non-positive λ, γ, b.
  void validate() const;

  bool operator==(const GaborParams&) const = default;
};

inline constexpr int kMaxKernelRadius = 31;

/// Square kernel of side 2·radius+1, row-major, centre at (radius, radius).
struct Kernel {
  int radius = 0;
  std::vector<double> weights;

  int side() const noexcept { return 2 * radius + 1; }
  /// Weight at offset (dx, dy) from the centre; dx is the column offset.
  double at(int dx, int dy) const {
    return weights[static_cast<std::size_t>(dy + radius) * side() + (dx + radius)];
  }

  bool operator==(const Kernel&) const = default;
};

Kernel make_kernel(const GaborParams& p);

/// Parameter grid of a bank: every wavelength crossed with every orientation.
struct BankConfig {
  std::vector<double> wavelengths;
  std::vector<double> orientations_deg;
  double phase = 0.0;
  double aspect_ratio = 0.5;
  double bandwidth = 1.0;

  bool operator==(const BankConfig&) const = default;
};

/// λ ∈ {4, 4√2, 8, 8√2, 16}, θ ∈ {0°, 45°, ..., 315°}, ψ = 0, γ = 0.5, b = 1.
BankConfig default_bank_config();

struct FilterBankEntry {
  GaborParams params;
  Kernel kernel;
};

/// Kernels in wavelength-major, orientation-minor order.
class FilterBank {
 public:
  FilterBank() = default;
  explicit FilterBank(std::vector<FilterBankEntry> entries) : entries_(std::move(entries)) {}

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const FilterBankEntry& operator[](std::size_t i) const { return entries_[i]; }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  int max_radius() const;

 private:
  std::vector<FilterBankEntry> entries_;
};

FilterBank make_filter_bank(const BankConfig& config);

enum class Padding { Mirror, Zero };
enum class TextureMode { Magnitude, Raw };
enum class ConvolutionBackend { Direct, Fft };

Padding parse_padding(std::string_view s);
TextureMode parse_texture_mode(std::string_view s);
ConvolutionBackend parse_backend(std::string_view s);
std::string_view to_string(Padding p);
std::string_view to_string(TextureMode m);
std::string_view to_string(ConvolutionBackend b);

struct TextureOptions {
  TextureMode mode = TextureMode::Magnitude;
  Padding padding = Padding::Mirror;
  ConvolutionBackend backend = ConvolutionBackend::Fft;
};

struct ResponseImage {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  double operator()(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

/// Reflect-without-repeat index into [0, n), periodic for offsets beyond one mirror.
int mirror_index(int i, int n);

/// Direct spatial convolution (kernel flipped), output the size of `im`.
/// This is the reference implementation every other backend is checked against.
ResponseImage convolve(const GrayImage& im, const Kernel& k, Padding padding = Padding::Mirror);

/// Frequency-domain convolution for a fixed image size, sharing one padded
/// image spectrum across many kernels. Kernels must have radius <= pad.
class FftConvolver {
 public:
  FftConvolver(int width, int height, int pad, Padding padding);
  ~FftConvolver();
  FftConvolver(const FftConvolver&) = delete;
  FftConvolver& operator=(const FftConvolver&) = delete;

  class Spectrum;

  std::shared_ptr<const Spectrum> transform(const GrayImage& im) const;
  std::shared_ptr<const Spectrum> transform(const Kernel& k) const;
  ResponseImage apply(const Spectrum& image, const Spectrum& kernel) const;

  ResponseImage convolve(const GrayImage& im, const Kernel& k) const;

  int pad() const noexcept { return pad_; }

 private:
  struct Plans;
  int width_;
  int height_;
  int pad_;
  Padding padding_;
  std::unique_ptr<Plans> plans_;
};

/// Convolves with the selected backend.
ResponseImage convolve(const GrayImage& im, const Kernel& k, const TextureOptions& opts);

/// Per-filter texture value: mean of |R| (magnitude) or of R (raw).
double texture_value(const ResponseImage& r, TextureMode mode);

/// Mean of the per-filter texture values over the bank.
double block_texture_value(const GrayImage& block, const FilterBank& bank,
                           const TextureOptions& opts = {});

}  // namespace fbtex
