#pragma once

#include <array>
#include <span>

#include "fbtex/gabor.hpp"

namespace fbtex {

/// Six texture statistics of one response (or their bank average).
/// Entropy is in bits over a 256-bin min-max normalized histogram;
/// kurtosis is raw (normal = 3), not excess.
struct TextureStats {
  double mean = 0.0;
  double variance = 0.0;
  double std = 0.0;
  double skewness = 0.0;
  double kurtosis = 0.0;
  double entropy = 0.0;

  /// Values in the canonical order mean, variance, std, skewness, kurtosis, entropy.
  std::array<double, 6> as_array() const { return {mean, variance, std, skewness, kurtosis, entropy}; }
  static TextureStats from_array(const std::array<double, 6>& a) {
    return {a[0], a[1], a[2], a[3], a[4], a[5]};
  }

  bool operator==(const TextureStats&) const = default;
};

inline constexpr int kEntropyBins = 256;

/// Population moments of |values| (magnitude) or values (raw).
TextureStats sample_stats(std::span<const double> values, TextureMode mode);
TextureStats response_stats(const ResponseImage& r, TextureMode mode = TextureMode::Magnitude);

/// Bank average of the per-filter statistics, accumulated in bank order.
TextureStats mean_stats(std::span<const TextureStats> per_filter);

TextureStats block_stat_features(const GrayImage& block, const FilterBank& bank,
                                 const TextureOptions& opts = {});

}  // namespace fbtex
