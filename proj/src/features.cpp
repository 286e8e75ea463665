#include "fbtex/features.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "fbtex/error.hpp"

namespace fbtex {

TextureStats sample_stats(std::span<const double> values, TextureMode mode) {
  if (values.empty()) throw ShapeError("statistics of an empty response");
  const std::size_t n = values.size();
  std::vector<double> v(values.begin(), values.end());
  if (mode == TextureMode::Magnitude)
    for (double& x : v) x = std::fabs(x);

  TextureStats s;
  const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
  const double lo = *lo_it;
  const double range = *hi_it - lo;
  if (range == 0.0) {
    // exact constant: summation rounding must not leak into the higher moments
    s.mean = lo;
    return s;
  }

  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(n);

  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double x : v) {
    const double d = x - s.mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m2 /= static_cast<double>(n);
  m3 /= static_cast<double>(n);
  m4 /= static_cast<double>(n);

  s.variance = m2;
  s.std = std::sqrt(m2);
  if (m2 > 0.0) {  // can underflow for a vanishing range
    s.skewness = m3 / (m2 * s.std);
    s.kurtosis = m4 / (m2 * m2);
  }

  std::vector<std::size_t> hist(kEntropyBins, 0);
  for (double x : v) {
    const double t = (x - lo) / range;
    auto bin = static_cast<std::size_t>(t * kEntropyBins);
    hist[std::min<std::size_t>(bin, kEntropyBins - 1)]++;
  }
  for (std::size_t c : hist) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / static_cast<double>(n);
    s.entropy -= p * std::log2(p);
  }
  return s;
}

TextureStats response_stats(const ResponseImage& r, TextureMode mode) {
  return sample_stats(r.values, mode);
}

TextureStats mean_stats(std::span<const TextureStats> per_filter) {
  if (per_filter.empty()) throw ParameterError("filter bank is empty");
  std::array<double, 6> acc{};
  for (const auto& s : per_filter) {
    const auto a = s.as_array();
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += a[i];
  }
  for (double& x : acc) x /= static_cast<double>(per_filter.size());
  return TextureStats::from_array(acc);
}

TextureStats block_stat_features(const GrayImage& block, const FilterBank& bank,
                                 const TextureOptions& opts) {
  if (bank.empty()) throw ParameterError("filter bank is empty");
  std::vector<TextureStats> per;
  per.reserve(bank.size());
  if (opts.backend == ConvolutionBackend::Direct) {
    for (const auto& e : bank) per.push_back(response_stats(convolve(block, e.kernel, opts.padding), opts.mode));
  } else {
    FftConvolver conv(block.width(), block.height(), kMaxKernelRadius, opts.padding);
    auto image = conv.transform(block);
    for (const auto& e : bank)
      per.push_back(response_stats(conv.apply(*image, *conv.transform(e.kernel)), opts.mode));
  }
  return mean_stats(per);
}

}  // namespace fbtex
