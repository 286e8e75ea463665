#pragma once

#include <cstdint>
#include <filesystem>
#include <numbers>
#include <span>
#include <vector>

#include "fbtex/dataset.hpp"
#include "fbtex/rng.hpp"

namespace fbtex {

/// Sinusoidal grating plus clamped Gaussian noise describing one class.
struct SynthClassSpec {
  double wavelength = 8.0;   // pixels, >= 2
  double orientation = 0.0;  // radians
  double contrast = 0.5;     // peak-to-peak fraction of the [0,1] range
  double noise_std = 0.05;
  double phase_jitter = 2.0 * std::numbers::pi;  // phase ~ U[0, jitter)

  void validate() const;
};

/// value(x, y) = clamp(0.5 + 0.5·contrast·cos(2π(x cosθ + y sinθ)/λ + φ) + noise, 0, 1)
GrayImage make_grating(const SynthClassSpec& spec, double phase, Rng* noise_rng,
                       int size = kBlockSize);

struct LabeledBlocks {
  FacialBlocks blocks;
  Label label;
};

/// n_per_class DM samples followed by n_per_class healthy ones. Sample i draws
/// from its own generator seeded by seed ^ i.
std::vector<LabeledBlocks> generate_dataset(int n_per_class, const SynthClassSpec& dm,
                                            const SynthClassSpec& healthy, std::uint64_t seed);

/// Default class specs (λ 6 vs 14) with a per-camera noise level, shared
/// subject ids across cameras.
SynthClassSpec default_dm_spec(double noise_std = 0.05);
SynthClassSpec default_healthy_spec(double noise_std = 0.05);
double default_camera_noise(Camera c);

Dataset generate_camera_dataset(int n_per_class, std::span<const Camera> cameras,
                                std::uint64_t seed);

/// Writes `<subject>_<camera>_{F,N,R,L}.png` plus `manifest.csv` and a
/// pre-cropped `rois.json` under `dir`. Returns the manifest path.
std::filesystem::path write_synthetic_dataset(const Dataset& dataset,
                                              const std::filesystem::path& dir);

}  // namespace fbtex
