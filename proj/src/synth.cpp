#include "fbtex/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "fbtex/error.hpp"

namespace fbtex {

void SynthClassSpec::validate() const {
  if (!std::isfinite(wavelength) || wavelength < 2.0)
    throw ParameterError("grating wavelength must be >= 2 pixels");
  if (!std::isfinite(orientation) || !std::isfinite(phase_jitter) || phase_jitter < 0.0)
    throw ParameterError("grating orientation and phase jitter must be finite, jitter >= 0");
  if (!(contrast >= 0.0 && contrast <= 1.0)) throw ParameterError("contrast must lie in [0, 1]");
  if (!(noise_std >= 0.0 && noise_std <= 1.0)) throw ParameterError("noise std must lie in [0, 1]");
  if (0.5 * contrast + 3.0 * noise_std > 1.0)
    throw ParameterError("0.5·contrast + 3·noise_std must not exceed 1");
}

GrayImage make_grating(const SynthClassSpec& spec, double phase, Rng* noise_rng, int size) {
  spec.validate();
  const double c = std::cos(spec.orientation);
  const double s = std::sin(spec.orientation);
  const double k = 2.0 * std::numbers::pi / spec.wavelength;
  GrayImage img(size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      double v = 0.5 + 0.5 * spec.contrast * std::cos(k * (x * c + y * s) + phase);
      if (noise_rng && spec.noise_std > 0.0) v += spec.noise_std * noise_rng->normal();
      img(x, y) = std::clamp(v, 0.0, 1.0);
    }
  }
  return img;
}

std::vector<LabeledBlocks> generate_dataset(int n_per_class, const SynthClassSpec& dm,
                                            const SynthClassSpec& healthy, std::uint64_t seed) {
  if (n_per_class < 2) throw ParameterError("need at least 2 samples per class");
  dm.validate();
  healthy.validate();
  std::vector<LabeledBlocks> out;
  out.reserve(2 * static_cast<std::size_t>(n_per_class));
  for (int i = 0; i < 2 * n_per_class; ++i) {
    const bool is_dm = i < n_per_class;
    const SynthClassSpec& spec = is_dm ? dm : healthy;
    Rng rng(splitmix64(seed ^ static_cast<std::uint64_t>(i)));
    auto block = [&] { return make_grating(spec, rng.uniform01() * spec.phase_jitter, &rng); };
    LabeledBlocks lb{{}, is_dm ? Label::DM : Label::Healthy};
    lb.blocks.forehead = block();
    lb.blocks.nose = block();
    lb.blocks.cheek = block();
    out.push_back(std::move(lb));
  }
  return out;
}

SynthClassSpec default_dm_spec(double noise_std) {
  SynthClassSpec s;
  s.wavelength = 6.0;
  s.noise_std = noise_std;
  return s;
}

SynthClassSpec default_healthy_spec(double noise_std) {
  SynthClassSpec s;
  s.wavelength = 14.0;
  s.noise_std = noise_std;
  return s;
}

double default_camera_noise(Camera c) {
  switch (c) {
    case Camera::Mp12: return 0.05;
    case Camera::Mp7: return 0.08;
    case Camera::P720: return 0.12;
  }
  return 0.05;
}

Dataset generate_camera_dataset(int n_per_class, std::span<const Camera> cameras,
                                std::uint64_t seed) {
  Dataset out;
  for (Camera cam : cameras) {
    const double noise = default_camera_noise(cam);
    const auto samples =
        generate_dataset(n_per_class, default_dm_spec(noise), default_healthy_spec(noise),
                         derive_seed(seed, {static_cast<std::uint64_t>(cam) + 1}));
    for (std::size_t i = 0; i < samples.size(); ++i) {
      char id[16];
      std::snprintf(id, sizeof id, "s%03zu", i);
      out.push_back({id, cam, samples[i].label, samples[i].blocks});
    }
  }
  return out;
}

std::filesystem::path write_synthetic_dataset(const Dataset& dataset,
                                              const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "images");
  nlohmann::ordered_json rois = nlohmann::ordered_json::object();
  const auto manifest = dir / "manifest.csv";
  std::ofstream csv(manifest);
  if (!csv) throw Error("cannot write " + manifest.string());
  csv << "image_path,subject_id,camera,label\n";
  for (const auto& s : dataset) {
    const std::string stem = s.subject_id + "_" + std::string(to_string(s.camera));
    const std::string rel = "images/" + stem + ".png";
    write_png(dir / "images" / (stem + "_F.png"), s.blocks.forehead);
    write_png(dir / "images" / (stem + "_N.png"), s.blocks.nose);
    write_png(dir / "images" / (stem + "_R.png"), s.blocks.cheek);
    write_png(dir / "images" / (stem + "_L.png"), s.blocks.cheek);
    rois[rel] = {{"precropped", true}};
    csv << rel << ',' << s.subject_id << ',' << to_string(s.camera) << ',' << to_string(s.label)
        << '\n';
  }
  std::ofstream rj(dir / "rois.json");
  if (!rj) throw Error("cannot write " + (dir / "rois.json").string());
  rj << rois.dump(2) << '\n';
  return manifest;
}

}  // namespace fbtex
