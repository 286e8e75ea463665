#include "fbtex/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "fbtex/error.hpp"
#include "fbtex/eval.hpp"
#include "fbtex/parallel.hpp"

namespace fbtex {

using nlohmann::json;

MethodId parse_method(std::string_view s) {
  if (s == "m1" || s == "M1") return MethodId::M1;
  if (s == "m2" || s == "M2") return MethodId::M2;
  if (s == "m3" || s == "M3") return MethodId::M3;
  if (s == "m4" || s == "M4") return MethodId::M4;
  throw ConfigError("unknown method '" + std::string(s) + "' (expected m1..m4)");
}

std::string_view to_string(MethodId m) {
  switch (m) {
    case MethodId::M1: return "m1";
    case MethodId::M2: return "m2";
    case MethodId::M3: return "m3";
    case MethodId::M4: return "m4";
  }
  return "m1";
}

std::string_view to_string(Region r) {
  switch (r) {
    case Region::Forehead: return "forehead";
    case Region::Cheek: return "cheek";
    case Region::Nose: return "nose";
  }
  return "forehead";
}

const GrayImage& region_block(const FacialBlocks& blocks, Region r) {
  switch (r) {
    case Region::Forehead: return blocks.forehead;
    case Region::Cheek: return blocks.cheek;
    case Region::Nose: return blocks.nose;
  }
  return blocks.forehead;
}

BankAssignment BankAssignment::uniform(const BankConfig& config) {
  RegionBank rb{config, make_filter_bank(config)};
  return {rb, rb, rb};
}

BankAssignment BankAssignment::per_region(const BankConfig& forehead, const BankConfig& cheek,
                                          const BankConfig& nose) {
  return {{forehead, make_filter_bank(forehead)},
          {cheek, make_filter_bank(cheek)},
          {nose, make_filter_bank(nose)}};
}

bool BankAssignment::is_uniform() const {
  return forehead.config == cheek.config && cheek.config == nose.config;
}

const RegionBank& BankAssignment::operator[](Region r) const {
  switch (r) {
    case Region::Forehead: return forehead;
    case Region::Cheek: return cheek;
    case Region::Nose: return nose;
  }
  return forehead;
}

FeatureVector assemble_features(const FacialBlocks& blocks, const BankAssignment& assignment,
                                MethodId method, const TextureOptions& opts) {
  if (!per_block_banks(method) && !assignment.is_uniform())
    throw ConfigError(std::string(to_string(method)) + " requires the same bank for every block");
  FeatureVector fv{method, {}};
  fv.values.reserve(feature_length(method));
  for (Region r : kRegions) {
    const GrayImage& block = region_block(blocks, r);
    const FilterBank& bank = assignment[r].bank;
    if (uses_stats(method)) {
      const auto s = block_stat_features(block, bank, opts).as_array();
      fv.values.insert(fv.values.end(), s.begin(), s.end());
    } else {
      fv.values.push_back(block_texture_value(block, bank, opts));
    }
  }
  return fv;
}

std::vector<BankConfig> make_selection_grid(const SelectionGridSpec& spec, const BankConfig& base) {
  if (!(spec.ladder_min > 0.0) || spec.ladder_max < spec.ladder_min || spec.window < 1 ||
      spec.orientation_count < 1 || spec.orientation_offsets_deg.empty())
    throw ConfigError("invalid selection grid specification");

  // Even steps are exact powers of two times the start, odd steps add one √2.
  std::vector<double> ladder;
  for (int i = 0;; ++i) {
    double v = std::ldexp(spec.ladder_min, i / 2);
    if (i % 2 == 1) v *= std::numbers::sqrt2;
    if (v > spec.ladder_max * (1.0 + 1e-12)) break;
    ladder.push_back(v);
  }
  if (static_cast<int>(ladder.size()) < spec.window)
    throw ConfigError("selection ladder shorter than the wavelength window");

  std::vector<BankConfig> grid;
  for (std::size_t start = 0; start + spec.window <= ladder.size(); ++start) {
    for (double offset : spec.orientation_offsets_deg) {
      BankConfig c = base;
      c.wavelengths.assign(ladder.begin() + static_cast<std::ptrdiff_t>(start),
                           ladder.begin() + static_cast<std::ptrdiff_t>(start) + spec.window);
      c.orientations_deg.clear();
      for (int j = 0; j < spec.orientation_count; ++j)
        c.orientations_deg.push_back(offset + spec.orientation_step_deg * j);
      grid.push_back(std::move(c));
    }
  }
  return grid;
}

// ---- kernel statistics table ----------------------------------------------

KernelStatsTable::ParamKey KernelStatsTable::key_of(const GaborParams& p) {
  return {p.wavelength, p.orientation_deg, p.phase, p.aspect_ratio, p.bandwidth};
}

KernelStatsTable::KernelStatsTable(std::span<const GrayImage* const> images,
                                   std::span<const BankConfig> banks, const TextureOptions& opts) {
  std::vector<Kernel> kernels;
  std::map<std::vector<double>, std::size_t> by_weights;
  for (const BankConfig& bank : banks) {
    for (const auto& e : make_filter_bank(bank)) {
      const ParamKey key = key_of(e.params);
      if (slot_of_.count(key)) continue;
      auto [it, inserted] = by_weights.emplace(e.kernel.weights, kernels.size());
      if (inserted) {
        kernels.push_back(e.kernel);
        slot_params_.push_back(e.params);
      }
      slot_of_[key] = it->second;
    }
  }

  stats_.assign(images.size(), {});
  if (images.empty()) return;

  if (opts.backend == ConvolutionBackend::Direct) {
    parallel_for(images.size(), [&](std::size_t i) {
      auto& row = stats_[i];
      for (const Kernel& k : kernels)
        row.push_back(response_stats(convolve(*images[i], k, opts.padding), opts.mode));
    });
    return;
  }

  // One convolver and one set of kernel spectra per distinct image size.
  std::map<std::pair<int, int>, std::size_t> geometry;
  std::vector<std::unique_ptr<FftConvolver>> convolvers;
  std::vector<std::vector<std::shared_ptr<const FftConvolver::Spectrum>>> spectra;
  std::vector<std::size_t> geometry_of(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto dims = std::pair{images[i]->width(), images[i]->height()};
    auto [it, inserted] = geometry.emplace(dims, convolvers.size());
    if (inserted) {
      convolvers.push_back(
          std::make_unique<FftConvolver>(dims.first, dims.second, kMaxKernelRadius, opts.padding));
      spectra.emplace_back();
      for (const Kernel& k : kernels) spectra.back().push_back(convolvers.back()->transform(k));
    }
    geometry_of[i] = it->second;
  }
  parallel_for(images.size(), [&](std::size_t i) {
    const FftConvolver& conv = *convolvers[geometry_of[i]];
    const auto image = conv.transform(*images[i]);
    auto& row = stats_[i];
    row.reserve(kernels.size());
    for (const auto& ks : spectra[geometry_of[i]])
      row.push_back(response_stats(conv.apply(*image, *ks), opts.mode));
  });
}

std::vector<std::size_t> KernelStatsTable::slots_for(const BankConfig& bank) const {
  if (bank.wavelengths.empty() || bank.orientations_deg.empty())
    throw ParameterError("filter bank is empty");
  std::vector<std::size_t> slots;
  slots.reserve(bank.wavelengths.size() * bank.orientations_deg.size());
  for (double lambda : bank.wavelengths) {
    for (double theta : bank.orientations_deg) {
      GaborParams p{lambda, theta, bank.phase, bank.aspect_ratio, bank.bandwidth};
      auto it = slot_of_.find(key_of(p));
      if (it == slot_of_.end())
        throw ConfigError("kernel (wavelength " + std::to_string(lambda) + ", orientation " +
                          std::to_string(theta) + ") is not in the feature table");
      slots.push_back(it->second);
    }
  }
  return slots;
}

TextureStats KernelStatsTable::bank_stats(std::size_t image, const BankConfig& bank) const {
  const auto slots = slots_for(bank);
  std::vector<TextureStats> per;
  per.reserve(slots.size());
  for (std::size_t s : slots) per.push_back(stats_.at(image)[s]);
  return mean_stats(per);
}

double KernelStatsTable::bank_texture(std::size_t image, const BankConfig& bank) const {
  const auto slots = slots_for(bank);
  double sum = 0.0;
  for (std::size_t s : slots) sum += stats_.at(image)[s].mean;
  return sum / static_cast<double>(slots.size());
}

json KernelStatsTable::to_json() const {
  json kernels = json::array();
  for (const auto& [key, slot] : slot_of_) {
    const auto& [lambda, theta, phase, gamma, bw] = key;
    kernels.push_back({{"wavelength", lambda},
                       {"orientation_deg", theta},
                       {"phase", phase},
                       {"aspect_ratio", gamma},
                       {"bandwidth", bw},
                       {"slot", slot}});
  }
  json stats = json::array();
  for (const auto& row : stats_) {
    json r = json::array();
    for (const auto& s : row) r.push_back(s.as_array());
    stats.push_back(std::move(r));
  }
  return {{"kernels", std::move(kernels)}, {"slots", slot_params_.size()}, {"stats", std::move(stats)}};
}

KernelStatsTable KernelStatsTable::from_json(const json& j) {
  KernelStatsTable t;
  try {
    const auto slots = j.at("slots").get<std::size_t>();
    t.slot_params_.resize(slots);
    for (const auto& k : j.at("kernels")) {
      GaborParams p{k.at("wavelength").get<double>(), k.at("orientation_deg").get<double>(),
                    k.at("phase").get<double>(), k.at("aspect_ratio").get<double>(),
                    k.at("bandwidth").get<double>()};
      const auto slot = k.at("slot").get<std::size_t>();
      if (slot >= slots) throw ConfigError("kernel slot out of range in feature table");
      t.slot_of_[key_of(p)] = slot;
      t.slot_params_[slot] = p;
    }
    for (const auto& row : j.at("stats")) {
      std::vector<TextureStats> r;
      for (const auto& s : row) r.push_back(TextureStats::from_array(s.get<std::array<double, 6>>()));
      if (r.size() != slots) throw ConfigError("feature table row has wrong slot count");
      t.stats_.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed feature table: ") + e.what());
  }
  return t;
}

// ---- per-block bank selection ---------------------------------------------

BankSelection select_bank_by_feature(
    const std::function<double(std::size_t, std::size_t)>& feature, std::span<const Label> labels,
    std::span<const BankConfig> grid, const ClassifierSpec& classifier, std::uint64_t split_seed,
    double train_ratio) {
  if (grid.empty()) throw ConfigError("bank selection grid is empty");
  const auto dm = std::count(labels.begin(), labels.end(), Label::DM);
  const auto healthy = static_cast<std::ptrdiff_t>(labels.size()) - dm;
  if (dm == 0 || healthy == 0) throw DatasetError("bank selection needs samples of both classes");

  const Split split = stratified_split(labels, train_ratio, split_seed);
  std::vector<Label> train_labels, test_labels;
  for (auto i : split.train) train_labels.push_back(labels[i]);
  for (auto i : split.test) test_labels.push_back(labels[i]);

  BankSelection best;
  best.candidate_accuracy.resize(grid.size());
  double best_acc = -1.0;
  for (std::size_t c = 0; c < grid.size(); ++c) {
    FeatureMatrix xtr, xte;
    for (auto i : split.train) xtr.push_back({feature(i, c)});
    for (auto i : split.test) xte.push_back({feature(i, c)});
    const auto model = train_classifier(classifier, xtr, train_labels, split_seed);
    std::vector<Label> pred;
    for (const auto& x : xte) pred.push_back(model.predict(x));
    const double acc = compute_metrics(confusion(test_labels, pred)).accuracy;
    best.candidate_accuracy[c] = acc;
    if (acc > best_acc) {
      best_acc = acc;
      best.index = c;
    }
  }
  best.config = grid[best.index];
  best.accuracy = best_acc;
  return best;
}

BankSelection select_block_bank(std::span<const GrayImage> blocks, std::span<const Label> labels,
                                std::span<const BankConfig> grid, const ClassifierSpec& classifier,
                                std::uint64_t split_seed, const TextureOptions& opts) {
  if (blocks.size() != labels.size()) throw ShapeError("block count does not match label count");
  std::vector<const GrayImage*> images;
  for (const auto& b : blocks) images.push_back(&b);
  const KernelStatsTable table(images, grid, opts);
  return select_bank_by_feature(
      [&](std::size_t sample, std::size_t c) { return table.bank_texture(sample, grid[c]); },
      labels, grid, classifier, split_seed);
}

json bank_config_to_json(const BankConfig& c) {
  return {{"wavelengths", c.wavelengths},
          {"orientations_deg", c.orientations_deg},
          {"phase", c.phase},
          {"aspect_ratio", c.aspect_ratio},
          {"bandwidth", c.bandwidth}};
}

BankConfig bank_config_from_json(const json& j) {
  BankConfig c;
  c.wavelengths = j.at("wavelengths").get<std::vector<double>>();
  c.orientations_deg = j.at("orientations_deg").get<std::vector<double>>();
  c.phase = j.at("phase").get<double>();
  c.aspect_ratio = j.at("aspect_ratio").get<double>();
  c.bandwidth = j.at("bandwidth").get<double>();
  return c;
}

}  // namespace fbtex
