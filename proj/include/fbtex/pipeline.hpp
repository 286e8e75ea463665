#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string_view>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "fbtex/classify.hpp"
#include "fbtex/features.hpp"
#include "fbtex/gabor.hpp"
#include "fbtex/imaging.hpp"

namespace fbtex {

/// M1/M2 share one bank across blocks, M3/M4 select one per block.
/// M1/M3 emit one texture value per block, M2/M4 the six statistics.
enum class MethodId { M1, M2, M3, M4 };

inline constexpr std::array<MethodId, 4> kAllMethods = {MethodId::M1, MethodId::M2, MethodId::M3,
                                                        MethodId::M4};

MethodId parse_method(std::string_view s);
std::string_view to_string(MethodId m);
inline bool uses_stats(MethodId m) { return m == MethodId::M2 || m == MethodId::M4; }
inline bool per_block_banks(MethodId m) { return m == MethodId::M3 || m == MethodId::M4; }
inline std::size_t feature_length(MethodId m) { return uses_stats(m) ? 18 : 3; }

/// Vector order of the classified regions (v_F, v_C, v_N).
enum class Region { Forehead, Cheek, Nose };
inline constexpr std::array<Region, 3> kRegions = {Region::Forehead, Region::Cheek, Region::Nose};

std::string_view to_string(Region r);
const GrayImage& region_block(const FacialBlocks& blocks, Region r);

struct FeatureVector {
  MethodId method = MethodId::M1;
  std::vector<double> values;
};

struct RegionBank {
  BankConfig config;
  FilterBank bank;
};

struct BankAssignment {
  RegionBank forehead;
  RegionBank cheek;
  RegionBank nose;

  static BankAssignment uniform(const BankConfig& config);
  static BankAssignment per_region(const BankConfig& forehead, const BankConfig& cheek,
                                   const BankConfig& nose);

  bool is_uniform() const;
  const RegionBank& operator[](Region r) const;
};

FeatureVector assemble_features(const FacialBlocks& blocks, const BankAssignment& assignment,
                                MethodId method, const TextureOptions& opts = {});

/// Generator for the per-block bank candidates of methods 3 and 4: windows of
/// consecutive values on a half-octave wavelength ladder, crossed with
/// orientation sets at several starting offsets.
struct SelectionGridSpec {
  double ladder_min = 2.0;
  double ladder_max = 32.0;
  int window = 5;
  int orientation_count = 8;
  double orientation_step_deg = 45.0;
  std::vector<double> orientation_offsets_deg = {0.0, 22.5};
};

std::vector<BankConfig> make_selection_grid(const SelectionGridSpec& spec, const BankConfig& base);

/// Per-kernel statistics for a set of images, computed once for every
/// distinct kernel among the given banks (bit-identical kernels share a slot).
/// Bank-level features are then averages in bank order, bit-identical to
/// computing them directly with the same backend.
class KernelStatsTable {
 public:
  KernelStatsTable(std::span<const GrayImage* const> images, std::span<const BankConfig> banks,
                   const TextureOptions& opts);

  std::size_t image_count() const noexcept { return stats_.size(); }
  std::size_t slot_count() const noexcept { return slot_params_.size(); }

  TextureStats bank_stats(std::size_t image, const BankConfig& bank) const;
  double bank_texture(std::size_t image, const BankConfig& bank) const;

  nlohmann::json to_json() const;
  static KernelStatsTable from_json(const nlohmann::json& j);

 private:
  using ParamKey = std::tuple<double, double, double, double, double>;
  static ParamKey key_of(const GaborParams& p);

  KernelStatsTable() = default;
  std::vector<std::size_t> slots_for(const BankConfig& bank) const;

  std::map<ParamKey, std::size_t> slot_of_;
  std::vector<GaborParams> slot_params_;
  std::vector<std::vector<TextureStats>> stats_;  // [image][slot]
};

struct BankSelection {
  std::size_t index = 0;
  BankConfig config;
  double accuracy = 0.0;
  std::vector<double> candidate_accuracy;
};

/// Scores every candidate by a seeded stratified 70:30 split of the samples,
/// a classifier trained on the 1-D feature, and held-out accuracy. The best
/// candidate wins; ties go to the earliest grid position.
BankSelection select_bank_by_feature(
    const std::function<double(std::size_t sample, std::size_t candidate)>& feature,
    std::span<const Label> labels, std::span<const BankConfig> grid,
    const ClassifierSpec& classifier, std::uint64_t split_seed, double train_ratio = 0.7);

BankSelection select_block_bank(std::span<const GrayImage> blocks, std::span<const Label> labels,
                                std::span<const BankConfig> grid, const ClassifierSpec& classifier,
                                std::uint64_t split_seed, const TextureOptions& opts = {});

nlohmann::json bank_config_to_json(const BankConfig& c);
BankConfig bank_config_from_json(const nlohmann::json& j);

}  // namespace fbtex
