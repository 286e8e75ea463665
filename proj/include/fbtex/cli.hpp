#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fbtex/config.hpp"
#include "fbtex/dataset.hpp"
#include "fbtex/eval.hpp"

namespace fbtex {

inline constexpr int kStoreVersion = 1;

/// Samples read from a dataset manifest. Rows that fail are reported in
/// `errors` and left out of `dataset`.
struct ManifestLoad {
  Dataset dataset;
  std::vector<std::string> image_paths;  // as written in the manifest
  std::vector<std::string> errors;
};

/// Reads `image_path,subject_id,camera,label` rows. Relative image paths are
/// resolved against the manifest directory; `rois` defaults to rois.json
/// beside the manifest.
ManifestLoad load_manifest(const std::filesystem::path& manifest, const std::filesystem::path& rois,
                           CheekMode cheek);

/// Feature store: M1/M2 vectors per sample plus the per-kernel statistics
/// that every method (including per-block bank selection) reads from.
nlohmann::json make_feature_store(const ManifestLoad& load, const Config& config,
                                  std::span<const MethodId> methods);
std::vector<CameraData> camera_data_from_store(const nlohmann::json& store, const Config& config);

/// Entry point shared by the executable and the tests. Returns the exit code:
/// 0 success, 1 input error, 2 convergence or undefined-metric error.
int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace fbtex
