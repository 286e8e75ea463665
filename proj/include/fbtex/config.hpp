#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "fbtex/eval.hpp"
#include "fbtex/gabor.hpp"
#include "fbtex/imaging.hpp"
#include "fbtex/pipeline.hpp"

namespace fbtex {

/// Complete run configuration. Every field has a default; the JSON reader
/// rejects unknown keys at every level.
struct Config {
  BankConfig bank = default_bank_config();
  TextureOptions texture;
  CheekMode cheek = CheekMode::Mean;
  SelectionGridSpec grid;
  int knn_k = 5;
  SvmParams svm;
  SweepAxes axes;
  double train_ratio = kDefaultTrainRatio;
  std::string manifest;
  std::string rois;  // empty: rois.json beside the manifest
  std::string output_dir = "out";

  static Config from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  /// Hash of every setting that can change a result (paths and seed excluded).
  std::string hash() const;
  /// Hash of the settings that determine extracted features.
  std::string feature_hash() const;

  ExperimentSettings experiment() const;
};

Config load_config(const std::string& path);

/// 64-bit FNV-1a as 16 lowercase hex digits.
std::string fnv1a_hex(const std::string& data);

}  // namespace fbtex
