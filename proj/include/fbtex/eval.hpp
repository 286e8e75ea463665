#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fbtex/classify.hpp"
#include "fbtex/dataset.hpp"
#include "fbtex/pipeline.hpp"

namespace fbtex {

inline constexpr double kDefaultTrainRatio = 0.7;

struct Split {
  std::vector<std::size_t> train;  // ascending positions into the input
  std::vector<std::size_t> test;
};

/// Per class: seeded shuffle, then the first ceil(ratio·n_class) go to train.
Split stratified_split(std::span<const Label> labels, double ratio, std::uint64_t seed);

struct ConfusionCounts {
  long tp = 0;
  long fn = 0;
  long tn = 0;
  long fp = 0;

  bool operator==(const ConfusionCounts&) const = default;
};

struct MetricSet {
  double accuracy = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
};

ConfusionCounts confusion(std::span<const Label> truth, std::span<const Label> predicted);
MetricSet compute_metrics(const ConfusionCounts& c);

struct RocPoint {
  double threshold;  // +inf for the origin
  double fpr;
  double tpr;
};

struct RocCurve {
  std::vector<RocPoint> points;
  double auc = 0.0;
};

/// Threshold sweep over unique scores (descending); higher score means DM.
RocCurve roc_auc(std::span<const double> scores, std::span<const Label> labels);

struct CaseSpec {
  Camera camera = Camera::Mp12;
  MethodId method = MethodId::M2;
  ClassifierKind classifier = ClassifierKind::Svm;
  int size = 100;
  std::uint64_t seed = 0;
};

/// e.g. "12mp_m2_svm_100_s42"
std::string case_id(const CaseSpec& spec);

struct RegionChoice {
  Region region;
  BankSelection selection;
};

struct CaseResult {
  CaseSpec spec;
  ConfusionCounts counts;
  MetricSet metrics;
  std::optional<RocCurve> roc;
  std::vector<RegionChoice> chosen_banks;  // M3/M4 only
  std::optional<std::string> error;
  bool error_is_numeric = false;  // convergence or undefined metric
};

/// Everything a case needs besides its spec.
struct ExperimentSettings {
  BankConfig uniform_bank = default_bank_config();
  std::vector<BankConfig> selection_grid = make_selection_grid({}, default_bank_config());
  TextureOptions texture;
  int knn_k = 5;
  SvmParams svm;
  double train_ratio = kDefaultTrainRatio;

  ClassifierSpec classifier(ClassifierKind kind) const;
  /// Banks whose per-kernel statistics a case may query.
  std::vector<BankConfig> all_banks() const;
};

/// Samples of one camera plus the per-kernel statistics of their blocks.
/// Image index in the table is sample * 3 + region.
struct CameraData {
  Camera camera;
  std::vector<std::string> subject_ids;
  std::vector<Label> labels;
  KernelStatsTable table;
};

/// Builds per-camera tables (one extraction pass per block).
std::vector<CameraData> prepare_experiment(const Dataset& dataset, const ExperimentSettings& s);

/// Feature vector of one sample read from a table; bit-identical to
/// assemble_features with the same banks and backend.
std::vector<double> table_features(const KernelStatsTable& table, std::size_t sample,
                                   MethodId method, const std::array<BankConfig, 3>& banks);

/// Runs one cell; throws on error.
CaseResult run_case(const CaseSpec& spec, std::span<const CameraData> data,
                    const ExperimentSettings& s);
/// Convenience overload that extracts features first.
CaseResult run_case(const CaseSpec& spec, const Dataset& dataset, const ExperimentSettings& s);

struct SweepAxes {
  std::vector<Camera> cameras{kAllCameras.begin(), kAllCameras.end()};
  std::vector<MethodId> methods{kAllMethods.begin(), kAllMethods.end()};
  std::vector<ClassifierKind> classifiers{ClassifierKind::Svm, ClassifierKind::Knn};
  std::vector<int> sizes{40, 60, 80, 100};
  int repeats = 1;
  std::uint64_t master_seed = 42;
};

struct SummaryRow {
  int size = 0;
  Camera camera = Camera::Mp12;
  MethodId method = MethodId::M1;
  ClassifierKind classifier = ClassifierKind::Svm;
  double accuracy = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  std::optional<double> auc;
};

struct SweepReport {
  std::vector<CaseResult> cases;  // grid order: camera, method, classifier, size, repeat
  std::vector<SummaryRow> summary;
  bool any_failed() const;
};

/// Per-case failures are recorded in the report instead of aborting.
SweepReport run_sweep(const SweepAxes& axes, std::span<const CameraData> data,
                      const ExperimentSettings& s);

/// One per-case CSV row, as written and as re-read by the report command.
struct CaseRow {
  std::string camera;
  std::string method;
  std::string classifier;
  int size = 0;
  std::uint64_t seed = 0;
  std::optional<ConfusionCounts> counts;
  std::optional<MetricSet> metrics;
  std::optional<double> auc;
};

CaseRow to_row(const CaseResult& r);

/// Best case per (camera, size) by mean accuracy over repeats; ties go to the
/// lower method index, then SVM before k-NN. Rows ordered by size descending,
/// then camera order of first appearance.
std::vector<SummaryRow> summarize(std::span<const CaseRow> rows);

std::string format_metric(double v);

void write_cases_csv(std::ostream& out, std::span<const CaseRow> rows, const std::string& header);
std::vector<CaseRow> read_cases_csv(std::istream& in);
void write_summary_csv(std::ostream& out, std::span<const SummaryRow> rows,
                       const std::string& header);
void write_roc_csv(std::ostream& out, const RocCurve& roc);

}  // namespace fbtex
