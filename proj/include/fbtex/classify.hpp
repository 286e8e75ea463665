#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

namespace fbtex {

/// Binary label; DM is the positive class.
enum class Label : int { DM = 1, Healthy = -1 };

inline int sign_of(Label l) { return static_cast<int>(l); }
Label parse_label(std::string_view s);
std::string_view to_string(Label l);

using FeatureRow = std::vector<double>;
using FeatureMatrix = std::vector<FeatureRow>;

/// Per-dimension z-scoring fitted on training rows.
class Standardizer {
 public:
  static constexpr double kMinStd = 1e-12;

  Standardizer() = default;
  Standardizer(std::vector<double> mean, std::vector<double> std);

  static Standardizer fit(const FeatureMatrix& rows);

  FeatureRow apply(std::span<const double> x) const;
  FeatureMatrix apply(const FeatureMatrix& rows) const;

  std::size_t dims() const noexcept { return mean_.size(); }
  const std::vector<double>& mean() const noexcept { return mean_; }
  const std::vector<double>& stddev() const noexcept { return std_; }

 private:
  std::vector<double> mean_;
  std::vector<double> std_;
};

struct KnnModel {
  int k = 5;
  Standardizer standardizer;
  FeatureMatrix points;  // standardized
  std::vector<Label> labels;
};

KnnModel knn_train(const FeatureMatrix& train, std::span<const Label> labels, int k);
Label knn_predict(const KnnModel& model, std::span<const double> x);

enum class KernelType { Linear, Rbf };

KernelType parse_kernel_type(std::string_view s);
std::string_view to_string(KernelType k);

struct SvmParams {
  double C = 1.0;
  KernelType kernel = KernelType::Rbf;
  std::optional<double> gamma;  // unset: 1 / dims
  double tolerance = 1e-3;
  int max_pass_factor = 10;     // outer-pass cap = factor * n
  std::uint64_t seed = 0;
};

struct SvmModel {
  KernelType kernel = KernelType::Rbf;
  double gamma = 1.0;
  double C = 1.0;
  Standardizer standardizer;
  FeatureMatrix support_vectors;           // standardized
  std::vector<double> coefficients;        // alpha_i * y_i
  std::vector<std::size_t> support_index;  // positions in the training set
  double bias = 0.0;
  int passes = 0;

  std::size_t dims() const noexcept { return standardizer.dims(); }
};

/// Soft-margin dual solved by Platt's SMO with an error cache.
SvmModel svm_train_smo(const FeatureMatrix& train, std::span<const Label> labels,
                       const SvmParams& params = {});

double svm_decision(const SvmModel& model, std::span<const double> x);
/// Sign of the decision; zero maps to DM.
Label svm_predict(const SvmModel& model, std::span<const double> x);

double kernel_value(KernelType kernel, double gamma, std::span<const double> a,
                    std::span<const double> b);

enum class ClassifierKind { Svm, Knn };

ClassifierKind parse_classifier_kind(std::string_view s);
std::string_view to_string(ClassifierKind k);

struct ClassifierSpec {
  ClassifierKind kind = ClassifierKind::Svm;
  int k = 5;
  SvmParams svm;
};

/// Either trained model behind one predict/score surface.
class TrainedClassifier {
 public:
  explicit TrainedClassifier(KnnModel m) : model_(std::move(m)) {}
  explicit TrainedClassifier(SvmModel m) : model_(std::move(m)) {}

  Label predict(std::span<const double> x) const;
  /// Continuous score for ROC analysis; k-NN has none.
  std::optional<double> score(std::span<const double> x) const;

  const std::variant<KnnModel, SvmModel>& model() const noexcept { return model_; }

 private:
  std::variant<KnnModel, SvmModel> model_;
};

TrainedClassifier train_classifier(const ClassifierSpec& spec, const FeatureMatrix& train,
                                   std::span<const Label> labels, std::uint64_t seed);

inline constexpr int kModelFormatVersion = 1;

nlohmann::json model_to_json(const KnnModel& m);
nlohmann::json model_to_json(const SvmModel& m);
/// Reads either model type; throws ConfigError on a bad or missing version.
std::variant<KnnModel, SvmModel> model_from_json(const nlohmann::json& j);

}  // namespace fbtex
