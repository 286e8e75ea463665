#include "fbtex/classify.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fbtex/error.hpp"
#include "fbtex/rng.hpp"

namespace fbtex {

Label parse_label(std::string_view s) {
  if (s == "dm" || s == "DM") return Label::DM;
  if (s == "healthy" || s == "Healthy") return Label::Healthy;
  throw DatasetError("unknown label '" + std::string(s) + "' (expected dm|healthy)");
}

std::string_view to_string(Label l) { return l == Label::DM ? "dm" : "healthy"; }

KernelType parse_kernel_type(std::string_view s) {
  if (s == "linear") return KernelType::Linear;
  if (s == "rbf") return KernelType::Rbf;
  throw ConfigError("unknown svm kernel '" + std::string(s) + "' (expected linear|rbf)");
}

std::string_view to_string(KernelType k) { return k == KernelType::Linear ? "linear" : "rbf"; }

ClassifierKind parse_classifier_kind(std::string_view s) {
  if (s == "svm") return ClassifierKind::Svm;
  if (s == "knn") return ClassifierKind::Knn;
  throw ConfigError("unknown classifier '" + std::string(s) + "' (expected svm|knn)");
}

std::string_view to_string(ClassifierKind k) { return k == ClassifierKind::Svm ? "svm" : "knn"; }

// ---- standardizer ----------------------------------------------------------

Standardizer::Standardizer(std::vector<double> mean, std::vector<double> std)
    : mean_(std::move(mean)), std_(std::move(std)) {
  if (mean_.size() != std_.size()) throw ShapeError("standardizer mean/std length mismatch");
}

namespace {

void check_rectangular(const FeatureMatrix& rows) {
  if (rows.empty()) throw DatasetError("training set is empty");
  const std::size_t d = rows.front().size();
  if (d == 0) throw ShapeError("feature rows are empty");
  for (const auto& r : rows)
    if (r.size() != d) throw ShapeError("feature rows have inconsistent lengths");
}

}  // namespace

Standardizer Standardizer::fit(const FeatureMatrix& rows) {
  check_rectangular(rows);
  const std::size_t d = rows.front().size();
  const double n = static_cast<double>(rows.size());
  std::vector<double> mean(d, 0.0), sd(d, 0.0);
  for (const auto& r : rows)
    for (std::size_t j = 0; j < d; ++j) mean[j] += r[j];
  for (double& m : mean) m /= n;
  for (const auto& r : rows)
    for (std::size_t j = 0; j < d; ++j) sd[j] += (r[j] - mean[j]) * (r[j] - mean[j]);
  for (double& s : sd) {
    s = std::sqrt(s / n);
    if (!(s >= kMinStd)) s = 1.0;
  }
  return Standardizer(std::move(mean), std::move(sd));
}

FeatureRow Standardizer::apply(std::span<const double> x) const {
  if (x.size() != mean_.size())
    throw ShapeError("feature length " + std::to_string(x.size()) + " does not match model dims " +
                     std::to_string(mean_.size()));
  FeatureRow out(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) out[j] = (x[j] - mean_[j]) / std_[j];
  return out;
}

FeatureMatrix Standardizer::apply(const FeatureMatrix& rows) const {
  FeatureMatrix out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(apply(r));
  return out;
}

// ---- k-NN ------------------------------------------------------------------

KnnModel knn_train(const FeatureMatrix& train, std::span<const Label> labels, int k) {
  check_rectangular(train);
  if (labels.size() != train.size()) throw ShapeError("label count does not match training rows");
  if (k < 1 || k % 2 == 0) throw ParameterError("k must be a positive odd integer");
  if (static_cast<std::size_t>(k) > train.size())
    throw ParameterError("k = " + std::to_string(k) + " exceeds training set size " +
                         std::to_string(train.size()));
  KnnModel m;
  m.k = k;
  m.standardizer = Standardizer::fit(train);
  m.points = m.standardizer.apply(train);
  m.labels.assign(labels.begin(), labels.end());
  return m;
}

Label knn_predict(const KnnModel& model, std::span<const double> x) {
  const FeatureRow q = model.standardizer.apply(x);
  std::vector<std::pair<double, std::size_t>> dist(model.points.size());
  for (std::size_t i = 0; i < model.points.size(); ++i) {
    double d2 = 0.0;
    for (std::size_t j = 0; j < q.size(); ++j) {
      const double t = model.points[i][j] - q[j];
      d2 += t * t;
    }
    dist[i] = {d2, i};
  }
  // (distance, index) ordering breaks ties toward the lower training index.
  const auto k = static_cast<std::ptrdiff_t>(model.k);
  std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
  int vote = 0;
  for (std::ptrdiff_t i = 0; i < k; ++i) vote += sign_of(model.labels[dist[i].second]);
  return vote >= 0 ? Label::DM : Label::Healthy;
}

// ---- SVM -------------------------------------------------------------------

double kernel_value(KernelType kernel, double gamma, std::span<const double> a,
                    std::span<const double> b) {
  if (kernel == KernelType::Linear) return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
  double d2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d2 += (a[i] - b[i]) * (a[i] - b[i]);
  return std::exp(-gamma * d2);
}

namespace {

class SmoSolver {
 public:
  SmoSolver(const FeatureMatrix& x, std::span<const Label> labels, const SvmParams& p, double gamma)
      : n_(x.size()), C_(p.C), tol_(p.tolerance), rng_(p.seed) {
    y_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) y_[i] = sign_of(labels[i]);
    K_.resize(n_ * n_);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = i; j < n_; ++j)
        K_[i * n_ + j] = K_[j * n_ + i] = kernel_value(p.kernel, gamma, x[i], x[j]);
    alpha_.assign(n_, 0.0);
    error_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) error_[i] = -y_[i];
  }

  void solve(int max_passes) {
    bool examine_all = true;
    int changed = 0;
    while (changed > 0 || examine_all) {
      if (++passes_ > max_passes)
        throw ConvergenceError("SMO did not converge within " + std::to_string(max_passes) +
                                   " passes",
                               max_violation());
      changed = 0;
      for (std::size_t i = 0; i < n_; ++i)
        if (examine_all || non_bound(i)) changed += examine(i);
      if (examine_all)
        examine_all = false;
      else if (changed == 0)
        examine_all = true;
    }
  }

  double max_violation() const {
    double worst = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      const double r = error_[i] * y_[i];
      if (alpha_[i] < C_ && r < 0) worst = std::max(worst, -r);
      if (alpha_[i] > 0 && r > 0) worst = std::max(worst, r);
    }
    return worst;
  }

  const std::vector<double>& alpha() const { return alpha_; }
  const std::vector<double>& y() const { return y_; }
  double bias() const { return b_; }
  int passes() const { return passes_; }

 private:
  static constexpr double kEps = 1e-12;

  bool non_bound(std::size_t i) const { return alpha_[i] > 0.0 && alpha_[i] < C_; }
  double k(std::size_t i, std::size_t j) const { return K_[i * n_ + j]; }

  int examine(std::size_t i2) {
    const double r2 = error_[i2] * y_[i2];
    if (!((r2 < -tol_ && alpha_[i2] < C_) || (r2 > tol_ && alpha_[i2] > 0))) return 0;

    // Second choice: the non-bound multiplier with the largest |E1 - E2|.
    std::size_t best = n_;
    double best_gap = -1.0;
    std::size_t free_count = 0;
    for (std::size_t i = 0; i < n_; ++i) {
      if (!non_bound(i)) continue;
      ++free_count;
      const double gap = std::fabs(error_[i] - error_[i2]);
      if (gap > best_gap) {
        best_gap = gap;
        best = i;
      }
    }
    if (free_count > 1 && best < n_ && step(best, i2)) return 1;

    // Fallbacks start at a seeded random position.
    const std::size_t start = static_cast<std::size_t>(rng_.uniform_index(n_));
    for (std::size_t t = 0; t < n_; ++t) {
      const std::size_t i1 = (start + t) % n_;
      if (non_bound(i1) && step(i1, i2)) return 1;
    }
    const std::size_t start2 = static_cast<std::size_t>(rng_.uniform_index(n_));
    for (std::size_t t = 0; t < n_; ++t) {
      const std::size_t i1 = (start2 + t) % n_;
      if (step(i1, i2)) return 1;
    }
    return 0;
  }

  bool step(std::size_t i1, std::size_t i2) {
    if (i1 == i2) return false;
    const double a1 = alpha_[i1], a2 = alpha_[i2];
    const double y1 = y_[i1], y2 = y_[i2];
    const double e1 = error_[i1], e2 = error_[i2];
    const double s = y1 * y2;

    double lo, hi;
    if (s < 0) {
      lo = std::max(0.0, a2 - a1);
      hi = std::min(C_, C_ + a2 - a1);
    } else {
      lo = std::max(0.0, a2 + a1 - C_);
      hi = std::min(C_, a2 + a1);
    }
    if (hi - lo < kEps) return false;

    const double k11 = k(i1, i1), k12 = k(i1, i2), k22 = k(i2, i2);
    const double eta = k11 + k22 - 2.0 * k12;
    double a2n;
    if (eta > kEps) {
      a2n = std::clamp(a2 + y2 * (e1 - e2) / eta, lo, hi);
    } else {
      // Objective at both ends of the feasible segment.
      const double f1 = y1 * (e1 - b_) - a1 * k11 - s * a2 * k12;
      const double f2 = y2 * (e2 - b_) - s * a1 * k12 - a2 * k22;
      const double l1 = a1 + s * (a2 - lo);
      const double h1 = a1 + s * (a2 - hi);
      const double obj_lo = l1 * f1 + lo * f2 + 0.5 * l1 * l1 * k11 + 0.5 * lo * lo * k22 +
                            s * lo * l1 * k12;
      const double obj_hi = h1 * f1 + hi * f2 + 0.5 * h1 * h1 * k11 + 0.5 * hi * hi * k22 +
                            s * hi * h1 * k12;
      if (obj_lo < obj_hi - 1e-12)
        a2n = lo;
      else if (obj_lo > obj_hi + 1e-12)
        a2n = hi;
      else
        a2n = a2;
    }
    if (std::fabs(a2n - a2) < 1e-10 * (a2n + a2 + 1e-10)) return false;

    double a1n = a1 + s * (a2 - a2n);
    a1n = std::clamp(a1n, 0.0, C_);
    const double d1 = y1 * (a1n - a1);
    const double d2 = y2 * (a2n - a2);

    const double b1 = b_ - e1 - d1 * k11 - d2 * k12;
    const double b2 = b_ - e2 - d1 * k12 - d2 * k22;
    double bn;
    if (a1n > 0 && a1n < C_)
      bn = b1;
    else if (a2n > 0 && a2n < C_)
      bn = b2;
    else
      bn = 0.5 * (b1 + b2);

    const double db = bn - b_;
    for (std::size_t i = 0; i < n_; ++i) error_[i] += d1 * k(i1, i) + d2 * k(i2, i) + db;
    alpha_[i1] = a1n;
    alpha_[i2] = a2n;
    b_ = bn;
    return true;
  }

  std::size_t n_;
  double C_;
  double tol_;
  Rng rng_;
  std::vector<double> y_;
  std::vector<double> K_;
  std::vector<double> alpha_;
  std::vector<double> error_;
  double b_ = 0.0;
  int passes_ = 0;
};

}  // namespace

SvmModel svm_train_smo(const FeatureMatrix& train, std::span<const Label> labels,
                       const SvmParams& params) {
  check_rectangular(train);
  if (labels.size() != train.size()) throw ShapeError("label count does not match training rows");
  if (!(params.C > 0.0) || !std::isfinite(params.C)) throw ParameterError("SVM C must be > 0");
  if (!(params.tolerance > 0.0)) throw ParameterError("SVM tolerance must be > 0");
  const bool has_dm = std::find(labels.begin(), labels.end(), Label::DM) != labels.end();
  const bool has_healthy = std::find(labels.begin(), labels.end(), Label::Healthy) != labels.end();
  if (!has_dm || !has_healthy) throw DatasetError("SVM training needs both classes");

  SvmModel m;
  m.kernel = params.kernel;
  m.C = params.C;
  m.standardizer = Standardizer::fit(train);
  const FeatureMatrix x = m.standardizer.apply(train);
  m.gamma = params.gamma.value_or(1.0 / static_cast<double>(m.dims()));
  if (m.kernel == KernelType::Rbf && !(m.gamma > 0.0)) throw ParameterError("RBF gamma must be > 0");

  SmoSolver solver(x, labels, params, m.gamma);
  solver.solve(params.max_pass_factor * static_cast<int>(x.size()));

  for (std::size_t i = 0; i < x.size(); ++i) {
    const double a = solver.alpha()[i];
    if (a > 0.0) {
      m.support_vectors.push_back(x[i]);
      m.coefficients.push_back(a * solver.y()[i]);
      m.support_index.push_back(i);
    }
  }
  m.bias = solver.bias();
  m.passes = solver.passes();
  return m;
}

double svm_decision(const SvmModel& model, std::span<const double> x) {
  const FeatureRow z = model.standardizer.apply(x);
  double f = model.bias;
  for (std::size_t i = 0; i < model.support_vectors.size(); ++i)
    f += model.coefficients[i] * kernel_value(model.kernel, model.gamma, model.support_vectors[i], z);
  return f;
}

Label svm_predict(const SvmModel& model, std::span<const double> x) {
  return svm_decision(model, x) >= 0.0 ? Label::DM : Label::Healthy;
}

// ---- unified surface -------------------------------------------------------

Label TrainedClassifier::predict(std::span<const double> x) const {
  if (const auto* knn = std::get_if<KnnModel>(&model_)) return knn_predict(*knn, x);
  return svm_predict(std::get<SvmModel>(model_), x);
}

std::optional<double> TrainedClassifier::score(std::span<const double> x) const {
  if (const auto* svm = std::get_if<SvmModel>(&model_)) return svm_decision(*svm, x);
  return std::nullopt;
}

TrainedClassifier train_classifier(const ClassifierSpec& spec, const FeatureMatrix& train,
                                   std::span<const Label> labels, std::uint64_t seed) {
  if (spec.kind == ClassifierKind::Knn) return TrainedClassifier(knn_train(train, labels, spec.k));
  SvmParams p = spec.svm;
  p.seed = seed;
  return TrainedClassifier(svm_train_smo(train, labels, p));
}

// ---- serialization ---------------------------------------------------------

using nlohmann::json;

namespace {

json standardizer_json(const Standardizer& s) { return {{"mean", s.mean()}, {"std", s.stddev()}}; }

Standardizer standardizer_from(const json& j) {
  return Standardizer(j.at("mean").get<std::vector<double>>(), j.at("std").get<std::vector<double>>());
}

std::vector<int> label_ints(const std::vector<Label>& labels) {
  std::vector<int> out;
  for (Label l : labels) out.push_back(sign_of(l));
  return out;
}

}  // namespace

json model_to_json(const KnnModel& m) {
  return {{"version", kModelFormatVersion},
          {"type", "knn"},
          {"k", m.k},
          {"metric", "euclidean"},
          {"standardizer", standardizer_json(m.standardizer)},
          {"points", m.points},
          {"labels", label_ints(m.labels)}};
}

json model_to_json(const SvmModel& m) {
  return {{"version", kModelFormatVersion},
          {"type", "svm"},
          {"kernel", to_string(m.kernel)},
          {"gamma", m.gamma},
          {"C", m.C},
          {"standardizer", standardizer_json(m.standardizer)},
          {"support_vectors", m.support_vectors},
          {"coefficients", m.coefficients},
          {"support_index", m.support_index},
          {"bias", m.bias}};
}

std::variant<KnnModel, SvmModel> model_from_json(const json& j) {
  try {
    if (!j.contains("version") || j.at("version").get<int>() != kModelFormatVersion)
      throw ConfigError("unsupported or missing model format version");
    const std::string type = j.at("type").get<std::string>();
    if (type == "knn") {
      KnnModel m;
      m.k = j.at("k").get<int>();
      m.standardizer = standardizer_from(j.at("standardizer"));
      m.points = j.at("points").get<FeatureMatrix>();
      for (int v : j.at("labels").get<std::vector<int>>())
        m.labels.push_back(v > 0 ? Label::DM : Label::Healthy);
      return m;
    }
    if (type == "svm") {
      SvmModel m;
      m.kernel = parse_kernel_type(j.at("kernel").get<std::string>());
      m.gamma = j.at("gamma").get<double>();
      m.C = j.at("C").get<double>();
      m.standardizer = standardizer_from(j.at("standardizer"));
      m.support_vectors = j.at("support_vectors").get<FeatureMatrix>();
      m.coefficients = j.at("coefficients").get<std::vector<double>>();
      m.support_index = j.at("support_index").get<std::vector<std::size_t>>();
      m.bias = j.at("bias").get<double>();
      return m;
    }
    throw ConfigError("unknown model type '" + type + "'");
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed model JSON: ") + e.what());
  }
}

}  // namespace fbtex
