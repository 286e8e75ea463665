#include "fbtex/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "fbtex/error.hpp"
#include "fbtex/parallel.hpp"
#include "fbtex/rng.hpp"

namespace fbtex {

Split stratified_split(std::span<const Label> labels, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw ParameterError("train ratio must lie in (0, 1)");
  Split split;
  for (Label cls : {Label::DM, Label::Healthy}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == cls) members.push_back(i);
    if (members.size() < 2)
      throw DatasetError("class " + std::string(to_string(cls)) + " has " +
                         std::to_string(members.size()) + " samples; a split needs at least 2");
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(sign_of(cls) + 2)}));
    rng.shuffle(std::span(members));
    // The epsilon keeps 0.7·n from rounding up past an exact integer; at
    // least one sample per class is always held out.
    auto n_train = static_cast<std::size_t>(std::ceil(ratio * members.size() - 1e-9));
    n_train = std::clamp<std::size_t>(n_train, 1, members.size() - 1);
    split.train.insert(split.train.end(), members.begin(), members.begin() + n_train);
    split.test.insert(split.test.end(), members.begin() + n_train, members.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

ConfusionCounts confusion(std::span<const Label> truth, std::span<const Label> predicted) {
  if (truth.size() != predicted.size()) throw ShapeError("prediction count mismatch");
  ConfusionCounts c;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool pos = truth[i] == Label::DM;
    const bool hit = predicted[i] == truth[i];
    if (pos)
      (hit ? c.tp : c.fn)++;
    else
      (hit ? c.tn : c.fp)++;
  }
  return c;
}

MetricSet compute_metrics(const ConfusionCounts& c) {
  if (c.tp < 0 || c.fn < 0 || c.tn < 0 || c.fp < 0) throw ParameterError("negative confusion count");
  if (c.tp + c.fn == 0) throw MetricUndefinedError("sensitivity undefined: no DM samples in test set");
  if (c.tn + c.fp == 0)
    throw MetricUndefinedError("specificity undefined: no healthy samples in test set");
  MetricSet m;
  m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.tp + c.tn + c.fp + c.fn);
  m.sensitivity = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  m.specificity = static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
  return m;
}

RocCurve roc_auc(std::span<const double> scores, std::span<const Label> labels) {
  if (scores.size() != labels.size()) throw ShapeError("score count does not match label count");
  long positives = 0, negatives = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) throw ParameterError("ROC scores must be finite");
    (labels[i] == Label::DM ? positives : negatives)++;
  }
  if (positives == 0 || negatives == 0)
    throw MetricUndefinedError("ROC undefined: labels contain a single class");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve roc;
  roc.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  long tp = 0, fp = 0;
  long long twice_area = 0;  // sum of Δfp · (tp_prev + tp) in count units
  for (std::size_t i = 0; i < order.size();) {
    const double threshold = scores[order[i]];
    const long tp_prev = tp, fp_prev = fp;
    while (i < order.size() && scores[order[i]] == threshold) {
      (labels[order[i]] == Label::DM ? tp : fp)++;
      ++i;
    }
    twice_area += static_cast<long long>(fp - fp_prev) * (tp_prev + tp);
    roc.points.push_back({threshold, static_cast<double>(fp) / negatives,
                          static_cast<double>(tp) / positives});
  }
  roc.auc = static_cast<double>(twice_area) / (2.0 * static_cast<double>(positives) * negatives);
  return roc;
}

std::string case_id(const CaseSpec& spec) {
  return std::string(to_string(spec.camera)) + "_" + std::string(to_string(spec.method)) + "_" +
         std::string(to_string(spec.classifier)) + "_" + std::to_string(spec.size) + "_s" +
         std::to_string(spec.seed);
}

ClassifierSpec ExperimentSettings::classifier(ClassifierKind kind) const {
  ClassifierSpec c;
  c.kind = kind;
  c.k = knn_k;
  c.svm = svm;
  return c;
}

std::vector<BankConfig> ExperimentSettings::all_banks() const {
  std::vector<BankConfig> banks{uniform_bank};
  banks.insert(banks.end(), selection_grid.begin(), selection_grid.end());
  return banks;
}

std::vector<CameraData> prepare_experiment(const Dataset& dataset, const ExperimentSettings& s) {
  const auto banks = s.all_banks();
  std::vector<CameraData> out;
  for (Camera cam : kAllCameras) {
    std::vector<const Sample*> members;
    for (const auto& smp : dataset)
      if (smp.camera == cam) members.push_back(&smp);
    if (members.empty()) continue;
    std::vector<const GrayImage*> images;
    std::vector<std::string> ids;
    std::vector<Label> labels;
    for (const Sample* smp : members) {
      for (Region r : kRegions) images.push_back(&region_block(smp->blocks, r));
      ids.push_back(smp->subject_id);
      labels.push_back(smp->label);
    }
    out.push_back({cam, std::move(ids), std::move(labels), KernelStatsTable(images, banks, s.texture)});
  }
  return out;
}

std::vector<double> table_features(const KernelStatsTable& table, std::size_t sample,
                                   MethodId method, const std::array<BankConfig, 3>& banks) {
  std::vector<double> v;
  v.reserve(feature_length(method));
  for (std::size_t r = 0; r < kRegions.size(); ++r) {
    const std::size_t image = sample * kRegions.size() + r;
    if (uses_stats(method)) {
      const auto s = table.bank_stats(image, banks[r]).as_array();
      v.insert(v.end(), s.begin(), s.end());
    } else {
      v.push_back(table.bank_texture(image, banks[r]));
    }
  }
  return v;
}

namespace {

enum SeedTag : std::uint64_t { kSubsetTag = 1, kSplitTag = 2, kSelectTag = 3, kTrainTag = 4 };

}  // namespace

CaseResult run_case(const CaseSpec& spec, std::span<const CameraData> data,
                    const ExperimentSettings& s) {
  const CameraData* cam = nullptr;
  for (const auto& d : data)
    if (d.camera == spec.camera) cam = &d;
  if (!cam) throw DatasetError("no samples for camera " + std::string(to_string(spec.camera)));
  if (spec.size < 4 || spec.size % 2 != 0)
    throw DatasetError("dataset size must be an even number >= 4, got " + std::to_string(spec.size));

  const std::size_t per_class = static_cast<std::size_t>(spec.size / 2);
  std::vector<std::size_t> subset;
  for (Label cls : {Label::DM, Label::Healthy}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < cam->labels.size(); ++i)
      if (cam->labels[i] == cls) members.push_back(i);
    if (members.size() < per_class)
      throw DatasetError("camera " + std::string(to_string(spec.camera)) + " has " +
                         std::to_string(members.size()) + " " + std::string(to_string(cls)) +
                         " samples, size " + std::to_string(spec.size) + " needs " +
                         std::to_string(per_class));
    // Independent of size, so smaller subsets nest inside larger ones.
    Rng rng(derive_seed(spec.seed, {kSubsetTag, static_cast<std::uint64_t>(spec.camera),
                                    static_cast<std::uint64_t>(sign_of(cls) + 2)}));
    rng.shuffle(std::span(members));
    subset.insert(subset.end(), members.begin(), members.begin() + per_class);
  }
  std::sort(subset.begin(), subset.end());

  std::vector<Label> labels;
  for (auto i : subset) labels.push_back(cam->labels[i]);
  const Split split = stratified_split(
      labels, s.train_ratio,
      derive_seed(spec.seed, {kSplitTag, static_cast<std::uint64_t>(spec.camera),
                              static_cast<std::uint64_t>(spec.size)}));

  CaseResult result;
  result.spec = spec;
  const ClassifierSpec clf = s.classifier(spec.classifier);

  std::array<BankConfig, 3> banks{s.uniform_bank, s.uniform_bank, s.uniform_bank};
  if (per_block_banks(spec.method)) {
    std::vector<Label> train_labels;
    for (auto i : split.train) train_labels.push_back(labels[i]);
    for (std::size_t r = 0; r < kRegions.size(); ++r) {
      auto feature = [&](std::size_t sample, std::size_t c) {
        return cam->table.bank_texture(subset[split.train[sample]] * kRegions.size() + r,
                                       s.selection_grid[c]);
      };
      BankSelection sel = select_bank_by_feature(
          feature, train_labels, s.selection_grid, clf,
          derive_seed(spec.seed, {kSelectTag, static_cast<std::uint64_t>(spec.camera),
                                  static_cast<std::uint64_t>(spec.size), r}),
          s.train_ratio);
      banks[r] = sel.config;
      result.chosen_banks.push_back({kRegions[r], std::move(sel)});
    }
  }

  FeatureMatrix xtr, xte;
  std::vector<Label> ytr, yte;
  for (auto i : split.train) {
    xtr.push_back(table_features(cam->table, subset[i], spec.method, banks));
    ytr.push_back(labels[i]);
  }
  for (auto i : split.test) {
    xte.push_back(table_features(cam->table, subset[i], spec.method, banks));
    yte.push_back(labels[i]);
  }

  const auto model =
      train_classifier(clf, xtr, ytr, derive_seed(spec.seed, {kTrainTag}));
  std::vector<Label> pred;
  std::vector<double> scores;
  for (const auto& x : xte) {
    pred.push_back(model.predict(x));
    if (auto sc = model.score(x)) scores.push_back(*sc);
  }
  result.counts = confusion(yte, pred);
  result.metrics = compute_metrics(result.counts);
  if (scores.size() == yte.size()) result.roc = roc_auc(scores, yte);
  return result;
}

CaseResult run_case(const CaseSpec& spec, const Dataset& dataset, const ExperimentSettings& s) {
  const auto data = prepare_experiment(dataset, s);
  return run_case(spec, data, s);
}

bool SweepReport::any_failed() const {
  return std::any_of(cases.begin(), cases.end(), [](const CaseResult& c) { return c.error.has_value(); });
}

SweepReport run_sweep(const SweepAxes& axes, std::span<const CameraData> data,
                      const ExperimentSettings& s) {
  if (axes.repeats < 1) throw ConfigError("repeats must be >= 1");
  std::vector<CaseSpec> specs;
  for (Camera cam : axes.cameras)
    for (MethodId m : axes.methods)
      for (ClassifierKind c : axes.classifiers)
        for (int size : axes.sizes)
          for (int r = 0; r < axes.repeats; ++r)
            specs.push_back({cam, m, c, size, axes.master_seed + static_cast<std::uint64_t>(r)});

  SweepReport report;
  report.cases.resize(specs.size());
  parallel_for(specs.size(), [&](std::size_t i) {
    try {
      report.cases[i] = run_case(specs[i], data, s);
    } catch (const Error& e) {
      CaseResult failed;
      failed.spec = specs[i];
      failed.error = case_id(specs[i]) + ": " + e.what();
      failed.error_is_numeric = dynamic_cast<const ConvergenceError*>(&e) != nullptr ||
                                dynamic_cast<const MetricUndefinedError*>(&e) != nullptr;
      report.cases[i] = std::move(failed);
    }
  });

  std::vector<CaseRow> rows;
  for (const auto& c : report.cases) rows.push_back(to_row(c));
  report.summary = summarize(rows);
  return report;
}

CaseRow to_row(const CaseResult& r) {
  CaseRow row;
  row.camera = to_string(r.spec.camera);
  row.method = to_string(r.spec.method);
  row.classifier = to_string(r.spec.classifier);
  row.size = r.spec.size;
  row.seed = r.spec.seed;
  if (!r.error) {
    row.counts = r.counts;
    row.metrics = r.metrics;
    if (r.roc) row.auc = r.roc->auc;
  }
  return row;
}

std::vector<SummaryRow> summarize(std::span<const CaseRow> rows) {
  struct Acc {
    double acc = 0, sens = 0, spec = 0, auc = 0;
    int n = 0;
    int n_auc = 0;
  };
  std::vector<std::string> camera_order;
  std::map<std::tuple<std::string, int, int, int>, Acc> cells;  // camera, size, method, classifier
  for (const auto& r : rows) {
    if (std::find(camera_order.begin(), camera_order.end(), r.camera) == camera_order.end())
      camera_order.push_back(r.camera);
    if (!r.metrics) continue;
    const int m = static_cast<int>(parse_method(r.method));
    const int c = static_cast<int>(parse_classifier_kind(r.classifier));
    Acc& a = cells[{r.camera, r.size, m, c}];
    a.acc += r.metrics->accuracy;
    a.sens += r.metrics->sensitivity;
    a.spec += r.metrics->specificity;
    if (r.auc) {
      a.auc += *r.auc;
      ++a.n_auc;
    }
    ++a.n;
  }

  std::vector<int> sizes;
  for (const auto& [key, a] : cells) sizes.push_back(std::get<1>(key));
  std::sort(sizes.begin(), sizes.end(), std::greater<>());
  sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());

  std::vector<SummaryRow> out;
  for (int size : sizes) {
    for (const auto& cam : camera_order) {
      std::optional<SummaryRow> best;
      // Map order is (method, classifier) ascending, and SVM < kNN, so the
      // strict comparison keeps the earliest on ties.
      for (const auto& [key, a] : cells) {
        if (std::get<0>(key) != cam || std::get<1>(key) != size) continue;
        const double acc = a.acc / a.n;
        if (best && !(acc > best->accuracy)) continue;
        SummaryRow row;
        row.size = size;
        row.camera = parse_camera(cam);
        row.method = static_cast<MethodId>(std::get<2>(key));
        row.classifier = static_cast<ClassifierKind>(std::get<3>(key));
        row.accuracy = acc;
        row.sensitivity = a.sens / a.n;
        row.specificity = a.spec / a.n;
        if (a.n_auc == a.n) row.auc = a.auc / a.n;
        best = row;
      }
      if (best) out.push_back(*best);
    }
  }
  return out;
}

std::string format_metric(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

namespace {

constexpr const char* kCasesHeader =
    "camera,method,classifier,size,seed,tp,fn,tn,fp,accuracy,sensitivity,specificity,auc";

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

void write_cases_csv(std::ostream& out, std::span<const CaseRow> rows, const std::string& header) {
  if (!header.empty()) out << "# " << header << '\n';
  out << kCasesHeader << '\n';
  for (const auto& r : rows) {
    out << r.camera << ',' << r.method << ',' << r.classifier << ',' << r.size << ',' << r.seed;
    if (r.counts)
      out << ',' << r.counts->tp << ',' << r.counts->fn << ',' << r.counts->tn << ',' << r.counts->fp;
    else
      out << ",,,,";
    if (r.metrics)
      out << ',' << format_metric(r.metrics->accuracy) << ',' << format_metric(r.metrics->sensitivity)
          << ',' << format_metric(r.metrics->specificity);
    else
      out << ",,,";
    out << ',' << (r.auc ? format_metric(*r.auc) : "") << '\n';
  }
}

std::vector<CaseRow> read_cases_csv(std::istream& in) {
  std::vector<CaseRow> rows;
  std::string line;
  bool header_seen = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != kCasesHeader) throw DatasetError("per-case CSV has an unexpected header");
      header_seen = true;
      continue;
    }
    const auto f = split_csv(line);
    if (f.size() != 13)
      throw DatasetError("per-case CSV line " + std::to_string(line_no) + ": expected 13 fields");
    try {
      CaseRow r;
      r.camera = f[0];
      r.method = f[1];
      r.classifier = f[2];
      r.size = std::stoi(f[3]);
      r.seed = std::stoull(f[4]);
      if (!f[5].empty()) {
        r.counts = ConfusionCounts{std::stol(f[5]), std::stol(f[6]), std::stol(f[7]), std::stol(f[8])};
        // Metrics are recomputed from the exact counts, not the rounded text.
        r.metrics = compute_metrics(*r.counts);
      }
      if (!f[12].empty()) r.auc = std::stod(f[12]);
      parse_camera(r.camera);
      parse_method(r.method);
      parse_classifier_kind(r.classifier);
      rows.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw DatasetError("per-case CSV line " + std::to_string(line_no) + ": malformed number");
    }
  }
  if (!header_seen) throw DatasetError("per-case CSV is missing its header");
  return rows;
}

void write_summary_csv(std::ostream& out, std::span<const SummaryRow> rows,
                       const std::string& header) {
  if (!header.empty()) out << "# " << header << '\n';
  out << "size,camera,method,classifier,accuracy,sensitivity,specificity,auc\n";
  for (const auto& r : rows) {
    out << r.size << ',' << to_string(r.camera) << ',' << to_string(r.method) << ','
        << to_string(r.classifier) << ',' << format_metric(r.accuracy) << ','
        << format_metric(r.sensitivity) << ',' << format_metric(r.specificity) << ','
        << (r.auc ? format_metric(*r.auc) : "") << '\n';
  }
}

void write_roc_csv(std::ostream& out, const RocCurve& roc) {
  out << "threshold,fpr,tpr\n";
  char buf[96];
  for (const auto& p : roc.points) {
    if (std::isinf(p.threshold))
      std::snprintf(buf, sizeof buf, "inf,%.6f,%.6f\n", p.fpr, p.tpr);
    else
      std::snprintf(buf, sizeof buf, "%.17g,%.6f,%.6f\n", p.threshold, p.fpr, p.tpr);
    out << buf;
  }
}

}  // namespace fbtex
