#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "fbtex/error.hpp"
#include "fbtex/eval.hpp"
#include "fbtex/synth.hpp"
#include "oracles.hpp"

using namespace fbtex;

namespace {

std::vector<Label> balanced(std::size_t per_class) {
  std::vector<Label> y(per_class, Label::DM);
  y.insert(y.end(), per_class, Label::Healthy);
  return y;
}

std::size_t count(std::span<const Label> y, std::span<const std::size_t> idx, Label l) {
  return static_cast<std::size_t>(std::count_if(idx.begin(), idx.end(), [&](auto i) { return y[i] == l; }));
}

const Dataset& synthetic() {
  static const Dataset ds = generate_camera_dataset(50, kAllCameras, 5);
  return ds;
}

const std::vector<CameraData>& prepared() {
  static const std::vector<CameraData> data = prepare_experiment(synthetic(), ExperimentSettings{});
  return data;
}

}  // namespace

TEST_CASE("stratified split sizes") {
  const auto y = balanced(50);
  for (std::uint64_t seed : {0ull, 1ull, 77ull}) {
    const auto s = stratified_split(y, 0.7, seed);
    CHECK(s.train.size() == 70);
    CHECK(s.test.size() == 30);
    CHECK(count(y, s.train, Label::DM) == 35);
    CHECK(count(y, s.test, Label::Healthy) == 15);
    CHECK(std::is_sorted(s.train.begin(), s.train.end()));
    std::set<std::size_t> all(s.train.begin(), s.train.end());
    all.insert(s.test.begin(), s.test.end());
    CHECK(all.size() == 100);
  }
  const auto y40 = balanced(20);
  const auto s40 = stratified_split(y40, 0.7, 3);
  CHECK(s40.train.size() == 28);
  CHECK(s40.test.size() == 12);
  CHECK(count(y40, s40.test, Label::DM) == 6);

  const auto a = stratified_split(y, 0.7, 5), b = stratified_split(y, 0.7, 5);
  CHECK(a.train == b.train);
  CHECK(a.test == b.test);
}

TEST_CASE("every sample reaches the test side for some seed") {
  const auto y = balanced(5);
  std::set<std::size_t> seen;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto s = stratified_split(y, 0.7, seed);
    seen.insert(s.test.begin(), s.test.end());
  }
  CHECK(seen.size() == 10);
}

TEST_CASE("split errors") {
  CHECK_THROWS_AS(stratified_split(std::vector<Label>{Label::DM, Label::DM, Label::Healthy}, 0.7, 1), DatasetError);
  CHECK_THROWS_AS(stratified_split(std::vector<Label>{Label::DM, Label::DM}, 0.7, 1), DatasetError);
}

TEST_CASE("metrics") {
  const auto m = compute_metrics({15, 0, 14, 1});
  CHECK(m.accuracy == doctest::Approx(29.0 / 30.0));
  CHECK(m.sensitivity == 1.0);
  CHECK(m.specificity == doctest::Approx(14.0 / 15.0));
  CHECK(std::fabs(m.accuracy - 0.967) < 1e-3);
  CHECK(std::fabs(m.specificity - 0.933) < 1e-3);

  const auto d = compute_metrics({0, 10, 10, 0});
  CHECK(d.accuracy == 0.5);
  CHECK(d.sensitivity == 0.0);
  CHECK(d.specificity == 1.0);

  CHECK_THROWS_AS(compute_metrics({0, 0, 3, 1}), MetricUndefinedError);
  CHECK_THROWS_AS(compute_metrics({2, 1, 0, 0}), MetricUndefinedError);

  std::mt19937_64 g(61);
  for (int t = 0; t < 1000; ++t) {
    ConfusionCounts c{static_cast<long>(g() % 50), static_cast<long>(g() % 50), static_cast<long>(g() % 50),
                      static_cast<long>(g() % 50)};
    if (c.tp + c.fn == 0 || c.tn + c.fp == 0) continue;
    const auto r = compute_metrics(c);
    const double total = static_cast<double>(c.tp + c.fn + c.tn + c.fp);
    CHECK(r.accuracy == static_cast<double>(c.tp + c.tn) / total);
    CHECK(r.sensitivity == static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn));
    CHECK(r.specificity == static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp));
    if (c.tp + c.fn == c.tn + c.fp)
      CHECK(r.accuracy == doctest::Approx((r.sensitivity + r.specificity) / 2).epsilon(1e-15));
  }
}

TEST_CASE("confusion counts") {
  const std::vector<Label> truth = {Label::DM, Label::DM, Label::Healthy, Label::Healthy, Label::Healthy};
  const std::vector<Label> pred = {Label::DM, Label::Healthy, Label::Healthy, Label::DM, Label::Healthy};
  CHECK(confusion(truth, pred) == ConfusionCounts{1, 1, 2, 1});
  CHECK_THROWS_AS(confusion(truth, std::span(pred).first(2)), ShapeError);
}

TEST_CASE("ROC and AUC") {
  const std::vector<Label> y = {Label::DM, Label::DM, Label::Healthy, Label::Healthy};
  const auto perfect = roc_auc(std::vector<double>{0.9, 0.8, 0.1, 0.2}, y);
  CHECK(perfect.auc == 1.0);
  CHECK(perfect.points.front().fpr == 0.0);
  CHECK(perfect.points.front().tpr == 0.0);
  CHECK(std::isinf(perfect.points.front().threshold));
  CHECK(perfect.points.back().fpr == 1.0);
  CHECK(perfect.points.back().tpr == 1.0);

  std::mt19937_64 g(62);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 2 + g() % 60;
    std::vector<double> s(n);
    std::vector<Label> lab(n);
    std::vector<int> pos(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = t % 2 ? static_cast<double>(g() % 7) : oracle::random_vector(g, 1)[0];
      lab[i] = (i == 0 || (i != 1 && g() % 2)) ? Label::DM : Label::Healthy;
      pos[i] = lab[i] == Label::DM;
    }
    const auto roc = roc_auc(s, lab);
    CHECK(std::fabs(roc.auc - oracle::mann_whitney(s, pos)) <= 1e-12);
    CHECK(roc.auc >= 0.0);
    CHECK(roc.auc <= 1.0);
    for (std::size_t i = 1; i < roc.points.size(); ++i) {
      CHECK(roc.points[i].fpr >= roc.points[i - 1].fpr);
      CHECK(roc.points[i].tpr >= roc.points[i - 1].tpr);
    }
    if (t % 2 == 0) {
      std::vector<double> rev(s);
      for (double& v : rev) v = -v;
      CHECK(roc_auc(rev, lab).auc == doctest::Approx(1.0 - roc.auc).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(roc_auc(std::vector<double>{1.0, 2.0}, std::vector<Label>{Label::DM, Label::DM}),
                  MetricUndefinedError);
  CHECK_THROWS_AS(roc_auc(std::vector<double>{1.0, NAN}, std::vector<Label>{Label::DM, Label::Healthy}),
                  Error);
}

TEST_CASE("run_case on synthetic data") {
  const ExperimentSettings s;
  const CaseSpec spec{Camera::Mp12, MethodId::M2, ClassifierKind::Svm, 100, 42};
  const auto r = run_case(spec, prepared(), s);
  CHECK(r.counts.tp + r.counts.fn == 15);
  CHECK(r.counts.tn + r.counts.fp == 15);
  REQUIRE(r.roc.has_value());
  CHECK(r.chosen_banks.empty());

  const auto again = run_case(spec, prepared(), s);
  CHECK(again.counts == r.counts);
  CHECK(again.roc->auc == r.roc->auc);

  const auto small = run_case({Camera::Mp7, MethodId::M1, ClassifierKind::Knn, 40, 1}, prepared(), s);
  CHECK(small.counts.tp + small.counts.fn == 6);
  CHECK(small.counts.tn + small.counts.fp == 6);
  CHECK_FALSE(small.roc.has_value());

  const auto m4 = run_case({Camera::P720, MethodId::M4, ClassifierKind::Svm, 60, 3}, prepared(), s);
  CHECK(m4.chosen_banks.size() == 3);
  CHECK(m4.counts.tp + m4.counts.fn + m4.counts.tn + m4.counts.fp == 18);

  CHECK_THROWS_AS(run_case({Camera::Mp12, MethodId::M1, ClassifierKind::Svm, 102, 1}, prepared(), s), DatasetError);
  CHECK_THROWS_AS(run_case({Camera::Mp12, MethodId::M1, ClassifierKind::Svm, 41, 1}, prepared(), s), DatasetError);
  CHECK(case_id(spec) == "12mp_m2_svm_100_s42");
}

TEST_CASE("run_case from a dataset equals run_case from prepared data") {
  const ExperimentSettings s;
  Dataset only12;
  for (const auto& smp : synthetic())
    if (smp.camera == Camera::Mp12) only12.push_back(smp);
  const CaseSpec spec{Camera::Mp12, MethodId::M3, ClassifierKind::Knn, 40, 8};
  const auto a = run_case(spec, only12, s);
  const auto b = run_case(spec, prepared(), s);
  CHECK(a.counts == b.counts);
  REQUIRE(a.chosen_banks.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(a.chosen_banks[i].selection.index == b.chosen_banks[i].selection.index);
}

TEST_CASE("an always-DM classifier has sensitivity 1 and specificity 0") {
  // identical rows: every distance ties, so the five lowest training indices (all DM) vote
  Dataset ds = generate_camera_dataset(10, std::vector<Camera>{Camera::Mp12}, 2);
  for (auto& smp : ds) smp.blocks = ds.front().blocks;
  const auto r = run_case({Camera::Mp12, MethodId::M1, ClassifierKind::Knn, 20, 4}, ds, ExperimentSettings{});
  CHECK(r.metrics.sensitivity == 1.0);
  CHECK(r.metrics.specificity == 0.0);
}

TEST_CASE("sweep grid and summary") {
  ExperimentSettings s;
  SweepAxes axes;
  axes.cameras = {Camera::Mp7};
  const auto rep = run_sweep(axes, prepared(), s);
  CHECK(rep.cases.size() == 32);
  CHECK_FALSE(rep.any_failed());
  CHECK(rep.summary.size() == 4);
  CHECK(rep.summary.front().size == 100);

  std::vector<CaseRow> rows;
  for (const auto& c : rep.cases) rows.push_back(to_row(c));
  std::ostringstream csv;
  write_cases_csv(csv, rows, "config_hash=x seed=42");
  std::istringstream in(csv.str());
  const auto back = read_cases_csv(in);
  REQUIRE(back.size() == rows.size());

  // recompute the argmax from the emitted rows
  std::map<int, const CaseRow*> best;
  const auto method_index = [](const std::string& m) { return m[1] - '1'; };
  for (const auto& r : back) {
    auto& b = best[r.size];
    if (!b) {
      b = &r;
      continue;
    }
    const double ra = r.metrics->accuracy, ba = b->metrics->accuracy;
    if (ra > ba || (ra == ba && (method_index(r.method) < method_index(b->method) ||
                                 (r.method == b->method && r.classifier == "svm" && b->classifier == "knn"))))
      b = &r;
  }
  for (const auto& row : rep.summary) {
    const CaseRow* b = best.at(row.size);
    CHECK(std::string(to_string(row.method)) == b->method);
    CHECK(std::string(to_string(row.classifier)) == b->classifier);
    CHECK(format_metric(row.accuracy) == format_metric(b->metrics->accuracy));
  }
  std::ostringstream csv2;
  write_cases_csv(csv2, back, "config_hash=x seed=42");
  CHECK(csv2.str() == csv.str());
}

TEST_CASE("failed cells are recorded without aborting") {
  SweepAxes axes;
  axes.cameras = {Camera::Mp12};
  axes.methods = {MethodId::M1};
  axes.classifiers = {ClassifierKind::Knn};
  axes.sizes = {40, 200};
  const auto rep = run_sweep(axes, prepared(), ExperimentSettings{});
  REQUIRE(rep.cases.size() == 2);
  CHECK_FALSE(rep.cases[0].error.has_value());
  REQUIRE(rep.cases[1].error.has_value());
  CHECK(rep.cases[1].error->find("12mp_m1_knn_200_s42") != std::string::npos);
  CHECK_FALSE(rep.cases[1].error_is_numeric);
  CHECK(rep.any_failed());
  CHECK(rep.summary.size() == 1);
}

TEST_CASE("ROC CSV") {
  std::ostringstream out;
  write_roc_csv(out, roc_auc(std::vector<double>{0.5, -0.5}, std::vector<Label>{Label::DM, Label::Healthy}));
  CHECK(out.str().rfind("threshold,fpr,tpr\ninf,0.000000,0.000000\n", 0) == 0);
}
