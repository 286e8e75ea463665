#include "fbtex/cli.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "fbtex/error.hpp"
#include "fbtex/synth.hpp"

namespace fbtex {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kManifestHeader = "image_path,subject_id,camera,label";

std::string trim(std::string s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string f;
  while (std::getline(ss, f, ',')) out.push_back(trim(f));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string read_text(const fs::path& p, const char* what) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DatasetError(std::string("cannot open ") + what + " " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  out << text;
  if (!out) throw Error("write failed: " + p.string());
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConvergenceError*>(&e) || dynamic_cast<const MetricUndefinedError*>(&e))
    return 2;
  return 1;
}

struct Options {
  std::string config;
  std::string manifest;
  std::string out;
  std::string store;
  std::string in;
  std::uint64_t seed = 0;
  std::vector<std::string> cameras;
  std::vector<std::string> methods;
  std::vector<std::string> classifiers;
  std::vector<int> sizes;
  int repeats = 1;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* repeats_opt = nullptr;
};

Config resolve_config(const Options& o) {
  Config c = o.config.empty() ? Config{} : load_config(o.config);
  if (!o.manifest.empty()) c.manifest = o.manifest;
  if (!o.out.empty()) c.output_dir = o.out;
  if (o.seed_opt && o.seed_opt->count()) c.axes.master_seed = o.seed;
  if (o.repeats_opt && o.repeats_opt->count()) {
    if (o.repeats < 1) throw ConfigError("--repeats must be >= 1");
    c.axes.repeats = o.repeats;
  }
  if (!o.cameras.empty()) {
    c.axes.cameras.clear();
    for (const auto& s : o.cameras) c.axes.cameras.push_back(parse_camera(s));
  }
  if (!o.methods.empty()) {
    c.axes.methods.clear();
    for (const auto& s : o.methods) c.axes.methods.push_back(parse_method(s));
  }
  if (!o.classifiers.empty()) {
    c.axes.classifiers.clear();
    for (const auto& s : o.classifiers) c.axes.classifiers.push_back(parse_classifier_kind(s));
  }
  if (!o.sizes.empty()) c.axes.sizes = o.sizes;
  return c;
}

std::string report_header(const Config& c) {
  return "config_hash=" + c.hash() + " seed=" + std::to_string(c.axes.master_seed);
}

fs::path rois_path(const Config& c) {
  if (!c.rois.empty()) return c.rois;
  return fs::path(c.manifest).parent_path() / "rois.json";
}

void report_row_errors(const ManifestLoad& load, std::ostream& err) {
  for (const auto& e : load.errors) err << "error: " << e << '\n';
  err << load.errors.size() << " manifest row(s) failed\n";
}

std::vector<CameraData> load_experiment(const Config& c, const Options& o, std::ostream& err,
                                        bool& ok) {
  ok = true;
  if (!o.store.empty()) {
    json store;
    try {
      store = json::parse(read_text(o.store, "feature store"));
    } catch (const json::parse_error& e) {
      throw DatasetError("feature store " + o.store + " is not valid JSON: " + e.what());
    }
    return camera_data_from_store(store, c);
  }
  if (c.manifest.empty()) throw ConfigError("no dataset: pass --manifest or --store");
  const ManifestLoad load = load_manifest(c.manifest, rois_path(c), c.cheek);
  if (!load.errors.empty()) {
    report_row_errors(load, err);
    ok = false;
    return {};
  }
  return prepare_experiment(load.dataset, c.experiment());
}

int failure_code(const SweepReport& report, std::ostream& err) {
  bool input = false;
  for (const auto& c : report.cases)
    if (c.error) {
      err << "error: " << *c.error << '\n';
      if (!c.error_is_numeric) input = true;
    }
  if (!report.any_failed()) return 0;
  return input ? 1 : 2;
}

json chosen_banks_json(const SweepReport& report) {
  json banks = json::array();
  for (const auto& c : report.cases)
    for (const auto& choice : c.chosen_banks)
      banks.push_back({{"case", case_id(c.spec)},
                       {"region", to_string(choice.region)},
                       {"index", choice.selection.index},
                       {"accuracy", choice.selection.accuracy},
                       {"bank", bank_config_to_json(choice.selection.config)}});
  return banks;
}

int cmd_grid(const Options& o, bool full, std::ostream& out, std::ostream& err) {
  const Config c = resolve_config(o);
  bool ok = true;
  const auto data = load_experiment(c, o, err, ok);
  if (!ok) return 1;
  const SweepReport report = run_sweep(c.axes, data, c.experiment());

  const fs::path dir = c.output_dir;
  fs::create_directories(dir);
  const std::string header = report_header(c);
  std::vector<CaseRow> rows;
  for (const auto& r : report.cases) rows.push_back(to_row(r));
  std::ostringstream cases;
  write_cases_csv(cases, rows, header);
  write_text(dir / "cases.csv", cases.str());
  for (const auto& r : report.cases) {
    if (!r.roc) continue;
    std::ostringstream roc;
    write_roc_csv(roc, *r.roc);
    write_text(dir / ("roc_" + case_id(r.spec) + ".csv"), roc.str());
  }
  const json banks = chosen_banks_json(report);
  if (full || !banks.empty())
    write_text(dir / "banks.json",
               json{{"config_hash", c.hash()}, {"seed", c.axes.master_seed}, {"banks", banks}}
                       .dump(2) +
                   "\n");
  if (full) {
    std::ostringstream summary;
    write_summary_csv(summary, report.summary, header);
    write_text(dir / "summary.csv", summary.str());
    json failures = json::array();
    for (const auto& r : report.cases)
      if (r.error) failures.push_back({{"case", case_id(r.spec)}, {"error", *r.error}});
    const json rep = {{"config", c.to_json()},
                      {"config_hash", c.hash()},
                      {"seed", c.axes.master_seed},
                      {"cases", report.cases.size()},
                      {"summary_rows", report.summary.size()},
                      {"failures", failures}};
    write_text(dir / "report.json", rep.dump(2) + "\n");
  }
  out << "wrote " << report.cases.size() << " case(s) to " << (dir / "cases.csv").string() << '\n';
  return failure_code(report, err);
}

int cmd_extract(const Options& o, std::ostream& out, std::ostream& err) {
  const Config c = resolve_config(o);
  if (c.manifest.empty()) throw ConfigError("no dataset: pass --manifest");
  std::vector<MethodId> methods{MethodId::M1, MethodId::M2};
  if (!o.methods.empty()) methods = c.axes.methods;
  const ManifestLoad load = load_manifest(c.manifest, rois_path(c), c.cheek);
  if (!load.errors.empty()) {
    report_row_errors(load, err);
    return 1;
  }
  const json store = make_feature_store(load, c, methods);
  const fs::path dir = c.output_dir;
  fs::create_directories(dir);
  write_text(dir / "features.json", store.dump() + "\n");
  out << "wrote " << load.dataset.size() << " sample(s) to " << (dir / "features.json").string()
      << '\n';
  return 0;
}

int cmd_synth(const Options& o, std::ostream& out) {
  const Config c = resolve_config(o);
  int size = 100;
  if (!o.sizes.empty()) {
    if (o.sizes.size() != 1) throw ConfigError("synth takes a single --size");
    size = o.sizes.front();
  }
  if (size < 4 || size % 2 != 0) throw ConfigError("--size must be an even number >= 4");
  const Dataset ds = generate_camera_dataset(size / 2, c.axes.cameras, c.axes.master_seed);
  const fs::path manifest = write_synthetic_dataset(ds, c.output_dir);
  out << "wrote " << ds.size() << " sample(s), manifest " << manifest.string() << '\n';
  return 0;
}

int cmd_report(const Options& o, std::ostream& out) {
  if (o.in.empty()) throw ConfigError("report needs --in <cases.csv>");
  const std::string text = read_text(o.in, "per-case CSV");
  std::string header;
  if (text.rfind("# ", 0) == 0) header = text.substr(2, text.find('\n') - 2);
  std::istringstream in(text);
  const auto rows = read_cases_csv(in);
  const auto summary = summarize(rows);
  const fs::path dir = o.out.empty() ? fs::path(o.in).parent_path() : fs::path(o.out);
  if (!dir.empty()) fs::create_directories(dir);
  std::ostringstream ss;
  write_summary_csv(ss, summary, header);
  write_text(dir / "summary.csv", ss.str());
  out << "wrote " << summary.size() << " summary row(s) to " << (dir / "summary.csv").string()
      << '\n';
  return 0;
}

}  // namespace

ManifestLoad load_manifest(const fs::path& manifest, const fs::path& rois, CheekMode cheek) {
  std::istringstream in(read_text(manifest, "manifest"));
  ManifestLoad load;
  const fs::path base = manifest.parent_path();
  std::optional<std::map<std::string, RoiEntry>> roi_map;
  std::set<std::pair<Camera, std::string>> seen;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    if (!header_seen) {
      if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
      if (line != kManifestHeader)
        throw ManifestError("manifest " + manifest.string() + " must start with the header '" +
                            kManifestHeader + "'");
      header_seen = true;
      continue;
    }
    const std::string where = "line " + std::to_string(line_no);
    const auto f = split_fields(line);
    if (f.size() != 4) {
      load.errors.push_back(where + ": expected 4 fields, got " + std::to_string(f.size()));
      continue;
    }
    if (!roi_map) {
      roi_map.emplace();
      for (auto& [path, entry] : parse_roi_manifest(read_text(rois, "roi manifest")))
        roi_map->emplace(path, std::move(entry));
    }
    try {
      Sample s;
      s.subject_id = f[1];
      if (s.subject_id.empty()) throw ManifestError("empty subject_id");
      s.camera = parse_camera(f[2]);
      s.label = parse_label(f[3]);
      if (!seen.insert({s.camera, s.subject_id}).second)
        throw ManifestError("duplicate subject '" + s.subject_id + "' for camera " + f[2]);
      auto it = roi_map->find(f[0]);
      if (it == roi_map->end()) throw ManifestError("no ROI entry for " + f[0]);
      const fs::path image = fs::path(f[0]).is_absolute() ? fs::path(f[0]) : base / f[0];
      s.blocks = load_facial_blocks(image, it->second, cheek);
      load.dataset.push_back(std::move(s));
      load.image_paths.push_back(f[0]);
    } catch (const Error& e) {
      load.errors.push_back(where + " (" + f[0] + "): " + e.what());
    }
  }
  return load;
}

json make_feature_store(const ManifestLoad& load, const Config& config,
                        std::span<const MethodId> methods) {
  for (MethodId m : methods)
    if (per_block_banks(m))
      throw ConfigError(std::string(to_string(m)) +
                        " vectors depend on per-case bank selection; the store keeps per-kernel "
                        "statistics for it instead");
  const ExperimentSettings settings = config.experiment();
  const auto data = prepare_experiment(load.dataset, settings);
  const std::array<BankConfig, 3> uniform{settings.uniform_bank, settings.uniform_bank,
                                          settings.uniform_bank};

  std::map<Camera, std::size_t> next;
  json samples = json::array();
  for (std::size_t i = 0; i < load.dataset.size(); ++i) {
    const Sample& s = load.dataset[i];
    const CameraData* cam = nullptr;
    for (const auto& d : data)
      if (d.camera == s.camera) cam = &d;
    const std::size_t index = next[s.camera]++;
    json features = json::object();
    for (MethodId m : methods)
      features[std::string(to_string(m))] = table_features(cam->table, index, m, uniform);
    samples.push_back({{"image_path", load.image_paths.at(i)},
                       {"subject_id", s.subject_id},
                       {"camera", to_string(s.camera)},
                       {"label", to_string(s.label)},
                       {"features", features}});
  }
  json method_names = json::array();
  for (MethodId m : methods) method_names.push_back(to_string(m));
  json tables = json::object();
  for (const auto& d : data) tables[std::string(to_string(d.camera))] = d.table.to_json();
  return {{"version", kStoreVersion},
          {"config_hash", config.hash()},
          {"feature_hash", config.feature_hash()},
          {"methods", method_names},
          {"samples", samples},
          {"cameras", tables}};
}

std::vector<CameraData> camera_data_from_store(const json& store, const Config& config) {
  try {
    if (store.at("version").get<int>() != kStoreVersion)
      throw DatasetError("unsupported feature store version " + store.at("version").dump());
    if (store.at("feature_hash").get<std::string>() != config.feature_hash())
      throw ConfigError(
          "feature store was extracted with a different filter bank or method configuration");
    std::vector<CameraData> out;
    for (Camera cam : kAllCameras) {
      const std::string name(to_string(cam));
      if (!store.at("cameras").contains(name)) continue;
      std::vector<std::string> ids;
      std::vector<Label> labels;
      for (const auto& s : store.at("samples")) {
        if (parse_camera(s.at("camera").get<std::string>()) != cam) continue;
        ids.push_back(s.at("subject_id").get<std::string>());
        labels.push_back(parse_label(s.at("label").get<std::string>()));
      }
      auto table = KernelStatsTable::from_json(store.at("cameras").at(name));
      if (table.image_count() != ids.size() * kRegions.size())
        throw DatasetError("feature store table for " + name + " does not match its samples");
      out.push_back({cam, std::move(ids), std::move(labels), std::move(table)});
    }
    return out;
  } catch (const json::exception& e) {
    throw DatasetError(std::string("malformed feature store: ") + e.what());
  }
}

int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Facial-block Gabor texture features and classification", "fbtex"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "Output directory");
  };
  auto data_flags = [&](CLI::App* sub) {
    sub->add_option("--manifest", o.manifest, "Dataset manifest CSV");
  };
  auto axis_flags = [&](CLI::App* sub) {
    sub->add_option("--camera", o.cameras, "Camera(s): 12mp, 7mp, 720p")->delimiter(',');
    sub->add_option("--method", o.methods, "Method(s): m1..m4")->delimiter(',');
    sub->add_option("--classifier", o.classifiers, "Classifier(s): svm, knn")->delimiter(',');
    sub->add_option("--size", o.sizes, "Dataset size(s)")->delimiter(',');
  };
  std::vector<CLI::Option*> seed_opts, repeat_opts;
  auto seed_flag = [&](CLI::App* sub) {
    seed_opts.push_back(sub->add_option("--seed", o.seed, "Master seed"));
  };
  auto repeat_flag = [&](CLI::App* sub) {
    repeat_opts.push_back(sub->add_option("--repeats", o.repeats, "Seeds per case"));
  };

  auto* extract = app.add_subcommand("extract", "Extract features into a feature store");
  common(extract);
  data_flags(extract);
  extract->add_option("--method", o.methods, "Stored method vectors: m1, m2")->delimiter(',');

  auto* eval = app.add_subcommand("eval", "Evaluate selected cases");
  auto* sweep = app.add_subcommand("sweep", "Run the full case grid with reports");
  for (auto* sub : {eval, sweep}) {
    common(sub);
    data_flags(sub);
    sub->add_option("--store", o.store, "Feature store from extract")->check(CLI::ExistingFile);
    axis_flags(sub);
    seed_flag(sub);
    repeat_flag(sub);
  }

  auto* synth = app.add_subcommand("synth", "Write a synthetic dataset");
  common(synth);
  synth->add_option("--camera", o.cameras, "Camera(s)")->delimiter(',');
  synth->add_option("--size", o.sizes, "Samples per camera (even)");
  seed_flag(synth);

  auto* report = app.add_subcommand("report", "Re-render the summary from a per-case CSV");
  report->add_option("--in", o.in, "Per-case CSV")->required();
  report->add_option("--out", o.out, "Output directory");

  std::vector<std::string> rest(args.begin() + (args.empty() ? 0 : 1), args.end());
  std::reverse(rest.begin(), rest.end());
  try {
    app.parse(rest);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  auto used = [](const std::vector<CLI::Option*>& opts) -> CLI::Option* {
    for (auto* opt : opts)
      if (opt->count()) return opt;
    return opts.front();
  };
  o.seed_opt = used(seed_opts);
  o.repeats_opt = used(repeat_opts);

  try {
    if (*extract) return cmd_extract(o, out, err);
    if (*eval) return cmd_grid(o, false, out, err);
    if (*sweep) return cmd_grid(o, true, out, err);
    if (*synth) return cmd_synth(o, out);
    return cmd_report(o, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace fbtex
