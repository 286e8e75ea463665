#include "fbtex/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "fbtex/error.hpp"

namespace fbtex {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed,
                    const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
  std::set<std::string> keys(allowed.begin(), allowed.end());
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!keys.count(it.key()))
      throw ConfigError("unknown config key '" + (where.empty() ? "" : where + ".") + it.key() + "'");
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + where + "." + key + "' has the wrong type");
  }
}

}  // namespace

Config Config::from_json(const json& j) {
  Config c;
  reject_unknown(j, {"filter_bank", "methods", "classifier", "sweep", "seed", "manifest", "rois",
                     "output_dir"},
                 "");
  if (auto fb = j.find("filter_bank"); fb != j.end()) {
    reject_unknown(*fb, {"wavelengths", "orientations_deg", "psi_deg", "gamma", "bandwidth",
                         "texture_mode", "padding", "backend"},
                   "filter_bank");
    read(*fb, "wavelengths", c.bank.wavelengths, "filter_bank");
    read(*fb, "orientations_deg", c.bank.orientations_deg, "filter_bank");
    double psi_deg = c.bank.phase * 180.0 / std::numbers::pi;
    read(*fb, "psi_deg", psi_deg, "filter_bank");
    c.bank.phase = psi_deg * std::numbers::pi / 180.0;
    read(*fb, "gamma", c.bank.aspect_ratio, "filter_bank");
    read(*fb, "bandwidth", c.bank.bandwidth, "filter_bank");
    std::string s;
    if (s = std::string(to_string(c.texture.mode)), read(*fb, "texture_mode", s, "filter_bank"); true)
      c.texture.mode = parse_texture_mode(s);
    s = std::string(to_string(c.texture.padding));
    read(*fb, "padding", s, "filter_bank");
    c.texture.padding = parse_padding(s);
    s = std::string(to_string(c.texture.backend));
    read(*fb, "backend", s, "filter_bank");
    c.texture.backend = parse_backend(s);
  }
  if (auto m = j.find("methods"); m != j.end()) {
    reject_unknown(*m, {"cheek", "selection_grid"}, "methods");
    std::string cheek(to_string(c.cheek));
    read(*m, "cheek", cheek, "methods");
    c.cheek = parse_cheek_mode(cheek);
    if (auto g = m->find("selection_grid"); g != m->end()) {
      reject_unknown(*g, {"ladder_min", "ladder_max", "window", "orientation_count",
                          "orientation_step_deg", "orientation_offsets_deg"},
                     "methods.selection_grid");
      const std::string w = "methods.selection_grid";
      read(*g, "ladder_min", c.grid.ladder_min, w);
      read(*g, "ladder_max", c.grid.ladder_max, w);
      read(*g, "window", c.grid.window, w);
      read(*g, "orientation_count", c.grid.orientation_count, w);
      read(*g, "orientation_step_deg", c.grid.orientation_step_deg, w);
      read(*g, "orientation_offsets_deg", c.grid.orientation_offsets_deg, w);
    }
  }
  if (auto k = j.find("classifier"); k != j.end()) {
    reject_unknown(*k, {"k", "C", "kernel", "gamma", "tolerance"}, "classifier");
    read(*k, "k", c.knn_k, "classifier");
    read(*k, "C", c.svm.C, "classifier");
    std::string kernel(to_string(c.svm.kernel));
    read(*k, "kernel", kernel, "classifier");
    c.svm.kernel = parse_kernel_type(kernel);
    if (auto g = k->find("gamma"); g != k->end() && !g->is_null()) {
      double gamma = 0;
      read(*k, "gamma", gamma, "classifier");
      c.svm.gamma = gamma;
    }
    read(*k, "tolerance", c.svm.tolerance, "classifier");
  }
  if (auto s = j.find("sweep"); s != j.end()) {
    reject_unknown(*s, {"cameras", "methods", "classifiers", "sizes", "repeats", "train_ratio"},
                   "sweep");
    if (s->contains("cameras")) {
      std::vector<std::string> v;
      read(*s, "cameras", v, "sweep");
      c.axes.cameras.clear();
      for (const auto& x : v) c.axes.cameras.push_back(parse_camera(x));
    }
    if (s->contains("methods")) {
      std::vector<std::string> v;
      read(*s, "methods", v, "sweep");
      c.axes.methods.clear();
      for (const auto& x : v) c.axes.methods.push_back(parse_method(x));
    }
    if (s->contains("classifiers")) {
      std::vector<std::string> v;
      read(*s, "classifiers", v, "sweep");
      c.axes.classifiers.clear();
      for (const auto& x : v) c.axes.classifiers.push_back(parse_classifier_kind(x));
    }
    read(*s, "sizes", c.axes.sizes, "sweep");
    read(*s, "repeats", c.axes.repeats, "sweep");
    read(*s, "train_ratio", c.train_ratio, "sweep");
  }
  read(j, "seed", c.axes.master_seed, "");
  read(j, "manifest", c.manifest, "");
  read(j, "rois", c.rois, "");
  read(j, "output_dir", c.output_dir, "");

  // Fail fast on values the modules would reject later.
  make_filter_bank(c.bank);
  make_selection_grid(c.grid, c.bank);
  if (c.knn_k < 1 || c.knn_k % 2 == 0) throw ConfigError("classifier.k must be a positive odd integer");
  if (!(c.svm.C > 0)) throw ConfigError("classifier.C must be > 0");
  if (c.svm.gamma && !(*c.svm.gamma > 0)) throw ConfigError("classifier.gamma must be > 0");
  if (c.axes.repeats < 1) throw ConfigError("sweep.repeats must be >= 1");
  if (!(c.train_ratio > 0 && c.train_ratio < 1)) throw ConfigError("sweep.train_ratio must lie in (0,1)");
  return c;
}

json Config::to_json() const {
  json cameras = json::array(), methods = json::array(), classifiers = json::array();
  for (auto x : axes.cameras) cameras.push_back(to_string(x));
  for (auto x : axes.methods) methods.push_back(to_string(x));
  for (auto x : axes.classifiers) classifiers.push_back(to_string(x));
  return {
      {"filter_bank",
       {{"wavelengths", bank.wavelengths},
        {"orientations_deg", bank.orientations_deg},
        {"psi_deg", bank.phase * 180.0 / std::numbers::pi},
        {"gamma", bank.aspect_ratio},
        {"bandwidth", bank.bandwidth},
        {"texture_mode", to_string(texture.mode)},
        {"padding", to_string(texture.padding)},
        {"backend", to_string(texture.backend)}}},
      {"methods",
       {{"cheek", to_string(cheek)},
        {"selection_grid",
         {{"ladder_min", grid.ladder_min},
          {"ladder_max", grid.ladder_max},
          {"window", grid.window},
          {"orientation_count", grid.orientation_count},
          {"orientation_step_deg", grid.orientation_step_deg},
          {"orientation_offsets_deg", grid.orientation_offsets_deg}}}}},
      {"classifier",
       {{"k", knn_k},
        {"C", svm.C},
        {"kernel", to_string(svm.kernel)},
        {"gamma", svm.gamma ? json(*svm.gamma) : json(nullptr)},
        {"tolerance", svm.tolerance}}},
      {"sweep",
       {{"cameras", cameras},
        {"methods", methods},
        {"classifiers", classifiers},
        {"sizes", axes.sizes},
        {"repeats", axes.repeats},
        {"train_ratio", train_ratio}}},
      {"seed", axes.master_seed},
      {"manifest", manifest},
      {"rois", rois},
      {"output_dir", output_dir}};
}

std::string fnv1a_hex(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : data) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string Config::hash() const {
  const json j = to_json();
  const json relevant = {{"filter_bank", j["filter_bank"]},
                         {"methods", j["methods"]},
                         {"classifier", j["classifier"]},
                         {"sweep", j["sweep"]}};
  return fnv1a_hex(relevant.dump());
}

std::string Config::feature_hash() const {
  const json j = to_json();
  const json relevant = {{"filter_bank", j["filter_bank"]}, {"methods", j["methods"]}};
  return fnv1a_hex(relevant.dump());
}

ExperimentSettings Config::experiment() const {
  ExperimentSettings s;
  s.uniform_bank = bank;
  s.selection_grid = make_selection_grid(grid, bank);
  s.texture = texture;
  s.knn_k = knn_k;
  s.svm = svm;
  s.train_ratio = train_ratio;
  return s;
}

Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
  return Config::from_json(j);
}

}  // namespace fbtex
