#include "bfa/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "bfa/data.hpp"
#include "bfa/error.hpp"
#include "bfa/format.hpp"
#include "bfa/parallel.hpp"
#include "bfa/stats.hpp"

namespace bfa {

using json = nlohmann::json;
namespace fs = std::filesystem;

const char* const kStudyKinds[4] = {"transfer", "cosine", "distance", "robustness"};

std::string tool_version() { return BFA_VERSION; }

namespace {

// ---------------------------------------------------------------------------
// Schema reading

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw InvalidConfig("config: " + path + ": " + what);
}

class Obj {
 public:
  Obj(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_, "expected an object");
  }

  bool has(const std::string& k) const { return j_.contains(k); }
  std::string at(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }

  const json* get(const std::string& k) {
    seen_.insert(k);
    auto it = j_.find(k);
    return it == j_.end() ? nullptr : &*it;
  }
  const json& need(const std::string& k) {
    const json* v = get(k);
    if (!v) fail(at(k), "required");
    return *v;
  }

  std::string str(const std::string& k, std::string def) {
    const json* v = get(k);
    if (!v) return def;
    if (!v->is_string()) fail(at(k), "expected a string");
    return v->get<std::string>();
  }
  double num(const std::string& k, double def) {
    const json* v = get(k);
    if (!v) return def;
    if (!v->is_number()) fail(at(k), "expected a number");
    const double d = v->get<double>();
    if (!std::isfinite(d)) fail(at(k), "expected a finite number");
    return d;
  }
  std::int64_t integer(const std::string& k, std::int64_t def) {
    const json* v = get(k);
    if (!v) return def;
    if (!v->is_number_integer()) fail(at(k), "expected an integer");
    return v->get<std::int64_t>();
  }
  std::size_t count(const std::string& k, std::size_t def) {
    const auto v = integer(k, static_cast<std::int64_t>(def));
    if (v < 0) fail(at(k), "must be non-negative");
    return static_cast<std::size_t>(v);
  }
  std::uint64_t seed(const std::string& k, std::uint64_t def) {
    const json* v = get(k);
    if (!v) return def;
    if (!v->is_number_unsigned()) fail(at(k), "expected a non-negative integer");
    return v->get<std::uint64_t>();
  }
  bool boolean(const std::string& k, bool def) {
    const json* v = get(k);
    if (!v) return def;
    if (!v->is_boolean()) fail(at(k), "expected true or false");
    return v->get<bool>();
  }
  std::optional<double> auto_num(const std::string& k, std::optional<double> def) {
    const json* v = get(k);
    if (!v) return def;
    if (v->is_string() && v->get<std::string>() == "auto") return std::nullopt;
    if (!v->is_number()) fail(at(k), "expected a number or \"auto\"");
    return v->get<double>();
  }
  const json& array(const std::string& k) {
    const json& v = need(k);
    if (!v.is_array()) fail(at(k), "expected an array");
    return v;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) fail(at(it.key()), "unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename T, typename F>
T parse_enum(const std::string& path, const std::string& name, F&& from_string) {
  try {
    return from_string(name);
  } catch (const Error&) {
    fail(path, "unknown value \"" + name + "\"");
  }
}

std::vector<std::string> string_list(Obj& o, const std::string& k, std::vector<std::string> def) {
  if (!o.has(k)) {
    o.get(k);
    return def;
  }
  std::vector<std::string> out;
  const json& a = o.array(k);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_string()) fail(o.at(k) + "[" + std::to_string(i) + "]", "expected a string");
    out.push_back(a[i].get<std::string>());
  }
  return out;
}

bool valid_id(const std::string& id) {
  if (id.empty() || id.size() > 64) return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
           c == '-' || c == '.';
  }) && id != "." && id != "..";
}

DatasetSpec read_dataset(const json& j) {
  Obj o(j, "dataset");
  DatasetSpec d;
  d.kind = o.str("kind", "");
  if (d.kind != "blobs" && d.kind != "moons" && d.kind != "rings" && d.kind != "idx") {
    fail("dataset.kind", "expected blobs, moons, rings or idx");
  }
  d.seed = o.seed("seed", d.seed);
  d.test_fraction = o.num("test_fraction", d.test_fraction);
  if (!(d.test_fraction > 0.0 && d.test_fraction < 1.0)) fail("dataset.test_fraction", "must lie in (0, 1)");
  if (d.kind == "idx") {
    d.images = o.str("images", "");
    d.labels = o.str("labels", "");
    if (d.images.empty() || d.labels.empty()) fail("dataset", "idx needs images and labels paths");
    d.max_items = o.count("max_items", 0);
    d.downscale = o.count("downscale", 1);
    if (d.downscale < 1) fail("dataset.downscale", "must be at least 1");
  } else {
    d.n_per_class = o.count("n_per_class", d.n_per_class);
    if (d.n_per_class < 2) fail("dataset.n_per_class", "must be at least 2");
    if (d.kind != "moons") {
      d.classes = o.count("classes", d.kind == "rings" ? 3 : d.classes);
      if (d.classes < 2) fail("dataset.classes", "must be at least 2");
    } else {
      d.classes = 2;
    }
    if (d.kind == "blobs") {
      d.dim = o.count("dim", d.dim);
      if (d.dim < 1) fail("dataset.dim", "must be at least 1");
      d.spread = o.num("spread", d.spread);
      if (!(d.spread > 0.0)) fail("dataset.spread", "must be positive");
    } else {
      d.dim = 2;
      d.noise = o.num("noise", d.kind == "rings" ? 0.3 : d.noise);
      if (d.noise < 0.0) fail("dataset.noise", "must be non-negative");
    }
  }
  o.finish();
  return d;
}

ModelSpec read_model(const json& j, const std::string& path) {
  Obj o(j, path);
  ModelSpec m;
  m.id = o.str("id", "");
  if (!valid_id(m.id)) fail(o.at("id"), "expected 1-64 characters from [A-Za-z0-9_.-]");
  if (o.has("hidden")) {
    m.hidden.clear();
    const json& a = o.array("hidden");
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (!a[i].is_number_unsigned() || a[i].get<std::uint64_t>() == 0) {
        fail(o.at("hidden") + "[" + std::to_string(i) + "]", "expected a positive integer");
      }
      m.hidden.push_back(a[i].get<std::size_t>());
    }
  } else {
    o.get("hidden");
  }
  m.activation = parse_enum<Activation>(o.at("activation"), o.str("activation", "relu"),
                                        activation_from_string);
  m.seed = o.seed("seed", 0);
  m.hyper.epochs = static_cast<int>(o.integer("epochs", m.hyper.epochs));
  m.hyper.batch_size = static_cast<int>(o.integer("batch_size", m.hyper.batch_size));
  m.hyper.learning_rate = o.num("learning_rate", m.hyper.learning_rate);
  m.hyper.momentum = o.num("momentum", m.hyper.momentum);
  m.hyper.noise_augment_sigma = o.num("noise_sigma", 0.0);
  if (m.hyper.epochs < 1) fail(o.at("epochs"), "must be at least 1");
  if (m.hyper.batch_size < 1) fail(o.at("batch_size"), "must be at least 1");
  if (!(m.hyper.learning_rate > 0.0)) fail(o.at("learning_rate"), "must be positive");
  if (m.hyper.momentum < 0.0 || m.hyper.momentum >= 1.0) fail(o.at("momentum"), "must lie in [0, 1)");
  if (m.hyper.noise_augment_sigma < 0.0) fail(o.at("noise_sigma"), "must be non-negative");
  m.path = o.str("path", "");
  if (!m.path.empty() && !fs::is_regular_file(m.path)) fail(o.at("path"), "no such file: " + m.path);
  o.finish();
  return m;
}

AttackSpec read_attack(const json& j, const std::string& path) {
  Obj o(j, path);
  AttackSpec a;
  const std::string kind = o.str("kind", "");
  a.kind = parse_enum<AttackKind>(o.at("kind"), kind, attack_kind_from_string);
  a.name = o.str("name", kind);
  if (!valid_id(a.name)) fail(o.at("name"), "expected 1-64 characters from [A-Za-z0-9_.-]");
  a.epsilon = o.num("epsilon", a.epsilon);
  a.iterations = static_cast<int>(o.integer("iterations", a.iterations));
  if (o.has("step")) a.step = o.num("step", 0.0);
  else o.get("step");
  a.mu = o.num("mu", a.mu);
  const std::string policy = o.str("source_policy", "current_prediction");
  if (policy == "current_prediction") a.source_policy = SourcePolicy::kCurrentPrediction;
  else if (policy == "ground_truth") a.source_policy = SourcePolicy::kGroundTruth;
  else fail(o.at("source_policy"), "expected current_prediction or ground_truth");
  o.finish();
  return a;
}

void validate_attack_values(const AttackSpec& a, const std::string& path) {
  AttackConfig c;
  c.epsilon = a.epsilon;
  c.iterations = a.iterations;
  c.step = a.step;
  c.mu = a.mu;
  if (uses_boundary(a.kind)) c.boundary = BoundaryConfig{};
  try {
    c.validate(a.kind);
  } catch (const InvalidConfig& e) {
    fail(path, e.what());
  }
}

const char* policy_name(SourcePolicy p) {
  return p == SourcePolicy::kGroundTruth ? "ground_truth" : "current_prediction";
}

json auto_or(const std::optional<double>& v) { return v ? json(*v) : json("auto"); }

json to_json(const ExperimentConfig& c) {
  json j;
  j["seed"] = c.seed;
  const auto& d = c.dataset;
  json ds{{"kind", d.kind}, {"seed", d.seed}, {"test_fraction", d.test_fraction}};
  if (d.kind == "idx") {
    ds["images"] = d.images;
    ds["labels"] = d.labels;
    ds["max_items"] = d.max_items;
    ds["downscale"] = d.downscale;
  } else {
    ds["n_per_class"] = d.n_per_class;
    if (d.kind != "moons") ds["classes"] = d.classes;
    if (d.kind == "blobs") {
      ds["dim"] = d.dim;
      ds["spread"] = d.spread;
    } else {
      ds["noise"] = d.noise;
    }
  }
  j["dataset"] = ds;
  j["models"] = json::array();
  for (const auto& m : c.models) {
    json mj{{"id", m.id},
            {"hidden", m.hidden},
            {"activation", to_string(m.activation)},
            {"seed", m.seed},
            {"epochs", m.hyper.epochs},
            {"batch_size", m.hyper.batch_size},
            {"learning_rate", m.hyper.learning_rate},
            {"momentum", m.hyper.momentum},
            {"noise_sigma", m.hyper.noise_augment_sigma}};
    if (!m.path.empty()) mj["path"] = m.path;
    j["models"].push_back(mj);
  }
  j["pairs"] = json::array();
  for (const auto& p : c.pairs) {
    j["pairs"].push_back({{"id", p.id}, {"substitute", p.substitute}, {"victim", p.victim}});
  }
  j["attacks"] = json::array();
  for (const auto& a : c.attacks) {
    json aj{{"name", a.name},         {"kind", to_string(a.kind)}, {"epsilon", a.epsilon},
            {"iterations", a.iterations}, {"mu", a.mu}, {"source_policy", policy_name(a.source_policy)}};
    if (a.step) aj["step"] = *a.step;
    j["attacks"].push_back(aj);
  }
  j["attack_model"] = c.attack_model;
  j["boundary"] = {{"sigma", auto_or(c.boundary.sigma)},
                   {"gamma", c.boundary.gamma},
                   {"t_max", c.boundary.t_max},
                   {"n_points", c.boundary.n_points}};
  j["inputs"] = {{"split", c.inputs.split}, {"max", c.inputs.max}};
  j["studies"] = c.studies;
  json protocols = json::array();
  for (auto p : c.cosine.protocols) protocols.push_back(to_string(p));
  j["cosine"] = {{"protocols", protocols}, {"cap", c.cosine.cap}, {"tol", c.cosine.tol}};
  json dirs = json::array();
  for (auto s : c.distance.directions) dirs.push_back(to_string(s));
  j["distance"] = {{"directions", dirs}, {"cap", c.distance.cap}, {"tol", c.distance.tol}};
  const auto& r = c.robustness;
  j["robustness"] = {{"models", r.models}, {"sigma", auto_or(r.sigma)}, {"n_directions", r.n_directions},
                     {"epsilon", r.epsilon}, {"iterations", r.iterations}, {"cap", r.cap}, {"tol", r.tol}};
  j["transfer"] = {{"include_misclassified", c.transfer.include_misclassified}};
  j["ablation"] = {{"parameter", to_string(c.ablation.parameter)},
                   {"grid", c.ablation.grid},
                   {"attack", c.ablation.attack}};
  json pj{{"pair", c.plot.pair},   {"input_index", c.plot.input_index}, {"grid", c.plot.grid},
          {"attack", c.plot.attack}, {"xmin", c.plot.xmin}, {"xmax", c.plot.xmax},
          {"ymin", c.plot.ymin},   {"ymax", c.plot.ymax}};
  if (c.plot.slice) pj["slice"] = {c.plot.slice->x_axis, c.plot.slice->y_axis};
  j["plot"] = pj;
  return j;
}

void check_distance_params(double cap, double tol, const std::string& path) {
  if (!(cap > 0.0)) fail(path + ".cap", "must be positive");
  if (!(tol > 0.0) || tol >= cap) fail(path + ".tol", "must lie in (0, cap)");
}

ExperimentConfig read_config(const json& root) {
  Obj o(root, "");
  ExperimentConfig c;
  c.seed = o.seed("seed", 0);
  c.output_dir = o.str("output_dir", c.output_dir);
  if (c.output_dir.empty()) fail("output_dir", "must not be empty");
  c.dataset = read_dataset(o.need("dataset"));

  const json& models = o.array("models");
  if (models.empty()) fail("models", "at least one model is required");
  std::set<std::string> model_ids;
  for (std::size_t i = 0; i < models.size(); ++i) {
    c.models.push_back(read_model(models[i], "models[" + std::to_string(i) + "]"));
    if (!model_ids.insert(c.models.back().id).second) fail("models[" + std::to_string(i) + "].id", "duplicate id");
  }
  auto need_model = [&](const std::string& id, const std::string& path) {
    if (!model_ids.count(id)) fail(path, "unknown model \"" + id + "\"");
  };

  if (o.has("pairs")) {
    const json& pairs = o.array("pairs");
    std::set<std::string> ids;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const std::string path = "pairs[" + std::to_string(i) + "]";
      Obj p(pairs[i], path);
      PairSpec s{p.str("id", ""), p.str("substitute", ""), p.str("victim", "")};
      p.finish();
      if (!valid_id(s.id)) fail(path + ".id", "expected 1-64 characters from [A-Za-z0-9_.-]");
      if (!ids.insert(s.id).second) fail(path + ".id", "duplicate id");
      need_model(s.substitute, path + ".substitute");
      need_model(s.victim, path + ".victim");
      c.pairs.push_back(s);
    }
  } else {
    o.get("pairs");
  }

  if (o.has("attacks")) {
    const json& attacks = o.array("attacks");
    std::set<std::string> names;
    for (std::size_t i = 0; i < attacks.size(); ++i) {
      const std::string path = "attacks[" + std::to_string(i) + "]";
      c.attacks.push_back(read_attack(attacks[i], path));
      if (!names.insert(c.attacks.back().name).second) fail(path + ".name", "duplicate name");
    }
  } else {
    o.get("attacks");
    for (auto k : {AttackKind::kIFgsm, AttackKind::kMiFgsm, AttackKind::kBfFgsm, AttackKind::kBfMiFgsm}) {
      AttackSpec a;
      a.kind = k;
      a.name = to_string(k);
      c.attacks.push_back(a);
    }
  }
  c.attack_model = o.str("attack_model", "");
  if (!c.attack_model.empty()) need_model(c.attack_model, "attack_model");

  if (const json* b = o.get("boundary")) {
    Obj bo(*b, "boundary");
    c.boundary.sigma = bo.auto_num("sigma", std::nullopt);
    c.boundary.gamma = bo.num("gamma", c.boundary.gamma);
    c.boundary.t_max = static_cast<int>(bo.integer("t_max", c.boundary.t_max));
    c.boundary.n_points = static_cast<int>(bo.integer("n_points", c.boundary.n_points));
    bo.finish();
  }

  if (const json* in = o.get("inputs")) {
    Obj io(*in, "inputs");
    c.inputs.split = io.str("split", c.inputs.split);
    c.inputs.max = io.count("max", c.inputs.max);
    io.finish();
    if (c.inputs.split != "test" && c.inputs.split != "train" && c.inputs.split != "all") {
      fail("inputs.split", "expected test, train or all");
    }
  }

  c.studies = string_list(o, "studies", {});
  for (const auto& s : c.studies) {
    if (std::find(std::begin(kStudyKinds), std::end(kStudyKinds), s) == std::end(kStudyKinds)) {
      fail("studies", "unknown study \"" + s + "\"");
    }
  }

  if (const json* cj = o.get("cosine")) {
    Obj co(*cj, "cosine");
    const auto names = string_list(co, "protocols", {"at_input", "at_victim_boundary"});
    c.cosine.protocols.clear();
    for (const auto& n : names) {
      c.cosine.protocols.push_back(
          parse_enum<CosineProtocol>("cosine.protocols", n, cosine_protocol_from_string));
    }
    c.cosine.cap = co.num("cap", c.cosine.cap);
    c.cosine.tol = co.num("tol", c.cosine.tol);
    co.finish();
  }
  check_distance_params(c.cosine.cap, c.cosine.tol, "cosine");

  if (const json* dj = o.get("distance")) {
    Obj d(*dj, "distance");
    const auto names = string_list(d, "directions", {"i_fgsm", "bf_fgsm"});
    c.distance.directions.clear();
    for (const auto& n : names) {
      c.distance.directions.push_back(parse_enum<FirstStep>("distance.directions", n, first_step_from_string));
    }
    c.distance.cap = d.num("cap", c.distance.cap);
    c.distance.tol = d.num("tol", c.distance.tol);
    d.finish();
  }
  check_distance_params(c.distance.cap, c.distance.tol, "distance");

  if (const json* rj = o.get("robustness")) {
    Obj r(*rj, "robustness");
    c.robustness.models = string_list(r, "models", {});
    for (const auto& m : c.robustness.models) need_model(m, "robustness.models");
    c.robustness.sigma = r.auto_num("sigma", std::nullopt);
    c.robustness.n_directions = static_cast<int>(r.integer("n_directions", c.robustness.n_directions));
    c.robustness.epsilon = r.num("epsilon", c.robustness.epsilon);
    c.robustness.iterations = static_cast<int>(r.integer("iterations", c.robustness.iterations));
    c.robustness.cap = r.num("cap", c.robustness.cap);
    c.robustness.tol = r.num("tol", c.robustness.tol);
    r.finish();
    if (c.robustness.sigma && !(*c.robustness.sigma > 0.0)) fail("robustness.sigma", "must be positive");
    if (c.robustness.n_directions < 1) fail("robustness.n_directions", "must be at least 1");
    if (c.robustness.epsilon < 0.0) fail("robustness.epsilon", "must be non-negative");
    if (c.robustness.iterations < 1) fail("robustness.iterations", "must be at least 1");
  }
  check_distance_params(c.robustness.cap, c.robustness.tol, "robustness");

  if (const json* tj = o.get("transfer")) {
    Obj t(*tj, "transfer");
    c.transfer.include_misclassified = t.boolean("include_misclassified", false);
    t.finish();
  }

  if (const json* aj = o.get("ablation")) {
    Obj a(*aj, "ablation");
    c.ablation.parameter = parse_enum<AblationParameter>(a.at("parameter"), a.str("parameter", "n_points"),
                                                         ablation_parameter_from_string);
    if (a.has("grid")) {
      c.ablation.grid.clear();
      const json& g = a.array("grid");
      for (const auto& v : g) {
        if (!v.is_number()) fail("ablation.grid", "expected numbers");
        c.ablation.grid.push_back(v.get<double>());
      }
    } else {
      a.get("grid");
    }
    c.ablation.attack = a.str("attack", "");
    a.finish();
  }
  if (c.ablation.grid.empty()) fail("ablation.grid", "must not be empty");
  for (double v : c.ablation.grid) {
    const bool ok = c.ablation.parameter == AblationParameter::kGamma
                        ? (v > 0.0 && v < 1.0)
                        : (v >= 1.0 && v == std::floor(v) && v <= 1e6);
    if (!ok) fail("ablation.grid", "value " + format_double(v) + " out of range for " + to_string(c.ablation.parameter));
  }

  if (const json* pj = o.get("plot")) {
    Obj p(*pj, "plot");
    c.plot.pair = p.str("pair", "");
    c.plot.input_index = p.count("input_index", 0);
    c.plot.grid = static_cast<int>(p.integer("grid", c.plot.grid));
    c.plot.attack = p.str("attack", "");
    c.plot.xmin = p.num("xmin", c.plot.xmin);
    c.plot.xmax = p.num("xmax", c.plot.xmax);
    c.plot.ymin = p.num("ymin", c.plot.ymin);
    c.plot.ymax = p.num("ymax", c.plot.ymax);
    if (const json* s = p.get("slice")) {
      if (!s->is_array() || s->size() != 2 || !(*s)[0].is_number_unsigned() || !(*s)[1].is_number_unsigned()) {
        fail("plot.slice", "expected [x_axis, y_axis]");
      }
      c.plot.slice = SliceSpec{(*s)[0].get<std::size_t>(), (*s)[1].get<std::size_t>()};
    }
    p.finish();
    if (c.plot.grid < 2 || c.plot.grid > 2001) fail("plot.grid", "must lie in [2, 2001]");
    if (!(c.plot.xmax > c.plot.xmin) || !(c.plot.ymax > c.plot.ymin)) fail("plot", "empty window");
  }
  o.finish();
  return c;
}

const AttackSpec* find_attack(const ExperimentConfig& c, const std::string& name) {
  for (const auto& a : c.attacks) {
    if (a.name == name) return &a;
  }
  return nullptr;
}

// Cross-field checks that run after overrides are applied.
void validate_config(ExperimentConfig& c) {
  for (std::size_t i = 0; i < c.attacks.size(); ++i) {
    validate_attack_values(c.attacks[i], "attacks[" + std::to_string(i) + "]");
  }
  BoundaryConfig b;
  b.sigma = c.boundary.sigma.value_or(1.0);
  b.gamma = c.boundary.gamma;
  b.t_max = c.boundary.t_max;
  b.n_points = c.boundary.n_points;
  try {
    b.validate();
  } catch (const InvalidConfig& e) {
    fail("boundary", e.what());
  }
  if (!c.ablation.attack.empty()) {
    const AttackSpec* a = find_attack(c, c.ablation.attack);
    if (!a) fail("ablation.attack", "unknown attack \"" + c.ablation.attack + "\"");
    if (!uses_boundary(a->kind)) fail("ablation.attack", "must be a boundary-fitting attack");
  }
  if (!c.plot.attack.empty()) {
    const AttackSpec* a = find_attack(c, c.plot.attack);
    if (!a) fail("plot.attack", "unknown attack \"" + c.plot.attack + "\"");
    if (!uses_boundary(a->kind)) fail("plot.attack", "must be a boundary-fitting attack");
  }
  if (!c.plot.pair.empty() &&
      std::none_of(c.pairs.begin(), c.pairs.end(), [&](const PairSpec& p) { return p.id == c.plot.pair; })) {
    fail("plot.pair", "unknown pair \"" + c.plot.pair + "\"");
  }
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Runtime state shared by the commands

class Writer {
 public:
  explicit Writer(fs::path root) : root_(std::move(root)) {}

  fs::path write(const fs::path& rel, const std::string& content) {
    const fs::path target = root_ / rel;
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
    if (ec) throw Error("cannot create directory " + target.parent_path().string() + ": " + ec.message());
    std::ofstream out(target, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + target.string());
    out << content;
    out.close();
    if (!out) throw Error("write failed: " + target.string());
    written_.push_back(target);
    return target;
  }

  const std::vector<fs::path>& written() const { return written_; }

 private:
  fs::path root_;
  std::vector<fs::path> written_;
};

class Clock {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

class Session {
 public:
  explicit Session(const ExperimentConfig& cfg) : cfg_(cfg) {
    const auto& d = cfg.dataset;
    if (d.kind == "blobs") ds_ = gen_blobs(d.classes, d.dim, d.n_per_class, d.spread, d.seed, d.test_fraction);
    else if (d.kind == "moons") ds_ = gen_moons(d.n_per_class, d.noise, d.seed, d.test_fraction);
    else if (d.kind == "rings") ds_ = gen_rings(d.classes, d.n_per_class, d.noise, d.seed, d.test_fraction);
    else ds_ = load_idx(d.images, d.labels, d.max_items, d.downscale);

    if (cfg.inputs.split == "test") inputs_ = ds_.test();
    else if (cfg.inputs.split == "train") inputs_ = ds_.train();
    else inputs_ = ds_.points;
    if (cfg.inputs.max > 0 && inputs_.size() > cfg.inputs.max) inputs_.resize(cfg.inputs.max);

    sigma_ = cfg.boundary.sigma ? *cfg.boundary.sigma
             : d.kind == "idx"  ? 20.0 / 255.0
                                : 0.5 * coordinate_std(ds_);
    if (!(sigma_ > 0.0)) throw InvalidConfig("config: boundary.sigma: derived sigma is zero");
  }

  const Dataset& dataset() const { return ds_; }
  const std::vector<LabeledPoint>& inputs() const { return inputs_; }

  BoundaryConfig boundary() const {
    BoundaryConfig b;
    b.sigma = sigma_;
    b.gamma = cfg_.boundary.gamma;
    b.t_max = cfg_.boundary.t_max;
    b.n_points = cfg_.boundary.n_points;
    return b;
  }

  NamedAttack named(const AttackSpec& a) const {
    NamedAttack n;
    n.name = a.name;
    n.kind = a.kind;
    n.cfg.epsilon = a.epsilon;
    n.cfg.iterations = a.iterations;
    n.cfg.step = a.step;
    n.cfg.mu = a.mu;
    n.cfg.source_policy = a.source_policy;
    if (uses_boundary(a.kind)) n.cfg.boundary = boundary();
    return n;
  }

  // Loads or trains every listed model; training fans out across workers.
  void prepare(const std::vector<std::string>& ids) {
    std::vector<const ModelSpec*> todo;
    for (const auto& id : ids) {
      if (models_.count(id)) continue;
      const ModelSpec* spec = nullptr;
      for (const auto& m : cfg_.models) {
        if (m.id == id) spec = &m;
      }
      if (!spec) throw InvalidConfig("config: unknown model \"" + id + "\"");
      if (std::find(todo.begin(), todo.end(), spec) == todo.end()) todo.push_back(spec);
    }
    std::vector<ModelRef> built(todo.size());
    parallel_for(todo.size(), [&](std::size_t i) { built[i] = obtain(*todo[i]); });
    for (std::size_t i = 0; i < todo.size(); ++i) models_[todo[i]->id] = built[i];
  }

  ModelRef model(const std::string& id) {
    prepare({id});
    return models_.at(id);
  }

  std::vector<ModelPair> pairs() {
    if (cfg_.pairs.empty()) throw InvalidConfig("config: pairs: no substitute/victim pairs configured");
    std::vector<std::string> ids;
    for (const auto& p : cfg_.pairs) {
      ids.push_back(p.substitute);
      ids.push_back(p.victim);
    }
    prepare(ids);
    std::vector<ModelPair> out;
    for (const auto& p : cfg_.pairs) out.push_back({models_.at(p.substitute), models_.at(p.victim), p.id});
    return out;
  }

  Architecture arch(const ModelSpec& m) const {
    Architecture a;
    a.input_dim = ds_.dim();
    a.hidden_dims = m.hidden;
    a.num_classes = ds_.num_classes;
    a.activation = m.activation;
    return a;
  }

 private:
  ModelRef obtain(const ModelSpec& m) const {
    if (!m.path.empty()) {
      auto loaded = std::make_shared<ModelParams>(load_model(m.path));
      if (loaded->arch.input_dim != ds_.dim() || loaded->arch.num_classes != ds_.num_classes) {
        throw InvalidConfig("config: model \"" + m.id + "\": file shape does not match the dataset");
      }
      return loaded;
    }
    const fs::path cached = fs::path(cfg_.output_dir) / "models" / (m.id + ".json");
    if (fs::is_regular_file(cached)) {
      try {
        auto loaded = std::make_shared<ModelParams>(load_model(cached));
        if (loaded->arch == arch(m) && loaded->train_seed == m.seed && loaded->train_meta.epochs == m.hyper.epochs &&
            loaded->train_meta.dataset == ds_.name) {
          return loaded;
        }
      } catch (const Error&) {
      }
    }
    return std::make_shared<ModelParams>(train(arch(m), ds_.train(), m.hyper, m.seed, ds_.name));
  }

  const ExperimentConfig& cfg_;
  Dataset ds_;
  std::vector<LabeledPoint> inputs_;
  double sigma_ = 0.0;
  std::map<std::string, ModelRef> models_;
};

json mean_se_json(const MeanSe& m) { return {{"mean", m.mean}, {"se", m.se}, {"n", m.n}}; }

std::string csv_num(double v) { return std::isfinite(v) ? format_double(v) : ""; }

json provenance(const ExperimentConfig& cfg, double wall) {
  return {{"config_hash", cfg.hash()}, {"seed", cfg.seed}, {"tool_version", tool_version()}, {"wall_time_s", wall}};
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

json report(const char* kind, json payload, const ExperimentConfig& cfg, const Clock& clock) {
  return {{"kind", kind}, {"payload", std::move(payload)}, {"provenance", provenance(cfg, clock.seconds())}};
}

std::optional<AttackKind> counterpart(AttackKind k) {
  if (k == AttackKind::kBfFgsm) return AttackKind::kIFgsm;
  if (k == AttackKind::kBfMiFgsm) return AttackKind::kMiFgsm;
  return std::nullopt;
}

const AttackSpec& default_boundary_attack(const ExperimentConfig& c, const std::string& chosen,
                                          const char* what) {
  if (!chosen.empty()) return *find_attack(c, chosen);
  for (const auto& a : c.attacks) {
    if (uses_boundary(a.kind)) return a;
  }
  throw InvalidConfig(std::string("config: ") + what + ": no boundary-fitting attack configured");
}

// ---------------------------------------------------------------------------
// Studies

void study_transfer(const ExperimentConfig& cfg, Session& s, Writer& w, const Clock& clock) {
  if (cfg.attacks.empty()) throw InvalidConfig("config: attacks: none configured");
  const auto pairs = s.pairs();
  std::vector<NamedAttack> attacks;
  for (const auto& a : cfg.attacks) attacks.push_back(s.named(a));
  TransferOptions opts;
  opts.include_misclassified = cfg.transfer.include_misclassified;
  const TransferMatrix m = transfer_eval(pairs, s.inputs(), attacks, cfg.seed, opts);

  json p;
  p["attacks"] = m.attacks;
  p["victims"] = m.victims;
  p["success"] = m.success;
  p["whitebox"] = m.whitebox_flags;
  p["mean_queries"] = m.mean_queries;
  p["fallback_rate"] = m.fallback_rate;
  p["mean_shrink"] = m.mean_shrink;
  json counts = json::array();
  for (const auto& row : m.counts) {
    json r = json::array();
    for (const auto& c : row) r.push_back({{"successes", c.successes}, {"attempts", c.attempts}});
    counts.push_back(r);
  }
  p["counts"] = counts;

  json per_pair = json::array();
  for (std::size_t a = 0; a < m.attacks.size(); ++a) {
    for (std::size_t pi = 0; pi < pairs.size(); ++pi) {
      const std::size_t wcol = 2 * pi, bcol = 2 * pi + 1;
      per_pair.push_back({{"attack", m.attacks[a]},
                          {"pair", pairs[pi].pair_id},
                          {"white_box", m.success[a][wcol]},
                          {"black_box", m.success[a][bcol]},
                          {"attempts", m.counts[a][bcol].attempts}});
    }
  }
  p["per_pair"] = per_pair;
  json pooled = json::array();
  for (const auto& name : m.attacks) {
    const auto bb = black_box_outcomes(m, name);
    const auto wb = white_box_outcomes(m, name);
    pooled.push_back({{"attack", name}, {"black_box", mean_se_json(mean_se(bb))}, {"white_box", mean_se_json(mean_se(wb))}});
  }
  p["pooled"] = pooled;
  json gaps = json::array();
  for (const auto& a : cfg.attacks) {
    const auto base = counterpart(a.kind);
    if (!base) continue;
    for (const auto& b : cfg.attacks) {
      if (b.kind != *base || b.epsilon != a.epsilon || b.iterations != a.iterations) continue;
      const MeanSe g = paired_difference(black_box_outcomes(m, a.name), black_box_outcomes(m, b.name));
      gaps.push_back({{"attack", a.name}, {"baseline", b.name}, {"black_box_gap", mean_se_json(g)}});
      break;
    }
  }
  p["gaps"] = gaps;

  std::ostringstream csv;
  csv << "attack,victim,whitebox,successes,attempts,rate\n";
  for (std::size_t a = 0; a < m.attacks.size(); ++a) {
    for (std::size_t v = 0; v < m.victims.size(); ++v) {
      csv << m.attacks[a] << ',' << m.victims[v] << ',' << (m.whitebox_flags[a][v] ? 1 : 0) << ','
          << m.counts[a][v].successes << ',' << m.counts[a][v].attempts << ',' << csv_num(m.success[a][v]) << '\n';
    }
  }
  w.write("study_transfer.json", dump(report("transfer", p, cfg, clock)));
  w.write("study_transfer.csv", csv.str());
}

void study_cosine(const ExperimentConfig& cfg, Session& s, Writer& w, const Clock& clock) {
  const auto pairs = s.pairs();
  if (cfg.cosine.protocols.empty()) throw InvalidConfig("config: cosine.protocols: empty");
  const BoundaryConfig b = s.boundary();
  json payload;
  payload["n_points"] = b.n_points;
  payload["protocols"] = json::array();
  std::ostringstream csv;
  csv << "protocol,pair,n_inputs,processed,skipped,victim_censored,mean_original,se_original,"
         "mean_boundary_n1,se_boundary_n1,mean_boundary_nN,se_boundary_nN,gain,gain_se\n";
  for (const auto protocol : cfg.cosine.protocols) {
    std::vector<CosineReport> reports(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      reports[i] = cosine_study(pairs[i], s.inputs(), b, protocol, cfg.seed, cfg.cosine.cap, cfg.cosine.tol);
    }
    std::vector<double> orig, n1, nN;
    json rows = json::array();
    auto emit = [&](const std::string& pair, std::size_t n_inputs, std::size_t processed, std::size_t skipped,
                    std::size_t censored, const MeanSe& o, const MeanSe& a, const MeanSe& c, const MeanSe& g) {
      rows.push_back({{"pair", pair},
                      {"n_inputs", n_inputs},
                      {"processed", processed},
                      {"skipped", skipped},
                      {"victim_censored", censored},
                      {"original", mean_se_json(o)},
                      {"boundary_n1", mean_se_json(a)},
                      {"boundary_nN", mean_se_json(c)},
                      {"gain_nN", mean_se_json(g)}});
      csv << to_string(protocol) << ',' << pair << ',' << n_inputs << ',' << processed << ',' << skipped << ','
          << censored << ',' << csv_num(o.mean) << ',' << csv_num(o.se) << ',' << csv_num(a.mean) << ','
          << csv_num(a.se) << ',' << csv_num(c.mean) << ',' << csv_num(c.se) << ',' << csv_num(g.mean) << ','
          << csv_num(g.se) << '\n';
    };
    std::size_t tot_in = 0, tot_proc = 0, tot_skip = 0, tot_cens = 0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const auto& r = reports[i];
      emit(pairs[i].pair_id, r.n_inputs, r.processed, r.skipped, r.victim_censored, mean_se(r.original),
           mean_se(r.boundary_n1), mean_se(r.boundary_nN), r.gain_nN);
      orig.insert(orig.end(), r.original.begin(), r.original.end());
      n1.insert(n1.end(), r.boundary_n1.begin(), r.boundary_n1.end());
      nN.insert(nN.end(), r.boundary_nN.begin(), r.boundary_nN.end());
      tot_in += r.n_inputs;
      tot_proc += r.processed;
      tot_skip += r.skipped;
      tot_cens += r.victim_censored;
    }
    const MeanSe po = mean_se(orig), p1 = mean_se(n1), pN = mean_se(nN), gain = paired_difference(nN, orig);
    emit("pooled", tot_in, tot_proc, tot_skip, tot_cens, po, p1, pN, gain);
    payload["protocols"].push_back({{"protocol", to_string(protocol)},
                                    {"mean_original", po.mean},
                                    {"mean_boundary_n1", p1.mean},
                                    {"mean_boundary_nN", pN.mean},
                                    {"rows", rows}});
  }
  w.write("study_cosine.json", dump(report("cosine", payload, cfg, clock)));
  w.write("study_cosine.csv", csv.str());
}

void study_distance(const ExperimentConfig& cfg, Session& s, Writer& w, const Clock& clock) {
  const auto pairs = s.pairs();
  if (cfg.distance.directions.empty()) throw InvalidConfig("config: distance.directions: empty");
  const DistanceTable t =
      distance_study(pairs, s.inputs(), cfg.distance.directions, s.boundary(), cfg.seed, cfg.distance.cap,
                     cfg.distance.tol);
  json payload;
  payload["attacks"] = t.attacks;
  payload["victims"] = t.victims;
  payload["cells"] = json::array();
  std::ostringstream csv;
  csv << "direction,victim,mean,se,n,processed,skipped,censored\n";
  std::vector<DistanceCell> pooled(t.attacks.size());
  for (std::size_t a = 0; a < t.attacks.size(); ++a) {
    json row = json::array();
    for (std::size_t v = 0; v < t.victims.size(); ++v) {
      const DistanceCell& c = t.cells[a][v];
      row.push_back({{"distance", mean_se_json(c.distance)},
                     {"processed", c.processed},
                     {"skipped", c.skipped},
                     {"censored", c.censored}});
      csv << t.attacks[a] << ',' << t.victims[v] << ',' << csv_num(c.distance.mean) << ','
          << csv_num(c.distance.se) << ',' << c.distance.n << ',' << c.processed << ',' << c.skipped << ','
          << c.censored << '\n';
      auto& p = pooled[a];
      p.per_input.insert(p.per_input.end(), c.per_input.begin(), c.per_input.end());
      p.processed += c.processed;
      p.skipped += c.skipped;
      p.censored += c.censored;
    }
    payload["cells"].push_back(row);
    std::vector<double> present;
    for (double d : pooled[a].per_input) {
      if (!std::isnan(d)) present.push_back(d);
    }
    pooled[a].distance = mean_se(present);
    csv << t.attacks[a] << ",pooled," << csv_num(pooled[a].distance.mean) << ',' << csv_num(pooled[a].distance.se)
        << ',' << pooled[a].distance.n << ',' << pooled[a].processed << ',' << pooled[a].skipped << ','
        << pooled[a].censored << '\n';
  }
  json pj = json::array();
  for (std::size_t a = 0; a < t.attacks.size(); ++a) {
    pj.push_back({{"direction", t.attacks[a]}, {"distance", mean_se_json(pooled[a].distance)},
                  {"censored", pooled[a].censored}});
  }
  payload["pooled"] = pj;
  json gaps = json::array();
  for (std::size_t a = 0; a < t.attacks.size(); ++a) {
    for (std::size_t b = 0; b < t.attacks.size(); ++b) {
      if (a == b || t.attacks[b] != "i_fgsm") continue;
      gaps.push_back({{"direction", t.attacks[a]},
                      {"baseline", t.attacks[b]},
                      {"gap", mean_se_json(paired_distance_gap(pooled[a], pooled[b]))}});
    }
  }
  payload["gaps"] = gaps;
  w.write("study_distance.json", dump(report("distance", payload, cfg, clock)));
  w.write("study_distance.csv", csv.str());
}

void study_robustness(const ExperimentConfig& cfg, Session& s, Writer& w, const Clock& clock) {
  const auto& ids = cfg.robustness.models;
  if (ids.size() < 2) throw InvalidConfig("config: robustness.models: at least two models are required");
  s.prepare(ids);
  std::vector<ModelRef> models;
  for (const auto& id : ids) models.push_back(s.model(id));
  RobustnessConfig rc;
  rc.sigma = cfg.robustness.sigma.value_or(s.boundary().sigma);
  rc.n_directions = cfg.robustness.n_directions;
  rc.epsilon = cfg.robustness.epsilon;
  rc.iterations = cfg.robustness.iterations;
  rc.cap = cfg.robustness.cap;
  rc.tol = cfg.robustness.tol;
  const RobustnessReport r = robustness_study(models, ids, s.inputs(), rc, cfg.seed);
  json rows = json::array();
  std::ostringstream csv;
  csv << "model,natural_mean,natural_se,natural_n,adversarial_mean,adversarial_se,adversarial_n,"
         "robust_accuracy,clean_accuracy,natural_censored,adversarial_censored\n";
  for (const auto& row : r.rows) {
    rows.push_back({{"model", row.model_id},
                    {"natural_distance", mean_se_json(row.natural_distance)},
                    {"adversarial_distance", mean_se_json(row.adversarial_distance)},
                    {"robust_accuracy", row.robust_accuracy},
                    {"clean_accuracy", row.clean_accuracy},
                    {"natural_censored", row.natural_censored},
                    {"adversarial_censored", row.adversarial_censored}});
    csv << row.model_id << ',' << csv_num(row.natural_distance.mean) << ',' << csv_num(row.natural_distance.se)
        << ',' << row.natural_distance.n << ',' << csv_num(row.adversarial_distance.mean) << ','
        << csv_num(row.adversarial_distance.se) << ',' << row.adversarial_distance.n << ','
        << csv_num(row.robust_accuracy) << ',' << csv_num(row.clean_accuracy) << ',' << row.natural_censored
        << ',' << row.adversarial_censored << '\n';
  }
  json payload{{"sigma", rc.sigma}, {"epsilon", rc.epsilon}, {"rows", rows}};
  payload["spearman_natural_vs_robust"] =
      r.spearman_natural_vs_robust ? json(*r.spearman_natural_vs_robust) : json(nullptr);
  w.write("study_robustness.json", dump(report("robustness", payload, cfg, clock)));
  w.write("study_robustness.csv", csv.str());
}

}  // namespace

// ---------------------------------------------------------------------------

std::string ExperimentConfig::canonical_json() const { return to_json(*this).dump(); }

std::string ExperimentConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(canonical_json())));
  return buf;
}

ExperimentConfig parse_config(const std::string& text, const Overrides& ov) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config: ") + e.what(), e.byte);
  }
  ExperimentConfig c = read_config(root);
  if (ov.seed) c.seed = *ov.seed;
  if (ov.out) c.output_dir = *ov.out;
  for (auto& a : c.attacks) {
    if (ov.eps) a.epsilon = *ov.eps;
    if (ov.iters) a.iterations = *ov.iters;
  }
  if (ov.n_points) c.boundary.n_points = *ov.n_points;
  if (ov.gamma) c.boundary.gamma = *ov.gamma;
  if (ov.sigma) c.boundary.sigma = *ov.sigma;
  validate_config(c);
  return c;
}

ExperimentConfig load_config(const fs::path& path, const Overrides& overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidConfig("config: cannot read " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), overrides);
}

std::vector<fs::path> cmd_train(const ExperimentConfig& cfg) {
  Session s(cfg);
  std::vector<std::string> ids;
  for (const auto& m : cfg.models) ids.push_back(m.id);
  s.prepare(ids);
  const auto test = s.dataset().test();
  std::ostringstream summary;
  summary << "model,train_accuracy,test_accuracy\n";
  for (const auto& id : ids) {
    const auto m = s.model(id);
    summary << id << ',' << csv_num(accuracy(*m, s.dataset().train())) << ',' << csv_num(accuracy(*m, test)) << '\n';
  }
  std::ostringstream data;
  write_csv(s.dataset(), data);

  Writer w(cfg.output_dir);
  for (const auto& id : ids) w.write(fs::path("models") / (id + ".json"), serialize_model(*s.model(id)));
  w.write("dataset.csv", data.str());
  w.write("models.csv", summary.str());
  return w.written();
}

std::vector<fs::path> cmd_attack(const ExperimentConfig& cfg, std::size_t begin, std::size_t end) {
  if (cfg.attacks.empty()) throw InvalidConfig("config: attacks: none configured");
  std::string sub_id = cfg.attack_model;
  if (sub_id.empty()) {
    if (cfg.pairs.empty()) throw InvalidConfig("config: attack_model: no substitute configured");
    sub_id = cfg.pairs.front().substitute;
  }
  Session s(cfg);
  const auto& inputs = s.inputs();
  if (end == std::numeric_limits<std::size_t>::max()) end = inputs.size();
  if (begin >= end || end > inputs.size()) {
    throw InvalidConfig("attack: index range [" + std::to_string(begin) + ", " + std::to_string(end) +
                        ") out of range for " + std::to_string(inputs.size()) + " inputs");
  }
  const ModelRef sub = s.model(sub_id);
  std::vector<NamedAttack> attacks;
  for (const auto& a : cfg.attacks) attacks.push_back(s.named(a));

  const std::size_t n = end - begin, na = attacks.size();
  std::vector<AttackResult> results(n * na);
  parallel_for(n * na, [&](std::size_t k) {
    const std::size_t i = begin + k / na;
    const NamedAttack& a = attacks[k % na];
    AttackConfig c = a.cfg;
    c.seed = derive_key(cfg.seed, {i});
    results[k] = run_attack(a.kind, *sub, inputs[i].x, inputs[i].y, c);
  });

  std::ostringstream rec, adv;
  rec << "index,attack,success_substitute,linf,queries,fallback_count\n";
  adv << "index,attack";
  for (std::size_t j = 0; j < s.dataset().dim(); ++j) adv << ",x" << j;
  adv << '\n';
  for (std::size_t k = 0; k < n * na; ++k) {
    const std::size_t i = begin + k / na;
    const auto& r = results[k];
    const double linf = (r.adversarial - inputs[i].x).cwiseAbs().maxCoeff();
    rec << i << ',' << attacks[k % na].name << ',' << (r.success_substitute ? 1 : 0) << ',' << csv_num(linf) << ','
        << r.queries << ',' << r.fallback_count << '\n';
    adv << i << ',' << attacks[k % na].name;
    for (Eigen::Index j = 0; j < r.adversarial.size(); ++j) adv << ',' << format_double(r.adversarial[j]);
    adv << '\n';
  }
  Writer w(cfg.output_dir);
  w.write("attack_records.csv", rec.str());
  w.write("adversarial.csv", adv.str());
  return w.written();
}

std::vector<fs::path> cmd_study(const ExperimentConfig& cfg, const std::string& kind) {
  std::vector<std::string> kinds;
  if (!kind.empty()) {
    if (std::find(std::begin(kStudyKinds), std::end(kStudyKinds), kind) == std::end(kStudyKinds)) {
      throw InvalidConfig("study: unknown kind \"" + kind + "\" (expected transfer, cosine, distance or robustness)");
    }
    kinds.push_back(kind);
  } else {
    kinds = cfg.studies;
    if (kinds.empty()) throw InvalidConfig("config: studies: nothing selected and no --kind given");
  }
  Session s(cfg);
  Writer w(cfg.output_dir);
  for (const auto& k : kinds) {
    const Clock clock;
    if (k == "transfer") study_transfer(cfg, s, w, clock);
    else if (k == "cosine") study_cosine(cfg, s, w, clock);
    else if (k == "distance") study_distance(cfg, s, w, clock);
    else study_robustness(cfg, s, w, clock);
  }
  return w.written();
}

std::vector<fs::path> cmd_ablate(const ExperimentConfig& cfg) {
  const Clock clock;
  const AttackSpec& spec = default_boundary_attack(cfg, cfg.ablation.attack, "ablation.attack");
  Session s(cfg);
  const auto pairs = s.pairs();
  const AblationCurve curve = ablate(cfg.ablation.parameter, cfg.ablation.grid, s.named(spec), pairs, s.inputs(), cfg.seed);
  json points = json::array();
  std::ostringstream csv;
  csv << "value,black_box,black_box_se,n,white_box,mean_queries,fallback_rate,mean_shrink\n";
  for (const auto& p : curve.points) {
    points.push_back({{"value", p.value},
                      {"black_box", mean_se_json(p.black_box)},
                      {"white_box", p.white_box},
                      {"mean_queries", p.mean_queries},
                      {"fallback_rate", p.fallback_rate},
                      {"mean_shrink", p.mean_shrink}});
    csv << csv_num(p.value) << ',' << csv_num(p.black_box.mean) << ',' << csv_num(p.black_box.se) << ','
        << p.black_box.n << ',' << csv_num(p.white_box) << ',' << csv_num(p.mean_queries) << ','
        << csv_num(p.fallback_rate) << ',' << csv_num(p.mean_shrink) << '\n';
  }
  const std::string param = to_string(curve.parameter);
  json payload{{"parameter", param}, {"attack", curve.attack}, {"points", points}};
  Writer w(cfg.output_dir);
  w.write("ablation_" + param + ".json", dump(report("ablation", payload, cfg, clock)));
  w.write("ablation_" + param + ".csv", csv.str());
  return w.written();
}

std::vector<fs::path> cmd_plot(const ExperimentConfig& cfg) {
  const AttackSpec& spec = default_boundary_attack(cfg, cfg.plot.attack, "plot.attack");
  if (cfg.pairs.empty()) throw InvalidConfig("config: pairs: no substitute/victim pairs configured");
  const PairSpec* pair = &cfg.pairs.front();
  for (const auto& p : cfg.pairs) {
    if (p.id == cfg.plot.pair) pair = &p;
  }
  Session s(cfg);
  if (s.dataset().dim() > 2 && !cfg.plot.slice) {
    throw InvalidConfig("config: plot.slice: required for " + std::to_string(s.dataset().dim()) + "-dimensional inputs");
  }
  if (cfg.plot.input_index >= s.inputs().size()) {
    throw InvalidConfig("config: plot.input_index: out of range for " + std::to_string(s.inputs().size()) + " inputs");
  }
  s.prepare({pair->substitute, pair->victim});
  const ModelRef sub = s.model(pair->substitute), vic = s.model(pair->victim);
  const NamedAttack a = s.named(spec);
  AttackConfig ac = a.cfg;
  ac.seed = derive_key(cfg.seed, {cfg.plot.input_index});
  PlotOptions opt;
  opt.grid = cfg.plot.grid;
  opt.xmin = cfg.plot.xmin;
  opt.xmax = cfg.plot.xmax;
  opt.ymin = cfg.plot.ymin;
  opt.ymax = cfg.plot.ymax;
  opt.slice = cfg.plot.slice;
  opt.boundary_attack = a.kind;
  opt.baseline = *counterpart(a.kind);
  const PlotScene scene = build_scene(*sub, vic.get(), s.inputs()[cfg.plot.input_index], ac, opt);
  Writer w(cfg.output_dir);
  w.write("plot_" + pair->id + "_" + std::to_string(cfg.plot.input_index) + ".svg",
          render_svg(scene, opt.width_px));
  return w.written();
}

}  // namespace bfa
