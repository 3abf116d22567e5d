#include "config.hpp"

#include "cbf_guard/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <limits>

namespace cbf_guard::app {

using nlohmann::json;

namespace {

// A JSON value together with its path, so every diagnostic names the field.
class Field {
 public:
  Field(const json& value, std::string path) : value_(&value), path_(std::move(path)) {}

  const std::string& path() const { return path_; }
  [[noreturn]] void fail(const std::string& what) const { throw ConfigError(path_ + ": " + what); }

  bool has(const char* key) const { return value_->is_object() && value_->contains(key); }

  Field at(const char* key) const {
    require_object();
    if (!value_->contains(key)) throw ConfigError(path_ + "." + key + ": required field missing");
    return Field(value_->at(key), path_ + "." + key);
  }

  std::optional<Field> find(const char* key) const {
    if (!has(key)) return std::nullopt;
    return Field(value_->at(key), path_ + "." + key);
  }

  void require_object() const {
    if (!value_->is_object()) fail("expected an object");
  }

  void allow_keys(std::initializer_list<const char*> keys) const {
    require_object();
    for (const auto& item : value_->items()) {
      const bool known = std::any_of(keys.begin(), keys.end(),
                                     [&](const char* k) { return item.key() == k; });
      if (!known) throw ConfigError(path_ + "." + item.key() + ": unknown field");
    }
  }

  bool is_string() const { return value_->is_string(); }

  double number() const {
    if (!value_->is_number()) fail("expected a number");
    const double v = value_->get<double>();
    if (!std::isfinite(v)) fail("expected a finite number");
    return v;
  }

  double positive() const {
    const double v = number();
    if (!(v > 0.0)) fail("must be positive");
    return v;
  }

  std::uint64_t unsigned_integer() const {
    if (value_->is_number_unsigned()) return value_->get<std::uint64_t>();
    if (!value_->is_number_integer() || value_->get<std::int64_t>() < 0) {
      fail("expected a nonnegative integer");
    }
    return static_cast<std::uint64_t>(value_->get<std::int64_t>());
  }

  int integer() const {
    if (!value_->is_number_integer()) fail("expected an integer");
    return value_->get<int>();
  }

  bool boolean() const {
    if (!value_->is_boolean()) fail("expected true or false");
    return value_->get<bool>();
  }

  std::string string() const {
    if (!value_->is_string()) fail("expected a string");
    return value_->get<std::string>();
  }

  std::vector<Field> array() const {
    if (!value_->is_array()) fail("expected an array");
    std::vector<Field> items;
    for (std::size_t i = 0; i < value_->size(); ++i) {
      items.emplace_back((*value_)[i], path_ + "[" + std::to_string(i) + "]");
    }
    return items;
  }

  std::vector<double> vector(std::optional<std::size_t> size = std::nullopt) const {
    std::vector<double> out;
    for (const Field& f : array()) out.push_back(f.number());
    if (size && out.size() != *size) {
      fail("expected " + std::to_string(*size) + " entries, got " + std::to_string(out.size()));
    }
    return out;
  }

  Matrix matrix(std::optional<std::size_t> rows = std::nullopt,
                std::optional<std::size_t> cols = std::nullopt) const {
    Matrix out;
    for (const Field& row : array()) {
      out.push_back(row.vector(cols));
      if (!cols) cols = out.back().size();
    }
    if (rows && out.size() != *rows) {
      fail("expected " + std::to_string(*rows) + " rows, got " + std::to_string(out.size()));
    }
    if (out.empty() || out.front().empty()) fail("matrix must be non-empty");
    return out;
  }

 private:
  const json* value_;
  std::string path_;
};

BoxConfig parse_box(const Field& f, std::size_t dim) {
  f.allow_keys({"lower", "upper"});
  BoxConfig box{f.at("lower").vector(dim), f.at("upper").vector(dim)};
  for (std::size_t j = 0; j < dim; ++j) {
    if (box.lower[j] > box.upper[j]) f.fail("lower exceeds upper at index " + std::to_string(j));
  }
  return box;
}

SystemConfig parse_system(const Field& f) {
  SystemConfig cfg;
  cfg.type = f.at("type").string();
  if (cfg.type == "double_integrator") {
    f.allow_keys({"type"});
  } else if (cfg.type == "planar_quadrotor") {
    f.allow_keys({"type", "params"});
    if (auto p = f.find("params")) {
      p->allow_keys({"alpha1", "alpha2", "beta1", "beta2", "gravity"});
      if (auto v = p->find("alpha1")) cfg.params.alpha1 = v->number();
      if (auto v = p->find("alpha2")) cfg.params.alpha2 = v->number();
      if (auto v = p->find("beta1")) cfg.params.beta1 = v->number();
      if (auto v = p->find("beta2")) cfg.params.beta2 = v->positive();
      if (auto v = p->find("gravity")) cfg.params.gravity = v->number();
    }
  } else if (cfg.type == "custom_linear") {
    f.allow_keys({"type", "A", "B"});
    cfg.a = f.at("A").matrix();
    const std::size_t n = cfg.a.size();
    if (cfg.a.front().size() != n) f.at("A").fail("A must be square");
    cfg.b = f.at("B").matrix(n);
  } else {
    f.at("type").fail("unknown system type '" + cfg.type +
                      "' (double_integrator, planar_quadrotor, custom_linear)");
  }
  return cfg;
}

std::optional<double> parse_auto_number(const Field& f) {
  if (f.is_string()) {
    if (f.string() != "auto") f.fail("expected a number or \"auto\"");
    return std::nullopt;
  }
  return f.number();
}

BarrierConfig parse_barrier(const Field& f, std::size_t n) {
  f.allow_keys({"center", "p_diag", "gamma_slope", "tightening"});
  BarrierConfig cfg;
  cfg.center = f.at("center").vector(n);
  cfg.p_diag = f.at("p_diag").vector(n);
  for (double p : cfg.p_diag) {
    if (p < 0.0) f.at("p_diag").fail("entries must be nonnegative");
  }
  cfg.gamma_slope = f.at("gamma_slope").positive();
  if (auto t = f.find("tightening")) {
    cfg.tightening = parse_auto_number(*t);
    if (cfg.tightening && *cfg.tightening < 0.0) t->fail("must be >= 0 or \"auto\"");
  }
  return cfg;
}

InputSetConfig parse_input_set(const Field& f, std::size_t m) {
  InputSetConfig cfg;
  cfg.type = f.at("type").string();
  if (cfg.type == "box") {
    f.allow_keys({"type", "lower", "upper"});
    cfg.box = BoxConfig{f.at("lower").vector(m), f.at("upper").vector(m)};
    for (std::size_t j = 0; j < m; ++j) {
      if (!(cfg.box.lower[j] < cfg.box.upper[j])) f.fail("lower must be below upper");
    }
  } else if (cfg.type == "polytope") {
    f.allow_keys({"type", "A", "b", "vertices"});
    cfg.a = f.at("A").matrix(std::nullopt, m);
    cfg.b = f.at("b").vector(cfg.a.size());
    if (auto v = f.find("vertices")) cfg.vertices = v->matrix(std::nullopt, m);
  } else {
    f.at("type").fail("unknown input set type '" + cfg.type + "' (box, polytope)");
  }
  return cfg;
}

PolicyConfig parse_policy(const Field& f, const SystemConfig& system, std::size_t m) {
  PolicyConfig cfg;
  cfg.type = f.at("type").string();
  if (cfg.type == "constant") {
    f.allow_keys({"type", "value"});
    cfg.value = f.at("value").vector(m);
  } else if (cfg.type == "pd_tracking") {
    f.allow_keys({"type", "kp", "kd", "waypoints"});
    if (system.type != "planar_quadrotor") f.at("type").fail("pd_tracking needs planar_quadrotor");
    if (auto v = f.find("kp")) cfg.kp = v->number();
    if (auto v = f.find("kd")) cfg.kd = v->number();
    for (const Field& w : f.at("waypoints").array()) {
      w.allow_keys({"t", "position"});
      const std::vector<double> p = w.at("position").vector(2);
      cfg.waypoints.push_back({w.at("t").number(), {p[0], p[1]}});
    }
    if (cfg.waypoints.empty()) f.at("waypoints").fail("at least one waypoint required");
    for (std::size_t i = 1; i < cfg.waypoints.size(); ++i) {
      if (!(cfg.waypoints[i].t > cfg.waypoints[i - 1].t)) {
        f.at("waypoints").fail("times must increase strictly");
      }
    }
  } else {
    f.at("type").fail("unknown policy type '" + cfg.type + "' (constant, pd_tracking)");
  }
  return cfg;
}

SampledConfig parse_sampled(const Field& f, std::size_t n, std::size_t k) {
  f.allow_keys({"l_pi", "sup_samples", "lipschitz_pairs", "domain", "f_bar", "g_bar", "m"});
  SampledConfig cfg;
  if (auto v = f.find("l_pi")) {
    cfg.l_pi = parse_auto_number(*v);
    if (cfg.l_pi && !(*cfg.l_pi > 0.0)) v->fail("must be positive or \"auto\"");
  }
  if (auto v = f.find("sup_samples")) cfg.sup_samples = v->unsigned_integer();
  if (auto v = f.find("lipschitz_pairs")) cfg.lipschitz_pairs = v->unsigned_integer();
  if (auto v = f.find("domain")) cfg.domain = parse_box(*v, n);
  if (auto v = f.find("f_bar")) cfg.f_bar = v->positive();
  if (auto v = f.find("g_bar")) {
    cfg.g_bar = v->number();
    if (*cfg.g_bar < 0.0) v->fail("must be >= 0");
  }
  if (auto v = f.find("m")) cfg.m = v->vector(k);
  if (cfg.sup_samples == 0) f.at("sup_samples").fail("must be >= 1");
  if (cfg.lipschitz_pairs == 0) f.at("lipschitz_pairs").fail("must be >= 1");
  return cfg;
}

GridConfig parse_grid(const Field& f, std::size_t n) {
  f.allow_keys({"lower", "upper", "counts"});
  GridConfig cfg;
  cfg.bounds = BoxConfig{f.at("lower").vector(n), f.at("upper").vector(n)};
  for (const Field& c : f.at("counts").array()) {
    cfg.counts.push_back(c.integer());
    if (cfg.counts.back() < 1) c.fail("must be >= 1");
  }
  if (cfg.counts.size() != n) f.at("counts").fail("expected " + std::to_string(n) + " entries");
  return cfg;
}

SynthesisSection parse_synthesis(const Field& f, std::size_t n) {
  f.allow_keys({"k", "theta_box", "phi_box", "epsilon", "x_outer", "domain", "state_samples",
                "iteration_budget", "phi_retries", "volume_samples"});
  SynthesisSection cfg;
  cfg.k = f.at("k").unsigned_integer();
  if (cfg.k < 1) f.at("k").fail("must be >= 1");
  for (const Field& b : f.at("theta_box").array()) {
    cfg.theta_box.push_back(parse_box(b, 2 * n));
    for (std::size_t j = 0; j < n; ++j) {
      if (cfg.theta_box.back().lower[j] < 0.0) b.fail("p_diag bounds must be nonnegative");
    }
  }
  if (cfg.theta_box.size() != cfg.k) f.at("theta_box").fail("expected one box per barrier");
  for (const Field& r : f.at("phi_box").array()) {
    r.allow_keys({"lower", "upper"});
    cfg.phi_box.push_back({r.at("lower").positive(), r.at("upper").positive()});
    if (cfg.phi_box.back().lower > cfg.phi_box.back().upper) r.fail("lower exceeds upper");
  }
  if (cfg.phi_box.size() != cfg.k) f.at("phi_box").fail("expected one range per barrier");
  cfg.epsilon = f.at("epsilon").positive();

  const Field outer = f.at("x_outer");
  cfg.x_outer.type = outer.at("type").string();
  if (cfg.x_outer.type == "barrier") {
    outer.allow_keys({"type", "center", "p_diag"});
    cfg.x_outer.center = outer.at("center").vector(n);
    cfg.x_outer.p_diag = outer.at("p_diag").vector(n);
  } else if (cfg.x_outer.type == "box") {
    outer.allow_keys({"type", "lower", "upper"});
    cfg.x_outer.box = BoxConfig{outer.at("lower").vector(n), outer.at("upper").vector(n)};
  } else {
    outer.at("type").fail("unknown x_outer type '" + cfg.x_outer.type + "' (barrier, box)");
  }

  if (auto v = f.find("domain")) cfg.domain = parse_box(*v, n);
  if (auto v = f.find("state_samples")) cfg.state_samples = v->unsigned_integer();
  if (auto v = f.find("iteration_budget")) cfg.iteration_budget = v->unsigned_integer();
  if (auto v = f.find("phi_retries")) cfg.phi_retries = v->integer();
  if (auto v = f.find("volume_samples")) cfg.volume_samples = v->unsigned_integer();
  if (cfg.state_samples < 1) f.at("state_samples").fail("must be >= 1");
  if (cfg.volume_samples < 1) f.at("volume_samples").fail("must be >= 1");
  if (cfg.phi_retries < 1) f.at("phi_retries").fail("must be >= 1");
  return cfg;
}

OutputConfig parse_outputs(const Field& f) {
  f.allow_keys({"trajectory", "metrics", "analysis", "inactivity", "synthesis", "substep_rows"});
  OutputConfig cfg;
  if (auto v = f.find("trajectory")) cfg.trajectory = v->string();
  if (auto v = f.find("metrics")) cfg.metrics = v->string();
  if (auto v = f.find("analysis")) cfg.analysis = v->string();
  if (auto v = f.find("inactivity")) cfg.inactivity = v->string();
  if (auto v = f.find("synthesis")) cfg.synthesis = v->string();
  if (auto v = f.find("substep_rows")) cfg.substep_rows = v->boolean();
  return cfg;
}

json auto_number(const std::optional<double>& v) { return v ? json(*v) : json("auto"); }

json box_json(const BoxConfig& b) { return {{"lower", b.lower}, {"upper", b.upper}}; }

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Eigen::MatrixXd to_eigen(const Matrix& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return out;
}

}  // namespace

int state_dim(const SystemConfig& cfg) {
  if (cfg.type == "double_integrator") return 2;
  if (cfg.type == "planar_quadrotor") return 5;
  return static_cast<int>(cfg.a.size());
}

int input_dim(const SystemConfig& cfg) {
  if (cfg.type == "double_integrator") return 1;
  if (cfg.type == "planar_quadrotor") return 2;
  return static_cast<int>(cfg.b.front().size());
}

RunConfig parse_run_config(const json& j) {
  const Field root(j, "$");
  root.allow_keys({"system", "barriers", "input_set", "policy", "dt_control", "dt_integ", "horizon",
                   "x0", "sampled", "grid", "synthesis", "outputs", "seed"});
  RunConfig cfg;
  cfg.system = parse_system(root.at("system"));
  const auto n = static_cast<std::size_t>(state_dim(cfg.system));
  const auto m = static_cast<std::size_t>(input_dim(cfg.system));

  if (auto f = root.find("barriers")) {
    for (const Field& b : f->array()) cfg.barriers.push_back(parse_barrier(b, n));
  }
  if (auto f = root.find("input_set")) cfg.input_set = parse_input_set(*f, m);
  if (auto f = root.find("policy")) cfg.policy = parse_policy(*f, cfg.system, m);
  if (auto f = root.find("dt_control")) cfg.dt_control = f->positive();
  if (auto f = root.find("dt_integ")) cfg.dt_integ = f->positive();
  if (auto f = root.find("horizon")) cfg.horizon = f->positive();
  if (auto f = root.find("x0")) cfg.x0 = f->vector(n);
  if (auto f = root.find("sampled")) cfg.sampled = parse_sampled(*f, n, cfg.barriers.size());
  if (auto f = root.find("grid")) cfg.grid = parse_grid(*f, n);
  if (auto f = root.find("synthesis")) cfg.synthesis = parse_synthesis(*f, n);
  if (auto f = root.find("outputs")) cfg.outputs = parse_outputs(*f);
  if (auto f = root.find("seed")) cfg.seed = f->unsigned_integer();
  if (cfg.dt_integ && *cfg.dt_integ > cfg.dt_control / 10.0 * (1.0 + 1e-9)) {
    root.at("dt_integ").fail("must not exceed dt_control / 10");
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": invalid JSON: " + e.what());
  }
  return parse_run_config(j);
}

json to_json(const RunConfig& cfg) {
  json j;
  json system = {{"type", cfg.system.type}};
  if (cfg.system.type == "planar_quadrotor") {
    const auto& p = cfg.system.params;
    system["params"] = {{"alpha1", p.alpha1}, {"alpha2", p.alpha2}, {"beta1", p.beta1},
                        {"beta2", p.beta2},   {"gravity", p.gravity}};
  } else if (cfg.system.type == "custom_linear") {
    system["A"] = cfg.system.a;
    system["B"] = cfg.system.b;
  }
  j["system"] = system;

  j["barriers"] = json::array();
  for (const auto& b : cfg.barriers) {
    j["barriers"].push_back({{"center", b.center},
                             {"p_diag", b.p_diag},
                             {"gamma_slope", b.gamma_slope},
                             {"tightening", auto_number(b.tightening)}});
  }
  if (cfg.input_set) {
    const auto& u = *cfg.input_set;
    if (u.type == "box") {
      j["input_set"] = {{"type", "box"}, {"lower", u.box.lower}, {"upper", u.box.upper}};
    } else {
      j["input_set"] = {{"type", "polytope"}, {"A", u.a}, {"b", u.b}};
      if (!u.vertices.empty()) j["input_set"]["vertices"] = u.vertices;
    }
  }
  if (cfg.policy) {
    const auto& p = *cfg.policy;
    if (p.type == "constant") {
      j["policy"] = {{"type", "constant"}, {"value", p.value}};
    } else {
      json waypoints = json::array();
      for (const auto& w : p.waypoints) waypoints.push_back({{"t", w.t}, {"position", w.position}});
      j["policy"] = {{"type", "pd_tracking"}, {"kp", p.kp}, {"kd", p.kd}, {"waypoints", waypoints}};
    }
  }
  j["dt_control"] = cfg.dt_control;
  if (cfg.dt_integ) j["dt_integ"] = *cfg.dt_integ;
  j["horizon"] = cfg.horizon;
  if (!cfg.x0.empty()) j["x0"] = cfg.x0;

  const auto& s = cfg.sampled;
  json sampled = {{"l_pi", auto_number(s.l_pi)},
                  {"sup_samples", s.sup_samples},
                  {"lipschitz_pairs", s.lipschitz_pairs}};
  if (s.domain) sampled["domain"] = box_json(*s.domain);
  if (s.f_bar) sampled["f_bar"] = *s.f_bar;
  if (s.g_bar) sampled["g_bar"] = *s.g_bar;
  if (s.m) sampled["m"] = *s.m;
  j["sampled"] = sampled;

  if (cfg.grid) {
    j["grid"] = {{"lower", cfg.grid->bounds.lower},
                 {"upper", cfg.grid->bounds.upper},
                 {"counts", cfg.grid->counts}};
  }
  if (cfg.synthesis) {
    const auto& sy = *cfg.synthesis;
    json theta = json::array();
    for (const auto& b : sy.theta_box) theta.push_back(box_json(b));
    json phi = json::array();
    for (const auto& r : sy.phi_box) phi.push_back({{"lower", r.lower}, {"upper", r.upper}});
    json outer = {{"type", sy.x_outer.type}};
    if (sy.x_outer.type == "barrier") {
      outer["center"] = sy.x_outer.center;
      outer["p_diag"] = sy.x_outer.p_diag;
    } else {
      outer["lower"] = sy.x_outer.box.lower;
      outer["upper"] = sy.x_outer.box.upper;
    }
    json section = {{"k", sy.k},
                    {"theta_box", theta},
                    {"phi_box", phi},
                    {"epsilon", sy.epsilon},
                    {"x_outer", outer},
                    {"state_samples", sy.state_samples},
                    {"iteration_budget", sy.iteration_budget},
                    {"phi_retries", sy.phi_retries},
                    {"volume_samples", sy.volume_samples}};
    if (sy.domain) section["domain"] = box_json(*sy.domain);
    j["synthesis"] = section;
  }
  const auto& o = cfg.outputs;
  j["outputs"] = {{"trajectory", o.trajectory}, {"metrics", o.metrics},
                  {"analysis", o.analysis},     {"inactivity", o.inactivity},
                  {"synthesis", o.synthesis},   {"substep_rows", o.substep_rows}};
  j["seed"] = cfg.seed;
  return j;
}

ControlAffineSystem build_system(const SystemConfig& cfg) {
  if (cfg.type == "double_integrator") return make_double_integrator();
  if (cfg.type == "planar_quadrotor") return make_planar_quadrotor(cfg.params);
  return make_linear_system(to_eigen(cfg.a), to_eigen(cfg.b), "custom_linear");
}

PolytopicInputSet build_input_set(const InputSetConfig& cfg) {
  if (cfg.type == "box") return PolytopicInputSet::box(to_eigen(cfg.box.lower), to_eigen(cfg.box.upper));
  std::vector<InputVector> vertices;
  for (const auto& v : cfg.vertices) vertices.push_back(to_eigen(v));
  return PolytopicInputSet(to_eigen(cfg.a), to_eigen(cfg.b), std::move(vertices));
}

Policy build_policy(const PolicyConfig& cfg, const SystemConfig& system) {
  if (cfg.type == "constant") return Policy::constant(to_eigen(cfg.value));
  PdTrackingPolicy pd;
  pd.kp = cfg.kp;
  pd.kd = cfg.kd;
  pd.params = system.params;
  for (const auto& w : cfg.waypoints) {
    pd.waypoints.push_back({w.t, Eigen::Vector2d(w.position[0], w.position[1])});
  }
  return Policy(std::move(pd));
}

Box build_box(const BoxConfig& cfg) { return Box(to_eigen(cfg.lower), to_eigen(cfg.upper)); }

BarrierStack build_stack(const std::vector<BarrierConfig>& barriers,
                         const std::optional<std::vector<double>>& tightenings) {
  if (barriers.empty()) throw ConfigError("$.barriers: at least one barrier required");
  std::vector<BarrierEntry> entries;
  for (std::size_t i = 0; i < barriers.size(); ++i) {
    const auto& b = barriers[i];
    double d = 0.0;
    if (tightenings) {
      d = (*tightenings)[i];
    } else if (b.tightening) {
      d = *b.tightening;
    }
    entries.push_back(
        {QuadraticBarrier(to_eigen(b.center), to_eigen(b.p_diag)), ClassKe(b.gamma_slope), d});
  }
  return BarrierStack(std::move(entries));
}

std::optional<Box> state_domain(const RunConfig& cfg) {
  if (cfg.sampled.domain) return build_box(*cfg.sampled.domain);
  if (cfg.system.type == "planar_quadrotor") return quadrotor_working_domain();
  return std::nullopt;
}

SynthesisConfig build_synthesis_config(const SynthesisSection& section, std::uint64_t seed) {
  SynthesisConfig cfg;
  cfg.k = section.k;
  for (const auto& b : section.theta_box) cfg.theta_box.push_back(build_box(b));
  cfg.phi_box = section.phi_box;
  cfg.epsilon = section.epsilon;
  if (section.x_outer.type == "barrier") {
    cfg.x_outer = QuadraticBarrier(to_eigen(section.x_outer.center), to_eigen(section.x_outer.p_diag));
  } else {
    cfg.x_outer = build_box(section.x_outer.box);
  }
  if (section.domain) cfg.domain = build_box(*section.domain);
  cfg.state_samples = section.state_samples;
  cfg.iteration_budget = section.iteration_budget;
  cfg.seed = seed;
  cfg.phi_retries = section.phi_retries;
  cfg.volume_samples = section.volume_samples;
  return cfg;
}

}  // namespace cbf_guard::app
