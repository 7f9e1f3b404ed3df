#include "mfgmp/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace mfgmp {

using nlohmann::json;

namespace {

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += (s.empty() ? "" : "; ") + x;
  return s;
}

// Reads one object, remembering which keys were consumed.
class Section {
 public:
  Section(const json& j, std::string path, std::vector<std::string>& errs)
      : j_(j), path_(std::move(path)), errs_(errs) {
    if (!j_.is_object()) errs_.push_back(name("") + " must be an object");
  }

  std::string name(const std::string& key) const {
    if (path_.empty()) return key;
    return key.empty() ? path_ : path_ + "." + key;
  }

  const json* find(const std::string& key) {
    known_.push_back(key);
    if (!j_.is_object()) return nullptr;
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void num(const std::string& key, double& out) {
    if (const json* v = find(key)) {
      if (v->is_number()) out = v->get<double>();
      else errs_.push_back(name(key) + " must be a number");
    }
  }
  void count(const std::string& key, std::size_t& out) {
    if (const json* v = find(key)) {
      if (v->is_number_integer() && v->get<long long>() >= 0) out = v->get<std::size_t>();
      else errs_.push_back(name(key) + " must be a nonnegative integer");
    }
  }
  void integer(const std::string& key, int& out) {
    if (const json* v = find(key)) {
      if (v->is_number_integer()) out = v->get<int>();
      else errs_.push_back(name(key) + " must be an integer");
    }
  }
  void flag(const std::string& key, bool& out) {
    if (const json* v = find(key)) {
      if (v->is_boolean()) out = v->get<bool>();
      else errs_.push_back(name(key) + " must be a boolean");
    }
  }
  void text(const std::string& key, std::string& out) {
    if (const json* v = find(key)) {
      if (v->is_string()) out = v->get<std::string>();
      else errs_.push_back(name(key) + " must be a string");
    }
  }
  void list(const std::string& key, std::vector<double>& out) {
    if (const json* v = find(key)) {
      bool ok = v->is_array();
      if (ok)
        for (const auto& e : *v) ok &= e.is_number();
      if (ok) out = v->get<std::vector<double>>();
      else errs_.push_back(name(key) + " must be an array of numbers");
    }
  }
  // clamp may be null (no clamp)
  void maybe_inf(const std::string& key, double& out) {
    if (const json* v = find(key)) {
      if (v->is_null()) out = kInf;
      else if (v->is_number()) out = v->get<double>();
      else errs_.push_back(name(key) + " must be a number or null");
    }
  }

  Section sub(const std::string& key) {
    static const json empty = json::object();
    const json* v = find(key);
    return Section(v ? *v : empty, name(key), errs_);
  }

  // unknown keys with a suggestion from the known ones
  void finish() {
    if (!j_.is_object()) return;
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      const std::string& k = it.key();
      if (std::find(known_.begin(), known_.end(), k) != known_.end()) continue;
      std::string best;
      std::size_t bd = 99;
      for (const auto& c : known_) {
        const std::size_t dd = levenshtein(k, c);
        if (dd < bd) {
          bd = dd;
          best = c;
        }
      }
      std::string msg = "unknown key \"" + name(k) + "\"";
      if (!best.empty() && bd <= std::max<std::size_t>(2, best.size() / 3))
        msg += " (did you mean \"" + best + "\"?)";
      errs_.push_back(msg);
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::vector<std::string>& errs_;
  std::vector<std::string> known_;
};

void require(bool ok, const std::string& msg, std::vector<std::string>& errs) {
  if (!ok) errs.push_back(msg);
}

}  // namespace

ConfigParseError::ConfigParseError(std::vector<std::string> v)
    : ConfigError("invalid config: " + join(v)), violations(std::move(v)) {}

std::size_t levenshtein(const std::string& a, const std::string& b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

RunConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigParseError({std::string("malformed JSON: ") + e.what()});
  }
  RunConfig c;
  std::vector<std::string> errs;
  Section top(root, "", errs);

  {
    Section m = top.sub("model");
    m.text("type", c.model);
    Section p = m.sub("params");
    p.num("c1", c.lq.c1);
    p.num("c2", c.lq.c2);
    p.num("c3", c.lq.c3);
    p.num("g1", c.lq.g1);
    p.num("g2", c.lq.g2);
    p.num("b", c.lq.b);
    p.num("r1", c.lq.r1);
    p.num("r2", c.lq.r2);
    p.num("p1", c.lq.p1);
    p.num("p2", c.lq.p2);
    p.finish();
    m.finish();
  }
  {
    Section k = top.sub("constants");
    k.num("sigma", c.constants.sigma);
    k.num("sigma0", c.constants.sigma0);
    k.num("lambda", c.constants.lambda);
    k.maybe_inf("clamp", c.constants.clamp);
    k.finish();
  }
  {
    Section g = top.sub("grid");
    g.num("horizon", c.horizon);
    g.count("steps", c.steps);
    g.finish();
  }
  {
    Section e = top.sub("ensemble");
    e.count("scenarios", c.scenarios);
    e.count("particles", c.particles);
    e.flag("antithetic", c.antithetic);
    e.finish();
  }
  {
    Section i = top.sub("initial");
    i.num("x_mean", c.initial.x_mean);
    i.num("x_std", c.initial.x_std);
    i.num("x_scenario_std", c.initial.x_scenario_std);
    i.num("q_mean", c.initial.q_mean);
    i.num("q_std", c.initial.q_std);
    i.finish();
  }
  {
    Section r = top.sub("regression");
    r.integer("particle_degree", c.basis.particle_degree);
    r.integer("scenario_degree", c.basis.scenario_degree);
    r.flag("include_mean_u", c.basis.include_mean_u);
    r.num("ridge", c.basis.ridge);
    r.finish();
  }
  {
    Section e = top.sub("extragradient");
    e.num("gamma", c.eg.gamma);
    e.num("safety", c.eg.safety);
    e.count("lipschitz_probes", c.eg.lipschitz_probes);
    e.count("n_max", c.eg.n_max);
    e.num("tol", c.eg.tol);
    e.flag("averaging", c.eg.averaging);
    e.num("A", c.eg.A);
    e.finish();
  }
  {
    Section v = top.sub("verification");
    v.flag("terminal", c.verify.terminal);
    v.flag("coefficient", c.verify.coefficient);
    v.flag("v_monotone", c.verify.v_monotone);
    v.flag("z_bound", c.verify.z_bound);
    v.flag("propagation", c.verify.propagation);
    v.flag("pontryagin", c.verify.pontryagin);
    v.count("samples", c.verify.samples);
    v.count("v_pairs", c.verify.v_pairs);
    v.count("sample_particles", c.verify.sample_particles);
    v.num("q_radius", c.verify.q_radius);
    v.num("z_radius", c.verify.z_radius);
    v.num("tol_disc", c.verify.tol_disc);
    v.num("second_x_shift", c.verify.second_x_shift);
    v.num("second_q_shift", c.verify.second_q_shift);
    v.finish();
  }
  {
    Section s = top.sub("sweep");
    s.list("sigma0", c.sweep.sigma0);
    s.list("horizons", c.sweep.horizons);
    s.count("workers", c.sweep.workers);
    s.flag("picard", c.sweep.picard);
    s.count("picard_max_iter", c.sweep.picard_max_iter);
    s.num("picard_tol", c.sweep.picard_tol);
    s.flag("lipschitz", c.sweep.lipschitz);
    s.num("lipschitz_h", c.sweep.lipschitz_h);
    s.finish();
  }
  if (const json* v = top.find("seed")) {
    if (v->is_number_unsigned()) c.seed = v->get<std::uint64_t>();
    else errs.push_back("seed must be a nonnegative integer");
  }
  top.text("output", c.output);
  top.finish();

  // value checks
  require(c.model == "lq" || c.model == "zero", "model.type must be \"lq\" or \"zero\"", errs);
  require(c.constants.sigma >= 0.0, "constants.sigma must be nonnegative", errs);
  require(c.constants.sigma0 >= 0.0, "constants.sigma0 must be nonnegative", errs);
  require(std::isfinite(c.constants.lambda), "constants.lambda must be finite", errs);
  require(c.constants.clamp > 0.0, "constants.clamp must be positive", errs);
  require(c.horizon > 0.0 && std::isfinite(c.horizon), "grid.horizon must be positive", errs);
  require(c.steps >= 1, "grid.steps must be at least 1", errs);
  require(c.scenarios >= 1, "ensemble.scenarios must be at least 1", errs);
  require(c.particles >= 2, "ensemble.particles must be at least 2", errs);
  require(c.initial.x_std >= 0.0, "initial.x_std must be nonnegative", errs);
  require(c.initial.x_scenario_std >= 0.0, "initial.x_scenario_std must be nonnegative", errs);
  require(c.initial.q_std >= 0.0, "initial.q_std must be nonnegative", errs);
  require(c.basis.particle_degree >= 1 && c.basis.particle_degree <= 3,
          "regression.particle_degree must be in 1..3", errs);
  require(c.basis.scenario_degree >= 1 && c.basis.scenario_degree <= 3,
          "regression.scenario_degree must be in 1..3", errs);
  require(c.basis.ridge >= 0.0, "regression.ridge must be nonnegative", errs);
  require(c.eg.gamma >= 0.0, "extragradient.gamma must be nonnegative (0 selects 0.5/L)", errs);
  require(c.eg.safety > 0.0, "extragradient.safety must be positive", errs);
  require(c.eg.lipschitz_probes >= 2, "extragradient.lipschitz_probes must be at least 2", errs);
  require(c.eg.n_max >= 1, "extragradient.n_max must be at least 1", errs);
  require(c.eg.tol > 0.0, "extragradient.tol must be positive", errs);
  require(c.eg.A > 0.0, "extragradient.A must be positive", errs);
  require(c.verify.samples >= 1, "verification.samples must be at least 1", errs);
  require(c.verify.sample_particles >= 2, "verification.sample_particles must be at least 2", errs);
  require(c.verify.q_radius > 0.0, "verification.q_radius must be positive", errs);
  require(c.verify.z_radius >= 0.0, "verification.z_radius must be nonnegative", errs);
  require(c.verify.tol_disc > 0.0, "verification.tol_disc must be positive", errs);
  for (double s : c.sweep.sigma0) require(s >= 0.0, "sweep.sigma0 entries must be nonnegative", errs);
  for (double t : c.sweep.horizons) require(t > 0.0, "sweep.horizons entries must be positive", errs);
  require(c.sweep.workers >= 1, "sweep.workers must be at least 1", errs);
  require(c.sweep.picard_tol > 0.0, "sweep.picard_tol must be positive", errs);
  require(c.sweep.lipschitz_h > 0.0, "sweep.lipschitz_h must be positive", errs);

  if (!errs.empty()) throw ConfigParseError(errs);
  c.constants.d = 1;
  c.constants.d0 = 1;
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

json RunConfig::to_json() const {
  json j;
  j["model"] = {{"type", model},
                {"params",
                 {{"c1", lq.c1}, {"c2", lq.c2}, {"c3", lq.c3}, {"g1", lq.g1}, {"g2", lq.g2},
                  {"b", lq.b}, {"r1", lq.r1}, {"r2", lq.r2}, {"p1", lq.p1}, {"p2", lq.p2}}}};
  j["constants"] = {{"sigma", constants.sigma},
                    {"sigma0", constants.sigma0},
                    {"lambda", constants.lambda},
                    {"clamp", std::isinf(constants.clamp) ? json(nullptr) : json(constants.clamp)}};
  j["grid"] = {{"horizon", horizon}, {"steps", steps}};
  j["ensemble"] = {{"scenarios", scenarios}, {"particles", particles}, {"antithetic", antithetic}};
  j["initial"] = {{"x_mean", initial.x_mean},
                  {"x_std", initial.x_std},
                  {"x_scenario_std", initial.x_scenario_std},
                  {"q_mean", initial.q_mean},
                  {"q_std", initial.q_std}};
  j["regression"] = {{"particle_degree", basis.particle_degree},
                     {"scenario_degree", basis.scenario_degree},
                     {"include_mean_u", basis.include_mean_u},
                     {"ridge", basis.ridge}};
  j["extragradient"] = {{"gamma", eg.gamma},         {"safety", eg.safety},
                        {"lipschitz_probes", eg.lipschitz_probes},
                        {"n_max", eg.n_max},         {"tol", eg.tol},
                        {"averaging", eg.averaging}, {"A", eg.A}};
  j["verification"] = {{"terminal", verify.terminal},
                       {"coefficient", verify.coefficient},
                       {"v_monotone", verify.v_monotone},
                       {"z_bound", verify.z_bound},
                       {"propagation", verify.propagation},
                       {"pontryagin", verify.pontryagin},
                       {"samples", verify.samples},
                       {"v_pairs", verify.v_pairs},
                       {"sample_particles", verify.sample_particles},
                       {"q_radius", verify.q_radius},
                       {"z_radius", verify.z_radius},
                       {"tol_disc", verify.tol_disc},
                       {"second_x_shift", verify.second_x_shift},
                       {"second_q_shift", verify.second_q_shift}};
  j["sweep"] = {{"sigma0", sweep.sigma0},
                {"horizons", sweep.horizons},
                {"workers", sweep.workers},
                {"picard", sweep.picard},
                {"picard_max_iter", sweep.picard_max_iter},
                {"picard_tol", sweep.picard_tol},
                {"lipschitz", sweep.lipschitz},
                {"lipschitz_h", sweep.lipschitz_h}};
  j["seed"] = seed;
  j["output"] = output;
  return j;
}

}  // namespace mfgmp
