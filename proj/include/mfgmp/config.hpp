#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mfgmp/decoupled_solver.hpp"
#include "mfgmp/errors.hpp"
#include "mfgmp/model.hpp"
#include "mfgmp/regression.hpp"
#include "json.hpp"

namespace mfgmp {

struct ConfigParseError : ConfigError {
  explicit ConfigParseError(std::vector<std::string> v);
  std::vector<std::string> violations;
};

struct ExtragradientSettings {
  double gamma = 0.0;  // 0: 0.5 / L-hat
  double safety = 0.5;
  std::size_t lipschitz_probes = 6;
  std::size_t n_max = 100;
  double tol = 1e-8;
  bool averaging = true;
  double A = 1.0;  // A = a I
};

struct VerificationSettings {
  bool terminal = true;
  bool coefficient = true;
  bool v_monotone = true;
  bool z_bound = true;
  bool propagation = true;
  bool pontryagin = true;
  std::size_t samples = 200;
  std::size_t v_pairs = 20;
  std::size_t sample_particles = 64;
  double q_radius = 2.0;
  double z_radius = 2.0;
  double tol_disc = 0.05;
  double second_x_shift = 0.5;  // second initial condition for propagation
  double second_q_shift = 0.3;
};

struct SweepSettings {
  std::vector<double> sigma0;
  std::vector<double> horizons;
  std::size_t workers = 1;
  bool picard = true;
  std::size_t picard_max_iter = 50;
  double picard_tol = 1e-6;
  bool lipschitz = false;
  double lipschitz_h = 0.1;
};

struct RunConfig {
  std::string model = "lq";  // "lq" | "zero"
  LQParams lq;
  ModelConstants constants;
  double horizon = 1.0;
  std::size_t steps = 100;
  std::size_t scenarios = 64;
  std::size_t particles = 2000;
  bool antithetic = false;
  InitialSpec initial;
  RegressionBasis basis;
  ExtragradientSettings eg;
  VerificationSettings verify;
  SweepSettings sweep;
  std::uint64_t seed = 1;
  std::string output = "out";

  nlohmann::json to_json() const;
};

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

// edit distance used for key suggestions
std::size_t levenshtein(const std::string& a, const std::string& b);

}  // namespace mfgmp
