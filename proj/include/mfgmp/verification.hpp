#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mfgmp/decoupled_solver.hpp"
#include "mfgmp/extragradient.hpp"
#include "mfgmp/model.hpp"

namespace mfgmp {

struct CheckResult {
  std::string name;
  bool pass = false;
  double margin = std::numeric_limits<double>::quiet_NaN();  // worst observed
  double se = 0.0;                                           // standard error at the worst sample
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  double estimate = std::numeric_limits<double>::quiet_NaN();  // kappa-hat, eta-hat, ...
  std::string witness;  // failing sample, replayable from (seed, index)
  std::size_t witness_index = 0;
};

struct CertificationReport {
  std::vector<CheckResult> checks;
  bool all_pass() const;
};

// Random Gaussian-mixture clouds: two components, weights 1/2, centres ~ N(0, 1.5^2),
// scales ~ 0.2 + U(0, 1); q ~ U(-q_radius, q_radius); z ~ U(-z_radius, z_radius).
struct SampleSpec {
  std::size_t particles = 64;
  double q_radius = 2.0;
  double z_radius = 2.0;
};

std::vector<double> mixture_cloud(std::uint64_t seed, std::size_t sample, std::size_t which,
                                  std::size_t particles, std::size_t d);

CheckResult check_terminal_monotonicity(const CoefficientSet& set, const Eigen::MatrixXd& A,
                                        double beta0, std::size_t samples, std::uint64_t seed,
                                        const SampleSpec& spec = {});

// z-fixed form always; with `slack` also the (C_M + K) form on z-pairs.
CheckResult check_coefficient_monotonicity(const CoefficientSet& set, const Eigen::MatrixXd& A,
                                           double kappa, std::size_t samples, std::uint64_t seed,
                                           const SampleSpec& spec = {},
                                           const MonotonicityData* slack = nullptr);

// A = a I with a from the grid {0.1, 0.2, ..., 10} maximizing kappa-hat
double select_A_by_grid(const CoefficientSet& set, std::size_t samples, std::uint64_t seed,
                        const SampleSpec& spec = {});

template <class V>
CheckResult check_v_monotonicity(MonotoneOperator<V>& op, std::size_t pairs, std::uint64_t seed) {
  CheckResult r;
  r.name = "v_monotonicity";
  r.seed = seed;
  r.pass = true;
  double eta = std::numeric_limits<double>::infinity();
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pairs; ++i) {
    const V a = op.random_point(seed, 2 * i);
    const V b = op.random_point(seed, 2 * i + 1);
    const V da = difference(a, b);
    const double n2 = op.inner(da, da);
    if (n2 < 1e-24) continue;
    const V dv = difference(op.apply(a), op.apply(b));
    const double ip = op.inner(dv, da);
    const double se = op.inner_se(dv, da);
    ++r.samples;
    eta = std::min(eta, ip / n2);
    const double slack = ip + 3.0 * se + 1e-12 * n2;
    if (ip < worst) {
      worst = ip;
      r.se = se;
    }
    if (slack < 0.0 && r.pass) {
      r.pass = false;
      r.witness_index = i;
      r.witness = "pair " + std::to_string(i) + ": <dv, da> = " + std::to_string(ip) +
                  ", se = " + std::to_string(se) + ", |da|^2 = " + std::to_string(n2);
    }
  }
  r.margin = worst;
  r.estimate = eta;
  return r;
}

CheckResult check_z_bound(const SolveOutput& solve, double lip_q_phi, double tol_rel = 0.05);
// every z reaching the coefficients is the clamped value
CheckResult check_z_clamped(const SolveOutput& solve, double M);

struct Thresholds {
  double gamma_star = 0.0;
  double beta0 = 0.0;
  double lambda = 0.0;
  double beta_T = 0.0;  // beta*(T)
  double sigma0_T = 0.0;
  std::optional<double> sigma0_star;
  int branch = 0;  // 1 or 2 when sigma0_star is available
  double beta_kappa = std::numeric_limits<double>::quiet_NaN();
  std::string note;

  double beta_star(double t) const;
};

Thresholds compute_thresholds(const MonotonicityData& data, double lambda, double T);

CheckResult check_monotonicity_propagation(const SolveOutput& s1, const SolveOutput& s2,
                                           const Eigen::MatrixXd& A,
                                           const std::function<double(double)>& beta,
                                           const TimeGrid& grid);

// ||U - grad_alpha L(X, q, theta^F, mu)||_T
CheckResult check_pontryagin_residual(const SolveOutput& solve, const CoefficientSet& set,
                                      const TimeGrid& grid, double tol);

struct LipschitzEstimates {
  double lip_x = 0.0;   // zero-mean particle perturbation
  double lip_q = 0.0;   // phi against q_0
  double lip_mu = 0.0;  // U against a shift of the whole law
  double h = 0.0;
};

// converged_solve maps an initial condition to a converged solve on the same noise
LipschitzEstimates estimate_decoupling_lipschitz(
    const InitialCondition& base, const std::function<SolveOutput(const InitialCondition&)>& solve,
    double h = 0.1);

}  // namespace mfgmp
