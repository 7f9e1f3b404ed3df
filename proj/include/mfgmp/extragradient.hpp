#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mfgmp/decoupled_solver.hpp"
#include "mfgmp/ensemble.hpp"
#include "mfgmp/errors.hpp"
#include "mfgmp/grid_noise.hpp"

namespace mfgmp {

template <class V>
class MonotoneOperator {
 public:
  virtual ~MonotoneOperator() = default;
  virtual V apply(const V& a) = 0;
  virtual double inner(const V& a, const V& b) const = 0;
  // Monte Carlo standard error of inner(a, b); zero for deterministic operators
  virtual double inner_se(const V&, const V&) const { return 0.0; }
  // reproducible random element of the domain
  virtual V random_point(std::uint64_t seed, std::size_t index) const = 0;
};

inline void axpy(double a, const Eigen::VectorXd& x, Eigen::VectorXd& y) { y += a * x; }

template <class V>
double op_norm(const MonotoneOperator<V>& op, const V& a) {
  return std::sqrt(std::max(0.0, op.inner(a, a)));
}

template <class V>
V difference(const V& a, const V& b) {
  V r = a;
  axpy(-1.0, b, r);
  return r;
}

template <class V>
struct StepResult {
  V half, next, v_n, v_half;
};

template <class V>
StepResult<V> extragradient_step(const V& alpha, double gamma, MonotoneOperator<V>& op) {
  if (!(gamma > 0.0)) throw ConfigError("extragradient.gamma must be positive");
  StepResult<V> r{alpha, alpha, op.apply(alpha), V{}};
  axpy(-gamma, r.v_n, r.half);
  r.v_half = op.apply(r.half);
  axpy(-gamma, r.v_half, r.next);
  return r;
}

struct ExtragradientConfig {
  double gamma = 0.0;
  std::size_t n_max = 100;
  double tol = 1e-8;
  bool averaging = true;
  double divergence_factor = 10.0;
  std::size_t divergence_window = 5;
};

struct RateFit {
  double lambda = std::numeric_limits<double>::quiet_NaN();
  double r2 = std::numeric_limits<double>::quiet_NaN();
  double slope = std::numeric_limits<double>::quiet_NaN();
};

// least squares of log(values[i]) against i over [from, to)
RateFit fit_log_linear(const std::vector<double>& values, std::size_t from, std::size_t to);
// tail half, as used for the reported rate
RateFit fit_tail_half(const std::vector<double>& values);
// slope of log(y) against log(x)
RateFit fit_log_log(const std::vector<double>& x, const std::vector<double>& y);

template <class V>
struct ExtragradientReport {
  std::vector<double> residual_norms;   // ||v(alpha^n)||, n = 0, 1, ...
  std::vector<double> dist_to_ref;      // when a reference is known
  std::vector<double> avg_dist_to_ref;  // distance of the running mean of half iterates
  std::vector<double> seconds;
  double gamma = 0.0;
  bool converged = false;
  bool diverged = false;
  std::string message;
  std::size_t iterations = 0;
  RateFit rate;
  V final_iterate;
  V averaged_half;
};

using Observer = std::function<void(std::size_t n)>;

template <class V>
ExtragradientReport<V> run(MonotoneOperator<V>& op, const V& alpha1,
                           const ExtragradientConfig& cfg, const V* reference = nullptr,
                           const Observer& after_half = {}) {
  if (!(cfg.gamma > 0.0)) throw ConfigError("extragradient.gamma must be positive");
  ExtragradientReport<V> rep;
  rep.gamma = cfg.gamma;
  V alpha = alpha1;
  std::optional<V> avg;
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };
  for (std::size_t n = 0;; ++n) {
    V vn;
    try {
      vn = op.apply(alpha);
    } catch (const std::runtime_error& e) {
      rep.diverged = true;
      rep.message = std::string("operator failure: ") + e.what();
      break;
    }
    const double res = op_norm(op, vn);
    rep.residual_norms.push_back(res);
    if (reference) rep.dist_to_ref.push_back(op_norm(op, difference(alpha, *reference)));
    rep.seconds.push_back(elapsed());
    rep.iterations = n;
    if (!std::isfinite(res)) {
      rep.diverged = true;
      rep.message = "non-finite residual";
      break;
    }
    if (n >= cfg.divergence_window) {
      const double past = rep.residual_norms[n - cfg.divergence_window];
      if (res > cfg.divergence_factor * past) {
        rep.diverged = true;
        rep.message = "residual grew by the divergence factor within the window";
        break;
      }
    }
    if (res <= cfg.tol) {
      rep.converged = true;
      break;
    }
    if (n >= cfg.n_max) break;

    V half = alpha;
    axpy(-cfg.gamma, vn, half);
    V vh;
    try {
      vh = op.apply(half);
    } catch (const std::runtime_error& e) {
      rep.diverged = true;
      rep.message = std::string("operator failure: ") + e.what();
      break;
    }
    if (cfg.averaging) {
      if (!avg) {
        avg = half;
      } else {
        // running mean over half iterates
        const double w = 1.0 / double(n + 1);
        V delta = difference(half, *avg);
        axpy(w, delta, *avg);
      }
      if (reference) rep.avg_dist_to_ref.push_back(op_norm(op, difference(*avg, *reference)));
    }
    if (after_half) after_half(n);
    axpy(-cfg.gamma, vh, alpha);
  }
  rep.rate = fit_tail_half(rep.residual_norms);
  rep.final_iterate = std::move(alpha);
  if (avg) rep.averaged_half = std::move(*avg);
  return rep;
}

template <class V>
double estimate_lipschitz_v(MonotoneOperator<V>& op, std::size_t probes, std::uint64_t seed) {
  if (probes < 2) throw ConfigError("estimate_lipschitz_v needs at least 2 probes");
  std::vector<V> pts, vals;
  for (std::size_t i = 0; i < probes; ++i) {
    pts.push_back(op.random_point(seed, i));
    vals.push_back(op.apply(pts.back()));
  }
  double L = 0.0;
  for (std::size_t i = 0; i < probes; ++i)
    for (std::size_t j = i + 1; j < probes; ++j) {
      const double den = op_norm(op, difference(pts[i], pts[j]));
      if (den < 1e-14) continue;
      L = std::max(L, op_norm(op, difference(vals[i], vals[j])) / den);
    }
  return L;
}

inline double step_from_lipschitz(double L, double safety = 0.5) {
  if (!(L > 0.0)) throw ConfigError("Lipschitz estimate must be positive to derive a step");
  return safety / L;
}

// ---- synthetic operators on R^n

class LinearOperator final : public MonotoneOperator<Eigen::VectorXd> {
 public:
  explicit LinearOperator(Eigen::MatrixXd A, Eigen::VectorXd shift = {})
      : A_(std::move(A)), b_(shift.size() ? std::move(shift) : Eigen::VectorXd::Zero(A_.rows())) {}
  Eigen::VectorXd apply(const Eigen::VectorXd& a) override {
    ++evaluations;
    return A_ * a - b_;
  }
  double inner(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const override { return a.dot(b); }
  Eigen::VectorXd random_point(std::uint64_t seed, std::size_t index) const override;
  static LinearOperator scalar(double eta) { return LinearOperator(Eigen::MatrixXd::Constant(1, 1, eta)); }
  static LinearOperator rotation();
  std::size_t evaluations = 0;

 private:
  Eigen::MatrixXd A_;
  Eigen::VectorXd b_;
};

// ---- the decoupling operator v

struct FieldAverages {
  std::size_t count = 0;
  ParticleField U, X;   // N_t (+1 for X)
  ScenarioField q, p, Zphi;
  void add(const SolveOutput& so);
};

class DecouplingOperator final : public MonotoneOperator<ControlField> {
 public:
  DecouplingOperator(std::shared_ptr<const DecoupledProblem> problem, Eigen::MatrixXd A);
  ControlField apply(const ControlField& a) override;
  double inner(const ControlField& a, const ControlField& b) const override;
  double inner_se(const ControlField& a, const ControlField& b) const override;
  ControlField random_point(std::uint64_t seed, std::size_t index) const override;

  const SolveOutput& last_solve() const { return *last_; }
  const DecoupledProblem& problem() const { return *problem_; }
  const Eigen::MatrixXd& A() const { return A_; }
  std::size_t evaluations() const { return evaluations_; }
  // v from an existing solve
  ControlField v_from_solve(const SolveOutput& so) const;

 private:
  std::shared_ptr<const DecoupledProblem> problem_;
  Eigen::MatrixXd A_;
  std::shared_ptr<SolveOutput> last_;
  std::size_t evaluations_ = 0;
};

struct VEvaluation {
  ControlField v;
  SolveOutput solve;
};
VEvaluation evaluate_v(const ControlField& control, const DecoupledProblem& problem,
                       const Eigen::MatrixXd& A);

// ||(U, X, q, Z^phi) - (Ubar, Xbar, (qbar + pbar)/2, Zbar)||_T^2 against a reference solve
double averaged_error_sq(const FieldAverages& avg, const SolveOutput& ref, const TimeGrid& grid);

// auxiliary backward solve for phi-bar along the averaged paths
ScenarioField recover_phi_bar(const FieldAverages& avg, const DecoupledProblem& problem);

}  // namespace mfgmp
