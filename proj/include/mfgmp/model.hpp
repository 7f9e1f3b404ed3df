#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace mfgmp {

using cspan = std::span<const double>;
using mspan = std::span<double>;

inline constexpr std::size_t kMaxDim = 8;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct ModelConstants {
  double sigma = 0.0;
  double sigma0 = 0.0;
  double lambda = 0.0;
  std::size_t d = 1;
  std::size_t d0 = 1;
  double clamp = kInf;
};

// Conditional moments of (X, U) within one scenario, per component.
struct MeasureFeatures {
  std::vector<double> mean_x, mean_u, second_x, second_u, cross_xu;
};

MeasureFeatures measure_features(const double* x, const double* u, std::size_t particles,
                                 std::size_t d);

// Increasing piecewise-linear function on [0, inf), linear extrapolation past the last knot.
class PiecewiseLinear {
 public:
  PiecewiseLinear() = default;
  explicit PiecewiseLinear(std::vector<std::pair<double, double>> knots);
  static PiecewiseLinear zero() { return PiecewiseLinear({{0.0, 0.0}}); }
  static PiecewiseLinear linear(double slope) { return PiecewiseLinear({{0.0, 0.0}, {1.0, slope}}); }
  double operator()(double r) const;
  const std::vector<std::pair<double, double>>& knots() const { return knots_; }

 private:
  std::vector<std::pair<double, double>> knots_{{0.0, 0.0}};
};

struct LipschitzInfo {
  double C_coef = 0.0;
  PiecewiseLinear omega;
};

struct ThetaProblem {
  std::size_t particles = 0;
  cspan x;        // P*d
  cspan p;        // q^f, d0
  cspan z;        // d0
  cspan alpha_x;  // P*d
  cspan alpha_q;  // d0
};

struct ThetaSolution {
  std::vector<double> u;   // P*d
  std::vector<double> qb;  // d0
  std::size_t iterations = 0;
  double residual = 0.0;
};

class CoefficientSet {
 public:
  virtual ~CoefficientSet() = default;
  virtual std::string name() const = 0;
  virtual std::size_t dim() const = 0;
  virtual std::size_t major_dim() const = 0;

  virtual void F(cspan x, cspan q, cspan u, cspan z, const MeasureFeatures& mu, mspan out) const = 0;
  virtual void G(cspan x, cspan q, cspan u, cspan z, const MeasureFeatures& mu, mspan out) const = 0;
  virtual void Hz(cspan q, cspan z, const MeasureFeatures& mu, mspan out) const = 0;
  virtual double LH(cspan q, cspan z, const MeasureFeatures& mu) const = 0;
  virtual void g(cspan x, cspan q, const MeasureFeatures& mu, mspan out) const = 0;
  virtual double psi(cspan q, const MeasureFeatures& mu) const = 0;

  // Inverse of (U, q^b) -> (F', D_zH') evaluated at the midpoint (q^f + q^b)/2.
  virtual bool theta_closed_form(const ThetaProblem&, ThetaSolution&) const { return false; }
  // grad_alpha of the minor Lagrangian, when exposed.
  virtual bool lagrangian_gradient(cspan, cspan, cspan, const MeasureFeatures&, mspan) const {
    return false;
  }
  // Constants valid for |x|,|q|,|mean| <= radius.
  virtual LipschitzInfo lipschitz(double radius) const = 0;
  virtual double clamp_level() const { return kInf; }
};

using CoefficientPtr = std::shared_ptr<const CoefficientSet>;

struct CoefficientValues {
  std::vector<double> F, G, Hz;
  double LH = 0.0;
};

// Validates inputs; the clamp (if any) is applied by the set itself.
CoefficientValues eval_coefficients(const CoefficientSet& set, cspan x, cspan q, cspan u, cspan z,
                                    const MeasureFeatures& mu);

class ZeroModel final : public CoefficientSet {
 public:
  ZeroModel(std::size_t d = 1, std::size_t d0 = 1) : d_(d), d0_(d0) {}
  std::string name() const override { return "zero"; }
  std::size_t dim() const override { return d_; }
  std::size_t major_dim() const override { return d0_; }
  void F(cspan, cspan, cspan, cspan, const MeasureFeatures&, mspan out) const override;
  void G(cspan, cspan, cspan, cspan, const MeasureFeatures&, mspan out) const override;
  void Hz(cspan, cspan, const MeasureFeatures&, mspan out) const override;
  double LH(cspan, cspan, const MeasureFeatures&) const override { return 0.0; }
  void g(cspan, cspan, const MeasureFeatures&, mspan out) const override;
  double psi(cspan, const MeasureFeatures&) const override { return 0.0; }
  // U = alpha^x, q^b = q^f (H is identically zero)
  bool theta_closed_form(const ThetaProblem& pb, ThetaSolution& sol) const override;
  LipschitzInfo lipschitz(double) const override { return {0.0, PiecewiseLinear::zero()}; }

 private:
  std::size_t d_, d0_;
};

class ClampedSet final : public CoefficientSet {
 public:
  ClampedSet(CoefficientPtr base, double M);
  std::string name() const override { return base_->name() + "|clamp"; }
  std::size_t dim() const override { return base_->dim(); }
  std::size_t major_dim() const override { return base_->major_dim(); }
  void F(cspan x, cspan q, cspan u, cspan z, const MeasureFeatures& mu, mspan out) const override;
  void G(cspan x, cspan q, cspan u, cspan z, const MeasureFeatures& mu, mspan out) const override;
  void Hz(cspan q, cspan z, const MeasureFeatures& mu, mspan out) const override;
  double LH(cspan q, cspan z, const MeasureFeatures& mu) const override;
  void g(cspan x, cspan q, const MeasureFeatures& mu, mspan out) const override {
    base_->g(x, q, mu, out);
  }
  double psi(cspan q, const MeasureFeatures& mu) const override { return base_->psi(q, mu); }
  bool theta_closed_form(const ThetaProblem& pb, ThetaSolution& sol) const override;
  bool lagrangian_gradient(cspan x, cspan q, cspan a, const MeasureFeatures& mu,
                           mspan out) const override {
    return base_->lagrangian_gradient(x, q, a, mu, out);
  }
  LipschitzInfo lipschitz(double radius) const override;
  double clamp_level() const override { return M_; }
  const CoefficientPtr& base() const { return base_; }

 private:
  cspan clamp(cspan z, double* buf) const;
  CoefficientPtr base_;
  double M_;
};

// M = inf returns the input unchanged; clamping an already clamped set at the same level is a no-op.
CoefficientPtr clamp_coefficients(CoefficientPtr set, double M);

// Primed coefficients: original evaluated at q = (q^f + q^b)/2.
class PrimedCoefficientSet {
 public:
  explicit PrimedCoefficientSet(CoefficientPtr set) : set_(std::move(set)) {}
  const CoefficientSet& base() const { return *set_; }
  const CoefficientPtr& ptr() const { return set_; }
  std::size_t dim() const { return set_->dim(); }
  std::size_t major_dim() const { return set_->major_dim(); }

  void F(cspan x, cspan qf, cspan qb, cspan u, cspan z, const MeasureFeatures& mu, mspan out) const;
  void G(cspan x, cspan qf, cspan qb, cspan u, cspan z, const MeasureFeatures& mu, mspan out) const;
  void Hz(cspan qf, cspan qb, cspan z, const MeasureFeatures& mu, mspan out) const;
  double LH(cspan qf, cspan qb, cspan z, const MeasureFeatures& mu) const;

 private:
  CoefficientPtr set_;
};

PrimedCoefficientSet split_q(CoefficientPtr set);

struct ThetaOptions {
  double tol = 1e-12;
  std::size_t max_iter = 20000;
  double rho = 0.5;
  bool force_iterative = false;
};

ThetaSolution theta_inverse(const PrimedCoefficientSet& set, const ThetaProblem& pb,
                            const ThetaOptions& opt = {});

// max abs residual of (F', D_zH') at the solution against the target
double theta_residual(const PrimedCoefficientSet& set, const ThetaProblem& pb,
                      const ThetaSolution& sol);

struct LQParams {
  double c1 = 0, c2 = 0, c3 = 0;
  double g1 = 0, g2 = 0;
  double b = 0;
  double r1 = 0, r2 = 0;
  double p1 = 0, p2 = 0;
};

class LQModel final : public CoefficientSet {
 public:
  explicit LQModel(const LQParams& p) : p_(p) {}
  std::string name() const override { return "lq"; }
  std::size_t dim() const override { return 1; }
  std::size_t major_dim() const override { return 1; }
  void F(cspan x, cspan q, cspan u, cspan z, const MeasureFeatures& mu, mspan out) const override;
  void G(cspan x, cspan q, cspan u, cspan z, const MeasureFeatures& mu, mspan out) const override;
  void Hz(cspan q, cspan z, const MeasureFeatures& mu, mspan out) const override;
  double LH(cspan q, cspan z, const MeasureFeatures& mu) const override;
  void g(cspan x, cspan q, const MeasureFeatures& mu, mspan out) const override;
  double psi(cspan q, const MeasureFeatures& mu) const override;
  bool theta_closed_form(const ThetaProblem& pb, ThetaSolution& sol) const override;
  bool lagrangian_gradient(cspan x, cspan q, cspan a, const MeasureFeatures& mu,
                           mspan out) const override;
  LipschitzInfo lipschitz(double radius) const override;
  const LQParams& params() const { return p_; }

 private:
  LQParams p_;
};

CoefficientPtr make_lq_model(const LQParams& params, const ModelConstants& constants);

struct MonotonicityData {
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(1, 1);
  double kappa = 0.0;
  double beta0 = 0.0;
  double C_M = 0.0;
  double C_H = 0.0;
  double delta = 0.0;
  double C_coef = 0.0;
  PiecewiseLinear omega;
  PiecewiseLinear K;

  double norm_A() const;
};

// Cauchy-Schwarz absorption with equal splitting:
// C_M + K(r) = zfactor2 * (C_z + omega(r))^2 / (2 kappa_fixed), returned kappa = kappa_fixed / 2.
struct Slack {
  double kappa;
  double C_M;
  PiecewiseLinear K;
};
Slack absorb_slack(double kappa_fixed, double zfactor2, double C_z, const PiecewiseLinear& omega,
                   double r_max = 100.0);

// Analytic constants of the LQ family for A = a (scalar), with |q|,|mean_x| <= q_radius.
struct LQMonotonicity {
  double kappa_fixed;  // z-fixed form
  MonotonicityData data;
};
LQMonotonicity lq_monotonicity_data(const LQParams& p, double a, double q_radius, double clamp,
                                    double beta0_cap = 1.0);

}  // namespace mfgmp
