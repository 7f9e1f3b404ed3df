#include <algorithm>
#include <cmath>

#include "mfgmp/errors.hpp"
#include "mfgmp/model.hpp"

namespace mfgmp {

void LQModel::F(cspan, cspan, cspan u, cspan, const MeasureFeatures&, mspan out) const {
  out[0] = u[0];
}

void LQModel::G(cspan x, cspan q, cspan, cspan, const MeasureFeatures& mu, mspan out) const {
  out[0] = p_.c1 * x[0] + p_.c2 * q[0] + p_.c3 * (x[0] - mu.mean_x[0]);
}

void LQModel::Hz(cspan q, cspan z, const MeasureFeatures&, mspan out) const {
  out[0] = p_.b * q[0] + z[0];
}

double LQModel::LH(cspan q, cspan z, const MeasureFeatures& mu) const {
  return -0.5 * z[0] * z[0] - 0.5 * p_.r1 * q[0] * q[0] - p_.r2 * q[0] * mu.mean_x[0];
}

void LQModel::g(cspan x, cspan q, const MeasureFeatures&, mspan out) const {
  out[0] = p_.g1 * x[0] + p_.g2 * q[0];
}

double LQModel::psi(cspan q, const MeasureFeatures& mu) const {
  return 0.5 * p_.p1 * q[0] * q[0] + p_.p2 * q[0] * mu.mean_x[0];
}

bool LQModel::theta_closed_form(const ThetaProblem& pb, ThetaSolution& sol) const {
  if (p_.b == 0.0) throw InversionError("lq major drift has b = 0 and cannot be inverted", kInf);
  sol.u.assign(pb.alpha_x.begin(), pb.alpha_x.end());
  // b (q^f + q^b)/2 + z = alpha^q
  sol.qb.assign(1, 2.0 * (pb.alpha_q[0] - pb.z[0]) / p_.b - pb.p[0]);
  sol.iterations = 0;
  sol.residual = 0.0;
  return true;
}

bool LQModel::lagrangian_gradient(cspan, cspan, cspan a, const MeasureFeatures&,
                                  mspan out) const {
  out[0] = a[0];
  return true;
}

LipschitzInfo LQModel::lipschitz(double R) const {
  const double cG = std::abs(p_.c1) + 2.0 * std::abs(p_.c3) + std::abs(p_.c2);
  const double cH = std::abs(p_.b) + 1.0;
  const double cL = (std::abs(p_.r1) + 2.0 * std::abs(p_.r2)) * R;
  const double cg = std::abs(p_.g1) + std::abs(p_.g2);
  const double cpsi = (std::abs(p_.p1) + 2.0 * std::abs(p_.p2)) * R;
  // LH is |z|-Lipschitz in z
  return {std::max({1.0, cG, cH, cL, cg, cpsi}), PiecewiseLinear::linear(1.0)};
}

CoefficientPtr make_lq_model(const LQParams& params, const ModelConstants& constants) {
  if (constants.d != 1 || constants.d0 != 1)
    throw ConfigError("the lq family requires d = d0 = 1");
  return clamp_coefficients(std::make_shared<LQModel>(params), constants.clamp);
}

LQMonotonicity lq_monotonicity_data(const LQParams& p, double a, double R, double clamp,
                                    double beta0_cap) {
  LQMonotonicity out;
  Eigen::Matrix2d Q;
  Q << p.c1, 0.5 * p.c2, 0.5 * p.c2, a * p.b;
  const double eig = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(Q).eigenvalues().minCoeff();
  out.kappa_fixed = std::min({p.c1 + p.c3, 1.0, eig});

  MonotonicityData& m = out.data;
  m.A = Eigen::MatrixXd::Constant(1, 1, a);

  // terminal form over (dm, dq) with the adverse sign of the cross term
  Eigen::Matrix2d T;
  T << p.g1, -0.5 * std::abs(p.g2), -0.5 * std::abs(p.g2), 0.5 * a;
  Eigen::Vector2d c(std::abs(p.p2) * R, (std::abs(p.p1) + std::abs(p.p2)) * R);
  const double tmin = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(T).eigenvalues().minCoeff();
  if (p.g1 < 0.0 || tmin <= 0.0)
    m.beta0 = 0.0;
  else if (c.squaredNorm() == 0.0)
    m.beta0 = beta0_cap;
  else
    m.beta0 = std::min(beta0_cap, 1.0 / c.dot(T.ldlt().solve(c)));

  m.C_H = (std::abs(p.r1) + std::abs(p.r2)) * R;
  m.delta = 0.0;
  LQModel model(p);
  m.C_coef = model.lipschitz(R).C_coef + (std::isinf(clamp) ? 0.0 : clamp);
  m.omega = PiecewiseLinear::zero();
  if (out.kappa_fixed > 0.0) {
    // only A*Hz depends on z, with unit slope
    Slack s = absorb_slack(out.kappa_fixed, a * a, 1.0, PiecewiseLinear::zero());
    m.kappa = s.kappa;
    m.C_M = s.C_M;
    m.K = s.K;
  } else {
    m.kappa = out.kappa_fixed;
    m.C_M = 0.0;
    m.K = PiecewiseLinear::zero();
  }
  return out;
}

}  // namespace mfgmp
