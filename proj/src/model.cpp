#include "mfgmp/model.hpp"

#include <algorithm>
#include <cmath>

#include "mfgmp/errors.hpp"

namespace mfgmp {

MeasureFeatures measure_features(const double* x, const double* u, std::size_t particles,
                                 std::size_t d) {
  if (particles == 0) throw ConfigError("ensemble.particles must be at least 1");
  MeasureFeatures mu;
  mu.mean_x.assign(d, 0.0);
  mu.mean_u.assign(d, 0.0);
  mu.second_x.assign(d, 0.0);
  mu.second_u.assign(d, 0.0);
  mu.cross_xu.assign(d, 0.0);
  for (std::size_t p = 0; p < particles; ++p)
    for (std::size_t j = 0; j < d; ++j) {
      const double xv = x[p * d + j];
      const double uv = u ? u[p * d + j] : 0.0;
      mu.mean_x[j] += xv;
      mu.mean_u[j] += uv;
      mu.second_x[j] += xv * xv;
      mu.second_u[j] += uv * uv;
      mu.cross_xu[j] += xv * uv;
    }
  const double inv = 1.0 / double(particles);
  for (std::size_t j = 0; j < d; ++j) {
    mu.mean_x[j] *= inv;
    mu.mean_u[j] *= inv;
    mu.second_x[j] *= inv;
    mu.second_u[j] *= inv;
    mu.cross_xu[j] *= inv;
  }
  return mu;
}

PiecewiseLinear::PiecewiseLinear(std::vector<std::pair<double, double>> knots)
    : knots_(std::move(knots)) {
  if (knots_.empty()) throw ConfigError("piecewise-linear function needs at least one knot");
  std::sort(knots_.begin(), knots_.end());
  for (std::size_t i = 1; i < knots_.size(); ++i) {
    if (knots_[i].first == knots_[i - 1].first)
      throw ConfigError("piecewise-linear knots must have distinct abscissae");
    if (knots_[i].second < knots_[i - 1].second)
      throw ConfigError("piecewise-linear function must be nondecreasing");
  }
}

double PiecewiseLinear::operator()(double r) const {
  if (knots_.size() == 1) return knots_[0].second;
  if (r <= knots_.front().first) return knots_.front().second;
  auto it = std::upper_bound(knots_.begin(), knots_.end(), r,
                             [](double v, const auto& k) { return v < k.first; });
  std::size_t i = it == knots_.end() ? knots_.size() - 1 : std::size_t(it - knots_.begin());
  const auto& [x0, y0] = knots_[i - 1];
  const auto& [x1, y1] = knots_[i];
  return y0 + (y1 - y0) * (r - x0) / (x1 - x0);
}

namespace {

void require_finite(cspan v, const char* what) {
  for (double a : v)
    if (!std::isfinite(a)) throw EvaluationError(std::string("non-finite input ") + what);
}

}  // namespace

CoefficientValues eval_coefficients(const CoefficientSet& set, cspan x, cspan q, cspan u, cspan z,
                                    const MeasureFeatures& mu) {
  require_finite(x, "x");
  require_finite(q, "q");
  require_finite(u, "u");
  require_finite(z, "z");
  require_finite(mu.mean_x, "mean_x");
  require_finite(mu.mean_u, "mean_u");
  CoefficientValues v;
  v.F.assign(set.dim(), 0.0);
  v.G.assign(set.dim(), 0.0);
  v.Hz.assign(set.major_dim(), 0.0);
  set.F(x, q, u, z, mu, v.F);
  set.G(x, q, u, z, mu, v.G);
  set.Hz(q, z, mu, v.Hz);
  v.LH = set.LH(q, z, mu);
  return v;
}

void ZeroModel::F(cspan, cspan, cspan, cspan, const MeasureFeatures&, mspan out) const {
  std::fill(out.begin(), out.end(), 0.0);
}
void ZeroModel::G(cspan, cspan, cspan, cspan, const MeasureFeatures&, mspan out) const {
  std::fill(out.begin(), out.end(), 0.0);
}
void ZeroModel::Hz(cspan, cspan, const MeasureFeatures&, mspan out) const {
  std::fill(out.begin(), out.end(), 0.0);
}
void ZeroModel::g(cspan, cspan, const MeasureFeatures&, mspan out) const {
  std::fill(out.begin(), out.end(), 0.0);
}

bool ZeroModel::theta_closed_form(const ThetaProblem& pb, ThetaSolution& sol) const {
  sol.u.assign(pb.alpha_x.begin(), pb.alpha_x.end());
  sol.qb.assign(pb.p.begin(), pb.p.end());  // undriven major: q^b = q^f
  sol.iterations = 0;
  sol.residual = 0.0;
  return true;
}

ClampedSet::ClampedSet(CoefficientPtr base, double M) : base_(std::move(base)), M_(M) {
  if (!(M > 0.0)) throw ConfigError("constants.clamp must be positive");
}

cspan ClampedSet::clamp(cspan z, double* buf) const {
  for (std::size_t j = 0; j < z.size(); ++j) buf[j] = std::clamp(z[j], -M_, M_);
  return cspan(buf, z.size());
}

void ClampedSet::F(cspan x, cspan q, cspan u, cspan z, const MeasureFeatures& mu, mspan out) const {
  double b[kMaxDim];
  base_->F(x, q, u, clamp(z, b), mu, out);
}
void ClampedSet::G(cspan x, cspan q, cspan u, cspan z, const MeasureFeatures& mu, mspan out) const {
  double b[kMaxDim];
  base_->G(x, q, u, clamp(z, b), mu, out);
}
void ClampedSet::Hz(cspan q, cspan z, const MeasureFeatures& mu, mspan out) const {
  double b[kMaxDim];
  base_->Hz(q, clamp(z, b), mu, out);
}
double ClampedSet::LH(cspan q, cspan z, const MeasureFeatures& mu) const {
  double b[kMaxDim];
  return base_->LH(q, clamp(z, b), mu);
}
bool ClampedSet::theta_closed_form(const ThetaProblem& pb, ThetaSolution& sol) const {
  double b[kMaxDim];
  ThetaProblem c = pb;
  c.z = clamp(pb.z, b);
  return base_->theta_closed_form(c, sol);
}
LipschitzInfo ClampedSet::lipschitz(double radius) const {
  // z now ranges over [-M, M]: fold omega(M) into the constant
  LipschitzInfo in = base_->lipschitz(radius);
  return {in.C_coef + in.omega(M_), PiecewiseLinear::zero()};
}

CoefficientPtr clamp_coefficients(CoefficientPtr set, double M) {
  if (std::isinf(M)) return set;
  if (!(M > 0.0)) throw ConfigError("constants.clamp must be positive");
  if (auto* c = dynamic_cast<const ClampedSet*>(set.get()); c && c->clamp_level() <= M) return set;
  return std::make_shared<ClampedSet>(std::move(set), M);
}

namespace {

cspan midpoint(cspan qf, cspan qb, double* buf) {
  for (std::size_t j = 0; j < qf.size(); ++j) buf[j] = 0.5 * (qf[j] + qb[j]);
  return cspan(buf, qf.size());
}

}  // namespace

void PrimedCoefficientSet::F(cspan x, cspan qf, cspan qb, cspan u, cspan z,
                             const MeasureFeatures& mu, mspan out) const {
  double b[kMaxDim];
  set_->F(x, midpoint(qf, qb, b), u, z, mu, out);
}
void PrimedCoefficientSet::G(cspan x, cspan qf, cspan qb, cspan u, cspan z,
                             const MeasureFeatures& mu, mspan out) const {
  double b[kMaxDim];
  set_->G(x, midpoint(qf, qb, b), u, z, mu, out);
}
void PrimedCoefficientSet::Hz(cspan qf, cspan qb, cspan z, const MeasureFeatures& mu,
                              mspan out) const {
  double b[kMaxDim];
  set_->Hz(midpoint(qf, qb, b), z, mu, out);
}
double PrimedCoefficientSet::LH(cspan qf, cspan qb, cspan z, const MeasureFeatures& mu) const {
  double b[kMaxDim];
  return set_->LH(midpoint(qf, qb, b), z, mu);
}

PrimedCoefficientSet split_q(CoefficientPtr set) {
  if (set->dim() > kMaxDim || set->major_dim() > kMaxDim)
    throw ConfigError("dimension exceeds the supported maximum");
  return PrimedCoefficientSet(std::move(set));
}

double theta_residual(const PrimedCoefficientSet& set, const ThetaProblem& pb,
                      const ThetaSolution& sol) {
  const std::size_t d = set.dim(), d0 = set.major_dim(), P = pb.particles;
  const MeasureFeatures mu = measure_features(pb.x.data(), sol.u.data(), P, d);
  double f[kMaxDim], h[kMaxDim];
  double res = 0.0;
  for (std::size_t i = 0; i < P; ++i) {
    set.F(pb.x.subspan(i * d, d), pb.p, sol.qb, cspan(sol.u).subspan(i * d, d), pb.z, mu,
          mspan(f, d));
    for (std::size_t j = 0; j < d; ++j) res = std::max(res, std::abs(f[j] - pb.alpha_x[i * d + j]));
  }
  set.Hz(pb.p, sol.qb, pb.z, mu, mspan(h, d0));
  for (std::size_t j = 0; j < d0; ++j) res = std::max(res, std::abs(h[j] - pb.alpha_q[j]));
  return res;
}

ThetaSolution theta_inverse(const PrimedCoefficientSet& set, const ThetaProblem& pb,
                            const ThetaOptions& opt) {
  ThetaSolution sol;
  if (!opt.force_iterative && set.base().theta_closed_form(pb, sol)) return sol;

  const std::size_t d = set.dim(), d0 = set.major_dim(), P = pb.particles;
  sol.u.assign(pb.alpha_x.begin(), pb.alpha_x.end());
  sol.qb.assign(pb.p.begin(), pb.p.end());
  std::vector<double> rf(P * d);
  double h[kMaxDim];
  double res = kInf;
  for (std::size_t it = 0; it < opt.max_iter; ++it) {
    const MeasureFeatures mu = measure_features(pb.x.data(), sol.u.data(), P, d);
    res = 0.0;
    for (std::size_t i = 0; i < P; ++i) {
      set.F(pb.x.subspan(i * d, d), pb.p, sol.qb, cspan(sol.u).subspan(i * d, d), pb.z, mu,
            mspan(rf.data() + i * d, d));
      for (std::size_t j = 0; j < d; ++j) {
        rf[i * d + j] -= pb.alpha_x[i * d + j];
        res = std::max(res, std::abs(rf[i * d + j]));
      }
    }
    set.Hz(pb.p, sol.qb, pb.z, mu, mspan(h, d0));
    for (std::size_t j = 0; j < d0; ++j) {
      h[j] -= pb.alpha_q[j];
      res = std::max(res, std::abs(h[j]));
    }
    if (!std::isfinite(res)) break;
    if (res <= opt.tol) {
      sol.iterations = it;
      sol.residual = res;
      return sol;
    }
    for (std::size_t k = 0; k < P * d; ++k) sol.u[k] -= opt.rho * rf[k];
    for (std::size_t j = 0; j < d0; ++j) sol.qb[j] -= opt.rho * 0.5 * h[j];
  }
  throw InversionError("theta fixed point did not converge", res);
}

double MonotonicityData::norm_A() const {
  if (A.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

Slack absorb_slack(double kappa_fixed, double zfactor2, double C_z, const PiecewiseLinear& omega,
                   double r_max) {
  if (!(kappa_fixed > 0.0)) throw ConfigError("absorption needs a positive monotonicity constant");
  Slack s;
  s.kappa = 0.5 * kappa_fixed;
  const double c = zfactor2 / (2.0 * kappa_fixed);
  s.C_M = c * C_z * C_z;
  std::vector<std::pair<double, double>> kn;
  const int n = 64;
  for (int i = 0; i <= n; ++i) {
    const double r = r_max * double(i) / n;
    const double w = omega(r);
    kn.emplace_back(r, c * (2.0 * C_z * w + w * w));
  }
  s.K = PiecewiseLinear(std::move(kn));
  return s;
}

}  // namespace mfgmp
