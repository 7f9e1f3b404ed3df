#include "mfgmp/verification.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mfgmp/errors.hpp"
#include "mfgmp/grid_noise.hpp"

namespace mfgmp {

namespace {

constexpr std::uint64_t kStreamVerify = 5;

double unif(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c,
            std::uint64_t d) {
  return uniform_from_key(hash_key(seed, kStreamVerify, a, b, c, d));
}

double gauss(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c,
             std::uint64_t d) {
  return gaussian_from_key(seed, kStreamVerify, a, b, c, d);
}

// tags for the last key slot
enum : std::uint64_t { kCloud = 0, kCentre = 1, kScale = 2, kPick = 3, kQ = 4, kZ = 5 };

std::vector<double> uniform_vec(std::uint64_t seed, std::size_t sample, std::size_t which,
                                std::uint64_t tag, std::size_t n, double r) {
  std::vector<double> v(n);
  for (std::size_t j = 0; j < n; ++j) v[j] = r * (2.0 * unif(seed, sample, which, j, tag) - 1.0);
  return v;
}

struct Stat {
  double mean = 0.0, se = 0.0;
};

Stat mean_se(const std::vector<double>& v) {
  Stat s;
  const double n = double(v.size());
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= n;
  if (v.size() < 2) return s;
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.se = std::sqrt(ss / (n - 1.0) / n);
  return s;
}

double quad(const Eigen::MatrixXd& A, const std::vector<double>& dq) {
  double s = 0.0;
  for (std::size_t i = 0; i < dq.size(); ++i)
    for (std::size_t j = 0; j < dq.size(); ++j) s += dq[i] * A(Eigen::Index(i), Eigen::Index(j)) * dq[j];
  return s;
}

void check_A(const Eigen::MatrixXd& A, std::size_t d0) {
  if (std::size_t(A.rows()) != d0 || std::size_t(A.cols()) != d0)
    throw ContractError("A must be d0 x d0");
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace

bool CertificationReport::all_pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass; });
}

std::vector<double> mixture_cloud(std::uint64_t seed, std::size_t sample, std::size_t which,
                                  std::size_t particles, std::size_t d) {
  double centre[2][kMaxDim], scale[2];
  for (int c = 0; c < 2; ++c) {
    for (std::size_t j = 0; j < d; ++j) centre[c][j] = 1.5 * gauss(seed, sample, which, c * 16 + j, kCentre);
    scale[c] = 0.2 + unif(seed, sample, which, c, kScale);
  }
  std::vector<double> x(particles * d);
  for (std::size_t p = 0; p < particles; ++p) {
    const int c = unif(seed, sample, which, p, kPick) < 0.5 ? 0 : 1;
    for (std::size_t j = 0; j < d; ++j)
      x[p * d + j] = centre[c][j] + scale[c] * gauss(seed, sample, which, p * d + j, kCloud);
  }
  return x;
}

CheckResult check_terminal_monotonicity(const CoefficientSet& set, const Eigen::MatrixXd& A,
                                        double beta0, std::size_t samples, std::uint64_t seed,
                                        const SampleSpec& spec) {
  const std::size_t d = set.dim(), d0 = set.major_dim(), P = spec.particles;
  check_A(A, d0);
  CheckResult r;
  r.name = "terminal_monotonicity";
  r.seed = seed;
  r.samples = samples;
  r.pass = true;
  r.margin = kInf;
  std::vector<double> gx(d), gy(d), terms(P);
  for (std::size_t i = 0; i < samples; ++i) {
    const auto X = mixture_cloud(seed, i, 0, P, d);
    const auto Y = mixture_cloud(seed, i, 1, P, d);
    const auto q = uniform_vec(seed, i, 0, kQ, d0, spec.q_radius);
    const auto q2 = uniform_vec(seed, i, 1, kQ, d0, spec.q_radius);
    const MeasureFeatures mx = measure_features(X.data(), nullptr, P, d);
    const MeasureFeatures my = measure_features(Y.data(), nullptr, P, d);
    for (std::size_t p = 0; p < P; ++p) {
      set.g(cspan(X.data() + p * d, d), q, mx, gx);
      set.g(cspan(Y.data() + p * d, d), q2, my, gy);
      double t = 0.0;
      for (std::size_t j = 0; j < d; ++j) t += (gx[j] - gy[j]) * (X[p * d + j] - Y[p * d + j]);
      terms[p] = t;
    }
    const Stat st = mean_se(terms);
    std::vector<double> dq(d0);
    for (std::size_t j = 0; j < d0; ++j) dq[j] = q[j] - q2[j];
    const double dpsi = set.psi(q, mx) - set.psi(q2, my);
    const double margin = st.mean + 0.5 * quad(A, dq) - beta0 * dpsi * dpsi;
    if (margin < r.margin) {
      r.margin = margin;
      r.se = st.se;
    }
    if (margin < -3.0 * st.se && r.pass) {
      r.pass = false;
      r.witness_index = i;
      r.witness = "sample " + std::to_string(i) + ": margin " + fmt(margin) + ", se " + fmt(st.se);
    }
  }
  r.estimate = r.margin;
  return r;
}

namespace {

struct CoefSample {
  double inner = 0.0, norm2 = 0.0, se_unit = 0.0;
  std::vector<double> terms;  // per particle: inner and norm contributions
  std::vector<double> nterms;
};

// <Delta(G, F, A Hz), Delta(x, u, q)> for one sample
CoefSample coef_sample(const CoefficientSet& set, const Eigen::MatrixXd& A, std::uint64_t seed,
                       std::size_t i, const SampleSpec& spec, bool z_pair) {
  const std::size_t d = set.dim(), d0 = set.major_dim(), P = spec.particles;
  const auto X = mixture_cloud(seed, i, 0, P, d);
  const auto Y = mixture_cloud(seed, i, 1, P, d);
  const auto U = mixture_cloud(seed, i, 2, P, d);
  const auto V = mixture_cloud(seed, i, 3, P, d);
  const auto q = uniform_vec(seed, i, 0, kQ, d0, spec.q_radius);
  const auto q2 = uniform_vec(seed, i, 1, kQ, d0, spec.q_radius);
  const auto z = uniform_vec(seed, i, 0, kZ, d0, spec.z_radius);
  const auto z2 = z_pair ? uniform_vec(seed, i, 1, kZ, d0, spec.z_radius) : z;
  const MeasureFeatures mx = measure_features(X.data(), U.data(), P, d);
  const MeasureFeatures my = measure_features(Y.data(), V.data(), P, d);

  CoefSample cs;
  cs.terms.resize(P);
  cs.nterms.resize(P);
  std::vector<double> G1(d), G2(d), F1(d), F2(d), H1(d0), H2(d0);
  for (std::size_t p = 0; p < P; ++p) {
    const cspan x1(X.data() + p * d, d), x2(Y.data() + p * d, d);
    const cspan u1(U.data() + p * d, d), u2(V.data() + p * d, d);
    set.G(x1, q, u1, z, mx, G1);
    set.G(x2, q2, u2, z2, my, G2);
    set.F(x1, q, u1, z, mx, F1);
    set.F(x2, q2, u2, z2, my, F2);
    double t = 0.0, n = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double dx = x1[j] - x2[j], du = u1[j] - u2[j];
      t += (G1[j] - G2[j]) * dx + (F1[j] - F2[j]) * du;
      n += dx * dx + du * du;
    }
    cs.terms[p] = t;
    cs.nterms[p] = n;
  }
  set.Hz(q, z, mx, H1);
  set.Hz(q2, z2, my, H2);
  std::vector<double> dq(d0), dh(d0);
  for (std::size_t j = 0; j < d0; ++j) {
    dq[j] = q[j] - q2[j];
    dh[j] = H1[j] - H2[j];
  }
  const Eigen::Map<const Eigen::VectorXd> vq(dq.data(), Eigen::Index(d0)),
      vh(dh.data(), Eigen::Index(d0));
  double qn = 0.0, qi = vq.dot(A * vh);
  for (double v : dq) qn += v * v;
  cs.inner = mean_se(cs.terms).mean + qi;
  cs.norm2 = mean_se(cs.nterms).mean + qn;
  double dz2 = 0.0;
  for (std::size_t j = 0; j < d0; ++j) dz2 += (z[j] - z2[j]) * (z[j] - z2[j]);
  cs.se_unit = std::sqrt(dz2);  // reused as |z - z'|
  return cs;
}

}  // namespace

CheckResult check_coefficient_monotonicity(const CoefficientSet& set, const Eigen::MatrixXd& A,
                                           double kappa, std::size_t samples, std::uint64_t seed,
                                           const SampleSpec& spec, const MonotonicityData* slack) {
  check_A(A, set.major_dim());
  CheckResult r;
  r.name = "coefficient_monotonicity";
  r.seed = seed;
  r.pass = true;
  r.margin = kInf;
  double kmin = kInf;
  auto judge = [&](const CoefSample& cs, double extra, double kap, std::size_t i, const char* form) {
    std::vector<double> comb(cs.terms.size());
    for (std::size_t p = 0; p < comb.size(); ++p) comb[p] = cs.terms[p] - kap * cs.nterms[p];
    const double se = mean_se(comb).se;
    const double margin = cs.inner + extra - kap * cs.norm2;
    if (margin < r.margin) {
      r.margin = margin;
      r.se = se;
    }
    if (margin < -3.0 * se && r.pass) {
      r.pass = false;
      r.witness_index = i;
      r.witness = std::string(form) + " sample " + std::to_string(i) + ": margin " + fmt(margin) +
                  ", se " + fmt(se);
    }
  };
  for (std::size_t i = 0; i < samples; ++i) {
    const CoefSample cs = coef_sample(set, A, seed, i, spec, false);
    if (cs.norm2 < 1e-24) continue;
    ++r.samples;
    kmin = std::min(kmin, cs.inner / cs.norm2);
    judge(cs, 0.0, kappa, i, "z-fixed");
    if (slack) {
      const CoefSample cz = coef_sample(set, A, seed, i, spec, true);
      const double dz = cz.se_unit;
      // |z| ^ |z'| enters K; both are within z_radius
      const double extra = (slack->C_M + slack->K(spec.z_radius)) * dz * dz;
      judge(cz, extra, slack->kappa, i, "z-pair");
    }
  }
  r.estimate = kmin;
  return r;
}

double select_A_by_grid(const CoefficientSet& set, std::size_t samples, std::uint64_t seed,
                        const SampleSpec& spec) {
  const std::size_t d0 = set.major_dim();
  double best_a = 0.1, best = -kInf;
  for (int i = 1; i <= 100; ++i) {
    const double a = 0.1 * i;
    const Eigen::MatrixXd A = a * Eigen::MatrixXd::Identity(Eigen::Index(d0), Eigen::Index(d0));
    double kmin = kInf;
    for (std::size_t s = 0; s < samples; ++s) {
      const CoefSample cs = coef_sample(set, A, seed, s, spec, false);
      if (cs.norm2 < 1e-24) continue;
      kmin = std::min(kmin, cs.inner / cs.norm2);
    }
    if (kmin > best) {
      best = kmin;
      best_a = a;
    }
  }
  return best_a;
}

CheckResult check_z_bound(const SolveOutput& solve, double lip_q_phi, double tol_rel) {
  CheckResult r;
  r.name = "z_bound";
  const auto& Z = solve.state.Zphi;
  double mx = 0.0;
  for (double v : Z.raw()) mx = std::max(mx, std::abs(v));
  double se = 0.0;
  for (double v : solve.diagnostics.se_zphi) se = std::max(se, v);
  const double bound = lip_q_phi * (1.0 + tol_rel) + 3.0 * se;
  r.samples = Z.raw().size();
  r.margin = bound - mx;
  r.se = se;
  r.estimate = mx;
  r.pass = mx <= bound;
  if (!r.pass) r.witness = "max |Z^phi| " + fmt(mx) + " above " + fmt(bound);
  return r;
}

CheckResult check_z_clamped(const SolveOutput& solve, double M) {
  CheckResult r;
  r.name = "z_clamped";
  double mx = 0.0;
  for (double v : solve.state.Zphi.raw()) mx = std::max(mx, std::min(std::abs(v), M));
  r.samples = solve.state.Zphi.raw().size();
  r.estimate = mx;
  r.margin = M - mx;
  r.pass = mx <= M;
  return r;
}

double Thresholds::beta_star(double t) const {
  return beta0 * std::exp((2.0 * lambda - gamma_star) * t);
}

Thresholds compute_thresholds(const MonotonicityData& m, double lambda, double T) {
  if (!(m.kappa > 0.0)) throw ConfigError("thresholds need kappa > 0");
  if (!(m.beta0 > 0.0)) throw ConfigError("thresholds need beta0 > 0");
  Thresholds th;
  const double nA = m.norm_A();
  th.beta0 = m.beta0;
  th.lambda = lambda;
  th.gamma_star = 2.0 / m.kappa * m.C_H * m.C_H * (nA + m.beta0);
  th.beta_T = th.beta_star(T);

  auto sigma_for = [&](double beta, double gamma_term) {
    const double r = std::sqrt(nA / beta);
    const double w = m.omega(r);
    double first = 0.0;
    if (w != 0.0) first = gamma_term > 0.0 ? w * w / gamma_term : kInf;
    return first + (m.C_M + m.K(r)) / beta;
  };
  th.sigma0_T = sigma_for(th.beta_T, 4.0 * th.gamma_star);

  std::optional<double> best;
  if (lambda > 0.0 && lambda >= 0.5 * th.gamma_star) {
    best = sigma_for(m.beta0, 2.0 * lambda);
    th.branch = 1;
  }
  if (lambda > 0.0 && m.delta < 1.0) {
    auto lhs = [&](double b) {
      return 0.25 / lambda * b * m.C_H * m.C_H * (1.0 + std::pow(nA / b, m.delta));
    };
    const double target = 0.5 * m.kappa;
    double bk;
    if (lhs(m.beta0) <= target) {
      bk = m.beta0;
    } else {
      // lhs increases in beta for delta < 1
      double lo = 0.0, hi = m.beta0;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (lhs(mid) <= target ? lo : hi) = mid;
      }
      bk = lo;
    }
    th.beta_kappa = bk;
    const double bs = std::min(bk, m.beta0);
    if (bs > 0.0) {
      const double s2 = sigma_for(bs, 2.0 * lambda);
      if (!best || s2 < *best) {
        best = s2;
        th.branch = 2;
      }
    }
  }
  th.sigma0_star = best;
  if (!best) th.note = "threshold not computable by the horizon-free branches";
  return th;
}

CheckResult check_monotonicity_propagation(const SolveOutput& s1, const SolveOutput& s2,
                                           const Eigen::MatrixXd& A,
                                           const std::function<double(double)>& beta,
                                           const TimeGrid& grid) {
  const auto& a = s1.state;
  const auto& b = s2.state;
  if (!a.X.same_shape(b.X)) throw ContractError("propagation check needs matching shapes");
  const std::size_t M = a.X.scenarios(), P = a.X.particles(), d = a.X.dim(), d0 = a.qf.dim();
  check_A(A, d0);
  CheckResult r;
  r.name = "monotonicity_propagation";
  r.pass = true;
  r.margin = kInf;
  r.samples = M;
  std::vector<double> v(M), dq(d0);
  for (std::size_t k = 0; k <= grid.steps; ++k) {
    const double bt = beta(grid.horizon - grid.node(k));
    for (std::size_t s = 0; s < M; ++s) {
      double ux = 0.0;
      for (std::size_t p = 0; p < P; ++p)
        for (std::size_t j = 0; j < d; ++j)
          ux += (a.U(k, s, p, j) - b.U(k, s, p, j)) * (a.X(k, s, p, j) - b.X(k, s, p, j));
      ux /= double(P);
      // q^f and q^b coincide at the fixed point; the forward copy is the state
      for (std::size_t j = 0; j < d0; ++j) dq[j] = a.qf(k, s, j) - b.qf(k, s, j);
      const double dphi = a.phi(k, s) - b.phi(k, s);
      v[s] = ux + 0.5 * quad(A, dq) - bt * dphi * dphi;
    }
    const Stat st = mean_se(v);
    if (st.mean < r.margin) {
      r.margin = st.mean;
      r.se = st.se;
    }
    if (st.mean < -3.0 * st.se && r.pass) {
      r.pass = false;
      r.witness_index = k;
      r.witness = "step " + std::to_string(k) + ": E[V] " + fmt(st.mean) + ", se " + fmt(st.se);
    }
  }
  r.estimate = r.margin;
  return r;
}

CheckResult check_pontryagin_residual(const SolveOutput& solve, const CoefficientSet& set,
                                      const TimeGrid& grid, double tol) {
  CheckResult r;
  r.name = "pontryagin_residual";
  const auto& st = solve.state;
  const std::size_t N = solve.theta_F.times(), M = st.X.scenarios(), P = st.X.particles(),
                    d = st.X.dim(), d0 = st.qf.dim();
  std::vector<double> grad(d);
  {
    const MeasureFeatures mu = measure_features(st.X.cloud(0, 0), solve.theta_F.cloud(0, 0), P, d);
    if (!set.lagrangian_gradient(cspan(st.X.cloud(0, 0), d), cspan(st.qf.at(0, 0), d0),
                                 cspan(solve.theta_F.cloud(0, 0), d), mu, grad)) {
      r.witness = "model does not expose the Lagrangian gradient";
      return r;
    }
  }
  double acc = 0.0;
  for (std::size_t k = 0; k < N; ++k)
    for (std::size_t s = 0; s < M; ++s) {
      const MeasureFeatures mu =
          measure_features(st.X.cloud(k, s), solve.theta_F.cloud(k, s), P, d);
      const cspan q(st.qf.at(k, s), d0);
      double cell = 0.0;
      for (std::size_t p = 0; p < P; ++p) {
        set.lagrangian_gradient(cspan(st.X.cloud(k, s) + p * d, d), q,
                                cspan(solve.theta_F.cloud(k, s) + p * d, d), mu, grad);
        for (std::size_t j = 0; j < d; ++j) {
          const double e = st.U(k, s, p, j) - grad[j];
          cell += e * e;
        }
      }
      acc += cell / double(P);
    }
  const double res = std::sqrt(acc / double(M) * grid.dt());
  r.samples = M;
  r.estimate = res;
  r.margin = tol - res;
  r.pass = res <= tol;
  if (!r.pass) r.witness = "residual " + fmt(res) + " above " + fmt(tol);
  return r;
}

LipschitzEstimates estimate_decoupling_lipschitz(
    const InitialCondition& base, const std::function<SolveOutput(const InitialCondition&)>& solve,
    double h) {
  if (!(h > 0.0)) throw ConfigError("Lipschitz probe step must be positive");
  LipschitzEstimates e;
  e.h = h;
  const SolveOutput s0 = solve(base);
  const auto& U0 = s0.state.U;
  const std::size_t M = U0.scenarios(), P = U0.particles(), d = U0.dim(), d0 = s0.state.qf.dim();

  auto rms_dU = [&](const SolveOutput& s1) {
    double acc = 0.0;
    for (std::size_t s = 0; s < M; ++s)
      for (std::size_t p = 0; p < P; ++p)
        for (std::size_t j = 0; j < d; ++j) {
          const double v = s1.state.U(0, s, p, j) - U0(0, s, p, j);
          acc += v * v;
        }
    return std::sqrt(acc / double(M * P));
  };

  {
    // zero-mean: alternate signs within each scenario, odd leftover unchanged
    InitialCondition ic = base;
    double acc = 0.0;
    for (std::size_t s = 0; s < M; ++s)
      for (std::size_t p = 0; p + 1 < P; p += 2) {
        for (std::size_t j = 0; j < d; ++j) {
          ic.X0(0, s, p, j) += h;
          ic.X0(0, s, p + 1, j) -= h;
        }
        acc += 2.0 * double(d) * h * h;
      }
    const double dx = std::sqrt(acc / double(M * P));
    if (dx > 0.0) e.lip_x = rms_dU(solve(ic)) / dx;
  }
  {
    InitialCondition ic = base;
    for (std::size_t s = 0; s < M; ++s)
      for (std::size_t j = 0; j < d0; ++j) ic.q0(0, s, j) += h;
    const SolveOutput s1 = solve(ic);
    double mx = 0.0;
    for (std::size_t s = 0; s < M; ++s)
      mx = std::max(mx, std::abs(s1.state.phi(0, s) - s0.state.phi(0, s)) / (h * std::sqrt(double(d0))));
    e.lip_q = mx;
  }
  {
    InitialCondition ic = base;
    for (double& v : ic.X0.raw()) v += h;
    e.lip_mu = rms_dU(solve(ic)) / (h * std::sqrt(double(d)));
  }
  return e;
}

}  // namespace mfgmp
