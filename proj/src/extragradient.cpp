#include "mfgmp/extragradient.hpp"

#include <algorithm>
#include <cmath>

namespace mfgmp {

RateFit fit_log_linear(const std::vector<double>& v, std::size_t from, std::size_t to) {
  RateFit f;
  std::vector<double> xs, ys;
  for (std::size_t i = from; i < std::min(to, v.size()); ++i)
    if (v[i] > 0.0 && std::isfinite(v[i])) {
      xs.push_back(double(i));
      ys.push_back(std::log(v[i]));
    }
  if (xs.size() < 3) return f;
  const double n = double(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  f.slope = sxy / sxx;
  f.lambda = std::exp(f.slope);
  f.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return f;
}

RateFit fit_tail_half(const std::vector<double>& v) {
  return fit_log_linear(v, v.size() / 2, v.size());
}

RateFit fit_log_log(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < std::min(x.size(), y.size()); ++i)
    if (x[i] > 0.0 && y[i] > 0.0) {
      lx.push_back(std::log(x[i]));
      ly.push_back(std::log(y[i]));
    }
  RateFit f;
  if (lx.size() < 3) return f;
  const double n = double(lx.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  f.slope = sxy / sxx;
  f.lambda = std::exp(f.slope);
  f.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return f;
}

Eigen::VectorXd LinearOperator::random_point(std::uint64_t seed, std::size_t index) const {
  Eigen::VectorXd v(A_.cols());
  for (Eigen::Index i = 0; i < v.size(); ++i)
    v(i) = gaussian_from_key(seed, kStreamProbe, index, std::uint64_t(i), 0, 0);
  return v;
}

LinearOperator LinearOperator::rotation() {
  Eigen::MatrixXd R(2, 2);
  R << 0.0, -1.0, 1.0, 0.0;
  return LinearOperator(R);
}

// ---- decoupling operator

DecouplingOperator::DecouplingOperator(std::shared_ptr<const DecoupledProblem> problem,
                                       Eigen::MatrixXd A)
    : problem_(std::move(problem)), A_(std::move(A)) {
  if (A_.rows() != Eigen::Index(problem_->constants.d0) || A_.cols() != A_.rows())
    throw ConfigError("monotonicity.A must be d0 x d0");
  if (!A_.isApprox(A_.transpose())) throw ConfigError("monotonicity.A must be symmetric");
}

ControlField DecouplingOperator::v_from_solve(const SolveOutput& so) const {
  const EnsembleState& st = so.state;
  const std::size_t N = st.steps(), M = st.X.scenarios(), P = st.X.particles();
  const std::size_t d = st.X.dim(), d0 = st.qf.dim();
  ControlField v(N, M, P, d, d0);
  for (std::size_t k = 0; k < N; ++k)
    for (std::size_t s = 0; s < M; ++s) {
      const double* th = so.theta_F.cloud(k, s);
      const double* u = st.U.cloud(k, s);
      double* o = v.alpha_x.cloud(k, s);
      for (std::size_t i = 0; i < P * d; ++i) o[i] = th[i] - u[i];
      for (std::size_t j = 0; j < d0; ++j) {
        double acc = 0.0;
        for (std::size_t l = 0; l < d0; ++l)
          acc += 0.5 * A_(Eigen::Index(j), Eigen::Index(l)) * (so.theta_H(k, s, l) - st.qb(k, s, l));
        v.alpha_q(k, s, j) = acc;
      }
    }
  return v;
}

ControlField DecouplingOperator::apply(const ControlField& a) {
  auto so = std::make_shared<SolveOutput>(solve_decoupled(*problem_, a));
  ++evaluations_;
  last_ = so;
  return v_from_solve(*so);
}

double DecouplingOperator::inner(const ControlField& a, const ControlField& b) const {
  return inner_product_T(a, b, problem_->grid);
}

double DecouplingOperator::inner_se(const ControlField& a, const ControlField& b) const {
  const auto per = inner_product_T_by_scenario(a, b, problem_->grid);
  const double n = double(per.size());
  if (per.size() < 2) return 0.0;
  double m = 0.0;
  for (double v : per) m += v;
  m /= n;
  double ss = 0.0;
  for (double v : per) ss += (v - m) * (v - m);
  return std::sqrt(ss / (n - 1.0) / n);
}

ControlField DecouplingOperator::random_point(std::uint64_t seed, std::size_t index) const {
  const DecoupledProblem& pb = *problem_;
  const NoiseBundle& nz = *pb.noise;
  const std::size_t N = nz.steps, M = nz.scenarios, P = nz.particles, d = nz.d, d0 = nz.d0;
  double c[8];
  for (int i = 0; i < 8; ++i) c[i] = gaussian_from_key(seed, kStreamProbe, index, std::uint64_t(i), 1, 0);

  // standardized initial data (F_0-measurable)
  auto standardize = [](const std::vector<double>& v) {
    double m = 0.0, s2 = 0.0;
    for (double x : v) m += x;
    m /= double(v.size());
    for (double x : v) s2 += (x - m) * (x - m);
    const double sd = std::sqrt(s2 / double(v.size()));
    std::vector<double> r(v.size(), 0.0);
    if (sd > 1e-12)
      for (std::size_t i = 0; i < v.size(); ++i) r[i] = (v[i] - m) / sd;
    return r;
  };
  const std::vector<double> zx = standardize(pb.init.X0.raw());
  const std::vector<double> zq = standardize(pb.init.q0.raw());

  ControlField a(N, M, P, d, d0);
  const double T = pb.grid.horizon > 0.0 ? pb.grid.horizon : 1.0;
  std::vector<double> W(M * d0, 0.0);
  for (std::size_t k = 0; k < N; ++k) {
    const double tau = pb.grid.node(k) / T;
    for (std::size_t s = 0; s < M; ++s) {
      const double w = W[s * d0] / std::sqrt(T);
      for (std::size_t p = 0; p < P; ++p)
        for (std::size_t j = 0; j < d; ++j)
          a.alpha_x(k, s, p, j) = c[0] + c[1] * tau + c[2] * zx[(s * P + p) * d + j] + c[3] * w;
      for (std::size_t j = 0; j < d0; ++j)
        a.alpha_q(k, s, j) = c[4] + c[5] * tau + c[6] * W[s * d0 + j] / std::sqrt(T) +
                             c[7] * zq[s * d0 + j];
    }
    for (std::size_t i = 0; i < M * d0; ++i) W[i] += nz.dW0[k * M * d0 + i];
  }
  return a;
}

VEvaluation evaluate_v(const ControlField& control, const DecoupledProblem& problem,
                       const Eigen::MatrixXd& A) {
  auto shared = std::shared_ptr<const DecoupledProblem>(&problem, [](const DecoupledProblem*) {});
  DecouplingOperator op(shared, A);
  VEvaluation r;
  r.v = op.apply(control);
  r.solve = op.last_solve();
  return r;
}

void FieldAverages::add(const SolveOutput& so) {
  const EnsembleState& st = so.state;
  if (count == 0) {
    U = so.theta_F;
    X = st.X;
    q = st.qf;
    p = so.theta_H;
    Zphi = st.Zphi;
    count = 1;
    return;
  }
  ++count;
  const double w = 1.0 / double(count);
  auto upd = [w](std::vector<double>& acc, const std::vector<double>& v) {
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += w * (v[i] - acc[i]);
  };
  upd(U.raw(), so.theta_F.raw());
  upd(X.raw(), st.X.raw());
  upd(q.raw(), st.qf.raw());
  upd(p.raw(), so.theta_H.raw());
  upd(Zphi.raw(), st.Zphi.raw());
}

double averaged_error_sq(const FieldAverages& avg, const SolveOutput& ref, const TimeGrid& grid) {
  const EnsembleState& st = ref.state;
  const std::size_t N = st.steps(), M = st.X.scenarios(), P = st.X.particles();
  const std::size_t d = st.X.dim(), d0 = st.qf.dim();
  const double dt = grid.dt();
  double part = 0.0, scen = 0.0;
  for (std::size_t k = 0; k < N; ++k)
    for (std::size_t s = 0; s < M; ++s) {
      for (std::size_t p = 0; p < P; ++p)
        for (std::size_t j = 0; j < d; ++j) {
          const double du = st.U(k, s, p, j) - avg.U(k, s, p, j);
          const double dx = st.X(k, s, p, j) - avg.X(k, s, p, j);
          part += du * du + dx * dx;
        }
      for (std::size_t j = 0; j < d0; ++j) {
        const double dq = st.qf(k, s, j) - 0.5 * (avg.q(k, s, j) + avg.p(k, s, j));
        const double dz = st.Zphi(k, s, j) - avg.Zphi(k, s, j);
        scen += dq * dq + dz * dz;
      }
    }
  return part * dt / double(M * P) + scen * dt / double(M);
}

ScenarioField recover_phi_bar(const FieldAverages& avg, const DecoupledProblem& pb) {
  const NoiseBundle& nz = *pb.noise;
  const std::size_t N = nz.steps, M = nz.scenarios, P = nz.particles, d = nz.d, d0 = nz.d0;
  const double dt = nz.dt, lam = pb.constants.lambda;
  const CoefficientSet& set = *pb.model;
  ScenarioField phi(N + 1, M, 1);
  for (std::size_t s = 0; s < M; ++s) {
    const MeasureFeatures mu = measure_features(avg.X.cloud(N, s), nullptr, P, d);
    phi(N, s) = set.psi(cspan(avg.q.at(N, s), d0), mu);
  }
  const std::size_t ns = d0 + d;
  std::vector<double> var;
  for (std::size_t j = 0; j < d0; ++j) var.push_back(dt);
  for (std::size_t j = 0; j < d; ++j) var.push_back(dt / double(P));
  std::vector<double> rows(M * 2 * ns), tg(M), e(1);
  double qm[kMaxDim];
  for (std::size_t k = N; k-- > 0;) {
    std::vector<MeasureFeatures> mus(M);
    for (std::size_t s = 0; s < M; ++s) {
      mus[s] = measure_features(avg.X.cloud(k, s), avg.U.cloud(k, s), P, d);
      double* r = rows.data() + s * 2 * ns;
      for (std::size_t j = 0; j < d0; ++j) r[j] = avg.q(k, s, j);
      for (std::size_t j = 0; j < d; ++j) r[d0 + j] = mus[s].mean_x[j];
      for (std::size_t j = 0; j < d0; ++j) r[ns + j] = nz.dw0(k, s, j);
      for (std::size_t j = 0; j < d; ++j) {
        double mb = 0.0;
        for (std::size_t p = 0; p < P; ++p) mb += nz.db(k, s, p, j);
        r[ns + d0 + j] = mb / double(P);
      }
      tg[s] = phi(k + 1, s);
    }
    ConditionalRegression reg(ns, var, pb.basis.scenario_degree, pb.basis.ridge);
    reg.fit(rows.data(), M, tg.data(), 1);
    for (std::size_t s = 0; s < M; ++s) {
      reg.conditional_mean(rows.data() + s * 2 * ns, e.data());
      for (std::size_t j = 0; j < d0; ++j) qm[j] = 0.5 * (avg.q(k, s, j) + avg.p(k, s, j));
      const double lh = set.LH(cspan(qm, d0), cspan(avg.Zphi.at(k, s), d0), mus[s]);
      phi(k, s) = e[0] + (lh + lam * e[0]) * dt;
    }
  }
  return phi;
}

}  // namespace mfgmp
