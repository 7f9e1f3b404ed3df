#include "mfgmp/decoupled_solver.hpp"

#include <algorithm>
#include <cmath>

#include "mfgmp/errors.hpp"

namespace mfgmp {

InitialCondition sample_initial(const InitialSpec& spec, std::size_t M, std::size_t P,
                                std::size_t d, std::size_t d0, std::uint64_t seed) {
  InitialCondition ic{ParticleField(1, M, P, d), ScenarioField(1, M, d0)};
  for (std::size_t s = 0; s < M; ++s) {
    for (std::size_t j = 0; j < d; ++j) {
      const double centre =
          spec.x_mean + spec.x_scenario_std * gaussian_from_key(seed, kStreamInitial, s, 0, 1, j);
      for (std::size_t p = 0; p < P; ++p)
        ic.X0(0, s, p, j) =
            centre + spec.x_std * gaussian_from_key(seed, kStreamInitial, s, p + 1, 0, j);
    }
    for (std::size_t j = 0; j < d0; ++j)
      ic.q0(0, s, j) =
          spec.q_mean + spec.q_std * gaussian_from_key(seed, kStreamInitial, s, 0, 2, j);
  }
  return ic;
}

ForwardPaths simulate_forward(const ControlField& control, const NoiseBundle& noise,
                              const ModelConstants& c, const InitialCondition& init) {
  const std::size_t N = noise.steps, M = noise.scenarios, P = noise.particles;
  const std::size_t d = noise.d, d0 = noise.d0;
  if (control.alpha_x.times() != N || control.alpha_x.scenarios() != M ||
      control.alpha_x.particles() != P || control.alpha_x.dim() != d ||
      control.alpha_q.dim() != d0 || init.X0.scenarios() != M || init.X0.particles() != P)
    throw ContractError("control, noise and initial condition shapes disagree");
  const double dt = noise.dt;
  const double sx = std::sqrt(2.0 * c.sigma), sq = std::sqrt(2.0 * c.sigma0);
  ForwardPaths f{ParticleField(N + 1, M, P, d), ScenarioField(N + 1, M, d0)};
  std::copy(init.X0.raw().begin(), init.X0.raw().end(), f.X.slice(0));
  std::copy(init.q0.raw().begin(), init.q0.raw().end(), f.qf.at(0, 0));
  const std::size_t nx = M * P * d;
  for (std::size_t k = 0; k < N; ++k) {
    const double* x = f.X.slice(k);
    const double* a = control.alpha_x.slice(k);
    const double* db = noise.db_slice(k);
    double* xn = f.X.slice(k + 1);
    for (std::size_t i = 0; i < nx; ++i) {
      if (!std::isfinite(a[i])) throw SimulationError("non-finite minor drift", k);
      xn[i] = x[i] - a[i] * dt + sx * db[i];
    }
    const double* dw = noise.dw0_slice(k);
    for (std::size_t i = 0; i < M * d0; ++i) {
      const double aq = control.alpha_q.raw()[k * M * d0 + i];
      if (!std::isfinite(aq)) throw SimulationError("non-finite major drift", k);
      f.qf.raw()[(k + 1) * M * d0 + i] = f.qf.raw()[k * M * d0 + i] - aq * dt + sq * dw[i];
    }
  }
  return f;
}

SolveOutput solve_backward(const ForwardPaths& fw, const ControlField& ctl,
                           const PrimedCoefficientSet& set, const ModelConstants& c,
                           const NoiseBundle& noise, const RegressionBasis& basis,
                           const ThetaOptions& theta_opt) {
  const std::size_t N = noise.steps, M = noise.scenarios, P = noise.particles;
  const std::size_t d = noise.d, d0 = noise.d0;
  if (set.dim() != d || set.major_dim() != d0)
    throw ContractError("model dimensions do not match the noise bundle");
  const double dt = noise.dt;
  const double s0 = std::sqrt(2.0 * c.sigma0), sx = std::sqrt(2.0 * c.sigma);
  const bool mean_u = basis.include_mean_u;

  SolveOutput out;
  out.state = EnsembleState(N, M, P, d, d0);
  out.theta_F = ParticleField(N, M, P, d);
  out.theta_H = ScenarioField(N, M, d0);
  EnsembleState& st = out.state;
  st.X = fw.X;
  st.qf = fw.qf;
  auto& dg = out.diagnostics;
  dg.residual_u.assign(N, 0.0);
  dg.residual_phi.assign(N, 0.0);
  dg.residual_qb.assign(N, 0.0);
  dg.se_zphi.assign(N, 0.0);

  // terminal slices
  for (std::size_t s = 0; s < M; ++s) {
    const MeasureFeatures mu = measure_features(st.X.cloud(N, s), nullptr, P, d);
    const cspan q(st.qf.at(N, s), d0);
    for (std::size_t p = 0; p < P; ++p)
      set.base().g(cspan(st.X.cloud(N, s) + p * d, d), q, mu, mspan(st.U.cloud(N, s) + p * d, d));
    st.phi(N, s) = set.base().psi(q, mu);
    for (std::size_t j = 0; j < d0; ++j) st.qb(N, s, j) = st.qf(N, s, j);
  }

  // regression layouts
  const std::size_t ns_sc = d0 + d, nv_sc = 2 * ns_sc;
  std::vector<double> var_sc;
  for (std::size_t j = 0; j < d0; ++j) var_sc.push_back(dt);
  for (std::size_t j = 0; j < d; ++j) var_sc.push_back(dt / double(P));
  const std::size_t ns_pt = 2 * d + d0 + (mean_u ? d : 0);
  std::vector<double> var_pt;
  for (std::size_t j = 0; j < d; ++j) var_pt.push_back(dt * (1.0 - 1.0 / double(P)));
  for (std::size_t j = 0; j < d0; ++j) var_pt.push_back(dt);
  for (std::size_t j = 0; j < d; ++j) var_pt.push_back(dt / double(P));
  const std::size_t nv_pt = ns_pt + var_pt.size();

  std::vector<double> rows_sc(M * nv_sc), tgt_sc(M * (1 + d0));
  std::vector<double> rows_pt(M * P * nv_pt), tgt_pt(M * P * d);
  std::vector<double> mtil(M * d), ubar(M * d), dbm(M * d);
  std::vector<double> e_sc(1 + d0), c_sc(1 + d0), e_pt(d), cross_pt((2 * d + d0) * d);
  double buf[kMaxDim], buf2[kMaxDim];

  for (std::size_t kk = N; kk-- > 0;) {
    const std::size_t k = kk;
    // scenario-level pre-state and increment means
    for (std::size_t s = 0; s < M; ++s)
      for (std::size_t j = 0; j < d; ++j) {
        double mx = 0.0, mb = 0.0, mu_ = 0.0;
        for (std::size_t p = 0; p < P; ++p) {
          mx += st.X(k, s, p, j) - ctl.alpha_x(k, s, p, j) * dt;
          mb += noise.db(k, s, p, j);
          mu_ += ctl.alpha_x(k, s, p, j);
        }
        mtil[s * d + j] = mx / double(P);
        dbm[s * d + j] = mb / double(P);
        ubar[s * d + j] = mu_ / double(P);
      }

    // --- scenario regression: phi and q^b
    for (std::size_t s = 0; s < M; ++s) {
      double* r = rows_sc.data() + s * nv_sc;
      for (std::size_t j = 0; j < d0; ++j) r[j] = st.qf(k, s, j) - ctl.alpha_q(k, s, j) * dt;
      for (std::size_t j = 0; j < d; ++j) r[d0 + j] = mtil[s * d + j];
      for (std::size_t j = 0; j < d0; ++j) r[ns_sc + j] = noise.dw0(k, s, j);
      for (std::size_t j = 0; j < d; ++j) r[ns_sc + d0 + j] = dbm[s * d + j];
      tgt_sc[s * (1 + d0)] = st.phi(k + 1, s);
      for (std::size_t j = 0; j < d0; ++j) tgt_sc[s * (1 + d0) + 1 + j] = st.qb(k + 1, s, j);
    }
    ConditionalRegression reg_sc(ns_sc, var_sc, basis.scenario_degree, basis.ridge);
    reg_sc.fit(rows_sc.data(), M, tgt_sc.data(), 1 + d0);
    dg.residual_phi[k] = reg_sc.residual_rms(0);
    {
      double rq = 0.0;
      for (std::size_t j = 0; j < d0; ++j) rq = std::max(rq, reg_sc.residual_rms(1 + j));
      dg.residual_qb[k] = rq;
    }
    dg.se_zphi[k] = (s0 > 0.0 && dt > 0.0) ? reg_sc.fitted_se(0) / (s0 * std::sqrt(dt)) : 0.0;

    std::vector<double> ephi(M), eqb(M * d0);
    for (std::size_t s = 0; s < M; ++s) {
      const double* r = rows_sc.data() + s * nv_sc;
      reg_sc.conditional_mean(r, e_sc.data());
      ephi[s] = e_sc[0];
      for (std::size_t j = 0; j < d0; ++j) eqb[s * d0 + j] = e_sc[1 + j];
      for (std::size_t j = 0; j < d0; ++j) {
        reg_sc.conditional_cross(r, j, c_sc.data());
        const double scale = (s0 > 0.0 && dt > 0.0) ? 1.0 / (s0 * dt) : 0.0;
        st.Zphi(k, s, j) = c_sc[0] * scale;
        for (std::size_t l = 0; l < d0; ++l) st.Zq(k, s, l * d0 + j) = c_sc[1 + l] * scale;
        dg.max_abs_zphi = std::max(dg.max_abs_zphi, std::abs(st.Zphi(k, s, j)));
      }
    }

    // --- theta and scenario-borne backward values
    std::vector<MeasureFeatures> mus(M);
    for (std::size_t s = 0; s < M; ++s) {
      ThetaProblem pb;
      pb.particles = P;
      pb.x = cspan(st.X.cloud(k, s), P * d);
      pb.p = cspan(st.qf.at(k, s), d0);
      pb.z = cspan(st.Zphi.at(k, s), d0);
      pb.alpha_x = cspan(ctl.alpha_x.cloud(k, s), P * d);
      pb.alpha_q = cspan(ctl.alpha_q.at(k, s), d0);
      ThetaSolution th = theta_inverse(set, pb, theta_opt);
      dg.theta_iterations += th.iterations;
      std::copy(th.u.begin(), th.u.end(), out.theta_F.cloud(k, s));
      std::copy(th.qb.begin(), th.qb.end(), out.theta_H.at(k, s));

      mus[s] = measure_features(st.X.cloud(k, s), out.theta_F.cloud(k, s), P, d);
      const cspan qf(st.qf.at(k, s), d0), qb(out.theta_H.at(k, s), d0), z(st.Zphi.at(k, s), d0);
      const double lh = set.LH(qf, qb, z, mus[s]);
      st.phi(k, s) = ephi[s] + (lh + c.lambda * ephi[s]) * dt;
      set.Hz(qf, qb, z, mus[s], mspan(buf, d0));
      for (std::size_t j = 0; j < d0; ++j) st.qb(k, s, j) = eqb[s * d0 + j] + buf[j] * dt;
      if (!std::isfinite(st.phi(k, s))) throw SimulationError("non-finite major value", k);
    }

    // --- particle regression: U
    for (std::size_t s = 0; s < M; ++s)
      for (std::size_t p = 0; p < P; ++p) {
        double* r = rows_pt.data() + (s * P + p) * nv_pt;
        std::size_t o = 0;
        for (std::size_t j = 0; j < d; ++j) r[o++] = st.X(k, s, p, j) - ctl.alpha_x(k, s, p, j) * dt;
        for (std::size_t j = 0; j < d0; ++j) r[o++] = st.qf(k, s, j) - ctl.alpha_q(k, s, j) * dt;
        for (std::size_t j = 0; j < d; ++j) r[o++] = mtil[s * d + j];
        if (mean_u)
          for (std::size_t j = 0; j < d; ++j) r[o++] = ubar[s * d + j];
        for (std::size_t j = 0; j < d; ++j) r[o++] = noise.db(k, s, p, j) - dbm[s * d + j];
        for (std::size_t j = 0; j < d0; ++j) r[o++] = noise.dw0(k, s, j);
        for (std::size_t j = 0; j < d; ++j) r[o++] = dbm[s * d + j];
        for (std::size_t j = 0; j < d; ++j) tgt_pt[(s * P + p) * d + j] = st.U(k + 1, s, p, j);
      }
    ConditionalRegression reg_pt(ns_pt, var_pt, basis.particle_degree, basis.ridge);
    reg_pt.fit(rows_pt.data(), M * P, tgt_pt.data(), d);
    dg.residual_u[k] = reg_pt.max_residual_rms();

    const std::size_t nz = d + d0;
    for (std::size_t s = 0; s < M; ++s) {
      const cspan qf(st.qf.at(k, s), d0), qb(out.theta_H.at(k, s), d0), z(st.Zphi.at(k, s), d0);
      for (std::size_t p = 0; p < P; ++p) {
        const double* r = rows_pt.data() + (s * P + p) * nv_pt;
        reg_pt.conditional_moments(r, e_pt.data(), cross_pt.data());
        set.G(cspan(st.X.cloud(k, s) + p * d, d), qf, qb, cspan(out.theta_F.cloud(k, s) + p * d, d),
              z, mus[s], mspan(buf2, d));
        for (std::size_t j = 0; j < d; ++j) {
          const double u = e_pt[j] + buf2[j] * dt;
          if (!std::isfinite(u)) throw SimulationError("non-finite minor value", k);
          st.U(k, s, p, j) = u;
        }
        if (dt == 0.0) continue;
        // dB = dB_perp + mean dB; increments ordered (perp d, common d0, mean d)
        for (std::size_t l = 0; l < d; ++l)
          for (std::size_t j = 0; j < d; ++j)
            st.Z(k, s, p, j * nz + l) = (cross_pt[l * d + j] + cross_pt[(d + d0 + l) * d + j]) / dt;
        for (std::size_t l = 0; l < d0; ++l)
          for (std::size_t j = 0; j < d; ++j)
            st.Z(k, s, p, j * nz + d + l) = cross_pt[(d + l) * d + j] / dt;
      }
    }
  }
  (void)sx;
  return out;
}

SolveOutput solve_decoupled(const DecoupledProblem& pb, const ControlField& control) {
  const ForwardPaths fw = simulate_forward(control, *pb.noise, pb.constants, pb.init);
  return solve_backward(fw, control, split_q(pb.model), pb.constants, *pb.noise, pb.basis,
                        pb.theta);
}

ControlField induced_control(const DecoupledProblem& pb, const SolveOutput& so) {
  const EnsembleState& st = so.state;
  const std::size_t N = st.steps(), M = st.X.scenarios(), P = st.X.particles();
  const std::size_t d = st.X.dim(), d0 = st.qf.dim();
  const PrimedCoefficientSet set = split_q(pb.model);
  ControlField a(N, M, P, d, d0);
  for (std::size_t k = 0; k < N; ++k)
    for (std::size_t s = 0; s < M; ++s) {
      const MeasureFeatures mu = measure_features(st.X.cloud(k, s), st.U.cloud(k, s), P, d);
      const cspan qf(st.qf.at(k, s), d0), qb(st.qb.at(k, s), d0), z(st.Zphi.at(k, s), d0);
      for (std::size_t p = 0; p < P; ++p)
        set.F(cspan(st.X.cloud(k, s) + p * d, d), qf, qb, cspan(st.U.cloud(k, s) + p * d, d), z, mu,
              mspan(a.alpha_x.cloud(k, s) + p * d, d));
      set.Hz(qf, qb, z, mu, mspan(a.alpha_q.at(k, s), d0));
    }
  return a;
}

InitialField::InitialField(const SolveOutput& so, double ridge) {
  const EnsembleState& st = so.state;
  const std::size_t M = st.X.scenarios(), P = st.X.particles();
  if (st.X.dim() != 1 || st.qf.dim() != 1)
    throw ContractError("initial field fit supports d = d0 = 1");
  std::vector<double> rows(M * P * 3), tg(M * P), rs(M * 2), ts(M);
  for (std::size_t s = 0; s < M; ++s) {
    double m = 0.0;
    for (std::size_t p = 0; p < P; ++p) m += st.X(0, s, p);
    m /= double(P);
    for (std::size_t p = 0; p < P; ++p) {
      rows[(s * P + p) * 3] = st.X(0, s, p);
      rows[(s * P + p) * 3 + 1] = st.qf(0, s);
      rows[(s * P + p) * 3 + 2] = m;
      tg[s * P + p] = st.U(0, s, p);
    }
    rs[s * 2] = st.qf(0, s);
    rs[s * 2 + 1] = m;
    ts[s] = st.phi(0, s);
  }
  ConditionalRegression ru(3, {}, 1, ridge);
  ru.fit(rows.data(), M * P, tg.data(), 1);
  u_[0] = ru.coefficient({0, 0, 0}, 0);
  u_[1] = ru.coefficient({1, 0, 0}, 0);
  u_[2] = ru.coefficient({0, 1, 0}, 0);
  u_[3] = ru.coefficient({0, 0, 1}, 0);
  ConditionalRegression rf(2, {}, 2, ridge);
  rf.fit(rs.data(), M, ts.data(), 1);
  f_[0] = rf.coefficient({0, 0}, 0);
  f_[1] = rf.coefficient({1, 0}, 0);
  f_[2] = rf.coefficient({0, 1}, 0);
  f_[3] = rf.coefficient({2, 0}, 0);
  f_[4] = rf.coefficient({1, 1}, 0);
  f_[5] = rf.coefficient({0, 2}, 0);
}

double InitialField::U(double x, double q, double m) const {
  return u_[0] + u_[1] * x + u_[2] * q + u_[3] * m;
}
double InitialField::phi(double q, double m) const {
  return f_[0] + f_[1] * q + f_[2] * m + f_[3] * q * q + f_[4] * q * m + f_[5] * m * m;
}
double InitialField::dphi_dq(double q, double m) const {
  return f_[1] + 2.0 * f_[3] * q + f_[4] * m;
}

}  // namespace mfgmp
