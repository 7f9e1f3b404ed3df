#include "mfgmp/oracle.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "mfgmp/errors.hpp"

namespace mfgmp {

namespace {

using State = std::array<double, 7>;  // a, bu, cu, k2, k12, kc, k0

// time derivative (forward time) of the coefficient system
State rhs(const State& y, const LQParams& p, const ModelConstants& c) {
  const double a = y[0], bu = y[1], cu = y[2], k2 = y[3], k12 = y[4], kc = y[5], k0 = y[6];
  const double s = a + cu, lam = c.lambda;
  State d;
  d[0] = a * a - (p.c1 + p.c3);
  d[1] = bu * (a + p.b + k2 + cu) - p.c2;
  d[2] = 2.0 * a * cu + cu * cu + bu * k12 + p.c3;
  d[3] = 2.0 * p.b * k2 + 3.0 * k2 * k2 + 2.0 * k12 * bu - lam * k2 + p.r1;
  d[4] = (p.b + 3.0 * k2 + s - lam) * k12 + kc * bu + p.r2;
  d[5] = 3.0 * k12 * k12 + 2.0 * s * kc - lam * kc;
  d[6] = -c.sigma0 * k2 - lam * k0;
  return d;
}

State axpy(const State& y, double h, const State& k) {
  State r;
  for (int i = 0; i < 7; ++i) r[i] = y[i] + h * k[i];
  return r;
}

}  // namespace

RiccatiSolution riccati_oracle(const LQParams& p, const ModelConstants& c, const TimeGrid& grid,
                               std::size_t refine) {
  if (grid.steps == 0 || refine == 0) throw ConfigError("oracle needs a nonempty grid");
  RiccatiSolution sol;
  sol.horizon = grid.horizon;
  const std::size_t n = grid.steps * refine;
  const double h = grid.horizon / double(n);
  sol.rk4_steps = n;
  std::vector<State> ys(n + 1);
  State y{p.g1, p.g2, 0.0, p.p1, p.p2, 0.0, 0.0};
  ys[n] = y;
  std::size_t last = n;
  for (std::size_t i = n; i-- > 0;) {
    // backward step from t_{i+1} to t_i
    const State k1 = rhs(y, p, c);
    const State k2 = rhs(axpy(y, -0.5 * h, k1), p, c);
    const State k3 = rhs(axpy(y, -0.5 * h, k2), p, c);
    const State k4 = rhs(axpy(y, -h, k3), p, c);
    for (int j = 0; j < 7; ++j) y[j] -= h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
    bool bad = false;
    for (double v : y) bad |= !std::isfinite(v) || std::abs(v) > 1e12;
    if (bad) {
      sol.blowup = true;
      sol.blowup_time = h * double(i);
      last = i + 1;
      break;
    }
    ys[i] = y;
  }
  const std::size_t first = sol.blowup ? last : 0;
  for (std::size_t i = first; i <= n; ++i) {
    sol.t.push_back(h * double(i));
    sol.a.push_back(ys[i][0]);
    sol.bu.push_back(ys[i][1]);
    sol.cu.push_back(ys[i][2]);
    sol.k2.push_back(ys[i][3]);
    sol.k12.push_back(ys[i][4]);
    sol.kc.push_back(ys[i][5]);
    sol.k0.push_back(ys[i][6]);
  }
  return sol;
}

RiccatiSolution::Coefficients RiccatiSolution::at(double time) const {
  if (t.empty()) throw ContractError("empty oracle solution");
  if (time < t.front() - 1e-12 || time > t.back() + 1e-12)
    throw ContractError("oracle evaluated outside its interval of existence");
  const double h = (t.back() - t.front()) / double(std::max<std::size_t>(t.size() - 1, 1));
  double pos = h > 0.0 ? (time - t.front()) / h : 0.0;
  std::size_t i = std::size_t(std::max(0.0, std::floor(pos)));
  if (i >= t.size() - 1) i = t.size() >= 2 ? t.size() - 2 : 0;
  double w = t.size() >= 2 ? std::clamp(pos - double(i), 0.0, 1.0) : 0.0;
  // snap to a node when the time sits on one
  if (std::abs(w) < 1e-9) w = 0.0;
  if (std::abs(w - 1.0) < 1e-9) w = 1.0;
  auto L = [&](const std::vector<double>& v) {
    return t.size() >= 2 ? (1.0 - w) * v[i] + w * v[i + 1] : v[0];
  };
  return {L(a), L(bu), L(cu), L(k2), L(k12), L(kc), L(k0)};
}

OracleValue eval_oracle_field(const RiccatiSolution& sol, double t, double x, double q, double m) {
  const auto c = sol.at(t);
  return {c.a * x + c.bu * q + c.cu * m,
          0.5 * c.k2 * q * q + c.k12 * q * m + 0.5 * c.kc * m * m + c.k0, c.k2 * q + c.k12 * m};
}

void write_oracle_csv(std::ostream& os, const RiccatiSolution& sol, const TimeGrid& grid) {
  os << "t,a,b_u,c_u,k2,k12,k_c,k0\n";
  char buf[512];
  for (std::size_t k = 0; k <= grid.steps; ++k) {
    const double t = grid.node(k);
    if (sol.blowup && t < sol.t.front()) continue;
    const auto c = sol.at(t);
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", t, c.a,
                  c.bu, c.cu, c.k2, c.k12, c.kc, c.k0);
    os << buf;
  }
}

OracleRun oracle_control(const RiccatiSolution& sol, const DecoupledProblem& pb) {
  if (sol.blowup) throw ContractError("oracle blew up before t = 0");
  const NoiseBundle& nz = *pb.noise;
  const std::size_t N = nz.steps, M = nz.scenarios, P = nz.particles;
  if (nz.d != 1 || nz.d0 != 1) throw ContractError("oracle control needs d = d0 = 1");
  const double dt = nz.dt;
  const double sx = std::sqrt(2.0 * pb.constants.sigma), sq = std::sqrt(2.0 * pb.constants.sigma0);
  OracleRun run{ControlField(N, M, P, 1, 1),
                ForwardPaths{ParticleField(N + 1, M, P, 1), ScenarioField(N + 1, M, 1)}};
  auto& X = run.paths.X;
  auto& q = run.paths.qf;
  X.raw() = pb.init.X0.raw();
  X.raw().resize((N + 1) * M * P);
  for (std::size_t s = 0; s < M; ++s) q(0, s) = pb.init.q0(0, s);
  for (std::size_t k = 0; k < N; ++k) {
    const auto c = sol.at(pb.grid.node(k));
    for (std::size_t s = 0; s < M; ++s) {
      const MeasureFeatures mu = measure_features(X.cloud(k, s), nullptr, P, 1);
      const double m = mu.mean_x[0], qs = q(k, s);
      const double z = c.k2 * qs + c.k12 * m;
      const double zz[1] = {z}, qq[1] = {qs};
      double hz[1];
      pb.model->Hz(qq, zz, mu, hz);
      run.control.alpha_q(k, s) = hz[0];
      q(k + 1, s) = qs - hz[0] * dt + sq * nz.dw0(k, s, 0);
      for (std::size_t p = 0; p < P; ++p) {
        const double x = X(k, s, p);
        const double u[1] = {c.a * x + c.bu * qs + c.cu * m}, xx[1] = {x};
        double f[1];
        pb.model->F(xx, qq, u, zz, mu, f);
        run.control.alpha_x(k, s, p) = f[0];
        X(k + 1, s, p) = x - f[0] * dt + sx * nz.db(k, s, p, 0);
      }
    }
  }
  return run;
}

const char* to_string(PicardResult::Status s) {
  switch (s) {
    case PicardResult::Status::Converged: return "converged";
    case PicardResult::Status::Diverged: return "diverged";
    default: return "max_iter";
  }
}

PicardResult picard_solve(const DecoupledProblem& pb, const ControlField& initial, double tol,
                          std::size_t max_iter) {
  PicardResult r;
  r.control = initial;
  std::size_t rises = 0;
  for (std::size_t j = 0; j < max_iter; ++j) {
    try {
      r.solve = solve_decoupled(pb, r.control);
    } catch (const std::runtime_error& e) {
      r.status = PicardResult::Status::Diverged;
      r.message = e.what();
      r.sweeps = j;
      return r;
    }
    ControlField next = induced_control(pb, r.solve);
    ControlField diff = next;
    axpy(-1.0, r.control, diff);
    const double dist = norm_T(diff, pb.grid);
    r.distances.push_back(dist);
    r.control = std::move(next);
    r.sweeps = j + 1;
    if (!std::isfinite(dist)) {
      r.status = PicardResult::Status::Diverged;
      r.message = "non-finite sweep distance";
      return r;
    }
    if (dist <= tol) {
      r.status = PicardResult::Status::Converged;
      r.solve = solve_decoupled(pb, r.control);
      return r;
    }
    rises = (r.distances.size() >= 2 && dist > r.distances[r.distances.size() - 2]) ? rises + 1 : 0;
    if (rises >= 3) {
      r.status = PicardResult::Status::Diverged;
      r.message = "sweep distance increased over 3 consecutive sweeps";
      return r;
    }
  }
  r.status = PicardResult::Status::MaxIter;
  return r;
}

}  // namespace mfgmp
