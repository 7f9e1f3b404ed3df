#include "mfgmp/experiments.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "mfgmp/grid_noise.hpp"
#include "mfgmp/io.hpp"

namespace mfgmp {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kStreamSweep = 6;

json jnum(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json rate_json(const RateFit& r) {
  return {{"lambda_hat", jnum(r.lambda)}, {"r2", jnum(r.r2)}, {"slope", jnum(r.slope)}};
}

std::string ensemble_csv(const EnsembleState& st, const TimeGrid& grid) {
  std::ostringstream os;
  write_ensemble_csv(os, st, grid);
  return os.str();
}

// per (k, s) scenario-level snapshot
std::string scenario_csv(const SolveOutput& so, const TimeGrid& grid) {
  const EnsembleState& st = so.state;
  const std::size_t N = st.steps(), M = st.X.scenarios(), P = st.X.particles();
  std::string out = "k,t,s,q_f,q_b,phi,Z_phi,mean_X,mean_U\n";
  for (std::size_t k = 0; k <= N; ++k)
    for (std::size_t s = 0; s < M; ++s) {
      double mx = 0.0, mu = 0.0;
      for (std::size_t p = 0; p < P; ++p) {
        mx += st.X(k, s, p);
        mu += st.U(k, s, p);
      }
      out += csv_row({double(k), grid.node(k), double(s), st.qf(k, s), st.qb(k, s), st.phi(k, s),
                      k < N ? st.Zphi(k, s) : std::nan(""), mx / double(P), mu / double(P)});
    }
  return out;
}

std::string initial_csv(const SolveOutput& so) {
  const EnsembleState& st = so.state;
  const std::size_t M = st.X.scenarios(), P = st.X.particles();
  std::string out = "s,p,X,U,q,phi\n";
  for (std::size_t s = 0; s < M; ++s)
    for (std::size_t p = 0; p < P; ++p)
      out += csv_row({double(s), double(p), st.X(0, s, p), st.U(0, s, p), st.qf(0, s), st.phi(0, s)});
  return out;
}

std::string residual_csv(const ExtragradientReport<ControlField>& r) {
  // wall-clock seconds live in report.json only, so the csv stays reproducible
  std::string out = "n,residual,dist_to_oracle,gamma\n";
  for (std::size_t n = 0; n < r.residual_norms.size(); ++n)
    out += csv_row({double(n), r.residual_norms[n],
                    n < r.dist_to_ref.size() ? r.dist_to_ref[n] : std::nan(""), r.gamma});
  return out;
}

json eg_json(const EGRun& run) {
  const auto& r = run.report;
  return {{"L_hat", jnum(run.L_hat)},
          {"gamma", run.gamma},
          {"converged", r.converged},
          {"diverged", r.diverged},
          {"iterations", r.iterations},
          {"final_residual", r.residual_norms.empty() ? json(nullptr) : jnum(r.residual_norms.back())},
          {"message", r.message},
          {"z_convention", "Z_phi is the dW0 integrand after the sqrt(2 sigma0) factor, Z_phi = d phi / dq"},
          {"rate", rate_json(r.rate)},
          {"seconds", r.seconds}};
}

int exit_for(const ExtragradientReport<ControlField>& r) {
  return r.converged ? kExitConverged : kExitDiverged;
}

}  // namespace

CoefficientPtr build_model(const RunConfig& cfg) {
  if (cfg.model == "lq") return make_lq_model(cfg.lq, cfg.constants);
  if (cfg.model == "zero") return clamp_coefficients(std::make_shared<ZeroModel>(1, 1), cfg.constants.clamp);
  throw ConfigError("model.type must be \"lq\" or \"zero\"");
}

std::shared_ptr<DecoupledProblem> build_problem(const RunConfig& cfg) {
  auto pb = std::make_shared<DecoupledProblem>();
  pb->model = build_model(cfg);
  pb->constants = cfg.constants;
  pb->grid = build_grid(cfg.horizon, cfg.steps);
  pb->noise = std::make_shared<const NoiseBundle>(
      sample_noise(pb->grid, cfg.scenarios, cfg.particles, 1, 1, cfg.seed, cfg.antithetic));
  pb->init = sample_initial(cfg.initial, cfg.scenarios, cfg.particles, 1, 1, cfg.seed);
  pb->basis = cfg.basis;
  return pb;
}

Eigen::MatrixXd monotonicity_A(const RunConfig& cfg) {
  return Eigen::MatrixXd::Constant(1, 1, cfg.eg.A);
}

std::vector<Probe> probe_points(const RunConfig& cfg, std::size_t n) {
  std::vector<Probe> out(n);
  const InitialSpec& s = cfg.initial;
  for (std::size_t i = 0; i < n; ++i) {
    auto g = [&](std::uint64_t j) {
      return gaussian_from_key(cfg.seed, kStreamProbe, i, j, 7, 0);
    };
    out[i].m = s.x_mean + 0.8 * s.x_scenario_std * g(0);
    out[i].x = out[i].m + 0.8 * s.x_std * g(1);
    out[i].q = s.q_mean + 0.8 * s.q_std * g(2);
  }
  return out;
}

EGRun solve_extragradient(std::shared_ptr<const DecoupledProblem> problem, const RunConfig& cfg,
                          const ControlField* reference, const HalfObserver& observer) {
  DecouplingOperator op(problem, monotonicity_A(cfg));
  EGRun res;
  if (cfg.eg.gamma > 0.0) {
    res.gamma = cfg.eg.gamma;
    res.L_hat = std::nan("");
  } else {
    res.L_hat = estimate_lipschitz_v(op, cfg.eg.lipschitz_probes, cfg.seed);
    res.gamma = step_from_lipschitz(res.L_hat, cfg.eg.safety);
  }
  ExtragradientConfig ec;
  ec.gamma = res.gamma;
  ec.n_max = cfg.eg.n_max;
  ec.tol = cfg.eg.tol;
  ec.averaging = cfg.eg.averaging;
  Observer obs;
  if (observer) obs = [&](std::size_t n) { observer(n, op.last_solve()); };
  res.report = mfgmp::run(op, problem->zero_control(), ec, reference, obs);
  // the last evaluation is at the final iterate unless a half step failed
  if (!res.report.diverged) res.solve = op.last_solve();
  return res;
}

ThresholdInfo lq_thresholds(const RunConfig& cfg) {
  ThresholdInfo info;
  info.mono = lq_monotonicity_data(cfg.lq, cfg.eg.A, cfg.verify.q_radius, cfg.constants.clamp);
  try {
    info.thresholds = compute_thresholds(info.mono.data, cfg.constants.lambda, cfg.horizon);
  } catch (const ConfigError& e) {
    info.error = e.what();
  }
  return info;
}

double oracle_sup_dphi(const RiccatiSolution& sol, const EnsembleState& st, const TimeGrid& grid) {
  const std::size_t N = st.steps(), M = st.X.scenarios(), P = st.X.particles();
  double sup = 0.0;
  for (std::size_t k = 0; k < N; ++k)
    for (std::size_t s = 0; s < M; ++s) {
      double m = 0.0;
      for (std::size_t p = 0; p < P; ++p) m += st.X(k, s, p);
      m /= double(P);
      sup = std::max(sup, std::abs(eval_oracle_field(sol, grid.node(k), 0.0, st.qf(k, s), m).Zphi));
    }
  return sup;
}

SweepCell run_sweep_cell(const RunConfig& base, double sigma0, double horizon,
                         std::uint64_t cell_seed) {
  SweepCell c;
  c.sigma0 = sigma0;
  c.horizon = horizon;
  RunConfig cfg = base;
  cfg.constants.sigma0 = sigma0;
  const double dt = base.horizon / double(base.steps);
  cfg.steps = std::max<std::size_t>(1, std::size_t(std::llround(horizon / dt)));
  cfg.horizon = horizon;
  cfg.seed = cell_seed;
  c.steps = cfg.steps;
  try {
    if (cfg.model == "lq") {
      const ThresholdInfo th = lq_thresholds(cfg);
      if (th.thresholds) {
        c.gamma_star = th.thresholds->gamma_star;
        c.beta_T = th.thresholds->beta_T;
        c.sigma0_T = th.thresholds->sigma0_T;
        if (th.thresholds->sigma0_star) c.sigma0_star = *th.thresholds->sigma0_star;
        c.branch = th.thresholds->branch;
      }
      c.oracle_blowup = riccati_oracle(cfg.lq, cfg.constants, build_grid(horizon, cfg.steps)).blowup;
    }
    auto pb = build_problem(cfg);
    if (cfg.sweep.picard) {
      const PicardResult pr =
          picard_solve(*pb, pb->zero_control(), cfg.sweep.picard_tol, cfg.sweep.picard_max_iter);
      c.picard = to_string(pr.status);
      c.picard_sweeps = pr.sweeps;
    }
    const EGRun eg = solve_extragradient(pb, cfg);
    c.eg_converged = eg.report.converged;
    c.eg_diverged = eg.report.diverged;
    c.eg_iterations = eg.report.iterations;
    c.lambda_hat = eg.report.rate.lambda;
    c.r2 = eg.report.rate.r2;
    if (cfg.sweep.lipschitz && eg.report.converged) {
      auto solve = [&](const InitialCondition& ic) {
        auto p2 = std::make_shared<DecoupledProblem>(*pb);
        p2->init = ic;
        EGRun r = solve_extragradient(p2, cfg);
        if (!r.report.converged) throw std::runtime_error("perturbed solve did not converge");
        return r.solve;
      };
      const LipschitzEstimates le = estimate_decoupling_lipschitz(pb->init, solve, cfg.sweep.lipschitz_h);
      c.lip_x = le.lip_x;
      c.lip_q = le.lip_q;
      c.lip_mu = le.lip_mu;
    }
  } catch (const std::exception& e) {
    c.error = e.what();
  }
  return c;
}

std::string sweep_csv_header() {
  return "sigma0,horizon,steps,picard,picard_sweeps,eg_converged,eg_diverged,eg_iterations,"
         "lambda_hat,r2,lip_x,lip_q,lip_mu,gamma_star,beta_T,sigma0_T,sigma0_star,branch,"
         "oracle_blowup,error\n";
}

std::string sweep_csv_row(const SweepCell& c) {
  std::string err = c.error;
  for (char& ch : err)
    if (ch == ',' || ch == '\n' || ch == '"') ch = ' ';
  std::string s = fmt17(c.sigma0) + ',' + fmt17(c.horizon) + ',' + std::to_string(c.steps) + ',' +
                  c.picard + ',' + std::to_string(c.picard_sweeps) + ',' +
                  (c.eg_converged ? "1" : "0") + ',' + (c.eg_diverged ? "1" : "0") + ',' +
                  std::to_string(c.eg_iterations);
  for (double v : {c.lambda_hat, c.r2, c.lip_x, c.lip_q, c.lip_mu, c.gamma_star, c.beta_T,
                   c.sigma0_T, c.sigma0_star})
    s += ',' + fmt17(v);
  s += ',' + std::to_string(c.branch) + ',' + (c.oracle_blowup ? "1" : "0") + ',' + err + '\n';
  return s;
}

CertificationReport run_battery(const RunConfig& cfg, json* extra) {
  CertificationReport rep;
  const CoefficientPtr set = build_model(cfg);
  const Eigen::MatrixXd A = monotonicity_A(cfg);
  SampleSpec spec{cfg.verify.sample_particles, cfg.verify.q_radius, cfg.verify.z_radius};
  const bool lq = cfg.model == "lq";
  std::optional<ThresholdInfo> th;
  if (lq) th = lq_thresholds(cfg);
  const double beta0 = th ? th->mono.data.beta0 : 0.0;

  if (cfg.verify.terminal)
    rep.checks.push_back(check_terminal_monotonicity(*set, A, beta0, cfg.verify.samples, cfg.seed, spec));
  if (cfg.verify.coefficient) {
    const double kf = th ? th->mono.kappa_fixed : 0.0;
    const MonotonicityData* slack = (th && kf > 0.0) ? &th->mono.data : nullptr;
    CheckResult r = check_coefficient_monotonicity(*set, A, std::max(kf, 0.0), cfg.verify.samples,
                                                   cfg.seed, spec, slack);
    // strong form: the sampled quotient has to stay positive
    if (!(r.estimate > 0.0) && r.pass) {
      r.pass = false;
      r.witness = "kappa-hat " + fmt17(r.estimate) + " is not positive";
    }
    rep.checks.push_back(r);
  }
  auto pb = build_problem(cfg);
  if (cfg.verify.v_monotone) {
    DecouplingOperator op(pb, A);
    rep.checks.push_back(check_v_monotonicity(op, cfg.verify.v_pairs, cfg.seed));
  }
  const bool need_solve = cfg.verify.z_bound || cfg.verify.pontryagin || cfg.verify.propagation;
  if (need_solve) {
    const EGRun run = solve_extragradient(pb, cfg);
    if (extra) (*extra)["solve"] = eg_json(run);
    if (!run.report.converged) {
      CheckResult r;
      r.name = "solve";
      r.witness = "extragradient did not converge: " + run.report.message;
      rep.checks.push_back(r);
      return rep;
    }
    if (cfg.verify.z_bound) {
      double lip;
      if (lq) {
        const RiccatiSolution sol = riccati_oracle(cfg.lq, cfg.constants, pb->grid);
        lip = oracle_sup_dphi(sol, run.solve.state, pb->grid);
      } else {
        lip = 0.0;
      }
      rep.checks.push_back(check_z_bound(run.solve, lip));
      if (std::isfinite(cfg.constants.clamp))
        rep.checks.push_back(check_z_clamped(run.solve, cfg.constants.clamp));
    }
    if (cfg.verify.pontryagin)
      rep.checks.push_back(check_pontryagin_residual(run.solve, *set, pb->grid, cfg.verify.tol_disc));
    if (cfg.verify.propagation) {
      RunConfig c2 = cfg;
      c2.initial.x_mean += cfg.verify.second_x_shift;
      c2.initial.q_mean += cfg.verify.second_q_shift;
      auto pb2 = std::make_shared<DecoupledProblem>(*pb);
      pb2->init = sample_initial(c2.initial, cfg.scenarios, cfg.particles, 1, 1, cfg.seed + 1);
      const EGRun run2 = solve_extragradient(pb2, cfg);
      std::function<double(double)> beta = [beta0](double) { return beta0; };
      if (th && th->thresholds) {
        const Thresholds t = *th->thresholds;
        beta = [t](double s) { return t.beta_star(s); };
      }
      if (!run2.report.converged) {
        CheckResult r;
        r.name = "monotonicity_propagation";
        r.witness = "second solve did not converge: " + run2.report.message;
        rep.checks.push_back(r);
      } else {
        rep.checks.push_back(check_monotonicity_propagation(run.solve, run2.solve, A, beta, pb->grid));
      }
    }
  }
  if (extra && th) {
    json t;
    t["kappa_fixed"] = th->mono.kappa_fixed;
    t["kappa"] = th->mono.data.kappa;
    t["beta0"] = th->mono.data.beta0;
    t["C_M"] = th->mono.data.C_M;
    t["C_H"] = th->mono.data.C_H;
    if (th->thresholds) {
      t["gamma_star"] = jnum(th->thresholds->gamma_star);
      t["beta_T"] = jnum(th->thresholds->beta_T);
      t["sigma0_T"] = jnum(th->thresholds->sigma0_T);
      t["sigma0_star"] = th->thresholds->sigma0_star ? jnum(*th->thresholds->sigma0_star) : json(nullptr);
      t["branch"] = th->thresholds->branch;
      t["note"] = th->thresholds->note;
    } else {
      t["error"] = th->error;
    }
    (*extra)["thresholds"] = t;
  }
  return rep;
}

SolveArtifacts solve_and_write(const RunConfig& cfg, const fs::path& out, bool dump_ensemble,
                               bool oracle_reference) {
  RunManifest man(cfg.to_json(), cfg.seed, "solve");
  SolveArtifacts a;
  a.problem = build_problem(cfg);
  std::optional<ControlField> ref;
  if (oracle_reference && cfg.model == "lq") {
    const RiccatiSolution sol = riccati_oracle(cfg.lq, cfg.constants, a.problem->grid);
    if (!sol.blowup) ref = oracle_control(sol, *a.problem).control;
  }
  a.run = solve_extragradient(a.problem, cfg, ref ? &*ref : nullptr);
  const auto& pb = a.problem;
  emit(man, out, "extragradient.csv", "extragradient", residual_csv(a.run.report));
  emit(man, out, "report.json", "extragradient", eg_json(a.run).dump(2) + "\n");
  if (!a.run.report.diverged) {
    emit(man, out, "fields_scenario.csv", "fields", scenario_csv(a.run.solve, pb->grid));
    emit(man, out, "fields_initial.csv", "fields", initial_csv(a.run.solve));
    if (dump_ensemble)
      emit(man, out, "ensemble.csv", "fields", ensemble_csv(a.run.solve.state, pb->grid));
  }
  man.write(out);
  return a;
}

int run_solve(const RunConfig& cfg, const fs::path& out, bool dump_ensemble) {
  return exit_for(solve_and_write(cfg, out, dump_ensemble, true).run.report);
}

int run_verify(const RunConfig& cfg, const fs::path& out) {
  RunManifest man(cfg.to_json(), cfg.seed, "verify");
  json extra;
  const CertificationReport rep = run_battery(cfg, &extra);
  json j = to_json(rep);
  j["context"] = extra;
  emit(man, out, "certification.json", "verify", j.dump(2) + "\n");
  man.write(out);
  for (const auto& c : rep.checks)
    std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << " margin=" << c.margin
              << " estimate=" << c.estimate << (c.witness.empty() ? "" : " witness: " + c.witness)
              << '\n';
  return rep.all_pass() ? kExitConverged : kExitDiverged;
}

int run_converge(const RunConfig& cfg, const fs::path& out) {
  RunManifest man(cfg.to_json(), cfg.seed, "converge");
  auto pb = build_problem(cfg);
  const EGRun first = solve_extragradient(pb, cfg);
  if (first.report.diverged) {
    emit(man, out, "report.json", "converge", eg_json(first).dump(2) + "\n");
    man.write(out);
    return kExitDiverged;
  }
  std::optional<ControlField> oracle_ctl;
  if (cfg.model == "lq") {
    const RiccatiSolution sol = riccati_oracle(cfg.lq, cfg.constants, pb->grid);
    if (!sol.blowup) oracle_ctl = oracle_control(sol, *pb).control;
  }
  FieldAverages avg;
  std::vector<double> avg_err;
  HalfObserver obs = [&](std::size_t, const SolveOutput& half) {
    avg.add(half);
    avg_err.push_back(averaged_error_sq(avg, first.solve, pb->grid));
  };
  RunConfig c2 = cfg;
  c2.eg.gamma = first.gamma;  // same step, no second Lipschitz probe
  const EGRun run = solve_extragradient(pb, c2, oracle_ctl ? &*oracle_ctl : nullptr, obs);
  const auto& r = run.report;
  std::string csv = "n,residual,dist_to_oracle,avg_err_sq\n";
  for (std::size_t n = 0; n < r.residual_norms.size(); ++n)
    csv += csv_row({double(n), r.residual_norms[n],
                    n < r.dist_to_ref.size() ? r.dist_to_ref[n] : std::nan(""),
                    n < avg_err.size() ? avg_err[n] : std::nan("")});
  emit(man, out, "converge.csv", "converge", csv);
  json j = eg_json(run);
  j["L_hat"] = jnum(first.L_hat);
  if (!r.dist_to_ref.empty()) j["dist_rate"] = rate_json(fit_tail_half(r.dist_to_ref));
  {
    std::vector<double> ns, es;
    for (std::size_t n = 10; n < avg_err.size() && n <= 200; ++n) {
      ns.push_back(double(n + 1));
      es.push_back(avg_err[n]);
    }
    if (ns.size() >= 2) j["avg_err_loglog"] = rate_json(fit_log_log(ns, es));
  }
  emit(man, out, "report.json", "converge", j.dump(2) + "\n");
  man.write(out);
  return exit_for(r);
}

int run_sigma_sweep(const RunConfig& cfg, const fs::path& out) {
  if (cfg.model != "lq") throw ConfigError("sigma-sweep needs model.type \"lq\"");
  if (cfg.sweep.sigma0.empty() || cfg.sweep.horizons.empty())
    throw ConfigError("sweep.sigma0 and sweep.horizons must be nonempty");
  RunManifest man(cfg.to_json(), cfg.seed, "sigma-sweep");
  const std::size_t ns = cfg.sweep.sigma0.size(), nt = cfg.sweep.horizons.size();
  std::vector<SweepCell> cells(ns * nt);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < cells.size();) {
      const std::size_t a = i / nt, b = i % nt;
      cells[i] = run_sweep_cell(cfg, cfg.sweep.sigma0[a], cfg.sweep.horizons[b],
                                hash_key(cfg.seed, kStreamSweep, a, b, 0, 0));
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < std::min(cfg.sweep.workers, cells.size()); ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  std::string csv = sweep_csv_header();
  for (const auto& c : cells) csv += sweep_csv_row(c);
  emit(man, out, "sigma_sweep.csv", "sweep", csv);
  man.write(out);
  return kExitConverged;
}

int run_oracle(const RunConfig& cfg, const fs::path& out) {
  if (cfg.model != "lq") throw ConfigError("oracle needs model.type \"lq\"");
  RunManifest man(cfg.to_json(), cfg.seed, "oracle");
  const TimeGrid grid = build_grid(cfg.horizon, cfg.steps);
  const RiccatiSolution sol = riccati_oracle(cfg.lq, cfg.constants, grid);
  std::ostringstream os;
  write_oracle_csv(os, sol, grid);
  emit(man, out, "oracle.csv", "oracle", os.str());
  json j = {{"blowup", sol.blowup}, {"blowup_time", sol.blowup ? json(sol.blowup_time) : json(nullptr)},
            {"rk4_steps", sol.rk4_steps}};
  emit(man, out, "oracle.json", "oracle", j.dump(2) + "\n");
  man.write(out);
  return sol.blowup ? kExitDiverged : kExitConverged;
}

}  // namespace mfgmp
