// Acceptance gate. One PASS/FAIL line per criterion; exit status 0 iff all selected pass.
// Usage: acceptance [criterion numbers...]   (default: all)

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mfgmp/config.hpp"
#include "mfgmp/experiments.hpp"
#include "mfgmp/io.hpp"
#include "mfgmp/oracle.hpp"
#include "mfgmp/verification.hpp"

using namespace mfgmp;
namespace fs = std::filesystem;

namespace {

// pinned tolerances
constexpr double kC1RelTol = 0.03;
constexpr double kC1Seconds = 300.0;
constexpr double kC2Factor = 2.0;
constexpr double kC3Lambda = 0.98;
constexpr double kC3R2 = 0.9;
constexpr std::size_t kC3MinIter = 40;
constexpr double kC3SlopeTol = 0.20;
constexpr double kC4Slope = -0.8;
constexpr double kC6Rel = 0.05;
constexpr double kC8Abs = 1e-3;
constexpr double kC9Ratio = 2.0;

std::vector<std::string> g_lines;
bool g_all_pass = true;

void report(int n, bool pass, const std::string& what) {
  std::ostringstream os;
  os << (pass ? "PASS" : "FAIL") << "  criterion " << n << ": " << what;
  std::cout << os.str() << std::endl;
  g_lines.push_back(os.str());
  g_all_pass &= pass;
}

std::string num(double v) {
  char b[32];
  std::snprintf(b, sizeof b, "%.4g", v);
  return b;
}

double now() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mfgmp_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// monotone cone instance
RunConfig base_config() {
  RunConfig c;
  c.model = "lq";
  c.lq = LQParams{};
  c.lq.c1 = 1.0;
  c.lq.c3 = 0.5;
  c.lq.g1 = 1.0;
  c.lq.b = 1.0;
  c.lq.p1 = 1.0;
  c.constants.sigma = 0.5;
  c.constants.sigma0 = 0.5;
  c.constants.lambda = 0.0;
  c.horizon = 1.0;
  c.steps = 100;
  c.scenarios = 64;
  c.particles = 2000;
  c.initial = InitialSpec{0.0, 1.0, 0.5, 0.0, 0.5};
  c.basis.particle_degree = 1;
  c.eg.n_max = 45;
  c.eg.tol = 1e-12;
  c.seed = 7;
  return c;
}

RunConfig small_config() {
  RunConfig c = base_config();
  c.steps = 20;
  c.scenarios = 64;
  c.particles = 200;
  return c;
}

struct FieldError {
  double u = 0.0, phi = 0.0;
  double abs_u = 0.0, abs_phi = 0.0;
};

// relative error with a denominator floor of 10% of the probe rms
FieldError field_error(const SolveOutput& so, const RiccatiSolution& sol,
                       const std::vector<Probe>& probes) {
  const InitialField f(so);
  std::vector<double> eu, ep, ou, op;
  for (const auto& p : probes) {
    const OracleValue o = eval_oracle_field(sol, 0.0, p.x, p.q, p.m);
    eu.push_back(f.U(p.x, p.q, p.m) - o.U);
    ep.push_back(f.phi(p.q, p.m) - o.phi);
    ou.push_back(o.U);
    op.push_back(o.phi);
  }
  auto rms = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s / double(v.size()));
  };
  const double fu = 0.1 * rms(ou), fp = 0.1 * rms(op);
  FieldError e;
  for (std::size_t i = 0; i < probes.size(); ++i) {
    e.u = std::max(e.u, std::abs(eu[i]) / std::max(std::abs(ou[i]), fu));
    e.phi = std::max(e.phi, std::abs(ep[i]) / std::max(std::abs(op[i]), fp));
    e.abs_u = std::max(e.abs_u, std::abs(eu[i]));
    e.abs_phi = std::max(e.abs_phi, std::abs(ep[i]));
  }
  return e;
}

// ---- shared criterion-1 run

struct MainRun {
  RunConfig cfg;
  SolveArtifacts art;
  RiccatiSolution oracle;
  double seconds = 0.0;
  fs::path dir;
};

MainRun& main_run() {
  static std::optional<MainRun> m;
  if (!m) {
    m.emplace();
    m->cfg = base_config();
    m->dir = scratch("c1_a");
    const double t0 = now();
    m->art = solve_and_write(m->cfg, m->dir, false, true);
    m->seconds = now() - t0;
    m->oracle = riccati_oracle(m->cfg.lq, m->cfg.constants, m->art.problem->grid);
  }
  return *m;
}

// ---- criteria

void criterion1() {
  MainRun& m = main_run();
  const auto& rep = m.art.run.report;
  if (rep.diverged) {
    report(1, false, "extragradient diverged: " + rep.message);
    return;
  }
  const FieldError e = field_error(m.art.run.solve, m.oracle, probe_points(m.cfg, 20));
  const bool ok = e.u <= kC1RelTol && e.phi <= kC1RelTol && m.seconds <= kC1Seconds;
  report(1, ok,
         "LQ oracle agreement at 20 probes: max rel err U " + num(e.u) + ", phi " + num(e.phi) +
             " (tol " + num(kC1RelTol) + "); runtime " + num(m.seconds) + " s (target " +
             num(kC1Seconds) + " s)");
}

double v_norm_at_oracle(const RunConfig& cfg) {
  auto pb = build_problem(cfg);
  const RiccatiSolution sol = riccati_oracle(cfg.lq, cfg.constants, pb->grid);
  const OracleRun orun = oracle_control(sol, *pb);
  const VEvaluation ev = evaluate_v(orun.control, *pb, monotonicity_A(cfg));
  return norm_T(ev.v, pb->grid);
}

void criterion2() {
  // (2N, 2P) at 64 scenarios does not fit in memory; both runs use 32
  RunConfig c = base_config();
  c.scenarios = 32;
  const double r = v_norm_at_oracle(c);
  RunConfig f = c;
  f.steps *= 2;
  f.particles *= 2;
  const double r_half = v_norm_at_oracle(f);
  // first order in dt: the floor at (dt, P) extrapolated from (dt/2, 2P)
  const double floor = 2.0 * r_half;
  report(2, r <= kC2Factor * floor,
         "||v(alpha*)||_T at the oracle control " + num(r) + " vs floor " + num(floor) +
             " (from dt/2, 2P run: " + num(r_half) + "), ratio " + num(r / floor) + " <= " +
             num(kC2Factor));
}

void criterion3() {
  MainRun& m = main_run();
  const auto& rep = m.art.run.report;
  const RateFit rf = rep.rate;
  const std::size_t iters = rep.residual_norms.size() - 1;
  // distance to the oracle control stalls at the discretization floor; fit above it
  const auto& d = rep.dist_to_ref;
  double dmin = *std::min_element(d.begin(), d.end());
  std::size_t last = 0;
  while (last + 1 < d.size() && d[last + 1] >= 10.0 * dmin) ++last;
  const std::size_t from = last / 2, to = last + 1;
  const RateFit fd = fit_log_linear(d, from, to);
  const RateFit fr = fit_log_linear(rep.residual_norms, from, to);
  const double mismatch = std::abs(fd.slope / fr.slope - 1.0);
  const bool ok = rf.lambda <= kC3Lambda && rf.r2 >= kC3R2 && iters >= kC3MinIter &&
                  to - from >= 3 && mismatch <= kC3SlopeTol;
  report(3, ok,
         "tail-half lambda-hat " + num(rf.lambda) + " (<= " + num(kC3Lambda) + "), R^2 " +
             num(rf.r2) + " over " + std::to_string(iters) + " iterations; distance-to-oracle slope " +
             num(fd.slope) + " vs residual slope " + num(fr.slope) + " on n in [" +
             std::to_string(from) + "," + std::to_string(to) + "), mismatch " + num(mismatch));
}

void criterion4() {
  // synthetic: rotation, monotone and not strongly monotone
  LinearOperator rot = LinearOperator::rotation();
  ExtragradientConfig ec;
  ec.gamma = step_from_lipschitz(estimate_lipschitz_v(rot, 8, 3), 0.5);
  ec.n_max = 200;
  ec.tol = 0.0;
  Eigen::VectorXd a0(2);
  a0 << 1.0, 0.5;
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(2);
  const auto rs = run(rot, a0, ec, &zero);
  std::vector<double> ns, es;
  for (std::size_t n = 10; n < rs.avg_dist_to_ref.size() && n <= 200; ++n) {
    ns.push_back(double(n + 1));
    es.push_back(rs.avg_dist_to_ref[n] * rs.avg_dist_to_ref[n]);
  }
  const RateFit syn = fit_log_log(ns, es);

  // LQ: averaged fields against the converged solve of the same problem
  RunConfig c = small_config();
  c.eg.n_max = 200;
  c.eg.tol = 0.0;
  auto pb = build_problem(c);
  const EGRun ref = solve_extragradient(pb, c);
  RunConfig c2 = c;
  c2.eg.gamma = ref.gamma;
  FieldAverages avg;
  std::vector<double> err;
  solve_extragradient(pb, c2, nullptr, [&](std::size_t, const SolveOutput& half) {
    avg.add(half);
    err.push_back(averaged_error_sq(avg, ref.solve, pb->grid));
  });
  ns.clear();
  es.clear();
  for (std::size_t n = 10; n < err.size() && n <= 200; ++n) {
    ns.push_back(double(n + 1));
    es.push_back(err[n]);
  }
  const RateFit lq = fit_log_log(ns, es);
  report(4, syn.slope <= kC4Slope && lq.slope <= kC4Slope,
         "log-log slope of squared averaged error on n in [10,200]: rotation " + num(syn.slope) +
             ", LQ " + num(lq.slope) + " (<= " + num(kC4Slope) + ")");
}

void criterion5() {
  const std::size_t samples = 200;
  RunConfig cone = base_config();
  const Eigen::MatrixXd A = monotonicity_A(cone);
  const SampleSpec spec;
  const LQMonotonicity mono = lq_monotonicity_data(cone.lq, cone.eg.A, spec.q_radius, kInf);
  const CoefficientPtr set = build_model(cone);

  const CheckResult t1 = check_terminal_monotonicity(*set, A, mono.data.beta0, samples, 11, spec);
  CheckResult k1 = check_coefficient_monotonicity(*set, A, mono.kappa_fixed, samples, 12, spec, &mono.data);
  const bool k1ok = k1.pass && k1.estimate > 0.0;
  // v on a reduced ensemble: 200 pairs cost 400 solves
  RunConfig vs = small_config();
  auto pb = build_problem(vs);
  DecouplingOperator op(pb, A);
  const CheckResult v1 = check_v_monotonicity(op, samples, 13);

  // sign flips
  RunConfig tf = cone;
  tf.lq.g1 = -3.0;
  const CheckResult t2 = check_terminal_monotonicity(*build_model(tf), A, mono.data.beta0, samples, 11, spec);
  RunConfig kf = cone;
  kf.lq.b = -1.0;
  const CheckResult k2 = check_coefficient_monotonicity(*build_model(kf), A, 0.0, samples, 12, spec);
  RunConfig vf = small_config();
  vf.lq.g1 = -3.0;
  vf.lq.b = -1.0;
  auto pbf = build_problem(vf);
  DecouplingOperator opf(pbf, A);
  const CheckResult v2 = check_v_monotonicity(opf, samples, 13);

  const bool flips_fail = !t2.pass && !t2.witness.empty() && !k2.pass && k2.estimate < 0.0 &&
                          !k2.witness.empty() && !v2.pass && !v2.witness.empty();
  const bool ok = t1.pass && k1ok && v1.pass && flips_fail;
  report(5, ok,
         "cone: terminal margin " + num(t1.margin) + ", kappa-hat " + num(k1.estimate) +
             " (margin " + num(k1.margin) + "), v min inner " + num(v1.margin) + " eta-hat " +
             num(v1.estimate) + "; flipped: terminal " + (t2.pass ? "pass" : "fail") + " [" +
             t2.witness + "], coefficient kappa-hat " + num(k2.estimate) + " [" + k2.witness +
             "], v " + (v2.pass ? "pass" : "fail") + " [" + v2.witness + "]");
}

void criterion6() {
  MainRun& m = main_run();
  const SolveOutput& so = m.art.run.solve;
  const double sup = oracle_sup_dphi(m.oracle, so.state, m.art.problem->grid);
  const CheckResult r = check_z_bound(so, sup, kC6Rel);
  report(6, r.pass,
         "max|Z^phi| " + num(r.estimate) + " vs oracle sup|d_q phi| " + num(sup) + " x 1.05 + 3 SE (" +
             num(r.se) + "), margin " + num(r.margin));
}

void criterion7() {
  MainRun& m = main_run();
  const RunConfig& c = m.cfg;
  auto pb2 = std::make_shared<DecoupledProblem>(*m.art.problem);
  InitialSpec shifted = c.initial;
  shifted.x_mean += 0.5;
  shifted.q_mean += 0.3;
  pb2->init = sample_initial(shifted, c.scenarios, c.particles, 1, 1, c.seed + 1);
  RunConfig c2 = c;
  c2.eg.gamma = m.art.run.gamma;
  const EGRun r2 = solve_extragradient(pb2, c2);
  const ThresholdInfo th = lq_thresholds(c);
  std::function<double(double)> beta = [&](double) { return th.mono.data.beta0; };
  if (th.thresholds) beta = [t = *th.thresholds](double s) { return t.beta_star(s); };
  const CheckResult r =
      check_monotonicity_propagation(m.art.run.solve, r2.solve, monotonicity_A(c), beta, pb2->grid);
  report(7, r.pass && !r2.report.diverged,
         "min over grid of E[V_s] " + num(r.margin) + " (SE " + num(r.se) + "), beta0 " +
             num(th.mono.data.beta0) + (r.witness.empty() ? "" : ", witness " + r.witness));
}

void criterion8() {
  // short horizon: both solvers against the oracle
  RunConfig s = base_config();
  s.horizon = 0.25;
  s.steps = 25;
  s.eg.n_max = 100;
  s.eg.tol = 1e-9;
  auto pb = build_problem(s);
  const RiccatiSolution sol = riccati_oracle(s.lq, s.constants, pb->grid);
  const PicardResult pr = picard_solve(*pb, pb->zero_control(), 1e-9, 100);
  const EGRun eg = solve_extragradient(pb, s);
  const auto probes = probe_points(s, 20);
  FieldError ep, ee;
  if (pr.status == PicardResult::Status::Converged) ep = field_error(pr.solve, sol, probes);
  if (eg.report.converged) ee = field_error(eg.solve, sol, probes);
  // Monte Carlo allowance: spread of the EG field over independent seeds
  double mc = 0.0;
  {
    std::vector<FieldError> rep;
    for (std::uint64_t k = 1; k <= 3; ++k) {
      RunConfig r = s;
      r.seed = s.seed + 100 * k;
      auto pr2 = build_problem(r);
      const EGRun e2 = solve_extragradient(pr2, r);
      if (e2.report.converged) rep.push_back(field_error(e2.solve, sol, probes));
    }
    for (const auto& e : rep) mc = std::max({mc, e.abs_u, e.abs_phi});
  }
  const bool short_ok = pr.status == PicardResult::Status::Converged && eg.report.converged &&
                        std::max(ep.abs_u, ep.abs_phi) <= kC8Abs + mc &&
                        std::max(ee.abs_u, ee.abs_phi) <= kC8Abs + mc;

  // long horizon, strong coupling: sweep cells
  RunConfig strong = small_config();
  strong.lq.c2 = 1.0;
  strong.lq.g2 = 0.5;
  strong.lq.p1 = 0.3;
  strong.lq.p2 = 0.3;
  strong.horizon = 1.0;
  strong.steps = 20;
  strong.eg.n_max = 1000;
  strong.eg.tol = 1e-8;
  strong.sweep.picard_max_iter = 60;
  const ThresholdInfo th = lq_thresholds(strong);
  const double s0T = th.thresholds ? th.thresholds->sigma0_T : std::nan("");
  const SweepCell low = run_sweep_cell(strong, 0.05, 5.0, 21);
  const SweepCell high = run_sweep_cell(strong, 1.1 * s0T, 5.0, 22);
  const fs::path dir = scratch("c8");
  {
    std::ofstream out(dir / "sigma_sweep.csv");
    out << sweep_csv_header() << sweep_csv_row(low) << sweep_csv_row(high);
  }
  const bool long_ok = low.picard == "diverged" && high.eg_converged;
  report(8, short_ok && long_ok,
         "T=0.25: Picard max abs err " + num(std::max(ep.abs_u, ep.abs_phi)) + ", EG " +
             num(std::max(ee.abs_u, ee.abs_phi)) + " (tol 1e-3 + MC " + num(mc) +
             "); T=5: Picard at sigma0=0.05 " + low.picard + " after " +
             std::to_string(low.picard_sweeps) + " sweeps, EG at sigma0=" + num(high.sigma0) +
             " (1.1 x sigma0_T " + num(s0T) + ") " + (high.eg_converged ? "converged" : "not converged") +
             " in " + std::to_string(high.eg_iterations) + " iterations; table " +
             (dir / "sigma_sweep.csv").string());
}

void criterion9() {
  RunConfig c = small_config();
  c.scenarios = 32;
  c.particles = 500;
  c.steps = 50;
  c.eg.n_max = 400;
  c.eg.tol = 1e-10;
  const auto probes = probe_points(c, 20);
  auto field_at = [&](const RunConfig& r, double gamma) {
    RunConfig q = r;
    q.eg.gamma = gamma;
    auto pb = build_problem(q);
    const EGRun e = solve_extragradient(pb, q);
    const InitialField f(e.solve);
    std::vector<double> v;
    for (const auto& p : probes) {
      v.push_back(f.U(p.x, p.q, p.m));
      v.push_back(f.phi(p.q, p.m));
    }
    return std::make_pair(v, e.report.converged);
  };
  auto pb0 = build_problem(c);
  const double gamma = step_from_lipschitz(
      estimate_lipschitz_v(*std::make_unique<DecouplingOperator>(pb0, monotonicity_A(c)), 6, c.seed), 0.5);
  const auto base = field_at(c, gamma);
  std::vector<double> C;
  bool conv = base.second;
  for (double eps : {1e-2, 1e-3}) {
    RunConfig r = c;
    for (double* p : {&r.lq.c1, &r.lq.c2, &r.lq.c3, &r.lq.g1, &r.lq.g2, &r.lq.b, &r.lq.r1,
                      &r.lq.r2, &r.lq.p1, &r.lq.p2})
      *p += eps;
    const auto pert = field_at(r, gamma);
    conv &= pert.second;
    double mx = 0.0;
    for (std::size_t i = 0; i < base.first.size(); ++i)
      mx = std::max(mx, std::abs(pert.first[i] - base.first[i]));
    C.push_back(mx / eps);
  }
  const double ratio = std::max(C[0], C[1]) / std::min(C[0], C[1]);
  report(9, conv && ratio <= kC9Ratio,
         "C(1e-2) " + num(C[0]) + ", C(1e-3) " + num(C[1]) + ", ratio " + num(ratio) + " (<= " +
             num(kC9Ratio) + ")");
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void criterion10() {
  MainRun& m = main_run();
  const fs::path b = scratch("c1_b");
  solve_and_write(m.cfg, b, false, true);
  std::size_t compared = 0;
  std::string diff;
  for (const auto& e : fs::directory_iterator(m.dir)) {
    if (e.path().extension() != ".csv") continue;
    ++compared;
    if (read_file(e.path()) != read_file(b / e.path().filename())) diff += e.path().filename().string() + " ";
  }
  report(10, compared > 0 && diff.empty(),
         std::to_string(compared) + " CSV files compared across two seeded runs" +
             (diff.empty() ? ", all byte-identical" : ", differing: " + diff));
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> want;
  for (int i = 1; i < argc; ++i) want.insert(std::atoi(argv[i]));
  const std::vector<std::function<void()>> all = {criterion1, criterion2, criterion3, criterion4,
                                                  criterion5, criterion6, criterion7, criterion8,
                                                  criterion9, criterion10};
  for (int i = 1; i <= 10; ++i) {
    if (!want.empty() && !want.count(i)) continue;
    try {
      all[std::size_t(i - 1)]();
    } catch (const std::exception& e) {
      report(i, false, std::string("exception: ") + e.what());
    }
  }
  std::cout << "\nsummary\n";
  for (const auto& l : g_lines) std::cout << l << '\n';
  return g_all_pass ? 0 : 1;
}
