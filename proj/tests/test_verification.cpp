#include <cmath>
#include <memory>

#include "doctest.h"
#include "mfgmp/errors.hpp"
#include "mfgmp/verification.hpp"

using namespace mfgmp;

namespace {

LQParams cone() {
  LQParams p;
  p.c1 = 1.0;
  p.c3 = 0.5;
  p.g1 = 1.0;
  p.b = 1.0;
  p.p1 = 1.0;
  return p;
}

const Eigen::MatrixXd kA = Eigen::MatrixXd::Identity(1, 1);

}  // namespace

TEST_CASE("mixture clouds are reproducible") {
  const auto a = mixture_cloud(4, 2, 0, 32, 1);
  const auto b = mixture_cloud(4, 2, 0, 32, 1);
  const auto c = mixture_cloud(4, 2, 1, 32, 1);
  CHECK(a == b);
  CHECK(a != c);
  CHECK(a.size() == 32);
}

TEST_CASE("terminal monotonicity: passes on the cone, fails with a witness when flipped") {
  const auto mono = lq_monotonicity_data(cone(), 1.0, 2.0, kInf);
  const CheckResult ok = check_terminal_monotonicity(LQModel(cone()), kA, mono.data.beta0, 60, 3);
  CHECK(ok.pass);
  CHECK(ok.samples == 60);
  LQParams f = cone();
  f.g1 = -3.0;
  const CheckResult bad = check_terminal_monotonicity(LQModel(f), kA, mono.data.beta0, 60, 3);
  CHECK(!bad.pass);
  CHECK(!bad.witness.empty());
  CHECK(bad.margin < 0.0);
}

TEST_CASE("coefficient monotonicity: kappa-hat sign follows b") {
  const auto mono = lq_monotonicity_data(cone(), 1.0, 2.0, kInf);
  const CheckResult ok =
      check_coefficient_monotonicity(LQModel(cone()), kA, mono.kappa_fixed, 60, 5, {}, &mono.data);
  CHECK(ok.pass);
  CHECK(ok.estimate > 0.0);
  LQParams f = cone();
  f.b = -1.0;
  const CheckResult bad = check_coefficient_monotonicity(LQModel(f), kA, 0.0, 200, 12);
  CHECK(!bad.pass);
  CHECK(bad.estimate < 0.0);
}

TEST_CASE("v monotonicity on synthetic operators") {
  LinearOperator rot = LinearOperator::rotation();
  const CheckResult r = check_v_monotonicity(rot, 10, 1);
  CHECK(r.pass);
  CHECK(std::abs(r.estimate) < 1e-12);
  LinearOperator neg = LinearOperator::scalar(-1.0);
  const CheckResult n = check_v_monotonicity(neg, 10, 1);
  CHECK(!n.pass);
  CHECK(n.estimate == doctest::Approx(-1.0));
  CHECK(n.witness_index == 0);
}

TEST_CASE("thresholds by hand") {
  MonotonicityData d;
  d.kappa = 1.0;
  d.C_H = 1.0;
  d.beta0 = 1.0;
  d.A = kA;
  const Thresholds t = compute_thresholds(d, 0.0, 1.0);
  // (2 / kappa) C_H^2 (|A| + beta0)
  CHECK(t.gamma_star == doctest::Approx(4.0));
  CHECK(t.beta_star(0.5) == doctest::Approx(std::exp(-2.0)));
  CHECK(t.beta_T == doctest::Approx(std::exp(-4.0)));
  // no discount: neither horizon-free branch applies
  CHECK(!t.sigma0_star);
  d.kappa = 0.0;
  CHECK_THROWS_AS(compute_thresholds(d, 0.0, 1.0), ConfigError);
}

TEST_CASE("thresholds with a strong discount use the first branch") {
  MonotonicityData d;
  d.kappa = 1.0;
  d.C_H = 1.0;
  d.beta0 = 1.0;
  d.A = kA;
  const Thresholds t = compute_thresholds(d, 3.0, 1.0);
  CHECK(t.sigma0_star.has_value());
  CHECK(t.branch == 1);
}

namespace {
SolveOutput zero_solve(double shift) {
  auto pb = std::make_shared<DecoupledProblem>();
  pb->model = std::make_shared<ZeroModel>();
  pb->constants.sigma = 0.5;
  pb->constants.sigma0 = 0.5;
  pb->grid = build_grid(1.0, 5);
  pb->noise = std::make_shared<NoiseBundle>(sample_noise(pb->grid, 8, 20, 1, 1, 2));
  pb->init = sample_initial(InitialSpec{shift, 1.0, 0.0, shift, 0.1}, 8, 20, 1, 1, 2);
  return solve_decoupled(*pb, pb->zero_control());
}
}  // namespace

TEST_CASE("z bound and propagation on a trivial solve") {
  const SolveOutput a = zero_solve(0.0), b = zero_solve(1.0);
  const CheckResult z = check_z_bound(a, 0.0);
  CHECK(z.pass);
  CHECK(check_z_clamped(a, 1.0).pass);
  const TimeGrid g = build_grid(1.0, 5);
  // U = phi = 0: only the q term survives and it is nonnegative
  const CheckResult p =
      check_monotonicity_propagation(a, b, kA, [](double) { return 1.0; }, g);
  CHECK(p.pass);
  CHECK(p.margin >= 0.0);
}

TEST_CASE("pontryagin residual needs a gradient") {
  const SolveOutput a = zero_solve(0.0);
  const CheckResult r = check_pontryagin_residual(a, ZeroModel(), build_grid(1.0, 5), 0.1);
  CHECK(!r.pass);
  CHECK(!r.witness.empty());
}

TEST_CASE("report aggregates") {
  CertificationReport rep;
  rep.checks.push_back(CheckResult{"a", true});
  CHECK(rep.all_pass());
  rep.checks.push_back(CheckResult{"b", false});
  CHECK(!rep.all_pass());
}
