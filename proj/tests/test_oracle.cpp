#include <cmath>
#include <sstream>

#include "doctest.h"
#include "mfgmp/oracle.hpp"

using namespace mfgmp;

namespace {
ModelConstants consts(double sigma0, double lambda = 0.0) {
  ModelConstants c;
  c.sigma = 0.5;
  c.sigma0 = sigma0;
  c.lambda = lambda;
  return c;
}
}  // namespace

TEST_CASE("scalar Riccati a' = a^2 solved in closed form") {
  LQParams p;
  p.g1 = 1.0;
  const RiccatiSolution s = riccati_oracle(p, consts(0.0), build_grid(1.0, 20));
  // a(t) = 1 / (1 + T - t)
  CHECK(s.at(0.0).a == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(s.at(0.5).a == doctest::Approx(1.0 / 1.5).epsilon(1e-8));
  CHECK(s.at(1.0).a == doctest::Approx(1.0));
  CHECK(eval_oracle_field(s, 0.0, 2.0, 0.0, 0.0).U == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(!s.blowup);
}

TEST_CASE("major value: k2' = 3 k2^2 and the noise term") {
  LQParams p;
  p.p1 = 1.0;
  const double s0 = 0.5;
  const RiccatiSolution s = riccati_oracle(p, consts(s0), build_grid(1.0, 50));
  // k2(t) = 1 / (1 + 3 (T - t)), k12 = kc = bu = cu = 0
  const auto c = s.at(0.0);
  CHECK(c.k2 == doctest::Approx(0.25).epsilon(1e-8));
  CHECK(c.k12 == 0.0);
  CHECK(c.bu == 0.0);
  // k0(0) = sigma0 * int_0^1 k2 = sigma0 ln(4) / 3
  CHECK(c.k0 == doctest::Approx(s0 * std::log(4.0) / 3.0).epsilon(1e-8));
  const OracleValue v = eval_oracle_field(s, 0.0, 0.0, 12.0, 0.0);
  CHECK(v.Zphi == doctest::Approx(3.0).epsilon(1e-8));
  CHECK(v.phi == doctest::Approx(0.5 * 0.25 * 144.0 + c.k0).epsilon(1e-8));
}

TEST_CASE("discount enters k0 linearly") {
  LQParams p;
  p.p1 = 1.0;
  p.b = 1.0;
  const double lam = 0.7;
  const RiccatiSolution s = riccati_oracle(p, consts(0.0, lam), build_grid(1.0, 10));
  // with sigma0 = 0, k0 stays at its terminal value
  CHECK(s.at(0.0).k0 == doctest::Approx(0.0));
}

TEST_CASE("finite-time blowup is reported") {
  LQParams p;
  p.p1 = -1.0;
  const RiccatiSolution s = riccati_oracle(p, consts(0.0), build_grid(1.0, 100));
  // k2 = 1 / (-1 + 3 (T - t)) blows up at t = 2/3
  CHECK(s.blowup);
  CHECK(s.blowup_time == doctest::Approx(2.0 / 3.0).epsilon(0.02));
}

TEST_CASE("mean-field coupling: cu and the minor game") {
  LQParams p;
  p.c3 = 1.0;
  p.c1 = 0.0;
  const RiccatiSolution s = riccati_oracle(p, consts(0.0), build_grid(2.0, 40));
  // a' = a^2 - 1, a(T) = 0: a(t) = tanh(T - t)
  CHECK(s.at(0.0).a == doctest::Approx(std::tanh(2.0)).epsilon(1e-7));
  // a + cu solves s' = s^2 with s(T) = 0, hence cu = -a
  CHECK(s.at(0.0).cu == doctest::Approx(-std::tanh(2.0)).epsilon(1e-7));
}

TEST_CASE("oracle csv has a row per grid node") {
  const TimeGrid g = build_grid(1.0, 4);
  LQParams p;
  p.g1 = 1.0;
  std::ostringstream os;
  write_oracle_csv(os, riccati_oracle(p, consts(0.0), g), g);
  std::istringstream is(os.str());
  std::string line;
  std::size_t n = 0;
  while (std::getline(is, line)) ++n;
  CHECK(n == 1 + 5);
}
