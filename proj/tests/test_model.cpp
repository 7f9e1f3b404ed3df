#include <cmath>
#include <vector>

#include "doctest.h"
#include "mfgmp/errors.hpp"
#include "mfgmp/model.hpp"

using namespace mfgmp;

namespace {

MeasureFeatures law_with_mean(double m) {
  const std::vector<double> x = {m - 1.0, m + 1.0}, u = {0.0, 0.0};
  return measure_features(x.data(), u.data(), 2, 1);
}

double one(const CoefficientSet& s, double x, double q, double u, double z, double m, int which) {
  const double X[1] = {x}, Q[1] = {q}, Uu[1] = {u}, Z[1] = {z};
  double out[1] = {0.0};
  const MeasureFeatures mu = law_with_mean(m);
  switch (which) {
    case 0: s.F(X, Q, Uu, Z, mu, out); break;
    case 1: s.G(X, Q, Uu, Z, mu, out); break;
    case 2: s.Hz(Q, Z, mu, out); break;
    case 3: return s.LH(Q, Z, mu);
    case 4: s.g(X, Q, mu, out); break;
    default: return s.psi(Q, mu);
  }
  return out[0];
}

}  // namespace

TEST_CASE("measure features are empirical moments") {
  const std::vector<double> x = {1.0, 3.0}, u = {2.0, 0.0};
  const MeasureFeatures f = measure_features(x.data(), u.data(), 2, 1);
  CHECK(f.mean_x[0] == doctest::Approx(2.0));
  CHECK(f.mean_u[0] == doctest::Approx(1.0));
  CHECK(f.second_x[0] == doctest::Approx(5.0));
  CHECK(f.cross_xu[0] == doctest::Approx(1.0));
}

TEST_CASE("lq coefficients by hand") {
  LQParams p;
  p.c1 = 1.0;
  p.c2 = 2.0;
  p.c3 = 0.5;
  p.g1 = 3.0;
  p.g2 = -1.0;
  p.b = 2.0;
  p.r1 = 2.0;
  p.r2 = 1.0;
  p.p1 = 4.0;
  p.p2 = 0.5;
  const LQModel lq(p);
  // F = u
  CHECK(one(lq, 1.0, 1.0, 0.7, 0.0, 0.0, 0) == doctest::Approx(0.7));
  // G = 1*2 + 2*1 + 0.5*(2 - 1) = 4.5
  CHECK(one(lq, 2.0, 1.0, 0.0, 0.0, 1.0, 1) == doctest::Approx(4.5));
  // Hz = 2*1 + 0.3
  CHECK(one(lq, 0.0, 1.0, 0.0, 0.3, 0.0, 2) == doctest::Approx(2.3));
  // LH = -1/2 - 1/2*2 - 1*1*1
  CHECK(one(lq, 0.0, 1.0, 0.0, 1.0, 1.0, 3) == doctest::Approx(-2.5));
  // g = 3*2 - 1 = 5
  CHECK(one(lq, 2.0, 1.0, 0.0, 0.0, 0.0, 4) == doctest::Approx(5.0));
  // psi = 1/2*4*1 + 0.5*1*2 = 3
  CHECK(one(lq, 0.0, 1.0, 0.0, 0.0, 2.0, 5) == doctest::Approx(3.0));
}

TEST_CASE("clamping caps z and is idempotent") {
  LQParams p;
  p.b = 0.0;
  auto base = std::make_shared<LQModel>(p);
  auto c = clamp_coefficients(base, 1.0);
  CHECK(one(*c, 0.0, 0.0, 0.0, 3.0, 0.0, 2) == doctest::Approx(1.0));
  CHECK(one(*c, 0.0, 0.0, 0.0, -3.0, 0.0, 2) == doctest::Approx(-1.0));
  CHECK(one(*c, 0.0, 0.0, 0.0, 0.5, 0.0, 2) == doctest::Approx(0.5));
  CHECK(clamp_coefficients(c, 1.0) == c);
  CHECK(clamp_coefficients(base, kInf) == base);
  CHECK(c->clamp_level() == 1.0);
}

TEST_CASE("primed coefficients use the midpoint") {
  LQParams p;
  p.b = 1.0;
  const PrimedCoefficientSet s = split_q(std::make_shared<LQModel>(p));
  const double qf[1] = {1.0}, qb[1] = {3.0}, z[1] = {0.0};
  double out[1];
  s.Hz(qf, qb, z, law_with_mean(0.0), out);
  CHECK(out[0] == doctest::Approx(2.0));
}

TEST_CASE("lq theta inverse: closed form agrees with the fixed point") {
  LQParams p;
  p.b = 1.0;
  const PrimedCoefficientSet s = split_q(std::make_shared<LQModel>(p));
  const std::vector<double> x = {0.0, 1.0, -1.0}, ax = {0.5, -0.2, 0.1};
  const double qf[1] = {2.0}, z[1] = {0.0}, aq[1] = {2.0};
  ThetaProblem pb{3, x, cspan(qf, 1), cspan(z, 1), ax, cspan(aq, 1)};
  const ThetaSolution cf = theta_inverse(s, pb);
  // q^b = 2(alpha^q - z)/b - q^f
  CHECK(cf.qb[0] == doctest::Approx(2.0));
  CHECK(cf.u[1] == doctest::Approx(-0.2));
  ThetaOptions it;
  it.force_iterative = true;
  const ThetaSolution fp = theta_inverse(s, pb, it);
  CHECK(fp.qb[0] == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(theta_residual(s, pb, fp) < 1e-10);
}

TEST_CASE("lq theta with b = 0 is an inversion error") {
  const PrimedCoefficientSet s = split_q(std::make_shared<LQModel>(LQParams{}));
  const std::vector<double> x = {0.0}, ax = {0.0};
  const double q[1] = {0.0};
  ThetaProblem pb{1, x, cspan(q, 1), cspan(q, 1), ax, cspan(q, 1)};
  CHECK_THROWS_AS(theta_inverse(s, pb), InversionError);
}

TEST_CASE("piecewise linear interpolates and extrapolates") {
  const PiecewiseLinear f({{0.0, 0.0}, {1.0, 2.0}, {2.0, 3.0}});
  CHECK(f(0.5) == doctest::Approx(1.0));
  CHECK(f(1.5) == doctest::Approx(2.5));
  CHECK(f(4.0) == doctest::Approx(5.0));
  CHECK(PiecewiseLinear::zero()(7.0) == 0.0);
}

TEST_CASE("lq monotonicity constant on the cone") {
  LQParams p;
  p.c1 = 1.0;
  p.c3 = 0.5;
  p.b = 1.0;
  p.g1 = 1.0;
  p.p1 = 1.0;
  // min(c1 + c3, 1, lambda_min [[1, 0], [0, a b]]) with a = 2
  CHECK(lq_monotonicity_data(p, 2.0, 2.0, kInf).kappa_fixed == doctest::Approx(1.0));
  p.c2 = 2.0;
  // [[1, 1], [1, 2]] has lambda_min (3 - sqrt 5)/2
  CHECK(lq_monotonicity_data(p, 2.0, 2.0, kInf).kappa_fixed ==
        doctest::Approx((3.0 - std::sqrt(5.0)) / 2.0));
}

TEST_CASE("eval_coefficients rejects non-finite input") {
  const ZeroModel zm;
  const double x[1] = {std::nan("")}, q[1] = {0.0};
  CHECK_THROWS(eval_coefficients(zm, cspan(x, 1), cspan(q, 1), cspan(q, 1), cspan(q, 1),
                                 law_with_mean(0.0)));
}
