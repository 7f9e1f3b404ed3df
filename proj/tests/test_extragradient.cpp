#include <cmath>

#include "doctest.h"
#include "mfgmp/errors.hpp"
#include "mfgmp/extragradient.hpp"

using namespace mfgmp;

TEST_CASE("one step on a scalar strongly monotone map") {
  const double eta = 2.0, gamma = 0.1, a = 3.0;
  LinearOperator op = LinearOperator::scalar(eta);
  Eigen::VectorXd x(1);
  x << a;
  const auto r = extragradient_step(x, gamma, op);
  // half = (1 - g eta) a ; next = a - g eta half
  CHECK(r.half(0) == doctest::Approx((1.0 - gamma * eta) * a));
  CHECK(r.next(0) == doctest::Approx((1.0 - gamma * eta + gamma * gamma * eta * eta) * a));
  CHECK_THROWS_AS(extragradient_step(x, 0.0, op), ConfigError);
}

TEST_CASE("residuals contract geometrically with the predicted factor") {
  const double eta = 1.0, gamma = 0.5;
  LinearOperator op = LinearOperator::scalar(eta);
  Eigen::VectorXd x(1);
  x << 1.0;
  ExtragradientConfig c;
  c.gamma = gamma;
  c.n_max = 30;
  c.tol = 0.0;
  const auto rep = run(op, x, c);
  CHECK(rep.rate.lambda == doctest::Approx(1.0 - gamma * eta + gamma * gamma * eta * eta));
  CHECK(rep.rate.r2 == doctest::Approx(1.0));
  CHECK(op.evaluations == 2 * 30 + 1);
}

TEST_CASE("converges to the shifted zero") {
  Eigen::MatrixXd A(2, 2);
  A << 2.0, 1.0, -1.0, 2.0;
  Eigen::VectorXd b(2);
  b << 1.0, 0.0;
  LinearOperator op(A, b);
  ExtragradientConfig c;
  c.gamma = 0.2;
  c.n_max = 500;
  c.tol = 1e-12;
  const Eigen::VectorXd star = A.colPivHouseholderQr().solve(b);
  const auto rep = run(op, Eigen::VectorXd(Eigen::VectorXd::Zero(2)), c, &star);
  CHECK(rep.converged);
  CHECK(!rep.diverged);
  CHECK((rep.final_iterate - star).norm() < 1e-10);
  CHECK(rep.dist_to_ref.back() < 1e-10);
}

TEST_CASE("a huge step diverges and is reported") {
  LinearOperator op = LinearOperator::scalar(1.0);
  ExtragradientConfig c;
  c.gamma = 10.0;
  c.n_max = 100;
  const auto rep = run(op, Eigen::VectorXd(Eigen::VectorXd::Ones(1)), c);
  CHECK(rep.diverged);
  CHECK(!rep.converged);
  CHECK(!rep.message.empty());
}

TEST_CASE("rotation: Lipschitz constant is one and the mean converges at 1/n") {
  LinearOperator rot = LinearOperator::rotation();
  CHECK(estimate_lipschitz_v(rot, 6, 1) == doctest::Approx(1.0));
  CHECK(step_from_lipschitz(1.0) == doctest::Approx(0.5));
  CHECK_THROWS_AS(step_from_lipschitz(0.0), ConfigError);
  ExtragradientConfig c;
  c.gamma = 0.5;
  c.n_max = 200;
  c.tol = 0.0;
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(2);
  const auto rep = run(rot, Eigen::VectorXd(Eigen::VectorXd::Ones(2)), c, &zero);
  CHECK(rep.avg_dist_to_ref.size() == 200);
  CHECK(rep.avg_dist_to_ref.back() < rep.avg_dist_to_ref[9]);
  // monotone: <v(a) - v(b), a - b> = 0 for a rotation
  const auto a = rot.random_point(3, 0), b = rot.random_point(3, 1);
  CHECK(std::abs(rot.inner(rot.apply(a) - rot.apply(b), a - b)) < 1e-12);
}

TEST_CASE("rate fits") {
  std::vector<double> g;
  for (int i = 0; i < 20; ++i) g.push_back(std::pow(0.5, i));
  const RateFit f = fit_log_linear(g, 0, 20);
  CHECK(f.lambda == doctest::Approx(0.5));
  CHECK(f.slope == doctest::Approx(std::log(0.5)));
  std::vector<double> x, y;
  for (int i = 1; i <= 10; ++i) {
    x.push_back(i);
    y.push_back(3.0 / (i * i));
  }
  CHECK(fit_log_log(x, y).slope == doctest::Approx(-2.0));
}
