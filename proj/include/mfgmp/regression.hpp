#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace mfgmp {

struct RegressionBasis {
  int particle_degree = 1;  // U: polynomial degree in (x, q, mean_x[, mean_u], increments)
  int scenario_degree = 2;  // phi, q^b: degree in (q, mean_x, increments)
  bool include_mean_u = false;
  double ridge = 1e-8;      // relative to the trace scale of the standardized Gram matrix
};

// Least squares on all monomials up to `degree` in (state, xi), where xi are independent
// centred Gaussian increments of known variance. Conditional expectations given the state
// follow by replacing increment monomials with their Gaussian moments.
class ConditionalRegression {
 public:
  ConditionalRegression(std::size_t n_state, std::vector<double> increment_variance, int degree,
                        double ridge);

  // vars: n rows of (state..., xi...), row-major; targets: n rows of m values, row-major
  void fit(const double* vars, std::size_t n, const double* targets, std::size_t m);

  std::size_t n_vars() const { return n_state_ + var_.size(); }
  std::size_t n_targets() const { return m_; }
  std::size_t basis_size() const { return expo_.size(); }
  std::size_t active_features() const { return active_; }

  void predict(const double* row, double* out) const;
  // E[Y | state]
  void conditional_mean(const double* row, double* out) const;
  // E[Y xi_j | state]
  void conditional_cross(const double* row, std::size_t j, double* out) const;
  // both at once; cross is [increment][target]
  void conditional_moments(const double* row, double* mean, double* cross) const;

  double residual_rms(std::size_t target) const { return rms_[target]; }
  double max_residual_rms() const;
  // coefficient of the monomial with the given exponents for a target (0 when absent)
  double coefficient(const std::vector<int>& exponents, std::size_t target) const;
  // standard error of the fitted mean over the fit sample, per target
  double fitted_se(std::size_t target) const { return se_[target]; }

 private:
  double monomial(std::size_t m, const double* row) const;
  double state_monomial(std::size_t m, const double* row) const;

  std::size_t n_state_;
  std::vector<double> var_;
  int degree_;
  double ridge_;
  std::vector<std::vector<std::uint8_t>> expo_;
  std::vector<std::vector<std::uint8_t>> factors_, state_factors_;  // variable indices, repeated
  std::vector<double> mean_moment_;               // per monomial
  std::vector<std::vector<double>> cross_moment_; // [j][monomial]
  Eigen::MatrixXd coef_;                          // basis x m, raw scale
  std::size_t m_ = 0;
  std::size_t active_ = 0;
  std::vector<double> rms_, se_;

  // folded form: distinct state monomials and nonzero (monomial, output, weight) terms
  struct Term {
    std::uint32_t mono, out;
    double w;
  };
  void fold();
  std::vector<std::vector<std::uint8_t>> smono_;
  std::vector<std::uint32_t> smono_of_;  // basis index -> distinct state monomial
  std::vector<Term> mean_terms_, cross_terms_;  // cross outputs are j * m + t
};

double gaussian_moment(int n, double variance);

}  // namespace mfgmp
