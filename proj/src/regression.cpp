#include "mfgmp/regression.hpp"

#include <cmath>

#include "mfgmp/errors.hpp"

namespace mfgmp {

double gaussian_moment(int n, double v) {
  if (n == 0) return 1.0;
  if (n & 1) return 0.0;
  double r = 1.0;
  for (int k = n - 1; k > 0; k -= 2) r *= double(k);
  return r * std::pow(v, n / 2);
}

namespace {

void enumerate(std::size_t nv, int left, std::vector<std::uint8_t>& cur, std::size_t pos,
               std::vector<std::vector<std::uint8_t>>& out) {
  if (pos == nv) {
    out.push_back(cur);
    return;
  }
  for (int e = 0; e <= left; ++e) {
    cur[pos] = std::uint8_t(e);
    enumerate(nv, left - e, cur, pos + 1, out);
  }
  cur[pos] = 0;
}

int total_degree(const std::vector<std::uint8_t>& e) {
  int t = 0;
  for (auto v : e) t += v;
  return t;
}

}  // namespace

ConditionalRegression::ConditionalRegression(std::size_t n_state, std::vector<double> var,
                                             int degree, double ridge)
    : n_state_(n_state), var_(std::move(var)), degree_(degree), ridge_(ridge) {
  if (degree < 0) throw ConfigError("regression degree must be nonnegative");
  if (ridge < 0.0) throw ConfigError("regression.ridge must be nonnegative");
  const std::size_t nv = n_vars();
  std::vector<std::uint8_t> cur(nv, 0);
  std::vector<std::vector<std::uint8_t>> all;
  enumerate(nv, degree, cur, 0, all);
  // order by total degree so the constant comes first
  for (int deg = 0; deg <= degree; ++deg)
    for (auto& e : all)
      if (total_degree(e) == deg) expo_.push_back(e);

  for (const auto& e : expo_) {
    std::vector<std::uint8_t> f, sf;
    for (std::size_t i = 0; i < e.size(); ++i)
      for (int k = 0; k < e[i]; ++k) {
        f.push_back(std::uint8_t(i));
        if (i < n_state_) sf.push_back(std::uint8_t(i));
      }
    factors_.push_back(f);
    state_factors_.push_back(sf);
    std::size_t idx = 0;
    while (idx < smono_.size() && smono_[idx] != sf) ++idx;
    if (idx == smono_.size()) smono_.push_back(sf);
    smono_of_.push_back(std::uint32_t(idx));
  }

  mean_moment_.resize(expo_.size());
  cross_moment_.assign(var_.size(), std::vector<double>(expo_.size()));
  for (std::size_t m = 0; m < expo_.size(); ++m) {
    double f = 1.0;
    for (std::size_t j = 0; j < var_.size(); ++j) f *= gaussian_moment(expo_[m][n_state_ + j], var_[j]);
    mean_moment_[m] = f;
    for (std::size_t i = 0; i < var_.size(); ++i) {
      double g = 1.0;
      for (std::size_t j = 0; j < var_.size(); ++j)
        g *= gaussian_moment(expo_[m][n_state_ + j] + (i == j ? 1 : 0), var_[j]);
      cross_moment_[i][m] = g;
    }
  }
}

double ConditionalRegression::monomial(std::size_t m, const double* row) const {
  double v = 1.0;
  for (auto i : factors_[m]) v *= row[i];
  return v;
}

double ConditionalRegression::state_monomial(std::size_t m, const double* row) const {
  double v = 1.0;
  for (auto i : state_factors_[m]) v *= row[i];
  return v;
}

void ConditionalRegression::fit(const double* vars, std::size_t n, const double* targets,
                                std::size_t m) {
  const std::size_t nv = n_vars(), nb = expo_.size();
  m_ = m;
  if (n == 0) throw RegressionError("regression with no samples");

  Eigen::MatrixXd Phi(n, nb);
  for (std::size_t b = 0; b < nb; ++b) {
    double* col = Phi.col(Eigen::Index(b)).data();
    const auto& f = factors_[b];
    for (std::size_t r = 0; r < n; ++r) {
      const double* row = vars + r * nv;
      double v = 1.0;
      for (auto i : f) v *= row[i];
      col[r] = v;
    }
  }
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> Y(
      targets, n, m);
  const Eigen::RowVectorXd ybar = Y.colwise().mean();

  // centre in place; the constant column is dropped from the solve
  std::vector<std::size_t> cols;
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(nb), sd = Eigen::VectorXd::Zero(nb);
  for (std::size_t b = 1; b < nb; ++b) {
    auto c = Phi.col(Eigen::Index(b));
    mean(b) = c.mean();
    c.array() -= mean(b);
    sd(b) = std::sqrt(c.squaredNorm() / double(n));
    if (sd(b) > 1e-10 * (1.0 + std::abs(mean(b)))) cols.push_back(b);
  }
  active_ = cols.size() + 1;
  if (ridge_ == 0.0 && n < active_)
    throw RegressionError("fewer samples than active basis functions");

  const std::size_t p = cols.size();
  const bool all = p + 1 == nb;
  Eigen::MatrixXd sub;
  if (!all) {
    sub.resize(Eigen::Index(n), Eigen::Index(p));
    for (std::size_t c = 0; c < p; ++c) sub.col(Eigen::Index(c)) = Phi.col(Eigen::Index(cols[c]));
  }
  const auto Pc = all ? Phi.rightCols(Eigen::Index(p)) : sub.leftCols(Eigen::Index(p));

  Eigen::MatrixXd beta = Eigen::MatrixXd::Zero(Eigen::Index(p), Eigen::Index(m));
  if (p > 0) {
    Eigen::VectorXd inv(p);
    for (std::size_t c = 0; c < p; ++c) inv(Eigen::Index(c)) = 1.0 / sd(cols[c]);
    // standardized Gram and right-hand side
    Eigen::MatrixXd Gm = Eigen::MatrixXd::Zero(Eigen::Index(p), Eigen::Index(p));
    Gm.selfadjointView<Eigen::Lower>().rankUpdate(Pc.transpose(), 1.0 / double(n));
    Gm = Gm.selfadjointView<Eigen::Lower>();
    Gm = inv.asDiagonal() * Gm * inv.asDiagonal();
    const Eigen::MatrixXd Yc = Y.rowwise() - ybar;
    const Eigen::MatrixXd rhs = inv.asDiagonal() * (Pc.transpose() * Yc) / double(n);
    if (ridge_ > 0.0) {
      Gm.diagonal().array() += ridge_ * Gm.trace() / double(p);
      Eigen::LDLT<Eigen::MatrixXd> ldlt(Gm);
      beta = ldlt.solve(rhs);
    } else {
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Gm);
      qr.setThreshold(1e-12);
      if (qr.rank() < Eigen::Index(p))
        throw RegressionError("rank-deficient normal equations without ridge");
      beta = qr.solve(rhs);
    }
    beta = inv.asDiagonal() * beta;  // raw scale
  }

  coef_ = Eigen::MatrixXd::Zero(Eigen::Index(nb), Eigen::Index(m));
  for (std::size_t t = 0; t < m; ++t) {
    double icpt = ybar(Eigen::Index(t));
    for (std::size_t c = 0; c < p; ++c) {
      coef_(Eigen::Index(cols[c]), Eigen::Index(t)) = beta(Eigen::Index(c), Eigen::Index(t));
      icpt -= beta(Eigen::Index(c), Eigen::Index(t)) * mean(cols[c]);
    }
    coef_(0, Eigen::Index(t)) = icpt;
  }

  rms_.assign(m, 0.0);
  se_.assign(m, 0.0);
  Eigen::MatrixXd resid = Y.rowwise() - ybar;
  if (p > 0) resid.noalias() -= Pc * beta;
  for (std::size_t t = 0; t < m; ++t) {
    rms_[t] = std::sqrt(resid.col(Eigen::Index(t)).squaredNorm() / double(n));
    se_[t] = rms_[t] * std::sqrt(double(active_) / double(n));
  }
  fold();
  (void)degree_;
}

void ConditionalRegression::fold() {
  const std::size_t ni = var_.size(), nm = smono_.size();
  std::vector<double> wm(nm * m_, 0.0), wc(nm * ni * m_, 0.0);
  for (std::size_t b = 0; b < expo_.size(); ++b) {
    const std::size_t sm = smono_of_[b];
    for (std::size_t t = 0; t < m_; ++t) {
      const double c = coef_(Eigen::Index(b), Eigen::Index(t));
      wm[sm * m_ + t] += c * mean_moment_[b];
      for (std::size_t j = 0; j < ni; ++j) wc[(sm * ni + j) * m_ + t] += c * cross_moment_[j][b];
    }
  }
  mean_terms_.clear();
  cross_terms_.clear();
  for (std::size_t sm = 0; sm < nm; ++sm)
    for (std::size_t t = 0; t < m_; ++t) {
      if (wm[sm * m_ + t] != 0.0)
        mean_terms_.push_back({std::uint32_t(sm), std::uint32_t(t), wm[sm * m_ + t]});
      for (std::size_t j = 0; j < ni; ++j) {
        const double w = wc[(sm * ni + j) * m_ + t];
        if (w != 0.0) cross_terms_.push_back({std::uint32_t(sm), std::uint32_t(j * m_ + t), w});
      }
    }
}

void ConditionalRegression::predict(const double* row, double* out) const {
  for (std::size_t t = 0; t < m_; ++t) out[t] = 0.0;
  for (std::size_t b = 0; b < expo_.size(); ++b) {
    const double v = monomial(b, row);
    for (std::size_t t = 0; t < m_; ++t) out[t] += coef_(b, t) * v;
  }
}

void ConditionalRegression::conditional_mean(const double* row, double* out) const {
  for (std::size_t t = 0; t < m_; ++t) out[t] = 0.0;
  for (std::size_t b = 0; b < expo_.size(); ++b) {
    if (mean_moment_[b] == 0.0) continue;
    const double v = state_monomial(b, row) * mean_moment_[b];
    for (std::size_t t = 0; t < m_; ++t) out[t] += coef_(b, t) * v;
  }
}

void ConditionalRegression::conditional_cross(const double* row, std::size_t j, double* out) const {
  for (std::size_t t = 0; t < m_; ++t) out[t] = 0.0;
  const auto& cm = cross_moment_[j];
  for (std::size_t b = 0; b < expo_.size(); ++b) {
    if (cm[b] == 0.0) continue;
    const double v = state_monomial(b, row) * cm[b];
    for (std::size_t t = 0; t < m_; ++t) out[t] += coef_(b, t) * v;
  }
}

void ConditionalRegression::conditional_moments(const double* row, double* mean,
                                                double* cross) const {
  double sm[64];
  const std::size_t nm = smono_.size();
  if (nm > 64) throw ContractError("too many state monomials");
  for (std::size_t i = 0; i < nm; ++i) {
    double v = 1.0;
    for (auto f : smono_[i]) v *= row[f];
    sm[i] = v;
  }
  for (std::size_t t = 0; t < m_; ++t) mean[t] = 0.0;
  for (std::size_t i = 0; i < var_.size() * m_; ++i) cross[i] = 0.0;
  for (const Term& e : mean_terms_) mean[e.out] += e.w * sm[e.mono];
  for (const Term& e : cross_terms_) cross[e.out] += e.w * sm[e.mono];
}

double ConditionalRegression::max_residual_rms() const {
  double r = 0.0;
  for (double v : rms_) r = std::max(r, v);
  return r;
}

double ConditionalRegression::coefficient(const std::vector<int>& e, std::size_t target) const {
  for (std::size_t b = 0; b < expo_.size(); ++b) {
    bool eq = e.size() == expo_[b].size();
    for (std::size_t i = 0; eq && i < e.size(); ++i) eq = expo_[b][i] == e[i];
    if (eq) return coef_(b, target);
  }
  return 0.0;
}

}  // namespace mfgmp
