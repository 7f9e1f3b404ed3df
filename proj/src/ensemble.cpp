#include "mfgmp/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "mfgmp/errors.hpp"

namespace mfgmp {

EnsembleState::EnsembleState(std::size_t N, std::size_t M, std::size_t P, std::size_t d,
                             std::size_t d0)
    : X(N + 1, M, P, d), U(N + 1, M, P, d), Z(N, M, P, d * (d + d0)), qf(N + 1, M, d0),
      qb(N + 1, M, d0), phi(N + 1, M, 1), Zphi(N, M, d0), Zq(N, M, d0 * d0) {}

void axpy(double a, const ControlField& x, ControlField& y) {
  if (!x.same_shape(y)) throw ContractError("control shape mismatch");
  auto& yx = y.alpha_x.raw();
  const auto& xx = x.alpha_x.raw();
  for (std::size_t i = 0; i < yx.size(); ++i) yx[i] += a * xx[i];
  auto& yq = y.alpha_q.raw();
  const auto& xq = x.alpha_q.raw();
  for (std::size_t i = 0; i < yq.size(); ++i) yq[i] += a * xq[i];
}

void scale(double a, ControlField& x) {
  for (double& v : x.alpha_x.raw()) v *= a;
  for (double& v : x.alpha_q.raw()) v *= a;
}

std::vector<MeasureFeatures> conditional_features(const EnsembleState& state, std::size_t k) {
  const std::size_t M = state.X.scenarios(), P = state.X.particles(), d = state.X.dim();
  if (P == 0) throw ConfigError("ensemble.particles must be at least 1");
  if (k >= state.X.times()) throw ContractError("time index out of range");
  std::vector<MeasureFeatures> out;
  out.reserve(M);
  for (std::size_t s = 0; s < M; ++s)
    out.push_back(measure_features(state.X.cloud(k, s), state.U.cloud(k, s), P, d));
  return out;
}

std::vector<double> inner_product_T_by_scenario(const ControlField& a, const ControlField& b,
                                                const TimeGrid& grid) {
  if (!a.same_shape(b)) throw ContractError("inner product shape mismatch");
  const std::size_t N = a.alpha_x.times(), M = a.alpha_x.scenarios(), P = a.alpha_x.particles();
  const std::size_t d = a.alpha_x.dim(), d0 = a.alpha_q.dim();
  if (N != grid.steps) throw ContractError("control does not match the grid");
  const double dt = grid.dt();
  std::vector<double> per(M, 0.0);
  for (std::size_t s = 0; s < M; ++s) {
    double acc = 0.0;
    for (std::size_t k = 0; k < N; ++k) {
      const double* pa = a.alpha_x.cloud(k, s);
      const double* pb = b.alpha_x.cloud(k, s);
      double c = 0.0;
      for (std::size_t i = 0; i < P * d; ++i) c += pa[i] * pb[i];
      acc += c / double(P);
      const double* qa = a.alpha_q.at(k, s);
      const double* qb = b.alpha_q.at(k, s);
      for (std::size_t j = 0; j < d0; ++j) acc += qa[j] * qb[j];
    }
    per[s] = acc * dt;
  }
  return per;
}

double inner_product_T(const ControlField& a, const ControlField& b, const TimeGrid& grid) {
  const auto per = inner_product_T_by_scenario(a, b, grid);
  double acc = 0.0;
  for (double v : per) acc += v;
  return per.empty() ? 0.0 : acc / double(per.size());
}

double norm_T(const ControlField& a, const TimeGrid& grid) {
  return std::sqrt(std::max(0.0, inner_product_T(a, a, grid)));
}

double inner_product_T(const ParticleField& a, const ParticleField& b, double dt) {
  if (!a.same_shape(b)) throw ContractError("inner product shape mismatch");
  const std::size_t n = a.times(), M = a.scenarios(), P = a.particles(), d = a.dim();
  double acc = 0.0;
  for (std::size_t s = 0; s < M; ++s) {
    double c = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double* pa = a.cloud(k, s);
      const double* pb = b.cloud(k, s);
      for (std::size_t i = 0; i < P * d; ++i) c += pa[i] * pb[i];
    }
    acc += c;
  }
  return (M > 0 && P > 0) ? acc * dt / double(M * P) : 0.0;
}

double inner_product_T(const ScenarioField& a, const ScenarioField& b, double dt) {
  if (!a.same_shape(b)) throw ContractError("inner product shape mismatch");
  const auto& x = a.raw();
  const auto& y = b.raw();
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * y[i];
  return a.scenarios() ? acc * dt / double(a.scenarios()) : 0.0;
}

namespace {

// left-continuous empirical quantile of a sorted sample at level u in (0,1)
double quantile(const std::vector<double>& sorted, double u) {
  const std::size_t n = sorted.size();
  std::size_t i = std::size_t(std::ceil(u * double(n)));
  i = std::clamp<std::size_t>(i, 1, n);
  return sorted[i - 1];
}

}  // namespace

double wasserstein2_1d(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw ContractError("wasserstein2_1d needs nonempty samples");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  double acc = 0.0;
  if (x.size() == y.size()) {
    for (std::size_t i = 0; i < x.size(); ++i) acc += (x[i] - y[i]) * (x[i] - y[i]);
    return std::sqrt(acc / double(x.size()));
  }
  // exact coupling of the two quantile functions over the merged breakpoints
  std::vector<double> cuts;
  for (std::size_t i = 1; i < x.size(); ++i) cuts.push_back(double(i) / double(x.size()));
  for (std::size_t i = 1; i < y.size(); ++i) cuts.push_back(double(i) / double(y.size()));
  cuts.push_back(0.0);
  cuts.push_back(1.0);
  std::sort(cuts.begin(), cuts.end());
  for (std::size_t i = 1; i < cuts.size(); ++i) {
    const double w = cuts[i] - cuts[i - 1];
    if (w <= 0.0) continue;
    const double u = 0.5 * (cuts[i] + cuts[i - 1]);
    const double dv = quantile(x, u) - quantile(y, u);
    acc += w * dv * dv;
  }
  return std::sqrt(acc);
}

void write_ensemble_csv(std::ostream& os, const EnsembleState& st, const TimeGrid& grid) {
  const std::size_t N = st.steps(), M = st.X.scenarios(), P = st.X.particles();
  const std::size_t d = st.X.dim(), d0 = st.qf.dim();
  os << "scenario,particle,k,t";
  for (std::size_t j = 0; j < d; ++j) os << ",X" << j << ",U" << j;
  for (std::size_t j = 0; j < d0; ++j) os << ",qf" << j << ",qb" << j << ",Zphi" << j;
  os << ",phi\n";
  char buf[40];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, ",%.17g", v);
    os << buf;
  };
  for (std::size_t s = 0; s < M; ++s)
    for (std::size_t p = 0; p < P; ++p)
      for (std::size_t k = 0; k <= N; ++k) {
        os << s << ',' << p << ',' << k;
        put(grid.node(k));
        for (std::size_t j = 0; j < d; ++j) {
          put(st.X(k, s, p, j));
          put(st.U(k, s, p, j));
        }
        for (std::size_t j = 0; j < d0; ++j) {
          put(st.qf(k, s, j));
          put(st.qb(k, s, j));
          put(k < N ? st.Zphi(k, s, j) : 0.0);
        }
        put(st.phi(k, s));
        os << '\n';
      }
}

}  // namespace mfgmp
