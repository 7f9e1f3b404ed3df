#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "mfgmp/grid_noise.hpp"
#include "mfgmp/model.hpp"

namespace mfgmp {

// [time][scenario][particle][component]
class ParticleField {
 public:
  ParticleField() = default;
  ParticleField(std::size_t times, std::size_t scenarios, std::size_t particles, std::size_t dim,
                double fill = 0.0)
      : nt_(times), ns_(scenarios), np_(particles), nd_(dim),
        data_(times * scenarios * particles * dim, fill) {}

  std::size_t times() const { return nt_; }
  std::size_t scenarios() const { return ns_; }
  std::size_t particles() const { return np_; }
  std::size_t dim() const { return nd_; }
  std::size_t slice_size() const { return ns_ * np_ * nd_; }

  double& operator()(std::size_t k, std::size_t s, std::size_t p, std::size_t j = 0) {
    return data_[((k * ns_ + s) * np_ + p) * nd_ + j];
  }
  double operator()(std::size_t k, std::size_t s, std::size_t p, std::size_t j = 0) const {
    return data_[((k * ns_ + s) * np_ + p) * nd_ + j];
  }
  // all particles of scenario s at time k
  double* cloud(std::size_t k, std::size_t s) { return data_.data() + (k * ns_ + s) * np_ * nd_; }
  const double* cloud(std::size_t k, std::size_t s) const {
    return data_.data() + (k * ns_ + s) * np_ * nd_;
  }
  double* slice(std::size_t k) { return data_.data() + k * slice_size(); }
  const double* slice(std::size_t k) const { return data_.data() + k * slice_size(); }
  std::vector<double>& raw() { return data_; }
  const std::vector<double>& raw() const { return data_; }
  bool same_shape(const ParticleField& o) const {
    return nt_ == o.nt_ && ns_ == o.ns_ && np_ == o.np_ && nd_ == o.nd_;
  }

 private:
  std::size_t nt_ = 0, ns_ = 0, np_ = 0, nd_ = 0;
  std::vector<double> data_;
};

// [time][scenario][component]; no particle axis by construction
class ScenarioField {
 public:
  ScenarioField() = default;
  ScenarioField(std::size_t times, std::size_t scenarios, std::size_t dim, double fill = 0.0)
      : nt_(times), ns_(scenarios), nd_(dim), data_(times * scenarios * dim, fill) {}

  std::size_t times() const { return nt_; }
  std::size_t scenarios() const { return ns_; }
  std::size_t dim() const { return nd_; }
  std::size_t slice_size() const { return ns_ * nd_; }

  double& operator()(std::size_t k, std::size_t s, std::size_t j = 0) {
    return data_[(k * ns_ + s) * nd_ + j];
  }
  double operator()(std::size_t k, std::size_t s, std::size_t j = 0) const {
    return data_[(k * ns_ + s) * nd_ + j];
  }
  double* at(std::size_t k, std::size_t s) { return data_.data() + (k * ns_ + s) * nd_; }
  const double* at(std::size_t k, std::size_t s) const { return data_.data() + (k * ns_ + s) * nd_; }
  std::vector<double>& raw() { return data_; }
  const std::vector<double>& raw() const { return data_; }
  bool same_shape(const ScenarioField& o) const {
    return nt_ == o.nt_ && ns_ == o.ns_ && nd_ == o.nd_;
  }

 private:
  std::size_t nt_ = 0, ns_ = 0, nd_ = 0;
  std::vector<double> data_;
};

struct EnsembleState {
  ParticleField X, U;   // N_t+1
  ParticleField Z;      // N_t, d*(d+d0): row-major d x (d + d0)
  ScenarioField qf, qb; // N_t+1
  ScenarioField phi;    // N_t+1, 1
  ScenarioField Zphi;   // N_t, d0
  ScenarioField Zq;     // N_t, d0*d0

  EnsembleState() = default;
  EnsembleState(std::size_t steps, std::size_t scenarios, std::size_t particles, std::size_t d,
                std::size_t d0);
  std::size_t steps() const { return Zphi.times(); }
};

struct ControlField {
  ParticleField alpha_x;  // N_t
  ScenarioField alpha_q;  // N_t

  ControlField() = default;
  ControlField(std::size_t steps, std::size_t scenarios, std::size_t particles, std::size_t d,
               std::size_t d0, double fill = 0.0)
      : alpha_x(steps, scenarios, particles, d, fill), alpha_q(steps, scenarios, d0, fill) {}
  bool same_shape(const ControlField& o) const {
    return alpha_x.same_shape(o.alpha_x) && alpha_q.same_shape(o.alpha_q);
  }
};

// y += a * x
void axpy(double a, const ControlField& x, ControlField& y);
void scale(double a, ControlField& x);

// per-scenario moments of (X_k, U_k)
std::vector<MeasureFeatures> conditional_features(const EnsembleState& state, std::size_t k);

double inner_product_T(const ControlField& a, const ControlField& b, const TimeGrid& grid);
double norm_T(const ControlField& a, const TimeGrid& grid);
// per-scenario contributions whose mean is the inner product (for standard errors)
std::vector<double> inner_product_T_by_scenario(const ControlField& a, const ControlField& b,
                                                const TimeGrid& grid);

// generic pieces of the product-space norm
double inner_product_T(const ParticleField& a, const ParticleField& b, double dt);
double inner_product_T(const ScenarioField& a, const ScenarioField& b, double dt);

double wasserstein2_1d(std::span<const double> a, std::span<const double> b);

// one row per scenario x particle x time (d = d0 = 1 columns are unrolled per component)
void write_ensemble_csv(std::ostream& os, const EnsembleState& state, const TimeGrid& grid);

}  // namespace mfgmp
