#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "mfgmp/ensemble.hpp"
#include "mfgmp/grid_noise.hpp"
#include "mfgmp/model.hpp"
#include "mfgmp/regression.hpp"

namespace mfgmp {

struct InitialSpec {
  double x_mean = 0.0;
  double x_std = 1.0;           // within-scenario spread
  double x_scenario_std = 0.0;  // spread of the scenario centre (F^0_0-measurable)
  double q_mean = 0.0;
  double q_std = 0.0;           // 0: deterministic q_0
};

struct InitialCondition {
  ParticleField X0;  // one time slice
  ScenarioField q0;  // one time slice
};

InitialCondition sample_initial(const InitialSpec& spec, std::size_t scenarios,
                                std::size_t particles, std::size_t d, std::size_t d0,
                                std::uint64_t seed);

struct ForwardPaths {
  ParticleField X;   // N_t+1
  ScenarioField qf;  // N_t+1
};

ForwardPaths simulate_forward(const ControlField& control, const NoiseBundle& noise,
                              const ModelConstants& constants, const InitialCondition& init);

struct SolveDiagnostics {
  std::vector<double> residual_u, residual_phi, residual_qb;  // per step, rms of the fit
  std::vector<double> se_zphi;                                // per step
  std::size_t theta_iterations = 0;
  double max_abs_zphi = 0.0;
};

struct SolveOutput {
  EnsembleState state;
  ParticleField theta_F;  // N_t
  ScenarioField theta_H;  // N_t
  SolveDiagnostics diagnostics;
};

SolveOutput solve_backward(const ForwardPaths& forward, const ControlField& control,
                           const PrimedCoefficientSet& set, const ModelConstants& constants,
                           const NoiseBundle& noise, const RegressionBasis& basis,
                           const ThetaOptions& theta = {});

struct DecoupledProblem {
  CoefficientPtr model;  // already clamped
  ModelConstants constants;
  TimeGrid grid;
  std::shared_ptr<const NoiseBundle> noise;
  InitialCondition init;
  RegressionBasis basis;
  ThetaOptions theta;

  std::size_t scenarios() const { return noise->scenarios; }
  std::size_t particles() const { return noise->particles; }
  ControlField zero_control() const {
    return ControlField(grid.steps, scenarios(), particles(), constants.d, constants.d0);
  }
};

SolveOutput solve_decoupled(const DecoupledProblem& problem, const ControlField& control);

// Picard map: (F', D_zH') along the solve, i.e. the control the coupled system would induce.
ControlField induced_control(const DecoupledProblem& problem, const SolveOutput& solve);

// Fitted decoupling field at t = 0: U affine in (x, q, mean_x), phi quadratic in (q, mean_x).
class InitialField {
 public:
  InitialField(const SolveOutput& solve, double ridge = 1e-10);
  double U(double x, double q, double m) const;
  double phi(double q, double m) const;
  double dphi_dq(double q, double m) const;

 private:
  double u_[4] = {0, 0, 0, 0};       // 1, x, q, m
  double f_[6] = {0, 0, 0, 0, 0, 0}; // 1, q, m, q^2, qm, m^2
};

}  // namespace mfgmp
