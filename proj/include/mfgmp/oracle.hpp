#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "mfgmp/decoupled_solver.hpp"
#include "mfgmp/model.hpp"

namespace mfgmp {

// U(t,x,q,m) = a x + b_u q + c_u m
// phi(t,q,m) = k2 q^2/2 + k12 q m + kc m^2/2 + k0,   Z^phi = d phi / dq (integrand convention)
struct RiccatiSolution {
  double horizon = 0.0;
  std::vector<double> t, a, bu, cu, k2, k12, kc, k0;  // fine grid, increasing t
  std::size_t rk4_steps = 0;
  bool blowup = false;
  double blowup_time = 0.0;

  struct Coefficients {
    double a, bu, cu, k2, k12, kc, k0;
  };
  Coefficients at(double time) const;
};

RiccatiSolution riccati_oracle(const LQParams& p, const ModelConstants& c, const TimeGrid& grid,
                               std::size_t refine = 10);

struct OracleValue {
  double U, phi, Zphi;
};
OracleValue eval_oracle_field(const RiccatiSolution& sol, double t, double x, double q, double m);

void write_oracle_csv(std::ostream& os, const RiccatiSolution& sol, const TimeGrid& grid);

// Oracle feedback simulated on the problem's noise: alpha* = (F, D_zH) of the oracle field.
struct OracleRun {
  ControlField control;
  ForwardPaths paths;
};
OracleRun oracle_control(const RiccatiSolution& sol, const DecoupledProblem& problem);

struct PicardResult {
  enum class Status { Converged, Diverged, MaxIter };
  Status status = Status::MaxIter;
  std::size_t sweeps = 0;
  std::vector<double> distances;
  ControlField control;
  SolveOutput solve;
  std::string message;
};

const char* to_string(PicardResult::Status s);

PicardResult picard_solve(const DecoupledProblem& problem, const ControlField& initial, double tol,
                          std::size_t max_iter);

}  // namespace mfgmp
