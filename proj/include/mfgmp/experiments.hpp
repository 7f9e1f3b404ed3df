#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mfgmp/config.hpp"
#include "mfgmp/decoupled_solver.hpp"
#include "mfgmp/extragradient.hpp"
#include "mfgmp/oracle.hpp"
#include "mfgmp/verification.hpp"

namespace mfgmp {

enum ExitCode : int { kExitConverged = 0, kExitError = 1, kExitDiverged = 2 };

CoefficientPtr build_model(const RunConfig& cfg);  // clamped per constants.clamp
std::shared_ptr<DecoupledProblem> build_problem(const RunConfig& cfg);
Eigen::MatrixXd monotonicity_A(const RunConfig& cfg);

struct Probe {
  double x, q, m;
};
// inside the bulk of the initial law
std::vector<Probe> probe_points(const RunConfig& cfg, std::size_t n);

using HalfObserver = std::function<void(std::size_t n, const SolveOutput& half)>;

struct EGRun {
  double L_hat = 0.0;
  double gamma = 0.0;
  ExtragradientReport<ControlField> report;
  SolveOutput solve;  // at the last evaluated iterate
};

EGRun solve_extragradient(std::shared_ptr<const DecoupledProblem> problem, const RunConfig& cfg,
                          const ControlField* reference = nullptr,
                          const HalfObserver& observer = {});

// LQ only: analytic monotonicity data and thresholds for the configured A
struct ThresholdInfo {
  LQMonotonicity mono;
  std::optional<Thresholds> thresholds;
  std::string error;
};
ThresholdInfo lq_thresholds(const RunConfig& cfg);

// sup over visited states of |d phi/dq| from the oracle
double oracle_sup_dphi(const RiccatiSolution& sol, const EnsembleState& st, const TimeGrid& grid);

struct SweepCell {
  double sigma0 = 0.0, horizon = 0.0;
  std::size_t steps = 0;
  std::string picard = "skipped";
  std::size_t picard_sweeps = 0;
  bool eg_converged = false, eg_diverged = false;
  std::size_t eg_iterations = 0;
  double lambda_hat = std::numeric_limits<double>::quiet_NaN();
  double r2 = std::numeric_limits<double>::quiet_NaN();
  double lip_x = std::numeric_limits<double>::quiet_NaN();
  double lip_q = std::numeric_limits<double>::quiet_NaN();
  double lip_mu = std::numeric_limits<double>::quiet_NaN();
  double gamma_star = std::numeric_limits<double>::quiet_NaN();
  double beta_T = std::numeric_limits<double>::quiet_NaN();
  double sigma0_T = std::numeric_limits<double>::quiet_NaN();
  double sigma0_star = std::numeric_limits<double>::quiet_NaN();
  int branch = 0;
  bool oracle_blowup = false;
  std::string error;
};

SweepCell run_sweep_cell(const RunConfig& base, double sigma0, double horizon,
                         std::uint64_t cell_seed);
std::string sweep_csv_header();
std::string sweep_csv_row(const SweepCell& c);

CertificationReport run_battery(const RunConfig& cfg, nlohmann::json* extra = nullptr);

struct SolveArtifacts {
  std::shared_ptr<DecoupledProblem> problem;
  EGRun run;
};
// run_solve with the in-memory results; the oracle reference (lq only) adds distances to the report
SolveArtifacts solve_and_write(const RunConfig& cfg, const std::filesystem::path& out,
                               bool dump_ensemble, bool oracle_reference = false);

int run_solve(const RunConfig& cfg, const std::filesystem::path& out, bool dump_ensemble);
int run_verify(const RunConfig& cfg, const std::filesystem::path& out);
int run_converge(const RunConfig& cfg, const std::filesystem::path& out);
int run_sigma_sweep(const RunConfig& cfg, const std::filesystem::path& out);
int run_oracle(const RunConfig& cfg, const std::filesystem::path& out);

}  // namespace mfgmp
