#pragma once

#include <stdexcept>
#include <string>

namespace mfgmp {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

struct EvaluationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SimulationError : std::runtime_error {
  SimulationError(const std::string& what, std::size_t step)
      : std::runtime_error(what + " (step " + std::to_string(step) + ")"), step(step) {}
  std::size_t step;
};

struct RegressionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InversionError : std::runtime_error {
  InversionError(const std::string& what, double residual)
      : std::runtime_error(what + " (last residual " + std::to_string(residual) + ")"),
        last_residual(residual) {}
  double last_residual;
};

}  // namespace mfgmp
