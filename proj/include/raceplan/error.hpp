#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace raceplan {

// Base class for all errors thrown by this library.
struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed input files (CSV rows, map headers, checkpoints).
struct ParseError : Error {
  using Error::Error;
};

// Inputs that parse but violate a documented invariant or precondition.
struct ValidationError : Error {
  using Error::Error;
};

// Iterative solver failed to meet its convergence contract.
struct SolverError : Error {
  explicit SolverError(const std::string& what, std::vector<double> history = {})
      : Error(what), objective_history(std::move(history)) {}
  std::vector<double> objective_history;
};

}  // namespace raceplan
