#ifndef MMFL_ERROR_HPP
#define MMFL_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmfl {

/// Scenario or experiment parameters that violate a stated invariant.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a delay would be infinite. Carries the flat indices of the
/// offending UEs so callers can report them.
class ZeroRateError : public std::domain_error {
 public:
  ZeroRateError(const std::string& what, std::vector<std::size_t> ues)
      : std::domain_error(what), offenders_(std::move(ues)) {}

  const std::vector<std::size_t>& offenders() const noexcept { return offenders_; }

 private:
  std::vector<std::size_t> offenders_;
};

/// No strictly feasible starting point could be constructed for the SCA loop.
class InfeasibleStartError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inner convex solve failed inside the SCA loop.
class SolverFailureError : public std::runtime_error {
 public:
  SolverFailureError(const std::string& what, int iteration)
      : std::runtime_error(what + " (SCA iteration " + std::to_string(iteration) + ")"),
        iteration_(iteration) {}

  int iteration() const noexcept { return iteration_; }

 private:
  int iteration_;
};

}  // namespace mmfl

#endif  // MMFL_ERROR_HPP
