#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace btlab {

enum class ErrorCode {
  precondition,
  singularity,
  degenerate_projection,
  non_spd_metric,
  not_converged,
  sub_resolution,
  unresolved_degree,
  parse,
  io,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Raised by iterative solvers; carries the residual after every iteration.
class NotConvergedError : public Error {
 public:
  NotConvergedError(const std::string& what, std::vector<double> residual_history);
  const std::vector<double>& residual_history() const noexcept { return history_; }

 private:
  std::vector<double> history_;
};

}  // namespace btlab
