#include "btlab/error.hpp"

#include <utility>

namespace btlab {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::precondition: return "precondition";
    case ErrorCode::singularity: return "singularity";
    case ErrorCode::degenerate_projection: return "degenerate_projection";
    case ErrorCode::non_spd_metric: return "non_spd_metric";
    case ErrorCode::not_converged: return "not_converged";
    case ErrorCode::sub_resolution: return "sub_resolution";
    case ErrorCode::unresolved_degree: return "unresolved_degree";
    case ErrorCode::parse: return "parse";
    case ErrorCode::io: return "io";
  }
  return "unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

NotConvergedError::NotConvergedError(const std::string& what, std::vector<double> residual_history)
    : Error(ErrorCode::not_converged, what), history_(std::move(residual_history)) {}

}  // namespace btlab
