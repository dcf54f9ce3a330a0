#pragma once

// Shared projected-gradient engine behind the constrained solve and the
// annulus extension.

#include <cstdint>
#include <functional>
#include <vector>

#include "btlab/solver.hpp"

namespace btlab::detail {

enum class NodeKind : std::uint8_t {
  free,      // unconstrained
  held,      // Dirichlet
  sphere,    // constrained to the unit sphere
  mirrored,  // copy of mirror_of[i] (symmetric iteration)
};

struct Problem {
  std::vector<NodeKind> kind;
  std::vector<std::int64_t> mirror_of;  // empty unless some node is mirrored
};

struct EngineResult {
  DiscreteMap map;
  std::vector<LogRow> log;
  int iterations = 0;
};

using ResidualCheck = std::function<double(const DiscreteMap&)>;

void project(const DiscreteMap& u, const std::vector<NodeKind>& kind, std::vector<double>& grad);
void fold_mirrored(const Problem& prob, int d, std::vector<double>& grad);
void retract(DiscreteMap& u, const Problem& prob);
double projected_residual(const DiscreteMap& u, const MetricField& metric, double p, double delta,
                          const Problem& prob);

// Runs the δ-continuation; in the last stage the iteration stops once both the
// driving residual and final_check(u) are ≤ residual_tol.
EngineResult descend(DiscreteMap u, const MetricField& metric, const SolveConfig& cfg, const Problem& prob,
                     const ResidualCheck& final_check);

}  // namespace btlab::detail
