#pragma once

#include <functional>
#include <span>
#include <vector>

#include "btlab/geometry.hpp"
#include "btlab/metric.hpp"

namespace btlab {

inline constexpr double kBoundaryTol = 1e-6;
inline constexpr double kMaxNormTol = 1e-3;

// Grid-sampled map into Rᵈ; values stored node-major (node · d + component).
class DiscreteMap {
 public:
  DiscreteMap() = default;
  DiscreteMap(GridPtr grid, int d);
  DiscreteMap(GridPtr grid, int d, std::vector<double> values);

  const GridPtr& grid() const noexcept { return grid_; }
  int target_dim() const noexcept { return d_; }
  std::size_t node_count() const { return grid_->node_count(); }

  std::span<double> at(std::size_t node) { return {values_.data() + node * d_, static_cast<std::size_t>(d_)}; }
  std::span<const double> at(std::size_t node) const {
    return {values_.data() + node * d_, static_cast<std::size_t>(d_)};
  }
  double norm(std::size_t node) const;

  std::vector<double>& values() noexcept { return values_; }
  const std::vector<double>& values() const noexcept { return values_; }

  // Every value finite.
  bool is_finite() const;
  // | |u| - 1 | ≤ tol on every flat_boundary node.
  bool is_admissible(double tol = kBoundaryTol) const;
  // Rescales flat_boundary values to unit length; throws on |u| = 0.
  void renormalize_flat();

 private:
  GridPtr grid_;
  int d_ = 0;
  std::vector<double> values_;
};

using PointFunction = std::function<void(const double* x, double* value)>;

DiscreteMap sample(GridPtr grid, int d, const PointFunction& f);
DiscreteMap constant_map(GridPtr grid, std::span<const double> value);

// Per-node n×d blocks ∂ᵢuᶜ stored at (node · n + i) · d + c.
std::vector<double> gradient(const DiscreteMap& u);

struct EnergyReport {
  double p = 2.0;
  double total = 0.0;
  std::vector<double> density;
};

EnergyReport p_energy(const DiscreteMap& u, const MetricField& metric, double p);
double local_energy(const DiscreteMap& u, const MetricField& metric, double p, std::span<const double> center,
                    double radius);
// Energy over an explicit node subset.
double energy_on(const DiscreteMap& u, const MetricField& metric, double p, const NodeSet& nodes);

// Regularized energy Σ w·√det g·((|du|²_g + δ²)^{p/2} − δᵖ) and, when
// requested, its exact gradient with respect to every nodal value.
double regularized_energy(const DiscreteMap& u, const MetricField& metric, double p, double delta,
                          std::vector<double>* grad);

struct Residual {
  std::vector<double> vec;
  double norm = 0.0;
};

// Energy gradient with tangential projection on the flat face and zero on
// Dirichlet nodes; norm² = Σ |r|² / w (the discrete weighted L² norm of the
// Euler-Lagrange operator).
Residual weak_residual(const DiscreteMap& u, const MetricField& metric, double p);
// Same assembly with spherical-boundary nodes left free (natural condition).
Residual weak_residual_free(const DiscreteMap& u, const MetricField& metric, double p);
double residual_norm(const HalfBallGrid& grid, const std::vector<double>& vec, int d);

struct MaxPrincipleResult {
  bool ok = true;
  std::size_t worst_node = 0;
  double worst_norm = 0.0;
};

// Checks |u| ≤ 1 + tol on nodes in the closed domain.
MaxPrincipleResult max_principle_check(const DiscreteMap& u, double tol = kMaxNormTol);

// Multilinear interpolation at an arbitrary point; points below the flat face
// of a half grid are evaluated at their mirror image (even reflection).
// Returns false when no active cell corner is available.
bool interpolate(const DiscreteMap& u, std::span<const double> x, double* out);

// Diameter of the bounding box of all node values.
double oscillation(const DiscreteMap& u);

}  // namespace btlab
