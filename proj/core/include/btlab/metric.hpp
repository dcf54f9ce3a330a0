#pragma once

#include <functional>
#include <vector>

#include "btlab/geometry.hpp"

namespace btlab {

// Per-node symmetric positive definite matrix g with its inverse and √det g.
// Every constructor validates symmetry and positive definiteness.
class MetricField {
 public:
  using Function = std::function<void(const double* x, double* g)>;

  static MetricField euclidean(GridPtr grid);
  // g written row-major as an n×n block for each node position x.
  static MetricField from_function(GridPtr grid, const Function& f);
  static MetricField from_values(GridPtr grid, std::vector<double> g);

  const GridPtr& grid() const noexcept { return grid_; }
  bool is_euclidean() const noexcept { return euclidean_; }
  int dim() const noexcept { return n_; }

  const double* g(std::size_t node) const { return g_.data() + node * n_ * n_; }
  const double* g_inv(std::size_t node) const { return inv_.data() + node * n_ * n_; }
  double sqrt_det(std::size_t node) const { return euclidean_ ? 1.0 : sqrt_det_[node]; }
  double min_eigenvalue(std::size_t node) const;

  // |w|²_g for a covector field block w (n rows of d components):
  // g^{ij}⟨wᵢ, wⱼ⟩.
  double norm2(std::size_t node, const double* w, int d) const;

 private:
  MetricField() = default;
  void finalize();

  GridPtr grid_;
  int n_ = 0;
  bool euclidean_ = false;
  std::vector<double> g_;
  std::vector<double> inv_;
  std::vector<double> sqrt_det_;
};

}  // namespace btlab
