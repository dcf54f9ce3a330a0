#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

namespace btlab {

enum class NodeMask : std::uint8_t {
  outside = 0,
  interior = 1,
  flat_boundary = 2,
  spherical_boundary = 3,
};

const char* to_string(NodeMask mask);

struct GridParams {
  int n = 2;
  double r = 1.0;
  double h = 0.0625;
  bool half = true;
  // Radius of a concentric hole; 0 for a (half-)ball. Annulus grids are
  // internal to the solver and are not representable in the map file format.
  double inner_radius = 0.0;
};

// Lattice h·Zⁿ restricted to the cube around the origin. Only nodes whose dual
// cell [x - h/2, x + h/2]ⁿ meets the domain are stored ("active"); they are
// numbered in lexicographic index order, first axis slowest. Quadrature weight
// of a node is hⁿ times the fraction of its dual cell inside the domain.
class HalfBallGrid {
 public:
  explicit HalfBallGrid(const GridParams& params);

  const GridParams& params() const noexcept { return params_; }
  int dim() const noexcept { return params_.n; }
  double radius() const noexcept { return params_.r; }
  double spacing() const noexcept { return params_.h; }
  bool half() const noexcept { return params_.half; }
  double inner_radius() const noexcept { return params_.inner_radius; }

  std::size_t node_count() const noexcept { return mask_.size(); }
  std::size_t count(NodeMask mask) const;

  NodeMask mask(std::size_t node) const { return mask_[node]; }
  std::span<const int> index(std::size_t node) const {
    return {index_.data() + node * static_cast<std::size_t>(params_.n),
            static_cast<std::size_t>(params_.n)};
  }
  double coord(std::size_t node, int axis) const {
    return params_.h * index_[node * static_cast<std::size_t>(params_.n) + axis];
  }
  void position(std::size_t node, double* out) const;
  std::vector<double> position(std::size_t node) const;
  double norm(std::size_t node) const { return norm_[node]; }

  double weight(std::size_t node) const { return weight_[node]; }
  double cell_fraction(std::size_t node) const;

  // Active neighbour along `axis` in direction `dir` (+1 / -1), or -1.
  std::int64_t neighbor(std::size_t node, int axis, int dir) const {
    return neighbors_[(node * params_.n + axis) * 2 + (dir > 0 ? 1 : 0)];
  }
  // Active node with the given lattice index, or -1.
  std::int64_t find(std::span<const int> index) const;
  // Active node at σ(x) (last index negated), or -1.
  std::int64_t mirror(std::size_t node) const;

  // True when the node position lies in the closed physical domain. Cut
  // nodes whose position is just outside the sphere are active but not in it.
  bool in_closed_domain(std::size_t node) const;

  // Finite-difference stencil for ∂/∂x_axis at `node`: centred when both
  // neighbours exist, otherwise second- or first-order one-sided.
  int stencil(std::size_t node, int axis, std::int64_t ids[3], double coefs[3]) const;

  int box_lo(int axis) const { return lo_[axis]; }
  int box_count(int axis) const { return cnt_[axis]; }

 private:
  GridParams params_;
  std::vector<int> lo_;
  std::vector<int> cnt_;
  std::vector<std::int32_t> box_to_node_;
  std::vector<int> index_;
  std::vector<NodeMask> mask_;
  std::vector<double> weight_;
  std::vector<double> norm_;
  std::vector<std::int64_t> neighbors_;
};

using GridPtr = std::shared_ptr<const HalfBallGrid>;

// Validates 0 < h ≤ r/2 and n ≥ 2.
GridPtr make_grid(int n, double r, double h, bool half);
// Grid of the annulus inner ≤ |x| ≤ outer (optionally clipped to xₙ ≥ 0),
// centred at the origin of its own chart.
GridPtr make_annulus_grid(int n, double outer, double inner, double h, bool half);

using NodeSet = std::vector<std::size_t>;

struct AnnulusSpec {
  std::vector<double> center;
  double inner = 0.0;
  double outer = 0.0;
  bool clipped = true;
};

void validate(const AnnulusSpec& spec, int n);
// Active nodes with inner ≤ |x - center| < outer (and xₙ ≥ 0 when clipped).
NodeSet annulus_mask(const HalfBallGrid& grid, const AnnulusSpec& spec);
// Active nodes with |x - center| < radius.
NodeSet ball_mask(const HalfBallGrid& grid, std::span<const double> center, double radius);

// Volume of the unit ball in Rⁿ and area of the unit sphere 𝕊ⁿ⁻¹.
double unit_ball_volume(int n);
double unit_sphere_area(int n);
// Σ weight over the given nodes (all active nodes when empty span passed).
double grid_volume(const HalfBallGrid& grid);

}  // namespace btlab
