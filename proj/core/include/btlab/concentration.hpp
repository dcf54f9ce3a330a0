#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "btlab/maps.hpp"

namespace btlab {

// Ball around `center`; nodes inside are both the admissible centers and the
// support of the integrand. An infinite radius means the whole grid.
struct Region {
  std::vector<double> center;
  double radius = INFINITY;
};

struct ConcentrationProfile {
  std::vector<double> radii;
  std::vector<double> q;
  std::vector<std::size_t> argmax;
};

struct Detection {
  bool found = false;
  std::size_t node = 0;        // argmax center at the detected radius
  std::vector<double> center;  // its position
  double scale = 0.0;          // λ
  double level = 0.0;          // Q at the detected lattice radius (≥ target)
  double target = 0.0;
};

// Q(t) = sup over center nodes x of Σ_{|y−x|<t} |du|ᵖ_g w √det g, evaluated
// exactly over the finite node set. Small radii use direct sums; larger ones a
// zero-padded FFT correlation.
class ConcentrationField {
 public:
  ConcentrationField(const DiscreteMap& u, const MetricField& metric, double p, const Region& region = {});
  // Same from a precomputed per-node energy (density·w·√det g).
  ConcentrationField(GridPtr grid, std::vector<double> node_energy, const Region& region = {});

  const HalfBallGrid& grid() const { return *grid_; }
  double total() const { return total_; }
  const std::vector<double>& node_energy() const { return energy_; }

  // Strict ball of radius t. Ties go to the lowest node index.
  double q(double t, std::size_t* argmax = nullptr) const;
  // Closed lattice ball: offsets o with |o|² ≤ m (in units of h²).
  double q_lattice(long m, std::size_t* argmax = nullptr) const;

  ConcentrationProfile profile(std::span<const double> radii) const;

  // Per-node ball sums for the strict ball of radius t (0 off the region).
  std::vector<double> ball_sums(double t) const;

  // Smallest radius at which Q reaches `target`, found by bisection over the
  // lattice distances and linearly interpolated between the bracketing steps.
  Detection detect(double target) const;

  // Sum over every node of the energy within distance < t of `center` (not
  // restricted to node centers).
  double ball_energy(std::span<const double> center, double t) const;

 private:
  void lattice_sums(long m, std::vector<double>& sums) const;
  void sums_direct(long m, std::vector<std::uint64_t>& out) const;
  void sums_fft(long m, std::vector<std::uint64_t>& out) const;
  double best(const std::vector<double>& sums, std::size_t* argmax) const;

  GridPtr grid_;
  std::vector<double> energy_;
  // Energies in units of quantum_ = total·2^-kFixedBits, so ball sums are
  // exact integers on both summation paths and Q is monotone bit for bit.
  static constexpr int kFixedBits = 60;
  std::vector<std::uint64_t> fixed_;
  double quantum_ = 1.0;
  std::vector<char> center_ok_;
  std::vector<std::size_t> centers_;
  double total_ = 0.0;
  double max_dist2_ = 0.0;  // squared lattice diameter of the region
};

}  // namespace btlab
