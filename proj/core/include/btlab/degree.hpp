#pragma once

#include <span>

#include "btlab/maps.hpp"

namespace btlab {

enum class DegreeBoundary {
  automatic,  // flat face on half grids, sphere of radius r − 2h on full grids
  flat_face,
  sphere,
};

struct DegreeResult {
  long value = 0;
  double raw = 0.0;
};

// Degree of the boundary trace into 𝕊ⁿ⁻¹ (d = n, n ∈ {2, 3}). On the flat
// face the trace is closed by the shortest path between its end values (n = 2)
// or by a fan to the mean rim value (n = 3); `raw` is the unclosed pullback
// integral over |𝕊ⁿ⁻¹|. Orientation: the chart bubble π⁻¹ has face degree +1
// and the identity has sphere degree +1. Throws Error(unresolved_degree) when
// |raw − value| > 0.1 and Error(precondition) when |u| < 1/2 on the trace.
DegreeResult degree(const DiscreteMap& u, DegreeBoundary which = DegreeBoundary::automatic);

// Winding number of a closed planar loop given as interleaved (x, y) pairs.
DegreeResult winding_degree(std::span<const double> loop);

}  // namespace btlab
