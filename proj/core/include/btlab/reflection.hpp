#pragma once

#include <filesystem>
#include <vector>

#include "btlab/maps.hpp"

namespace btlab {

// Extension of a half-ball map across xₙ = 0: v = u above, v = ι∘u∘σ below,
// with the metric pulled back by σ and the weight m = |u∘σ|^{2p} below.
struct ReflectedPair {
  DiscreteMap v;
  MetricField h;
  std::vector<double> m;
  double radius = 0.0;  // radius of the ball on which |u| > 1/2 was verified
};

struct MetricReflection {
  MetricField h;
  double lipschitz = 0.0;      // max difference quotient over node pairs ≤ 2 spacings apart
  double c1_norm = 0.0;        // sup |g| + sup |∂g| (max-entry norms) on the upper half
  double junction_jump = 0.0;  // max |h(x) − h(σx)| over mirror pairs next to xₙ = 0
};

// Reflects the metric of a half-ball grid onto the full ball of the given
// radius (≤ the grid radius; 0 means the grid radius) on the same lattice.
MetricReflection reflect_metric(const MetricField& g, double radius = 0.0);

struct ReflectOptions {
  // Shrink the radius by this factor until |u| > 1/2 holds on the upper half
  // ball; 1 disables shrinking.
  double shrink = 0.9;
  // Smallest radius tried, in grid spacings.
  double min_radius_cells = 4.0;
};

// Throws Error(precondition) naming a node with |u| ≤ 1/2 when no admissible
// radius is found.
ReflectedPair reflect_map(const DiscreteMap& u, const MetricField& metric, double p,
                          const ReflectOptions& options = {});

struct GrowthReport {
  double max_ratio = 0.0;  // max over interior nodes of |Δ_{p,h} v| / max(|dv|_h^p, 1e-8)
  std::size_t worst_node = 0;
  double max_ratio_upper = 0.0;  // xₙ > 0
  double max_ratio_lower = 0.0;  // xₙ < 0
};

// The discrete operator is the variational one: the energy gradient at a node
// divided by −p·w·√det h.
GrowthReport residual_growth_check(const ReflectedPair& pair, double p);

// Writes <prefix>.v.map, <prefix>.h.map (d = n², row-major h) and
// <prefix>.m.map (d = 1).
void write_reflected(const ReflectedPair& pair, const std::filesystem::path& prefix);
ReflectedPair read_reflected(const std::filesystem::path& prefix);

}  // namespace btlab
