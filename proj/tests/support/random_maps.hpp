#pragma once
// Hand-rolled generators for property tests: smooth random maps built from a
// few trigonometric modes with seeded coefficients.

#include <cmath>
#include <random>
#include <vector>

#include "btlab/maps.hpp"

namespace gen {

struct SmoothField {
  int n = 2;
  int d = 2;
  std::vector<double> freq;   // modes × n
  std::vector<double> phase;  // modes
  std::vector<double> amp;    // modes × d
  std::vector<double> offset; // d
  int modes = 0;

  void eval(const double* x, double* out) const {
    for (int c = 0; c < d; ++c) out[c] = offset[c];
    for (int k = 0; k < modes; ++k) {
      double arg = phase[k];
      for (int a = 0; a < n; ++a) arg += freq[k * n + a] * x[a];
      const double s = std::sin(arg);
      for (int c = 0; c < d; ++c) out[c] += amp[k * d + c] * s;
    }
  }
};

inline SmoothField smooth_field(std::mt19937_64& g, int n, int d, double amplitude, double max_freq = 4.0,
                                int modes = 4) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  SmoothField f;
  f.n = n;
  f.d = d;
  f.modes = modes;
  for (int k = 0; k < modes * n; ++k) f.freq.push_back(max_freq * u(g));
  for (int k = 0; k < modes; ++k) f.phase.push_back(3.14159 * u(g));
  for (int k = 0; k < modes * d; ++k) f.amp.push_back(amplitude * u(g) / modes);
  for (int c = 0; c < d; ++c) f.offset.push_back(u(g));
  return f;
}

inline btlab::DiscreteMap sample_field(btlab::GridPtr grid, const SmoothField& f) {
  return btlab::sample(grid, f.d, [&](const double* x, double* out) { f.eval(x, out); });
}

// Admissible map: a smooth field pushed radially onto the unit sphere at flat
// nodes, left as is elsewhere.
inline btlab::DiscreteMap admissible_map(btlab::GridPtr grid, const SmoothField& f) {
  btlab::DiscreteMap u = sample_field(grid, f);
  u.renormalize_flat();
  return u;
}

}  // namespace gen
