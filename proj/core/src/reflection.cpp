#include "btlab/reflection.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "btlab/analytic.hpp"
#include "btlab/error.hpp"
#include "btlab/map_io.hpp"

namespace btlab {

namespace {

// dσ g dσ for dσ = diag(1, …, 1, −1): flips the sign of the mixed entries
// in the last row and column.
void pull_back_sigma(const double* g, double* out, int n) {
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      const bool flip = (a == n - 1) != (b == n - 1);
      out[a * n + b] = flip ? -g[a * n + b] : g[a * n + b];
    }
}

double max_entry_diff(const double* a, const double* b, int len) {
  double m = 0.0;
  for (int k = 0; k < len; ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

std::int64_t upper_source(const HalfBallGrid& half, const HalfBallGrid& full, std::size_t i, bool* lower) {
  const int n = full.dim();
  std::vector<int> idx(full.index(i).begin(), full.index(i).end());
  *lower = idx[n - 1] < 0;
  if (*lower) idx[n - 1] = -idx[n - 1];
  return half.find(idx);
}

}  // namespace

MetricReflection reflect_metric(const MetricField& g, double radius) {
  const HalfBallGrid& half = *g.grid();
  if (!half.half()) throw Error(ErrorCode::precondition, "metric reflection needs a half-ball grid");
  const int n = half.dim();
  const int nn = n * n;
  if (radius <= 0.0) radius = half.radius();
  if (radius > half.radius() * (1.0 + 1e-12)) {
    throw Error(ErrorCode::precondition, "reflection radius exceeds the grid radius");
  }
  GridPtr full = make_grid(n, radius, half.spacing(), false);
  std::vector<double> values(full->node_count() * nn);
  for (std::size_t i = 0; i < full->node_count(); ++i) {
    bool lower = false;
    const std::int64_t k = upper_source(half, *full, i, &lower);
    if (k < 0) throw Error(ErrorCode::precondition, "reflected node missing from the half-ball grid");
    const double* src = g.g(static_cast<std::size_t>(k));
    if (lower) {
      pull_back_sigma(src, values.data() + i * nn, n);
    } else {
      std::copy_n(src, nn, values.data() + i * nn);
    }
  }
  MetricReflection r{MetricField::from_values(full, std::move(values))};

  // ‖g‖_{C¹} on the upper half of the reflected ball
  const double hs = half.spacing();
  std::int64_t ids[3];
  double coefs[3];
  double sup_g = 0.0;
  double sup_dg = 0.0;
  for (std::size_t i = 0; i < half.node_count(); ++i) {
    if (!half.in_closed_domain(i) || half.norm(i) > radius) continue;
    const double* gi = g.g(i);
    for (int k = 0; k < nn; ++k) sup_g = std::max(sup_g, std::abs(gi[k]));
    for (int a = 0; a < n; ++a) {
      const int m = half.stencil(i, a, ids, coefs);
      for (int k = 0; k < nn; ++k) {
        double s = 0.0;
        for (int t = 0; t < m; ++t) s += coefs[t] * (g.g(static_cast<std::size_t>(ids[t]))[k] - gi[k]);
        sup_dg = std::max(sup_dg, std::abs(s));
      }
    }
  }
  r.c1_norm = sup_g + sup_dg;

  // Brute-force difference quotients over pairs within two spacings; each
  // unordered pair is visited once via lexicographically positive offsets.
  const HalfBallGrid& fg = *full;
  std::vector<std::vector<int>> offsets;
  {
    std::vector<int> o(n, -2);
    while (true) {
      int norm2 = 0;
      for (int v : o) norm2 += v * v;
      int first = 0;
      for (int v : o)
        if (v != 0) {
          first = v;
          break;
        }
      if (norm2 > 0 && norm2 <= 4 && first > 0) offsets.push_back(o);
      int a = n - 1;
      while (a >= 0 && ++o[a] > 2) {
        o[a] = -2;
        --a;
      }
      if (a < 0) break;
    }
  }
  std::vector<int> idx(n);
  for (std::size_t i = 0; i < fg.node_count(); ++i) {
    for (const auto& o : offsets) {
      int norm2 = 0;
      for (int a = 0; a < n; ++a) {
        idx[a] = fg.index(i)[a] + o[a];
        norm2 += o[a] * o[a];
      }
      const std::int64_t j = fg.find(idx);
      if (j < 0) continue;
      const double q = max_entry_diff(r.h.g(i), r.h.g(static_cast<std::size_t>(j)), nn) / (hs * std::sqrt(norm2));
      r.lipschitz = std::max(r.lipschitz, q);
    }
    if (fg.index(i)[n - 1] != 1) continue;
    const std::int64_t m = fg.mirror(i);
    if (m >= 0) r.junction_jump = std::max(r.junction_jump, max_entry_diff(r.h.g(i), r.h.g(m), nn));
  }
  return r;
}

ReflectedPair reflect_map(const DiscreteMap& u, const MetricField& metric, double p, const ReflectOptions& options) {
  const HalfBallGrid& half = *u.grid();
  if (!half.half()) throw Error(ErrorCode::precondition, "reflection needs a map on a half-ball grid");
  if (metric.grid() != u.grid()) throw Error(ErrorCode::precondition, "metric and map live on different grids");
  if (!(p >= 2.0)) throw Error(ErrorCode::precondition, "exponent p must be at least 2");
  const int n = half.dim();
  const int d = u.target_dim();
  const double hs = half.spacing();

  // Largest radius R (from the grid radius down by the shrink factor) with
  // |u| > 1/2 at every upper node whose dual cell meets B(0, R).
  double radius = half.radius();
  std::int64_t offender = -1;
  while (true) {
    offender = -1;
    for (std::size_t i = 0; i < half.node_count(); ++i) {
      if (half.norm(i) > radius + 0.5 * hs * std::sqrt(n)) continue;
      if (!(u.norm(i) > 0.5)) {
        offender = static_cast<std::int64_t>(i);
        break;
      }
    }
    if (offender < 0) break;
    const double next = radius * options.shrink;
    if (!(options.shrink < 1.0) || next < options.min_radius_cells * hs) {
      const auto x = half.position(static_cast<std::size_t>(offender));
      std::ostringstream os;
      os << "|u| = " << format_double(u.norm(static_cast<std::size_t>(offender))) << " <= 1/2 at node "
         << offender << " (x = (";
      for (int a = 0; a < n; ++a) os << (a ? ", " : "") << format_double(x[a]);
      os << ")), no admissible reflection radius";
      throw Error(ErrorCode::precondition, os.str());
    }
    radius = next;
  }

  MetricReflection mr = reflect_metric(metric, radius);
  const GridPtr full = mr.h.grid();
  ReflectedPair pair{DiscreteMap(full, d), std::move(mr.h), std::vector<double>(full->node_count(), 1.0), radius};
  for (std::size_t i = 0; i < full->node_count(); ++i) {
    bool lower = false;
    const std::int64_t k = upper_source(half, *full, i, &lower);
    const auto src = u.at(static_cast<std::size_t>(k));
    auto dst = pair.v.at(i);
    if (!lower) {
      std::copy(src.begin(), src.end(), dst.begin());
      continue;
    }
    const Vec q = inversion(src);
    std::copy(q.begin(), q.end(), dst.begin());
    double s2 = 0.0;
    for (double c : src) s2 += c * c;
    pair.m[i] = std::pow(s2, p);
  }
  return pair;
}

GrowthReport residual_growth_check(const ReflectedPair& pair, double p) {
  const DiscreteMap& v = pair.v;
  const HalfBallGrid& g = *v.grid();
  const int n = g.dim();
  const int d = v.target_dim();
  std::vector<double> grad;
  regularized_energy(v, pair.h, p, 0.0, &grad);
  const std::vector<double> dv = gradient(v);
  GrowthReport r;
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    if (g.mask(i) != NodeMask::interior) continue;
    double op2 = 0.0;
    for (int c = 0; c < d; ++c) op2 += grad[i * d + c] * grad[i * d + c];
    const double op = std::sqrt(op2) / (p * g.weight(i) * pair.h.sqrt_det(i));
    const double s = std::pow(pair.h.norm2(i, dv.data() + i * n * d, d), 0.5 * p);
    const double ratio = op / std::max(s, 1e-8);
    if (ratio > r.max_ratio) {
      r.max_ratio = ratio;
      r.worst_node = i;
    }
    const int last = g.index(i)[n - 1];
    if (last > 0) r.max_ratio_upper = std::max(r.max_ratio_upper, ratio);
    if (last < 0) r.max_ratio_lower = std::max(r.max_ratio_lower, ratio);
  }
  return r;
}

void write_reflected(const ReflectedPair& pair, const std::filesystem::path& prefix) {
  const GridPtr& grid = pair.v.grid();
  const int n = grid->dim();
  std::vector<double> hv(grid->node_count() * n * n);
  for (std::size_t i = 0; i < grid->node_count(); ++i) std::copy_n(pair.h.g(i), n * n, hv.data() + i * n * n);
  write_map(prefix.string() + ".v.map", pair.v);
  write_map(prefix.string() + ".h.map", DiscreteMap(grid, n * n, std::move(hv)));
  write_map(prefix.string() + ".m.map", DiscreteMap(grid, 1, pair.m));
}

ReflectedPair read_reflected(const std::filesystem::path& prefix) {
  DiscreteMap v = read_map(prefix.string() + ".v.map");
  DiscreteMap h = read_map(prefix.string() + ".h.map");
  DiscreteMap m = read_map(prefix.string() + ".m.map");
  const GridParams& pv = v.grid()->params();
  auto same = [&pv](const DiscreteMap& other) {
    const GridParams& q = other.grid()->params();
    return q.n == pv.n && q.r == pv.r && q.h == pv.h && q.half == pv.half;
  };
  const int n = pv.n;
  if (!same(h) || !same(m) || h.target_dim() != n * n || m.target_dim() != 1) {
    throw Error(ErrorCode::parse, "reflected pair files describe different grids");
  }
  // One shared grid object for all three fields.
  DiscreteMap hv(v.grid(), n * n, h.values());
  ReflectedPair pair{std::move(v), MetricField::from_values(hv.grid(), hv.values()), m.values(), pv.r};
  return pair;
}

}  // namespace btlab
