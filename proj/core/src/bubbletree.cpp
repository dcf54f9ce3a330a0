#include "btlab/bubbletree.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>

#include "btlab/analytic.hpp"
#include "btlab/error.hpp"
#include "btlab/map_io.hpp"

namespace btlab {

namespace {

double dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

}  // namespace

Rescaled rescale(const DiscreteMap& u, std::span<const double> anchor, double lambda, double radius,
                 const MetricField::Function& metric, double min_scale_factor) {
  const HalfBallGrid& g = *u.grid();
  const int n = g.dim();
  const int d = u.target_dim();
  if (static_cast<int>(anchor.size()) != n) throw Error(ErrorCode::precondition, "anchor has the wrong dimension");
  if (!(lambda > 0.0)) throw Error(ErrorCode::precondition, "rescale needs λ > 0");
  if (lambda < g.spacing() * min_scale_factor) {
    std::ostringstream os;
    os << "scale " << format_double(lambda) << " is below " << format_double(min_scale_factor) << " grid spacings ("
       << format_double(g.spacing()) << ")";
    throw Error(ErrorCode::sub_resolution, os.str());
  }
  const bool half = g.half() && anchor[n - 1] == 0.0;
  GridPtr grid = make_grid(n, radius, g.spacing() / lambda, half);
  std::vector<double> a(anchor.begin(), anchor.end());
  std::vector<double> x(n);
  DiscreteMap v(grid, d);
  for (std::size_t i = 0; i < grid->node_count(); ++i) {
    for (int k = 0; k < n; ++k) x[k] = a[k] + lambda * grid->coord(i, k);
    if (interpolate(u, x, v.at(i).data())) continue;
    // Cut nodes of the window can sit past the source's last active layer;
    // pull them radially back inside the source ball.
    const double nx = std::sqrt(std::inner_product(x.begin(), x.end(), x.begin(), 0.0));
    const double lim = g.radius() * (1.0 - 1e-9);
    if (nx > lim)
      for (double& c : x) c *= lim / nx;
    if (!interpolate(u, x, v.at(i).data())) {
      throw Error(ErrorCode::precondition, "rescale window leaves the source grid");
    }
  }
  MetricField mf = metric ? MetricField::from_function(grid,
                                                       [&](const double* y, double* m) {
                                                         std::vector<double> xx(n);
                                                         for (int k = 0; k < n; ++k) xx[k] = a[k] + lambda * y[k];
                                                         metric(xx.data(), m);
                                                       })
                          : MetricField::euclidean(grid);
  return Rescaled{std::move(v), std::move(mf), std::move(a), lambda, radius};
}

std::vector<double> value_at_infinity(const DiscreteMap& omega, double width) {
  const HalfBallGrid& g = *omega.grid();
  const int d = omega.target_dim();
  const double from = (1.0 - width) * g.radius();
  std::vector<double> mean(d, 0.0);
  double wsum = 0.0;
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    if (g.norm(i) < from || !g.in_closed_domain(i)) continue;
    const auto v = omega.at(i);
    for (int c = 0; c < d; ++c) mean[c] += g.weight(i) * v[c];
    wsum += g.weight(i);
  }
  if (!(wsum > 0.0)) throw Error(ErrorCode::precondition, "window has no nodes in its outer annulus");
  for (double& c : mean) c /= wsum;
  return mean;
}

DiscreteMap subtract_bubbles(const DiscreteMap& u, std::span<const BubbleWindow> windows) {
  DiscreteMap w = u;
  const HalfBallGrid& g = *u.grid();
  const int n = g.dim();
  const int d = u.target_dim();
  std::vector<double> y(n), val(d);
  for (const BubbleWindow& bw : windows) {
    if (bw.omega.target_dim() != d) throw Error(ErrorCode::precondition, "window has the wrong target dimension");
    const double R = bw.omega.grid()->radius();
    for (std::size_t i = 0; i < g.node_count(); ++i) {
      double rho2 = 0.0;
      for (int k = 0; k < n; ++k) {
        y[k] = (g.coord(i, k) - bw.anchor[k]) / bw.scale;
        rho2 += y[k] * y[k];
      }
      const double rho = std::sqrt(rho2);
      if (rho >= R) continue;
      const double s = rho <= 0.5 * R ? 1.0 : std::log(R / rho) / std::log(2.0);
      if (!interpolate(bw.omega, y, val.data())) continue;
      auto dst = w.at(i);
      for (int c = 0; c < d; ++c) dst[c] -= s * (val[c] - bw.infinity[c]);
    }
  }
  return w;
}

void validate(const SequenceSpec& spec) {
  if (spec.k.empty()) throw Error(ErrorCode::precondition, "sequence has no indices");
  if (spec.alpha.size() != spec.k.size() || spec.maps.size() != spec.k.size()) {
    throw Error(ErrorCode::precondition, "sequence index, exponent and map counts differ");
  }
  for (std::size_t i = 0; i < spec.size(); ++i) {
    if (!(spec.alpha[i] >= 0.0)) throw Error(ErrorCode::precondition, "exponent offsets α_k must be nonnegative");
    if (i > 0 && spec.alpha[i] > spec.alpha[i - 1]) {
      throw Error(ErrorCode::precondition, "exponent offsets α_k must be nonincreasing");
    }
    if (i > 0 && spec.k[i] <= spec.k[i - 1]) throw Error(ErrorCode::precondition, "indices k must increase");
    if (spec.maps[i].grid()->dim() != spec.n) throw Error(ErrorCode::precondition, "map dimension differs from n");
  }
  if (spec.energy_bound > 0.0) {
    for (std::size_t i = 0; i < spec.size(); ++i) {
      const double e = p_energy(spec.maps[i], metric_on(spec, spec.maps[i].grid()), spec.p(i)).total;
      if (e > spec.energy_bound * (1.0 + 1e-12)) {
        std::ostringstream os;
        os << "E_p(u_k) = " << format_double(e) << " exceeds the bound " << format_double(spec.energy_bound)
           << " at k = " << spec.k[i];
        throw Error(ErrorCode::precondition, os.str());
      }
    }
  }
}

MetricField metric_on(const SequenceSpec& spec, const GridPtr& grid) {
  return spec.metric ? MetricField::from_function(grid, spec.metric) : MetricField::euclidean(grid);
}

BubblePrototype chart_bubble(int n, bool flipped) {
  BubblePrototype b;
  b.name = flipped ? "-chart" : "chart";
  b.d = n;
  b.at_infinity.assign(n, 0.0);
  b.at_infinity[n - 1] = flipped ? -1.0 : 1.0;
  const double sign = flipped ? -1.0 : 1.0;
  b.omega = [n, sign](const double* y, double* out) {
    const Vec v = half_space_chart_inv(std::span<const double>(y, n));
    for (int c = 0; c < n; ++c) out[c] = sign * v[c];
  };
  return b;
}

SequenceSpec make_synthetic_sequence(const SyntheticSpec& s) {
  const std::size_t count = s.k.size();
  if (count == 0) throw Error(ErrorCode::precondition, "sequence has no indices");
  if (s.alpha.size() != count || s.spacing.size() != count) {
    throw Error(ErrorCode::precondition, "per-index exponent and spacing lists must match the index list");
  }
  if (!s.background) throw Error(ErrorCode::precondition, "background map is required");
  for (const SyntheticBubble& b : s.bubbles) {
    if (b.centers.size() != count || b.scales.size() != count) {
      throw Error(ErrorCode::precondition, "bubble centers and scales must be given per index");
    }
    if (b.prototype.d != s.d) throw Error(ErrorCode::precondition, "prototype target dimension differs");
  }
  if (s.superposition == Superposition::complex_product && (s.n != 2 || s.d != 2)) {
    throw Error(ErrorCode::precondition, "the complex product superposition needs n = d = 2");
  }
  SequenceSpec out;
  out.n = s.n;
  out.k = s.k;
  out.alpha = s.alpha;
  const int n = s.n;
  const int d = s.d;
  for (std::size_t i = 0; i < count; ++i) {
    for (const SyntheticBubble& b : s.bubbles) {
      if (b.scales[i] < s.spacing[i] * s.min_scale_factor) {
        std::ostringstream os;
        os << "bubble scale " << format_double(b.scales[i]) << " at k = " << s.k[i] << " is below "
           << format_double(s.min_scale_factor) << " grid spacings";
        throw Error(ErrorCode::sub_resolution, os.str());
      }
    }
    for (std::size_t a = 0; a < s.bubbles.size(); ++a)
      for (std::size_t b = a + 1; b < s.bubbles.size(); ++b) {
        const auto& A = s.bubbles[a];
        const auto& B = s.bubbles[b];
        if (A.scales[i] == B.scales[i] && A.centers[i] == B.centers[i]) {
          std::ostringstream os;
          os << "bubbles " << a << " and " << b << " coincide at k = " << s.k[i] << " (not separated)";
          out.warnings.push_back(os.str());
        }
      }
    GridPtr grid = make_grid(n, s.r, s.spacing[i], true);
    const bool product = s.superposition == Superposition::complex_product;
    DiscreteMap u = sample(grid, d, [&](const double* x, double* val) {
      s.background(x, val);
      std::vector<double> y(n), w(d);
      for (const SyntheticBubble& b : s.bubbles) {
        for (int k = 0; k < n; ++k) y[k] = (x[k] - b.centers[i][k]) / b.scales[i];
        if (y[n - 1] < 0.0) y[n - 1] = -y[n - 1];
        b.prototype.omega(y.data(), w.data());
        if (product) {
          // val · w · conj(ω(∞))
          const double* e = b.prototype.at_infinity.data();
          const double fr = w[0] * e[0] + w[1] * e[1];
          const double fi = w[1] * e[0] - w[0] * e[1];
          const double re = val[0] * fr - val[1] * fi;
          val[1] = val[0] * fi + val[1] * fr;
          val[0] = re;
        } else {
          for (int c = 0; c < d; ++c) val[c] += w[c] - b.prototype.at_infinity[c];
        }
      }
    });
    u.renormalize_flat();
    out.maps.push_back(std::move(u));
  }
  DiscreteMap limit = sample(out.maps.back().grid(), d, s.background);
  limit.renormalize_flat();
  out.limit = std::move(limit);
  for (std::size_t i = 0; i < count; ++i) {
    out.energy_bound =
        std::max(out.energy_bound, p_energy(out.maps[i], MetricField::euclidean(out.maps[i].grid()), out.p(i)).total);
  }
  return out;
}

double reference_bubble_energy(int n) {
  static std::mutex m;
  static std::map<int, double> cache;
  std::lock_guard<std::mutex> lock(m);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  const double h = n == 2 ? 1.0 / 64 : n == 3 ? 1.0 / 16 : 1.0 / 8;
  GridPtr g = make_grid(n, 1.0, h, false);
  const std::vector<double> a(n, 0.0);
  const double e = p_energy(sample_mobius(g, a), MetricField::euclidean(g), n).total;
  cache[n] = e;
  return e;
}

double separation_ratio(std::span<const double> a1, double l1, std::span<const double> a2, double l2) {
  return std::max({l1 / l2, l2 / l1, dist(a1, a2) / (l1 + l2)});
}

SeparationMatrix separation_check(std::span<const BubbleRecord> records, double threshold) {
  const std::size_t m = records.size();
  SeparationMatrix sm;
  sm.ratio.assign(m, std::vector<double>(m, INFINITY));
  sm.pass.assign(m, std::vector<int>(m, 1));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      if (i == j) continue;
      const BubbleRecord& A = records[i];
      const BubbleRecord& B = records[j];
      std::vector<double> ratios;
      for (std::size_t s = 0; s < A.k.size(); ++s) {
        const auto it = std::find(B.k.begin(), B.k.end(), A.k[s]);
        if (it == B.k.end()) continue;
        const std::size_t t = static_cast<std::size_t>(it - B.k.begin());
        ratios.push_back(separation_ratio(A.centers[s], A.scales[s], B.centers[t], B.scales[t]));
      }
      if (ratios.size() < 2) {
        sm.ratio[i][j] = ratios.empty() ? NAN : ratios.back();
        sm.pass[i][j] = 0;
        continue;
      }
      sm.ratio[i][j] = ratios.back();
      bool ok = ratios.back() > threshold;
      const std::size_t from = ratios.size() >= 3 ? ratios.size() - 3 : 0;
      for (std::size_t s = from + 1; s < ratios.size(); ++s) ok = ok && ratios[s] > ratios[s - 1];
      sm.pass[i][j] = ok ? 1 : 0;
    }
  return sm;
}

double lambda_star(std::span<const double> scales, std::span<const double> exponents, int n) {
  if (scales.size() != exponents.size() || scales.empty()) {
    throw Error(ErrorCode::precondition, "scale and exponent sequences must be nonempty and of equal length");
  }
  const std::size_t from = scales.size() >= 3 ? scales.size() - 3 : 0;
  double best = INFINITY;
  for (std::size_t i = from; i < scales.size(); ++i) best = std::min(best, std::pow(scales[i], n - exponents[i]));
  return best;
}

double neck_energy(const SequenceSpec& spec, const BubbleRecord& record, double K, double eta) {
  if (record.k.empty()) throw Error(ErrorCode::precondition, "record has no detections");
  const auto it = std::find(spec.k.begin(), spec.k.end(), record.k.back());
  if (it == spec.k.end()) throw Error(ErrorCode::precondition, "record index missing from the sequence");
  const std::size_t i = static_cast<std::size_t>(it - spec.k.begin());
  const double inner = K * record.scales.back();
  if (inner >= eta) return 0.0;
  const DiscreteMap& u = spec.maps[i];
  const HalfBallGrid& g = *u.grid();
  const std::vector<double>& a = record.centers.back();
  NodeSet nodes;
  std::vector<double> x(g.dim());
  for (std::size_t j = 0; j < g.node_count(); ++j) {
    g.position(j, x.data());
    const double r = dist(x, a);
    if (r >= inner && r < eta) nodes.push_back(j);
  }
  return energy_on(u, metric_on(spec, u.grid()), spec.p(i), nodes);
}

}  // namespace btlab
