#include "btlab/maps.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "btlab/error.hpp"

namespace btlab {

DiscreteMap::DiscreteMap(GridPtr grid, int d) : grid_(std::move(grid)), d_(d) {
  if (d < 1) throw Error(ErrorCode::precondition, "target dimension must be positive");
  values_.assign(grid_->node_count() * d, 0.0);
}

DiscreteMap::DiscreteMap(GridPtr grid, int d, std::vector<double> values)
    : grid_(std::move(grid)), d_(d), values_(std::move(values)) {
  if (d < 1) throw Error(ErrorCode::precondition, "target dimension must be positive");
  if (values_.size() != grid_->node_count() * static_cast<std::size_t>(d)) {
    throw Error(ErrorCode::precondition, "map values do not match grid size");
  }
}

double DiscreteMap::norm(std::size_t node) const {
  double s = 0.0;
  for (double v : at(node)) s += v * v;
  return std::sqrt(s);
}

bool DiscreteMap::is_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

bool DiscreteMap::is_admissible(double tol) const {
  if (!is_finite()) return false;
  for (std::size_t i = 0; i < node_count(); ++i) {
    if (grid_->mask(i) != NodeMask::flat_boundary) continue;
    if (std::abs(norm(i) - 1.0) > tol) return false;
  }
  return true;
}

void DiscreteMap::renormalize_flat() {
  for (std::size_t i = 0; i < node_count(); ++i) {
    if (grid_->mask(i) != NodeMask::flat_boundary) continue;
    const double s = norm(i);
    if (!(s > 0.0)) {
      std::ostringstream os;
      os << "cannot renormalize zero value at flat node " << i;
      throw Error(ErrorCode::degenerate_projection, os.str());
    }
    for (double& v : at(i)) v /= s;
  }
}

DiscreteMap sample(GridPtr grid, int d, const PointFunction& f) {
  DiscreteMap u(grid, d);
  std::vector<double> x(grid->dim());
  for (std::size_t i = 0; i < grid->node_count(); ++i) {
    grid->position(i, x.data());
    f(x.data(), u.at(i).data());
  }
  return u;
}

DiscreteMap constant_map(GridPtr grid, std::span<const double> value) {
  const int d = static_cast<int>(value.size());
  DiscreteMap u(grid, d);
  for (std::size_t i = 0; i < grid->node_count(); ++i) std::copy(value.begin(), value.end(), u.at(i).begin());
  return u;
}

namespace {

// du at one node into block[n·d].
void node_gradient(const DiscreteMap& u, std::size_t node, double* block) {
  const HalfBallGrid& g = *u.grid();
  const int n = g.dim();
  const int d = u.target_dim();
  const double* v = u.values().data();
  std::int64_t ids[3];
  double coefs[3];
  for (int a = 0; a < n; ++a) {
    double* row = block + a * d;
    std::fill(row, row + d, 0.0);
    const int m = g.stencil(node, a, ids, coefs);
    // Stencil weights sum to zero; differencing against the centre value
    // keeps constants exactly in the kernel.
    const double* v0 = v + node * d;
    for (int s = 0; s < m; ++s) {
      const double* w = v + ids[s] * d;
      for (int c = 0; c < d; ++c) row[c] += coefs[s] * (w[c] - v0[c]);
    }
  }
}

void check_metric(const DiscreteMap& u, const MetricField& metric) {
  if (metric.grid()->node_count() != u.node_count() || metric.dim() != u.grid()->dim()) {
    throw Error(ErrorCode::precondition, "metric and map live on different grids");
  }
}

// Shared assembly: energy with regularization delta; optional density and
// gradient outputs. Node contributions are summed in node order.
double assemble(const DiscreteMap& u, const MetricField& metric, double p, double delta, std::vector<double>* grad,
                std::vector<double>* density) {
  check_metric(u, metric);
  const HalfBallGrid& g = *u.grid();
  const int n = g.dim();
  const int d = u.target_dim();
  const std::size_t count = g.node_count();
  std::vector<double> block(n * d);
  std::vector<double> flux(n * d);
  if (grad) grad->assign(count * d, 0.0);
  if (density) density->assign(count, 0.0);
  const double d2 = delta * delta;
  const double dp = delta > 0.0 ? std::pow(delta, p) : 0.0;
  const bool quadratic = p == 2.0;
  double total = 0.0;
  std::int64_t ids[3];
  double coefs[3];
  for (std::size_t i = 0; i < count; ++i) {
    node_gradient(u, i, block.data());
    const double s2 = metric.norm2(i, block.data(), d);
    const double base = s2 + d2;
    double f;
    double fprime;  // d f / d(s2)
    if (quadratic) {
      f = s2;
      fprime = 1.0;
    } else if (base > 0.0) {
      const double pw = std::pow(base, 0.5 * p - 1.0);
      f = pw * base - dp;
      fprime = 0.5 * p * pw;
    } else {
      f = 0.0;
      fprime = 0.0;
    }
    const double wv = g.weight(i) * metric.sqrt_det(i);
    total += wv * f;
    if (density) (*density)[i] = quadratic ? s2 : std::pow(s2, 0.5 * p);
    if (!grad || wv == 0.0 || fprime == 0.0) continue;
    // ∂/∂(∂ₐuᶜ) of wv·f = wv·fprime·2·g^{ab}∂_b uᶜ
    if (metric.is_euclidean()) {
      for (int k = 0; k < n * d; ++k) flux[k] = 2.0 * wv * fprime * block[k];
    } else {
      const double* gi = metric.g_inv(i);
      for (int a = 0; a < n; ++a)
        for (int c = 0; c < d; ++c) {
          double s = 0.0;
          for (int b = 0; b < n; ++b) s += gi[a * n + b] * block[b * d + c];
          flux[a * d + c] = 2.0 * wv * fprime * s;
        }
    }
    for (int a = 0; a < n; ++a) {
      const int m = g.stencil(i, a, ids, coefs);
      for (int s = 0; s < m; ++s) {
        double* out = grad->data() + ids[s] * d;
        for (int c = 0; c < d; ++c) out[c] += coefs[s] * flux[a * d + c];
      }
    }
  }
  return total;
}

Residual residual_impl(const DiscreteMap& u, const MetricField& metric, double p, bool hold_spherical) {
  Residual r;
  assemble(u, metric, p, 0.0, &r.vec, nullptr);
  const HalfBallGrid& g = *u.grid();
  const int d = u.target_dim();
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    double* v = r.vec.data() + i * d;
    const NodeMask m = g.mask(i);
    if (m == NodeMask::spherical_boundary && hold_spherical) {
      std::fill(v, v + d, 0.0);
    } else if (m == NodeMask::flat_boundary) {
      const double s = u.norm(i);
      if (!(s > 0.0)) {
        std::ostringstream os;
        os << "|u| = 0 at flat boundary node " << i;
        throw Error(ErrorCode::degenerate_projection, os.str());
      }
      const auto ui = u.at(i);
      double dot = 0.0;
      for (int c = 0; c < d; ++c) dot += v[c] * ui[c];
      for (int c = 0; c < d; ++c) v[c] -= dot * ui[c] / (s * s);
    }
  }
  r.norm = residual_norm(g, r.vec, d);
  return r;
}

}  // namespace

std::vector<double> gradient(const DiscreteMap& u) {
  const HalfBallGrid& g = *u.grid();
  const int n = g.dim();
  const int d = u.target_dim();
  std::vector<double> out(g.node_count() * n * d);
  for (std::size_t i = 0; i < g.node_count(); ++i) node_gradient(u, i, out.data() + i * n * d);
  return out;
}

EnergyReport p_energy(const DiscreteMap& u, const MetricField& metric, double p) {
  if (!(p >= 2.0)) throw Error(ErrorCode::precondition, "energy exponent must be at least 2");
  EnergyReport r;
  r.p = p;
  assemble(u, metric, p, 0.0, nullptr, &r.density);
  const HalfBallGrid& g = *u.grid();
  double total = 0.0;
  for (std::size_t i = 0; i < g.node_count(); ++i) total += r.density[i] * g.weight(i) * metric.sqrt_det(i);
  r.total = total;
  return r;
}

double energy_on(const DiscreteMap& u, const MetricField& metric, double p, const NodeSet& nodes) {
  check_metric(u, metric);
  const HalfBallGrid& g = *u.grid();
  const int n = g.dim();
  const int d = u.target_dim();
  std::vector<double> block(n * d);
  double total = 0.0;
  for (std::size_t i : nodes) {
    node_gradient(u, i, block.data());
    const double s2 = metric.norm2(i, block.data(), d);
    total += std::pow(s2, 0.5 * p) * g.weight(i) * metric.sqrt_det(i);
  }
  return total;
}

double local_energy(const DiscreteMap& u, const MetricField& metric, double p, std::span<const double> center,
                    double radius) {
  if (!(radius > 0.0)) return 0.0;
  return energy_on(u, metric, p, ball_mask(*u.grid(), center, radius));
}

double regularized_energy(const DiscreteMap& u, const MetricField& metric, double p, double delta,
                          std::vector<double>* grad) {
  return assemble(u, metric, p, delta, grad, nullptr);
}

double residual_norm(const HalfBallGrid& g, const std::vector<double>& vec, int d) {
  const double floor_w = 1e-3 * std::pow(g.spacing(), g.dim());
  double s = 0.0;
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    double e = 0.0;
    for (int c = 0; c < d; ++c) e += vec[i * d + c] * vec[i * d + c];
    if (e == 0.0) continue;
    s += e / std::max(g.weight(i), floor_w);
  }
  return std::sqrt(s);
}

Residual weak_residual(const DiscreteMap& u, const MetricField& metric, double p) {
  return residual_impl(u, metric, p, true);
}

Residual weak_residual_free(const DiscreteMap& u, const MetricField& metric, double p) {
  return residual_impl(u, metric, p, false);
}

MaxPrincipleResult max_principle_check(const DiscreteMap& u, double tol) {
  MaxPrincipleResult r;
  double worst = -1.0;
  for (std::size_t i = 0; i < u.node_count(); ++i) {
    if (!u.grid()->in_closed_domain(i)) continue;
    const double s = u.norm(i);
    if (s > worst) {
      worst = s;
      r.worst_node = i;
    }
  }
  r.worst_norm = std::max(worst, 0.0);
  r.ok = !(worst > 1.0 + tol);
  return r;
}

bool interpolate(const DiscreteMap& u, std::span<const double> xin, double* out) {
  const HalfBallGrid& g = *u.grid();
  const int n = g.dim();
  const int d = u.target_dim();
  const double h = g.spacing();
  std::vector<double> x(xin.begin(), xin.end());
  if (g.half() && x[n - 1] < 0.0) x[n - 1] = -x[n - 1];
  std::vector<int> base(n);
  std::vector<double> t(n);
  for (int a = 0; a < n; ++a) {
    const double s = x[a] / h;
    const double f = std::floor(s);
    base[a] = static_cast<int>(f);
    t[a] = s - f;
    if (t[a] > 1.0 - 1e-12) {
      base[a] += 1;
      t[a] = 0.0;
    } else if (t[a] < 1e-12) {
      t[a] = 0.0;
    }
  }
  std::fill(out, out + d, 0.0);
  double wsum = 0.0;
  std::vector<int> idx(n);
  for (int corner = 0; corner < (1 << n); ++corner) {
    double w = 1.0;
    for (int a = 0; a < n; ++a) {
      const int bit = (corner >> a) & 1;
      idx[a] = base[a] + bit;
      w *= bit ? t[a] : 1.0 - t[a];
    }
    if (w == 0.0) continue;
    const std::int64_t k = g.find(idx);
    if (k < 0) continue;
    const auto v = u.at(static_cast<std::size_t>(k));
    for (int c = 0; c < d; ++c) out[c] += w * v[c];
    wsum += w;
  }
  if (!(wsum > 0.0)) return false;
  for (int c = 0; c < d; ++c) out[c] /= wsum;
  return true;
}

double oscillation(const DiscreteMap& u) {
  const int d = u.target_dim();
  std::vector<double> lo(d, INFINITY);
  std::vector<double> hi(d, -INFINITY);
  for (std::size_t i = 0; i < u.node_count(); ++i) {
    const auto v = u.at(i);
    for (int c = 0; c < d; ++c) {
      lo[c] = std::min(lo[c], v[c]);
      hi[c] = std::max(hi[c], v[c]);
    }
  }
  double s = 0.0;
  for (int c = 0; c < d; ++c) s += (hi[c] - lo[c]) * (hi[c] - lo[c]);
  return std::sqrt(s);
}

}  // namespace btlab
