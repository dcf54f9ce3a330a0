#include "btlab/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "btlab/error.hpp"

namespace btlab {

const char* to_string(NodeMask mask) {
  switch (mask) {
    case NodeMask::outside: return "outside";
    case NodeMask::interior: return "interior";
    case NodeMask::flat_boundary: return "flat_boundary";
    case NodeMask::spherical_boundary: return "spherical_boundary";
  }
  return "unknown";
}

namespace {

int subsamples_per_axis(int n) {
  if (n <= 2) return 16;
  if (n == 3) return 8;
  return 4;
}

struct CellGeometry {
  double min_dist2 = 0.0;
  double max_dist2 = 0.0;
};

CellGeometry cell_distances(const std::vector<double>& x, double h) {
  CellGeometry c;
  for (double xi : x) {
    const double lo = xi - 0.5 * h;
    const double hi = xi + 0.5 * h;
    const double near = (lo <= 0.0 && hi >= 0.0) ? 0.0 : std::min(std::abs(lo), std::abs(hi));
    const double far = std::max(std::abs(lo), std::abs(hi));
    c.min_dist2 += near * near;
    c.max_dist2 += far * far;
  }
  return c;
}

// Fraction of the dual cell of x lying in {inner ≤ |y| ≤ r, yₙ ≥ 0 if half},
// by midpoint subsampling. The subsample offsets never hit yₙ = 0, so a flat
// face cell is split exactly in half.
double cut_fraction(const std::vector<double>& x, const GridParams& p) {
  const int n = p.n;
  const int s = subsamples_per_axis(n);
  std::vector<int> k(n, 0);
  std::vector<double> y(n);
  long inside = 0;
  long total = 0;
  const double r2 = p.r * p.r;
  const double in2 = p.inner_radius * p.inner_radius;
  while (true) {
    double d2 = 0.0;
    for (int a = 0; a < n; ++a) {
      y[a] = x[a] + p.h * ((k[a] + 0.5) / s - 0.5);
      d2 += y[a] * y[a];
    }
    bool in = d2 <= r2 && d2 >= in2;
    if (p.half && y[n - 1] < 0.0) in = false;
    inside += in ? 1 : 0;
    ++total;
    int a = n - 1;
    while (a >= 0 && ++k[a] == s) {
      k[a] = 0;
      --a;
    }
    if (a < 0) break;
  }
  return static_cast<double>(inside) / static_cast<double>(total);
}

}  // namespace

HalfBallGrid::HalfBallGrid(const GridParams& params) : params_(params) {
  const int n = params_.n;
  const double h = params_.h;
  const int m = static_cast<int>(std::floor(params_.r / h + 0.5)) + 1;
  lo_.assign(n, -m);
  cnt_.assign(n, 2 * m + 1);
  if (params_.half) {
    lo_[n - 1] = 0;
    cnt_[n - 1] = m + 1;
  }
  std::size_t box = 1;
  for (int a = 0; a < n; ++a) box *= static_cast<std::size_t>(cnt_[a]);
  box_to_node_.assign(box, -1);

  const double r2 = params_.r * params_.r;
  const double in2 = params_.inner_radius * params_.inner_radius;
  std::vector<int> idx(n);
  std::vector<double> x(n);
  std::vector<double> fraction;
  for (std::size_t b = 0; b < box; ++b) {
    std::size_t rem = b;
    for (int a = n - 1; a >= 0; --a) {
      idx[a] = lo_[a] + static_cast<int>(rem % cnt_[a]);
      rem /= cnt_[a];
    }
    for (int a = 0; a < n; ++a) x[a] = h * idx[a];
    const CellGeometry c = cell_distances(x, h);
    if (!(c.min_dist2 < r2)) continue;
    if (params_.inner_radius > 0.0 && !(c.max_dist2 > in2)) continue;
    double frac = 1.0;
    const bool straddles_face = params_.half && idx[n - 1] == 0;
    const bool fully_in = c.max_dist2 <= r2 && (params_.inner_radius <= 0.0 || c.min_dist2 >= in2);
    if (fully_in) {
      frac = straddles_face ? 0.5 : 1.0;
    } else {
      frac = cut_fraction(x, params_);
    }
    box_to_node_[b] = static_cast<std::int32_t>(mask_.size());
    index_.insert(index_.end(), idx.begin(), idx.end());
    mask_.push_back(NodeMask::spherical_boundary);
    fraction.push_back(frac);
  }

  const std::size_t count = mask_.size();
  const double hn = std::pow(h, n);
  weight_.resize(count);
  norm_.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    weight_[i] = hn * fraction[i];
    double d2 = 0.0;
    for (int a = 0; a < n; ++a) {
      const double xa = h * index_[i * n + a];
      d2 += xa * xa;
    }
    norm_[i] = std::sqrt(d2);
  }

  neighbors_.assign(count * n * 2, -1);
  for (std::size_t i = 0; i < count; ++i) {
    for (int a = 0; a < n; ++a) idx[a] = index_[i * n + a];
    for (int a = 0; a < n; ++a) {
      for (int dir = -1; dir <= 1; dir += 2) {
        idx[a] += dir;
        neighbors_[(i * n + a) * 2 + (dir > 0 ? 1 : 0)] = find(idx);
        idx[a] -= dir;
      }
    }
  }

  const double outer_cut = params_.r - 0.5 * h;
  const double inner_cut = params_.inner_radius > 0.0 ? params_.inner_radius + 0.5 * h : -1.0;
  for (std::size_t i = 0; i < count; ++i) {
    const double d = norm_[i];
    const bool clear = d < outer_cut && d > inner_cut;
    if (!clear) continue;
    if (params_.half && index_[i * n + n - 1] == 0) {
      mask_[i] = NodeMask::flat_boundary;
      continue;
    }
    bool all = true;
    for (int k = 0; k < 2 * n; ++k) all = all && neighbors_[i * 2 * n + k] >= 0;
    if (all) mask_[i] = NodeMask::interior;
  }
}

std::size_t HalfBallGrid::count(NodeMask m) const {
  if (m == NodeMask::outside) {
    std::size_t box = box_to_node_.size();
    return box - mask_.size();
  }
  return static_cast<std::size_t>(std::count(mask_.begin(), mask_.end(), m));
}

void HalfBallGrid::position(std::size_t node, double* out) const {
  for (int a = 0; a < params_.n; ++a) out[a] = coord(node, a);
}

std::vector<double> HalfBallGrid::position(std::size_t node) const {
  std::vector<double> x(params_.n);
  position(node, x.data());
  return x;
}

double HalfBallGrid::cell_fraction(std::size_t node) const {
  return weight_[node] / std::pow(params_.h, params_.n);
}

std::int64_t HalfBallGrid::find(std::span<const int> idx) const {
  std::size_t b = 0;
  for (int a = 0; a < params_.n; ++a) {
    const int k = idx[a] - lo_[a];
    if (k < 0 || k >= cnt_[a]) return -1;
    b = b * static_cast<std::size_t>(cnt_[a]) + static_cast<std::size_t>(k);
  }
  return box_to_node_[b];
}

std::int64_t HalfBallGrid::mirror(std::size_t node) const {
  std::vector<int> idx(index(node).begin(), index(node).end());
  idx.back() = -idx.back();
  return find(idx);
}

bool HalfBallGrid::in_closed_domain(std::size_t node) const {
  const double tol = 1e-12 * params_.r;
  const double d = norm_[node];
  if (d > params_.r + tol) return false;
  if (params_.inner_radius > 0.0 && d < params_.inner_radius - tol) return false;
  return true;
}

int HalfBallGrid::stencil(std::size_t node, int axis, std::int64_t ids[3], double coefs[3]) const {
  const double h = params_.h;
  const std::int64_t minus = neighbor(node, axis, -1);
  const std::int64_t plus = neighbor(node, axis, +1);
  if (minus >= 0 && plus >= 0) {
    ids[0] = plus;
    coefs[0] = 0.5 / h;
    ids[1] = minus;
    coefs[1] = -0.5 / h;
    return 2;
  }
  for (int dir : {+1, -1}) {
    const std::int64_t first = dir > 0 ? plus : minus;
    if (first < 0) continue;
    const std::int64_t second = neighbor(static_cast<std::size_t>(first), axis, dir);
    const double s = static_cast<double>(dir);
    if (second >= 0) {
      ids[0] = static_cast<std::int64_t>(node);
      coefs[0] = -1.5 * s / h;
      ids[1] = first;
      coefs[1] = 2.0 * s / h;
      ids[2] = second;
      coefs[2] = -0.5 * s / h;
      return 3;
    }
    ids[0] = static_cast<std::int64_t>(node);
    coefs[0] = -s / h;
    ids[1] = first;
    coefs[1] = s / h;
    return 2;
  }
  return 0;
}

GridPtr make_grid(int n, double r, double h, bool half) {
  if (n < 2) throw Error(ErrorCode::precondition, "grid dimension must be at least 2");
  if (!(r > 0.0)) throw Error(ErrorCode::precondition, "grid radius must be positive");
  if (!(h > 0.0)) throw Error(ErrorCode::precondition, "grid spacing must be positive");
  if (h > 0.5 * r) {
    std::ostringstream os;
    os << "spacing h=" << h << " too coarse for radius r=" << r << " (need h <= r/2)";
    throw Error(ErrorCode::precondition, os.str());
  }
  GridParams p;
  p.n = n;
  p.r = r;
  p.h = h;
  p.half = half;
  return std::make_shared<const HalfBallGrid>(p);
}

GridPtr make_annulus_grid(int n, double outer, double inner, double h, bool half) {
  if (!(inner > 0.0) || !(outer > inner)) {
    throw Error(ErrorCode::precondition, "annulus grid needs 0 < inner < outer");
  }
  if (h > 0.5 * inner) throw Error(ErrorCode::precondition, "annulus spacing must be at most inner/2");
  GridParams p;
  p.n = n;
  p.r = outer;
  p.h = h;
  p.half = half;
  p.inner_radius = inner;
  return std::make_shared<const HalfBallGrid>(p);
}

void validate(const AnnulusSpec& spec, int n) {
  if (static_cast<int>(spec.center.size()) != n) {
    throw Error(ErrorCode::precondition, "annulus center has wrong dimension");
  }
  if (!(spec.inner > 0.0)) throw Error(ErrorCode::precondition, "annulus inner radius must be positive");
  if (!(spec.inner < spec.outer)) {
    throw Error(ErrorCode::precondition, "annulus needs inner radius < outer radius");
  }
}

NodeSet annulus_mask(const HalfBallGrid& grid, const AnnulusSpec& spec) {
  const int n = grid.dim();
  validate(spec, n);
  NodeSet out;
  std::vector<double> x(n);
  for (std::size_t i = 0; i < grid.node_count(); ++i) {
    grid.position(i, x.data());
    if (spec.clipped && x[n - 1] < 0.0) continue;
    double d2 = 0.0;
    for (int a = 0; a < n; ++a) d2 += (x[a] - spec.center[a]) * (x[a] - spec.center[a]);
    const double d = std::sqrt(d2);
    if (d >= spec.inner && d < spec.outer) out.push_back(i);
  }
  return out;
}

NodeSet ball_mask(const HalfBallGrid& grid, std::span<const double> center, double radius) {
  const int n = grid.dim();
  NodeSet out;
  std::vector<double> x(n);
  const double r2 = radius * radius;
  for (std::size_t i = 0; i < grid.node_count(); ++i) {
    grid.position(i, x.data());
    double d2 = 0.0;
    for (int a = 0; a < n; ++a) d2 += (x[a] - center[a]) * (x[a] - center[a]);
    if (d2 < r2) out.push_back(i);
  }
  return out;
}

double unit_ball_volume(int n) {
  return std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n + 1.0);
}

double unit_sphere_area(int n) { return n * unit_ball_volume(n); }

double grid_volume(const HalfBallGrid& grid) {
  double v = 0.0;
  for (std::size_t i = 0; i < grid.node_count(); ++i) v += grid.weight(i);
  return v;
}

}  // namespace btlab
