#include "btlab/degree.hpp"

#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

#include "btlab/error.hpp"
#include "btlab/map_io.hpp"

namespace btlab {

namespace {

using P3 = std::array<double, 3>;

double wrap(double a) {
  while (a > std::numbers::pi) a -= 2.0 * std::numbers::pi;
  while (a <= -std::numbers::pi) a += 2.0 * std::numbers::pi;
  return a;
}

P3 unit3(const double* v) {
  const double s = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  return {v[0] / s, v[1] / s, v[2] / s};
}

double det3(const P3& a, const P3& b, const P3& c) {
  return a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0]) +
         a[2] * (b[0] * c[1] - b[1] * c[0]);
}

double dot3(const P3& a, const P3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

// Signed solid angle of the spherical triangle with unit vertices a, b, c.
double solid_angle(const P3& a, const P3& b, const P3& c) {
  return 2.0 * std::atan2(det3(a, b, c), 1.0 + dot3(a, b) + dot3(b, c) + dot3(c, a));
}

void require_trace(double norm, std::size_t where) {
  if (!(norm >= 0.5)) {
    std::ostringstream os;
    os << "|u| = " << format_double(norm) << " < 1/2 on the boundary trace (sample " << where << ")";
    throw Error(ErrorCode::precondition, os.str());
  }
}

DegreeResult finish(double raw, double closed) {
  DegreeResult r{std::lround(closed), raw};
  if (std::abs(raw - static_cast<double>(r.value)) > 0.1) {
    std::ostringstream os;
    os << "raw degree " << format_double(raw) << " is not within 0.1 of an integer";
    throw Error(ErrorCode::unresolved_degree, os.str());
  }
  return r;
}

DegreeResult face_degree_2d(const DiscreteMap& u) {
  const HalfBallGrid& g = *u.grid();
  std::vector<double> theta;
  // flat nodes come in increasing x₁ order (lexicographic numbering)
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    if (g.mask(i) != NodeMask::flat_boundary) continue;
    require_trace(u.norm(i), i);
    theta.push_back(std::atan2(u.at(i)[1], u.at(i)[0]));
  }
  if (theta.size() < 2) throw Error(ErrorCode::precondition, "flat face has fewer than two nodes");
  double sum = 0.0;
  for (std::size_t s = 1; s < theta.size(); ++s) sum += wrap(theta[s] - theta[s - 1]);
  const double closure = wrap(theta.front() - theta.back());
  const double tau = 2.0 * std::numbers::pi;
  return finish(sum / tau, (sum + closure) / tau);
}

DegreeResult sphere_degree_2d(const DiscreteMap& u) {
  const HalfBallGrid& g = *u.grid();
  const double rho = g.radius() - 2.0 * g.spacing();
  const int count = std::max(64, static_cast<int>(std::ceil(4.0 * std::numbers::pi * rho / g.spacing())));
  std::vector<double> loop(2 * count);
  double x[2];
  for (int s = 0; s < count; ++s) {
    const double t = 2.0 * std::numbers::pi * s / count;
    x[0] = rho * std::cos(t);
    x[1] = rho * std::sin(t);
    if (!interpolate(u, x, loop.data() + 2 * s)) throw Error(ErrorCode::precondition, "trace sample off the grid");
    require_trace(std::hypot(loop[2 * s], loop[2 * s + 1]), static_cast<std::size_t>(s));
  }
  return winding_degree(loop);
}

DegreeResult face_degree_3d(const DiscreteMap& u) {
  const HalfBallGrid& g = *u.grid();
  std::vector<int> idx(3, 0);
  auto value = [&](int a, int b, P3* out) {
    idx[0] = a;
    idx[1] = b;
    idx[2] = 0;
    const std::int64_t k = g.find(idx);
    if (k < 0 || g.mask(static_cast<std::size_t>(k)) != NodeMask::flat_boundary) return false;
    require_trace(u.norm(static_cast<std::size_t>(k)), static_cast<std::size_t>(k));
    *out = unit3(u.at(static_cast<std::size_t>(k)).data());
    return true;
  };
  // Oriented edges of the triangulated face; boundary edges are those whose
  // reverse is absent.
  std::map<std::pair<long, long>, int> edges;
  std::map<long, P3> verts;
  auto key = [](int a, int b) { return static_cast<long>(a) * 1000003L + b; };
  double sum = 0.0;
  const int lo = g.box_lo(0);
  const int hi = lo + g.box_count(0) - 1;
  const int lo1 = g.box_lo(1);
  const int hi1 = lo1 + g.box_count(1) - 1;
  for (int a = lo; a < hi; ++a)
    for (int b = lo1; b < hi1; ++b) {
      P3 p00, p10, p11, p01;
      if (!value(a, b, &p00) || !value(a + 1, b, &p10) || !value(a + 1, b + 1, &p11) || !value(a, b + 1, &p01))
        continue;
      const long k00 = key(a, b), k10 = key(a + 1, b), k11 = key(a + 1, b + 1), k01 = key(a, b + 1);
      verts[k00] = p00;
      verts[k10] = p10;
      verts[k11] = p11;
      verts[k01] = p01;
      // counter-clockwise in (x₁, x₂)
      sum += solid_angle(p00, p10, p11) + solid_angle(p00, p11, p01);
      for (auto e : {std::pair{k00, k10}, std::pair{k10, k11}, std::pair{k11, k00}, std::pair{k00, k11},
                     std::pair{k11, k01}, std::pair{k01, k00}})
        ++edges[e];
    }
  if (verts.empty()) throw Error(ErrorCode::precondition, "flat face has no complete cells");
  std::vector<std::pair<long, long>> rim;
  double mean[3] = {0.0, 0.0, 0.0};
  for (const auto& [e, c] : edges) {
    if (edges.count({e.second, e.first})) continue;
    rim.push_back(e);
    for (int k = 0; k < 3; ++k) mean[k] += verts[e.first][k];
  }
  const P3 c = unit3(mean);
  double closure = 0.0;
  for (const auto& e : rim) closure += solid_angle(verts[e.second], verts[e.first], c);
  // The chart bubble is orientation reversing for the (x₁, x₂) order.
  const double four_pi = 4.0 * std::numbers::pi;
  return finish(-sum / four_pi, -(sum + closure) / four_pi);
}

DegreeResult sphere_degree_3d(const DiscreteMap& u) {
  const HalfBallGrid& g = *u.grid();
  const double rho = g.radius() - 2.0 * g.spacing();
  const int nt = std::max(16, static_cast<int>(std::ceil(2.0 * std::numbers::pi * rho / g.spacing())));
  const int np = 2 * nt;
  // vertex 0: north pole, then rings, then south pole
  std::vector<P3> pos, val;
  auto add = [&](double th, double ph) {
    const P3 x{rho * std::sin(th) * std::cos(ph), rho * std::sin(th) * std::sin(ph), rho * std::cos(th)};
    double v[3];
    if (!interpolate(u, x, v)) throw Error(ErrorCode::precondition, "trace sample off the grid");
    require_trace(std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]), pos.size());
    pos.push_back(x);
    val.push_back(unit3(v));
  };
  add(0.0, 0.0);
  for (int j = 1; j < nt; ++j)
    for (int i = 0; i < np; ++i) add(std::numbers::pi * j / nt, 2.0 * std::numbers::pi * i / np);
  add(std::numbers::pi, 0.0);
  const int south = static_cast<int>(pos.size()) - 1;
  auto ring = [&](int j, int i) { return 1 + (j - 1) * np + ((i % np) + np) % np; };
  double sum = 0.0;
  auto tri = [&](int a, int b, int c) {
    // outward orientation taken from the geometry
    const double s = det3(pos[a], pos[b], pos[c]) >= 0.0 ? 1.0 : -1.0;
    sum += s * solid_angle(val[a], val[b], val[c]);
  };
  for (int i = 0; i < np; ++i) {
    tri(0, ring(1, i), ring(1, i + 1));
    tri(south, ring(nt - 1, i), ring(nt - 1, i + 1));
    for (int j = 1; j + 1 < nt; ++j) {
      tri(ring(j, i), ring(j + 1, i), ring(j + 1, i + 1));
      tri(ring(j, i), ring(j + 1, i + 1), ring(j, i + 1));
    }
  }
  const double raw = sum / (4.0 * std::numbers::pi);
  return finish(raw, raw);
}

}  // namespace

DegreeResult winding_degree(std::span<const double> loop) {
  const std::size_t count = loop.size() / 2;
  if (count < 3 || loop.size() % 2 != 0) throw Error(ErrorCode::precondition, "loop needs at least three points");
  double sum = 0.0;
  for (std::size_t s = 0; s < count; ++s) {
    const std::size_t t = (s + 1) % count;
    sum += wrap(std::atan2(loop[2 * t + 1], loop[2 * t]) - std::atan2(loop[2 * s + 1], loop[2 * s]));
  }
  const double raw = sum / (2.0 * std::numbers::pi);
  return finish(raw, raw);
}

DegreeResult degree(const DiscreteMap& u, DegreeBoundary which) {
  const HalfBallGrid& g = *u.grid();
  const int n = g.dim();
  if (u.target_dim() != n) throw Error(ErrorCode::precondition, "degree needs d = n");
  if (n != 2 && n != 3) throw Error(ErrorCode::precondition, "degree is implemented for n = 2 and n = 3 only");
  if (which == DegreeBoundary::automatic) which = g.half() ? DegreeBoundary::flat_face : DegreeBoundary::sphere;
  if (which == DegreeBoundary::flat_face) {
    if (!g.half()) throw Error(ErrorCode::precondition, "flat-face degree needs a half grid");
    return n == 2 ? face_degree_2d(u) : face_degree_3d(u);
  }
  if (g.half()) throw Error(ErrorCode::precondition, "sphere degree needs a full grid");
  return n == 2 ? sphere_degree_2d(u) : sphere_degree_3d(u);
}

}  // namespace btlab
