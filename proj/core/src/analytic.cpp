#include "btlab/analytic.hpp"

#include <cmath>
#include <sstream>

#include "btlab/error.hpp"

namespace btlab {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void check_same_dim(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::precondition, "dimension mismatch");
}

void check_mobius_param(std::span<const double> a) {
  if (!(dot(a, a) < 1.0)) throw Error(ErrorCode::precondition, "Mobius parameter must satisfy |a| < 1");
}

}  // namespace

Vec mobius_psi(std::span<const double> a, std::span<const double> x) {
  check_same_dim(a, x);
  check_mobius_param(a);
  const std::size_t n = a.size();
  Vec y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = a[i] - x[i];
  const double y2 = dot(y, y);
  if (std::sqrt(y2) <= kGuardBand) throw Error(ErrorCode::singularity, "psi_a evaluated at x = a");
  const double s = 1.0 - dot(a, a);
  Vec out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + s * y[i] / y2;
  return out;
}

Vec mobius(std::span<const double> a, std::span<const double> x) {
  if (dot(x, x) > 1.0 + 1e-12) throw Error(ErrorCode::precondition, "Mobius map evaluated outside the unit ball");
  Vec psi = mobius_psi(a, x);
  const double p2 = dot(psi, psi);
  for (double& v : psi) v /= p2;
  return psi;
}

void mobius_regular(std::span<const double> a, const double* x, double* out) {
  const std::size_t n = a.size();
  double y2 = 0.0, ay = 0.0, a2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double y = a[i] - x[i];
    y2 += y * y;
    ay += a[i] * y;
    a2 += a[i] * a[i];
  }
  const double s = 1.0 - a2;
  const double den = a2 * y2 + 2.0 * s * ay + s * s;
  if (!(den > kGuardBand)) throw Error(ErrorCode::singularity, "Mobius map evaluated at its pole");
  for (std::size_t i = 0; i < n; ++i) out[i] = (a[i] * y2 + s * (a[i] - x[i])) / den;
}

DiscreteMap sample_mobius(GridPtr grid, std::span<const double> a) {
  const int n = grid->dim();
  if (static_cast<int>(a.size()) != n) throw Error(ErrorCode::precondition, "Mobius parameter dimension");
  check_mobius_param(a);
  Vec av(a.begin(), a.end());
  return sample(std::move(grid), n, [&](const double* x, double* out) { mobius_regular(av, x, out); });
}

Vec inversion(std::span<const double> q) {
  const double q2 = dot(q, q);
  if (std::sqrt(q2) <= kGuardBand) throw Error(ErrorCode::singularity, "inversion at q = 0");
  Vec out(q.begin(), q.end());
  for (double& v : out) v /= q2;
  return out;
}

Vec d_inversion(std::span<const double> q) {
  const double q2 = dot(q, q);
  if (std::sqrt(q2) <= kGuardBand) throw Error(ErrorCode::singularity, "inversion differential at q = 0");
  const std::size_t d = q.size();
  Vec xi(d * d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) xi[i * d + j] = (i == j ? 1.0 / q2 : 0.0) - 2.0 * q[i] * q[j] / (q2 * q2);
  return xi;
}

Vec half_space_chart(std::span<const double> x) {
  const std::size_t n = x.size();
  double tangential = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) tangential += x[i] * x[i];
  const double t = 1.0 - x[n - 1];
  const double den = tangential + t * t;
  if (std::sqrt(den) <= kGuardBand) throw Error(ErrorCode::singularity, "half-space chart at the north pole");
  Vec out(n);
  for (std::size_t i = 0; i + 1 < n; ++i) out[i] = 2.0 * x[i] / den;
  out[n - 1] = (1.0 - dot(x, x)) / den;
  return out;
}

Vec half_space_chart_inv(std::span<const double> y) {
  const std::size_t n = y.size();
  double tangential = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) tangential += y[i] * y[i];
  const double t = 1.0 + y[n - 1];
  const double den = tangential + t * t;
  if (std::sqrt(den) <= kGuardBand) throw Error(ErrorCode::singularity, "inverse chart at the south pole");
  Vec out(n);
  for (std::size_t i = 0; i + 1 < n; ++i) out[i] = 2.0 * y[i] / den;
  out[n - 1] = (dot(y, y) - 1.0) / den;
  return out;
}

namespace {

template <class F>
Vec central_jacobian(F f, std::span<const double> x, double step) {
  const std::size_t n = x.size();
  Vec jac(n * n);
  Vec xp(x.begin(), x.end());
  Vec xm(x.begin(), x.end());
  for (std::size_t i = 0; i < n; ++i) {
    xp[i] = x[i] + step;
    xm[i] = x[i] - step;
    const Vec fp = f(xp);
    const Vec fm = f(xm);
    for (std::size_t c = 0; c < n; ++c) jac[i * n + c] = (fp[c] - fm[c]) / (2.0 * step);
    xp[i] = x[i];
    xm[i] = x[i];
  }
  return jac;
}

}  // namespace

Vec d_half_space_chart(std::span<const double> x, double step) {
  return central_jacobian([](const Vec& p) { return half_space_chart(p); }, x, step);
}

Vec d_half_space_chart_inv(std::span<const double> y, double step) {
  return central_jacobian([](const Vec& p) { return half_space_chart_inv(p); }, y, step);
}

double chart_conformality_defect(std::span<const double> x, double step) {
  const std::size_t n = x.size();
  const Vec j = d_half_space_chart(x, step);
  double diag = 0.0;
  double off = 0.0;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) {
      double s = 0.0;
      for (std::size_t c = 0; c < n; ++c) s += j[a * n + c] * j[b * n + c];
      if (a == b) {
        diag += s;
      } else {
        off = std::max(off, std::abs(s));
      }
    }
  return off / (diag / static_cast<double>(n));
}

Vec flat_reflection(std::span<const double> x) {
  Vec out(x.begin(), x.end());
  out.back() = -out.back();
  return out;
}

Vec d_flat_reflection(int n) {
  Vec m(static_cast<std::size_t>(n * n), 0.0);
  for (int i = 0; i < n; ++i) m[i * n + i] = 1.0;
  m[(n - 1) * n + (n - 1)] = -1.0;
  return m;
}

void validate(const ComparatorSpec& spec) {
  if (spec.a.size() != spec.b.size() || spec.a.empty()) {
    throw Error(ErrorCode::precondition, "comparator endpoints must have equal, positive dimension");
  }
  if (!(spec.inner > 0.0)) throw Error(ErrorCode::precondition, "comparator inner radius must be positive");
  if (!(spec.inner < spec.outer)) throw Error(ErrorCode::precondition, "comparator needs inner < outer");
  if (!(spec.p >= 1.0)) throw Error(ErrorCode::precondition, "comparator exponent must be at least 1");
}

DiscreteMap log_comparator(GridPtr grid, const ComparatorSpec& spec) {
  validate(spec);
  const int d = static_cast<int>(spec.a.size());
  const int n = grid->dim();
  const double l = std::log(spec.outer / spec.inner);
  return sample(std::move(grid), d, [&](const double* x, double* out) {
    double r2 = 0.0;
    for (int i = 0; i < n; ++i) r2 += x[i] * x[i];
    const double t = std::log(std::sqrt(r2) / spec.inner) / l;
    for (int c = 0; c < d; ++c) out[c] = spec.a[c] + t * (spec.b[c] - spec.a[c]);
  });
}

double radial_factor(int n, double p, double inner, double outer) {
  const double l = std::log(outer / inner);
  const double e = static_cast<double>(n) - p;
  if (e == 0.0) return l;
  return std::pow(inner, e) * std::expm1(e * l) / e;
}

double comparator_energy(const ComparatorSpec& spec, int n) {
  validate(spec);
  double diff2 = 0.0;
  for (std::size_t c = 0; c < spec.a.size(); ++c) diff2 += (spec.b[c] - spec.a[c]) * (spec.b[c] - spec.a[c]);
  const double l = std::log(spec.outer / spec.inner);
  return unit_sphere_area(n) * std::pow(std::sqrt(diff2) / l, spec.p) *
         radial_factor(n, spec.p, spec.inner, spec.outer);
}

}  // namespace btlab
