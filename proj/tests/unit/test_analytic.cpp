#include <cmath>
#include <numbers>

#include "btlab/analytic.hpp"
#include "btlab/error.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace btlab;

namespace {

Vec random_point(std::mt19937_64& g, int n, double max_norm) {
  Vec x(n);
  double s = 0.0;
  for (double& v : x) {
    v = oracle::uniform(g, -1.0, 1.0);
    s += v * v;
  }
  const double target = oracle::uniform(g, 0.05, max_norm);
  for (double& v : x) v *= target / std::sqrt(s);
  return x;
}

Vec random_unit(std::mt19937_64& g, int n) {
  Vec x = random_point(g, n, 1.0);
  double s = 0.0;
  for (double v : x) s += v * v;
  for (double& v : x) v /= std::sqrt(s);
  return x;
}

double norm(const Vec& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("M_0 is the antipodal map") {
  auto g = oracle::rng(1);
  for (int n : {2, 3, 4}) {
    const Vec zero(n, 0.0);
    for (int t = 0; t < 20; ++t) {
      const Vec x = random_point(g, n, 1.0);
      const Vec y = mobius(zero, x);
      for (int i = 0; i < n; ++i) CHECK(y[i] == doctest::Approx(-x[i]).epsilon(1e-14));
    }
  }
}

TEST_CASE("Mobius map at a=(1/2,0), x=(1,0)") {
  // ψ = a + (3/4)(a - x)/|a - x|² = (1/2 - 3/2, 0) = (-1, 0); |ψ| = 1.
  const Vec y = mobius(Vec{0.5, 0.0}, Vec{1.0, 0.0});
  CHECK(y[0] == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(std::abs(y[1]) < 1e-15);
}

TEST_CASE("Mobius maps preserve the unit sphere") {
  auto g = oracle::rng(2);
  for (int n : {2, 3}) {
    for (int t = 0; t < 200; ++t) {
      const Vec a = random_point(g, n, 0.95);
      const Vec x = random_unit(g, n);
      CHECK(std::abs(norm(mobius(a, x)) - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("Mobius map maps the ball into the ball and sends a to 0") {
  auto g = oracle::rng(3);
  for (int t = 0; t < 200; ++t) {
    const Vec a = random_point(g, 3, 0.9);
    const Vec x = random_point(g, 3, 0.999);
    Vec reg(3);
    mobius_regular(a, x.data(), reg.data());
    CHECK(norm(reg) < 1.0);
    double dist = 0.0;
    for (int i = 0; i < 3; ++i) dist += (x[i] - a[i]) * (x[i] - a[i]);
    if (std::sqrt(dist) > 1e-6) {
      const Vec direct = mobius(a, x);
      for (int i = 0; i < 3; ++i) CHECK(reg[i] == doctest::Approx(direct[i]).epsilon(1e-11));
    }
    Vec at_a(3);
    mobius_regular(a, a.data(), at_a.data());
    CHECK(norm(at_a) == 0.0);
  }
}

TEST_CASE("Mobius singularity and parameter guards") {
  CHECK_THROWS_AS(mobius(Vec{0.3, 0.1}, Vec{0.3, 0.1}), Error);
  CHECK_THROWS_AS(mobius(Vec{1.0, 0.0}, Vec{0.0, 0.5}), Error);
  CHECK_THROWS_AS(mobius(Vec{0.2, 0.0}, Vec{1.5, 0.0}), Error);
  try {
    mobius(Vec{0.3, 0.1}, Vec{0.3, 0.1 + 1e-10});
    FAIL("expected singularity error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::singularity);
  }
}

TEST_CASE("inversion and its differential") {
  const Vec i2 = inversion(Vec{2.0, 0.0});
  CHECK(i2[0] == 0.5);
  CHECK(i2[1] == 0.0);
  const Vec xi = d_inversion(Vec{1.0, 0.0});
  CHECK(xi[0 * 2 + 1] * 1.0 == 0.0);
  CHECK(xi[1 * 2 + 1] == 1.0);  // Ξ(e₁)e₂ = e₂
  CHECK_THROWS_AS(inversion(Vec{0.0, 0.0}), Error);
  CHECK_THROWS_AS(d_inversion(Vec{0.0, 0.0, 0.0}), Error);

  auto g = oracle::rng(4);
  for (int d : {2, 3, 5}) {
    for (int t = 0; t < 50; ++t) {
      Vec q = random_point(g, d, 3.0);
      const Vec w = random_point(g, d, 2.0);
      const double q2 = norm(q) * norm(q);
      const Vec back = inversion(inversion(q));
      for (int i = 0; i < d; ++i) CHECK(back[i] == doctest::Approx(q[i]).epsilon(1e-14));
      const Vec X = d_inversion(q);
      Vec Xw(d, 0.0), Xq(d, 0.0);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
          CHECK(X[i * d + j] == X[j * d + i]);
          Xw[i] += X[i * d + j] * w[j];
          Xq[i] += X[i * d + j] * q[j];
        }
      CHECK(norm(Xw) == doctest::Approx(norm(w) / q2).epsilon(1e-12));
      for (int i = 0; i < d; ++i) CHECK(Xq[i] == doctest::Approx(-q[i] / q2).epsilon(1e-12));
      // Ξ² = Id/|q|⁴
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
          double s = 0.0;
          for (int k = 0; k < d; ++k) s += X[i * d + k] * X[k * d + j];
          CHECK(std::abs(s - (i == j ? 1.0 / (q2 * q2) : 0.0)) <= 1e-12 / (q2 * q2));
        }
      // Ξ matches the central-difference Jacobian of ι.
      for (int j = 0; j < d; ++j) {
        Vec qp = q, qm = q;
        qp[j] += 1e-6;
        qm[j] -= 1e-6;
        const Vec fp = inversion(qp), fm = inversion(qm);
        for (int i = 0; i < d; ++i) CHECK(X[i * d + j] == doctest::Approx((fp[i] - fm[i]) / 2e-6).epsilon(1e-5));
      }
    }
  }
}

TEST_CASE("half-space chart anchors") {
  const Vec at0 = half_space_chart(Vec{0.0, 0.0, 0.0});
  CHECK(at0 == Vec{0.0, 0.0, 1.0});
  const Vec south = half_space_chart(Vec{0.0, 0.0, -1.0});
  for (double v : south) CHECK(std::abs(v) < 1e-15);
  double prev = 0.0;
  for (double t : {0.9, 0.99, 0.999, 0.9999}) {
    const double m = norm(half_space_chart(Vec{0.0, t}));
    CHECK(m > prev);
    prev = m;
  }
  CHECK(prev > 1e3);
  CHECK_THROWS_AS(half_space_chart(Vec{0.0, 1.0}), Error);
}

TEST_CASE("half-space chart maps the sphere to the flat face and inverts") {
  auto g = oracle::rng(5);
  for (int n : {2, 3}) {
    for (int t = 0; t < 100; ++t) {
      Vec s = random_unit(g, n);
      if (s[n - 1] > 0.99) continue;
      CHECK(std::abs(half_space_chart(s)[n - 1]) < 1e-13);
      const Vec x = random_point(g, n, 0.98);
      const Vec y = half_space_chart(x);
      CHECK(y[n - 1] >= 0.0);
      const Vec back = half_space_chart_inv(y);
      for (int i = 0; i < n; ++i) CHECK(std::abs(back[i] - x[i]) <= 1e-12);
    }
  }
}

TEST_CASE("half-space chart is conformal") {
  auto g = oracle::rng(6);
  for (int n : {2, 3}) {
    for (int t = 0; t < 100; ++t) {
      const Vec x = random_point(g, n, 0.9);
      CHECK(chart_conformality_defect(x, 1e-5) <= 1e-8);
    }
  }
}

TEST_CASE("pulled-back metric through the inverse chart is SPD") {
  auto grid = make_grid(2, 1.0, 1.0 / 16, true);
  auto m = MetricField::from_function(grid, [](const double* x, double* out) {
    const Vec j = d_half_space_chart_inv(Vec{x[0], x[1]});
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) {
        double s = 0.0;
        for (int c = 0; c < 2; ++c) s += j[a * 2 + c] * j[b * 2 + c];
        out[a * 2 + b] = s;
      }
    const double avg = 0.5 * (out[1] + out[2]);
    out[1] = out[2] = avg;
  });
  for (std::size_t i = 0; i < grid->node_count(); ++i) CHECK(m.min_eigenvalue(i) > 0.0);
}

TEST_CASE("flat reflection is an orthogonal involution fixing the face") {
  auto g = oracle::rng(7);
  for (int n : {2, 3, 4}) {
    const Vec ds = d_flat_reflection(n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int k = 0; k < n; ++k) s += ds[i * n + k] * ds[j * n + k];
        CHECK(s == (i == j ? 1.0 : 0.0));
      }
    for (int t = 0; t < 20; ++t) {
      Vec x = random_point(g, n, 2.0);
      CHECK(flat_reflection(flat_reflection(x)) == x);
      x[n - 1] = 0.0;
      CHECK(flat_reflection(x)[n - 1] == 0.0);
    }
  }
}

TEST_CASE("comparator boundary values and degenerate data") {
  auto grid = make_annulus_grid(2, 2.0, 0.5, 1.0 / 16, false);
  ComparatorSpec spec{{1.0, 0.0}, {0.0, 1.0}, 0.5, 2.0, 2.0};
  auto f = log_comparator(grid, spec);
  for (std::size_t i = 0; i < grid->node_count(); ++i) {
    const double r = grid->norm(i);
    if (std::abs(r - 0.5) < 1e-14) CHECK(f.at(i)[0] == doctest::Approx(1.0));
    if (std::abs(r - 2.0) < 1e-14) CHECK(f.at(i)[1] == doctest::Approx(1.0));
  }
  ComparatorSpec same{{0.3, 0.4}, {0.3, 0.4}, 0.5, 2.0, 2.0};
  CHECK(comparator_energy(same, 2) == 0.0);
  auto g2 = log_comparator(grid, same);
  CHECK(p_energy(g2, MetricField::euclidean(grid), 2.0).total == 0.0);
  CHECK_THROWS_AS(comparator_energy(ComparatorSpec{{0.0}, {1.0}, 1.0, 1.0, 2.0}, 2), Error);
}

TEST_CASE("comparator closed form against radial quadrature") {
  for (int n : {2, 3, 4}) {
    for (double p : {double(n), n + 0.5, n + 1.3}) {
      ComparatorSpec spec{{0.0, 0.0}, {0.6, 0.8}, 0.3, 1.1, p};
      // |df| = |b-a| / (ρ log(R₂/R₁)); midpoint rule in ρ.
      const int steps = 200000;
      const double l = std::log(spec.outer / spec.inner);
      double s = 0.0;
      const double dr = (spec.outer - spec.inner) / steps;
      for (int k = 0; k < steps; ++k) {
        const double rho = spec.inner + (k + 0.5) * dr;
        s += std::pow(1.0 / (rho * l), p) * std::pow(rho, n - 1) * dr;
      }
      s *= unit_sphere_area(n);
      CHECK(comparator_energy(spec, n) == doctest::Approx(s).epsilon(1e-8));
    }
  }
}

TEST_CASE("comparator energy n=2, |b-a|=1, R2/R1=e is 2 pi and matches grid quadrature") {
  const double r1 = 0.25;
  ComparatorSpec spec{{0.0, 0.0}, {1.0, 0.0}, r1, r1 * std::numbers::e, 2.0};
  CHECK(comparator_energy(spec, 2) == doctest::Approx(2.0 * std::numbers::pi).epsilon(1e-14));
  auto grid = make_annulus_grid(2, spec.outer, spec.inner, r1 / 32, false);
  auto f = log_comparator(grid, spec);
  const double e = p_energy(f, MetricField::euclidean(grid), 2.0).total;
  CHECK(e == doctest::Approx(2.0 * std::numbers::pi).epsilon(0.02));
}

TEST_CASE("radial factor tends to the logarithm as p approaches n") {
  const double eps = 1e-4;
  for (int n : {2, 3}) {
    for (double r1 : {0.1, 0.5, 1.0}) {
      for (double ratio : {2.0, std::numbers::e, 10.0}) {
        const double r2 = r1 * ratio;
        const double l = std::log(ratio);
        CHECK(radial_factor(n, n, r1, r2) == l);
        const double above = radial_factor(n, n + eps, r1, r2);
        const double below = radial_factor(n, n - eps, r1, r2);
        // One-sided values differ from the limit at first order:
        // factor(n+e) = l·(1 - e·log(R1·R2)/2) + O(e²).
        CHECK(std::abs(above - l * (1.0 - eps * std::log(r1 * r2) / 2)) <= 1e-6);
        CHECK(std::abs(0.5 * (above + below) - l) <= 1e-6);
      }
    }
  }
}
