#include <cmath>
#include <numbers>
#include <set>

#include "btlab/error.hpp"
#include "btlab/geometry.hpp"
#include "btlab/metric.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace btlab;

TEST_CASE("coarse half disc has exactly three flat nodes") {
  auto g = make_grid(2, 1.0, 0.5, true);
  std::set<std::pair<double, double>> flat;
  for (std::size_t i = 0; i < g->node_count(); ++i) {
    if (g->mask(i) == NodeMask::flat_boundary) flat.insert({g->coord(i, 0), g->coord(i, 1)});
  }
  const std::set<std::pair<double, double>> expected{{-0.5, 0.0}, {0.0, 0.0}, {0.5, 0.0}};
  CHECK(flat == expected);
}

TEST_CASE("spacing too coarse for the radius is rejected") {
  CHECK_THROWS_AS(make_grid(2, 1.0, 1.0, true), Error);
  CHECK_THROWS_AS(make_grid(1, 1.0, 0.1, true), Error);
  CHECK_THROWS_AS(make_grid(2, 1.0, 0.0, true), Error);
}

TEST_CASE("node count matches brute-force lattice scan") {
  for (auto [n, r, h, half] : {std::tuple{3, 1.0, 0.25, false}, std::tuple{2, 1.0, 1.0 / 16, true},
                               std::tuple{2, 0.7, 0.1, false}, std::tuple{3, 0.5, 0.1, true}}) {
    auto g = make_grid(n, r, h, half);
    CHECK(g->node_count() == oracle::active_node_count(n, r, h, half));
  }
}

TEST_CASE("masks partition the lattice and satisfy the geometric invariants") {
  auto gen = oracle::rng(11);
  for (int trial = 0; trial < 12; ++trial) {
    const int n = 2 + trial % 2;
    const double r = oracle::uniform(gen, 0.5, 1.5);
    const double h = r / oracle::uniform(gen, 4.0, n == 2 ? 40.0 : 14.0);
    const bool half = trial % 3 != 0;
    auto g = make_grid(n, r, h, half);
    std::size_t box = 1;
    for (int a = 0; a < n; ++a) box *= static_cast<std::size_t>(g->box_count(a));
    const std::size_t sum = g->count(NodeMask::outside) + g->count(NodeMask::interior) +
                            g->count(NodeMask::flat_boundary) + g->count(NodeMask::spherical_boundary);
    CHECK(sum == box);
    for (std::size_t i = 0; i < g->node_count(); ++i) {
      const auto x = g->position(i);
      double d = 0.0;
      for (double v : x) d += v * v;
      d = std::sqrt(d);
      if (g->mask(i) == NodeMask::flat_boundary) {
        CHECK(half);
        CHECK(std::abs(x[n - 1]) <= 0.5 * h);
        CHECK(d < r);
      }
      if (g->mask(i) == NodeMask::interior) {
        CHECK(d < r - 0.5 * h);
        if (half) CHECK(x[n - 1] > 0.0);
      }
      CHECK(g->weight(i) >= 0.0);
      CHECK(g->weight(i) <= std::pow(h, n) * (1.0 + 1e-12));
    }
  }
}

TEST_CASE("grid construction is deterministic") {
  auto a = make_grid(2, 1.0, 0.05, true);
  auto b = make_grid(2, 1.0, 0.05, true);
  REQUIRE(a->node_count() == b->node_count());
  for (std::size_t i = 0; i < a->node_count(); ++i) {
    CHECK(a->mask(i) == b->mask(i));
    CHECK(a->weight(i) == b->weight(i));
  }
}

TEST_CASE("halving h at least quadruples the interior count in 2D") {
  for (double r : {1.0, 0.75}) {
    for (double h : {0.25, 0.1, 1.0 / 32}) {
      if (h > r / 2) continue;
      auto coarse = make_grid(2, r, h, true);
      auto fine = make_grid(2, r, h / 2, true);
      CHECK(fine->count(NodeMask::interior) >= 4 * coarse->count(NodeMask::interior));
    }
  }
}

TEST_CASE("cut-cell weights integrate the domain volume") {
  auto half_disc = make_grid(2, 1.0, 1.0 / 64, true);
  CHECK(grid_volume(*half_disc) == doctest::Approx(std::numbers::pi / 2).epsilon(1e-3));
  auto ball = make_grid(3, 1.0, 1.0 / 16, false);
  CHECK(grid_volume(*ball) == doctest::Approx(4.0 * std::numbers::pi / 3).epsilon(5e-3));
  auto ann = make_annulus_grid(2, 1.0, 0.5, 1.0 / 64, false);
  CHECK(grid_volume(*ann) == doctest::Approx(std::numbers::pi * 0.75).epsilon(2e-3));
}

TEST_CASE("annulus mask matches a per-node distance test") {
  auto g = make_grid(2, 1.0, 1.0 / 16, true);
  AnnulusSpec spec{{0.0, 0.0}, 0.25, 0.5, true};
  const NodeSet nodes = annulus_mask(*g, spec);
  std::size_t expected = 0;
  oracle::for_each_lattice_point(2, 20, true, [&](const std::vector<int>& idx) {
    if (!oracle::cell_meets_ball(idx, 1.0 / 16, 1.0)) return;
    const double d = std::hypot(idx[0] / 16.0, idx[1] / 16.0);
    if (d >= 0.25 && d < 0.5) ++expected;
  });
  CHECK(nodes.size() == expected);
  for (std::size_t i : nodes) {
    const double d = g->norm(i);
    CHECK(d >= 0.25);
    CHECK(d < 0.5);
  }
}

TEST_CASE("annulus outside the grid is empty, degenerate annulus is an error") {
  auto g = make_grid(2, 1.0, 1.0 / 8, true);
  CHECK(annulus_mask(*g, AnnulusSpec{{5.0, 5.0}, 0.5, 1.0, true}).empty());
  CHECK_THROWS_AS(annulus_mask(*g, AnnulusSpec{{0.0, 0.0}, 0.5, 0.5, true}), Error);
}

TEST_CASE("Euclidean metric is the identity with unit volume element") {
  auto g = make_grid(3, 1.0, 0.25, true);
  auto m = MetricField::euclidean(g);
  CHECK(m.is_euclidean());
  for (std::size_t i = 0; i < g->node_count(); ++i) {
    CHECK(m.sqrt_det(i) == 1.0);
    CHECK(m.min_eigenvalue(i) == doctest::Approx(1.0));
  }
}

TEST_CASE("metric constructor rejects non-SPD and non-symmetric data") {
  auto g = make_grid(2, 1.0, 0.25, true);
  CHECK_THROWS_AS(MetricField::from_function(g,
                                             [](const double*, double* m) {
                                               m[0] = 1.0;
                                               m[1] = 2.0;
                                               m[2] = 2.0;
                                               m[3] = 1.0;
                                             }),
                  Error);
  CHECK_THROWS_AS(MetricField::from_function(g,
                                             [](const double*, double* m) {
                                               m[0] = 1.0;
                                               m[1] = 0.1;
                                               m[2] = 0.0;
                                               m[3] = 1.0;
                                             }),
                  Error);
  auto ok = MetricField::from_function(g, [](const double* x, double* m) {
    m[0] = 2.0 + x[0];
    m[1] = 0.3;
    m[2] = 0.3;
    m[3] = 1.0;
  });
  for (std::size_t i = 0; i < g->node_count(); ++i) {
    const double det = (2.0 + g->coord(i, 0)) * 1.0 - 0.09;
    CHECK(ok.sqrt_det(i) == doctest::Approx(std::sqrt(det)));
    CHECK(ok.min_eigenvalue(i) > 0.0);
  }
}
