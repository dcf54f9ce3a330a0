#include <algorithm>
#include <cmath>
#include <sstream>

#include "btlab/error.hpp"
#include "btlab/map_io.hpp"
#include "btlab/solver.hpp"
#include "solver_engine.hpp"

namespace btlab {

namespace {

// Chart point of a node of an annulus grid centred at the origin. For a
// clipped annulus the lower half is the even reflection of the upper half.
void chart_point(const HalfBallGrid& g, std::size_t node, const AnnulusSpec& spec, double* y, bool* reflected) {
  const int n = g.dim();
  g.position(node, y);
  *reflected = spec.clipped && y[n - 1] < 0.0;
  if (*reflected) y[n - 1] = -y[n - 1];
  for (int a = 0; a < n; ++a) y[a] += spec.center[a];
}

MetricField annulus_metric(const GridPtr& grid, const AnnulusSpec& spec, const MetricField::Function& fn) {
  if (!fn) return MetricField::euclidean(grid);
  const int n = grid->dim();
  std::vector<double> values(grid->node_count() * n * n);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < grid->node_count(); ++i) {
    bool reflected = false;
    chart_point(*grid, i, spec, y.data(), &reflected);
    double* gi = values.data() + i * n * n;
    fn(y.data(), gi);
    if (reflected) {
      // dσ g dσ with dσ = diag(1, …, 1, −1)
      for (int a = 0; a < n - 1; ++a) {
        gi[a * n + (n - 1)] = -gi[a * n + (n - 1)];
        gi[(n - 1) * n + a] = -gi[(n - 1) * n + a];
      }
    }
  }
  return MetricField::from_values(grid, std::move(values));
}

void check_spec(const AnnulusSpec& spec, int n, double h) {
  validate(spec, n);
  if (spec.clipped && std::abs(spec.center[n - 1]) > 1e-12 * spec.outer) {
    throw Error(ErrorCode::precondition, "a clipped annulus must be centred on the flat face");
  }
  if (!(h > 0.0)) throw Error(ErrorCode::precondition, "annulus spacing must be positive");
}

}  // namespace

ExtensionResult annulus_extension(const AnnulusProblem& problem, const SolveConfig& config, ExtensionInit init) {
  validate(config);
  const AnnulusSpec& spec = problem.annulus;
  const int n = static_cast<int>(spec.center.size());
  check_spec(spec, n, problem.h);
  if (problem.d < 1) throw Error(ErrorCode::precondition, "target dimension must be positive");
  if (!problem.inner_data || !problem.outer_data) throw Error(ErrorCode::precondition, "missing Dirichlet data");
  if (problem.p != config.p) throw Error(ErrorCode::precondition, "problem and solver exponents differ");

  const int d = problem.d;
  GridPtr grid = make_annulus_grid(n, spec.outer, spec.inner, problem.h, false);
  const HalfBallGrid& g = *grid;
  const std::size_t count = g.node_count();
  MetricField metric = annulus_metric(grid, spec, problem.metric);

  const double mid = 0.5 * (spec.inner + spec.outer);
  const double log_span = std::log(spec.outer / spec.inner);
  detail::Problem prob;
  prob.kind.assign(count, detail::NodeKind::free);
  DiscreteMap v(grid, d);
  std::vector<double> y(n);
  std::vector<double> a(d);
  std::vector<double> b(d);
  for (std::size_t i = 0; i < count; ++i) {
    bool reflected = false;
    chart_point(g, i, spec, y.data(), &reflected);
    double* out = v.values().data() + i * d;
    if (g.mask(i) == NodeMask::spherical_boundary) {
      prob.kind[i] = detail::NodeKind::held;
      (g.norm(i) < mid ? problem.inner_data : problem.outer_data)(y.data(), out);
      for (int c = 0; c < d; ++c) {
        if (!std::isfinite(out[c])) {
          std::ostringstream os;
          os << "Dirichlet data not finite at node " << i;
          throw Error(ErrorCode::precondition, os.str());
        }
      }
      continue;
    }
    problem.inner_data(y.data(), a.data());
    problem.outer_data(y.data(), b.data());
    const double rho = g.norm(i);
    double t = init == ExtensionInit::log_radial ? std::log(rho / spec.inner) / log_span
                                                 : (rho - spec.inner) / (spec.outer - spec.inner);
    t = std::clamp(t, 0.0, 1.0);
    for (int c = 0; c < d; ++c) out[c] = (1.0 - t) * a[c] + t * b[c];
  }
  if (spec.clipped) {
    prob.mirror_of.assign(count, -1);
    for (std::size_t i = 0; i < count; ++i) {
      if (prob.kind[i] != detail::NodeKind::free || g.index(i)[n - 1] >= 0) continue;
      const std::int64_t m = g.mirror(i);
      if (m < 0) throw Error(ErrorCode::precondition, "annulus grid is not mirror symmetric");
      prob.kind[i] = detail::NodeKind::mirrored;
      prob.mirror_of[i] = m;
    }
  }

  ExtensionResult out;
  // Identical constant data on every Dirichlet node: the constant is exact.
  bool constant = true;
  std::size_t first_held = count;
  for (std::size_t i = 0; i < count && constant; ++i) {
    if (prob.kind[i] != detail::NodeKind::held) continue;
    if (first_held == count) {
      first_held = i;
      continue;
    }
    for (int c = 0; c < d; ++c) constant = constant && v.at(i)[c] == v.at(first_held)[c];
  }
  if (constant && first_held < count) {
    const std::vector<double> value(v.at(first_held).begin(), v.at(first_held).end());
    v = constant_map(grid, value);
    out.constant_shortcut = true;
  } else {
    detail::retract(v, prob);
    const double p = config.p;
    auto check = [&metric, p, &prob](const DiscreteMap& m) {
      return detail::projected_residual(m, metric, p, 0.0, prob);
    };
    detail::EngineResult er = detail::descend(std::move(v), metric, config, prob, check);
    v = std::move(er.map);
    out.log = std::move(er.log);
    out.iterations = er.iterations;
  }

  out.energy_full = p_energy(v, metric, config.p).total;
  out.energy = spec.clipped ? 0.5 * out.energy_full : out.energy_full;
  double defect = 0.0;
  if (spec.clipped) {
    for (std::size_t i = 0; i < count; ++i) {
      const std::int64_t m = g.mirror(i);
      if (m < 0) continue;
      for (int c = 0; c < d; ++c) defect = std::max(defect, std::abs(v.at(i)[c] - v.at(m)[c]));
    }
    GridPtr half = make_annulus_grid(n, spec.outer, spec.inner, problem.h, true);
    DiscreteMap r(half, d);
    for (std::size_t i = 0; i < half->node_count(); ++i) {
      const std::int64_t k = g.find(half->index(i));
      std::copy_n(v.at(static_cast<std::size_t>(k)).data(), d, r.at(i).data());
    }
    out.restricted = std::move(r);
  } else {
    out.restricted = v;
  }
  out.symmetry_defect = defect;
  out.full = std::move(v);
  return out;
}

NeckComparison neck_comparison(const DiscreteMap& u, const AnnulusSpec& spec, double p, const SolveConfig& config,
                               double eps_star, const MetricField::Function& metric) {
  const HalfBallGrid& ug = *u.grid();
  const int n = ug.dim();
  const double h = ug.spacing();
  check_spec(spec, n, h);
  for (int a = 0; a < n; ++a) {
    const double k = spec.center[a] / h;
    if (std::abs(k - std::round(k)) > 1e-9) {
      throw Error(ErrorCode::precondition, "annulus centre must be a lattice point of the map's grid");
    }
  }
  const int d = u.target_dim();
  auto trace = [&u, n](const double* y, double* out) {
    if (!interpolate(u, std::span<const double>(y, static_cast<std::size_t>(n)), out)) {
      throw Error(ErrorCode::precondition, "annulus leaves the domain of the map");
    }
  };

  // u sampled on the same full annulus grid the extension uses, so both
  // energies share one quadrature.
  GridPtr grid = make_annulus_grid(n, spec.outer, spec.inner, h, false);
  MetricField mf = annulus_metric(grid, spec, metric);
  DiscreteMap us(grid, d);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < grid->node_count(); ++i) {
    bool reflected = false;
    chart_point(*grid, i, spec, y.data(), &reflected);
    trace(y.data(), us.values().data() + i * d);
  }
  const double share = spec.clipped ? 0.5 : 1.0;
  NeckComparison nc;
  nc.local_n_energy = share * p_energy(us, mf, static_cast<double>(n)).total;
  const double limit = std::pow(eps_star, n);
  if (nc.local_n_energy > limit) {
    std::ostringstream os;
    os << "local n-energy " << format_double(nc.local_n_energy) << " on the annulus exceeds eps_star^n = "
       << format_double(limit);
    throw Error(ErrorCode::precondition, os.str());
  }
  nc.energy_u = share * p_energy(us, mf, p).total;

  AnnulusProblem prob;
  prob.annulus = spec;
  prob.d = d;
  prob.inner_data = trace;
  prob.outer_data = trace;
  prob.p = p;
  prob.metric = metric;
  prob.h = h;
  SolveConfig cfg = config;
  cfg.p = p;
  const ExtensionResult ext = annulus_extension(prob, cfg);
  nc.energy_v = ext.energy;
  nc.ratio = nc.energy_v > 0.0 ? nc.energy_u / nc.energy_v : (nc.energy_u > 0.0 ? INFINITY : 1.0);
  return nc;
}

}  // namespace btlab
