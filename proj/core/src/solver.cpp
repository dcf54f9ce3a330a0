#include "btlab/solver.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "btlab/error.hpp"
#include "btlab/map_io.hpp"
#include "solver_engine.hpp"

namespace btlab {

void validate(const SolveConfig& c) {
  if (!(c.p >= 2.0)) throw Error(ErrorCode::precondition, "solver exponent p must be at least 2");
  if (!(c.delta >= 0.0)) throw Error(ErrorCode::precondition, "regularization delta must be nonnegative");
  if (!(c.residual_tol > 0.0)) throw Error(ErrorCode::precondition, "residual_tol must be positive");
  if (c.max_iters < 0) throw Error(ErrorCode::precondition, "max_iters must be nonnegative");
  for (std::size_t i = 0; i < c.delta_schedule.size(); ++i) {
    const double s = c.delta_schedule[i];
    if (!(s > c.delta)) throw Error(ErrorCode::precondition, "delta schedule must stay above the final delta");
    if (i > 0 && !(s < c.delta_schedule[i - 1])) {
      throw Error(ErrorCode::precondition, "delta schedule must be strictly decreasing");
    }
  }
  if (!(c.initial_step > 0.0)) throw Error(ErrorCode::precondition, "initial_step must be positive");
  if (!(c.backtrack > 0.0 && c.backtrack < 1.0)) throw Error(ErrorCode::precondition, "backtrack must be in (0,1)");
  if (!(c.armijo_c > 0.0 && c.armijo_c < 1.0)) throw Error(ErrorCode::precondition, "armijo_c must be in (0,1)");
}

namespace detail {

void project(const DiscreteMap& u, const std::vector<NodeKind>& kind, std::vector<double>& grad) {
  const int d = u.target_dim();
  for (std::size_t i = 0; i < kind.size(); ++i) {
    double* v = grad.data() + i * d;
    if (kind[i] == NodeKind::held || kind[i] == NodeKind::mirrored) {
      std::fill(v, v + d, 0.0);
    } else if (kind[i] == NodeKind::sphere) {
      const auto ui = u.at(i);
      double s2 = 0.0;
      double dot = 0.0;
      for (int c = 0; c < d; ++c) {
        s2 += ui[c] * ui[c];
        dot += v[c] * ui[c];
      }
      if (!(s2 > 0.0)) {
        std::ostringstream os;
        os << "|u| = 0 at flat boundary node " << i;
        throw Error(ErrorCode::degenerate_projection, os.str());
      }
      for (int c = 0; c < d; ++c) v[c] -= dot * ui[c] / s2;
    }
  }
}

void retract(DiscreteMap& u, const Problem& prob) {
  const int d = u.target_dim();
  auto& vals = u.values();
  for (std::size_t i = 0; i < prob.kind.size(); ++i) {
    if (prob.kind[i] == NodeKind::sphere) {
      double* v = vals.data() + i * d;
      double s2 = 0.0;
      for (int c = 0; c < d; ++c) s2 += v[c] * v[c];
      if (!(s2 > 0.0)) {
        std::ostringstream os;
        os << "|u| = 0 at flat boundary node " << i << " after a descent step";
        throw Error(ErrorCode::degenerate_projection, os.str());
      }
      const double s = std::sqrt(s2);
      for (int c = 0; c < d; ++c) v[c] /= s;
    }
  }
  if (!prob.mirror_of.empty()) {
    for (std::size_t i = 0; i < prob.kind.size(); ++i) {
      if (prob.kind[i] != NodeKind::mirrored) continue;
      const std::size_t src = static_cast<std::size_t>(prob.mirror_of[i]);
      std::copy_n(vals.data() + src * d, d, vals.data() + i * d);
    }
  }
}

double projected_residual(const DiscreteMap& u, const MetricField& metric, double p, double delta,
                          const Problem& prob) {
  std::vector<double> grad;
  regularized_energy(u, metric, p, delta, &grad);
  fold_mirrored(prob, u.target_dim(), grad);
  project(u, prob.kind, grad);
  return residual_norm(*u.grid(), grad, u.target_dim());
}

void fold_mirrored(const Problem& prob, int d, std::vector<double>& grad) {
  // The symmetric iteration moves a lower node together with its mirror, so
  // the effective gradient of an upper node includes its mirror's share.
  if (prob.mirror_of.empty()) return;
  for (std::size_t i = 0; i < prob.kind.size(); ++i) {
    if (prob.kind[i] != NodeKind::mirrored) continue;
    const std::size_t dst = static_cast<std::size_t>(prob.mirror_of[i]);
    for (int c = 0; c < d; ++c) {
      grad[dst * d + c] += grad[i * d + c];
      grad[i * d + c] = 0.0;
    }
  }
}

namespace {

double evaluate(const DiscreteMap& u, const MetricField& metric, double p, double delta, const Problem& prob,
                std::vector<double>& grad) {
  const double e = regularized_energy(u, metric, p, delta, &grad);
  fold_mirrored(prob, u.target_dim(), grad);
  project(u, prob.kind, grad);
  return e;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

}  // namespace

EngineResult descend(DiscreteMap u, const MetricField& metric, const SolveConfig& cfg, const Problem& prob,
                     const ResidualCheck& final_check) {
  const HalfBallGrid& g = *u.grid();
  const int d = u.target_dim();
  const std::size_t count = g.node_count();
  const std::size_t len = count * static_cast<std::size_t>(d);
  const double hn = std::pow(g.spacing(), g.dim());

  // Mass-lumped preconditioner; mirrored pairs move together so their masses add.
  std::vector<double> mass(count);
  for (std::size_t i = 0; i < count; ++i) mass[i] = std::max(g.weight(i), 0.25 * hn);
  if (!prob.mirror_of.empty()) {
    for (std::size_t i = 0; i < count; ++i) {
      if (prob.kind[i] == NodeKind::mirrored) mass[static_cast<std::size_t>(prob.mirror_of[i])] += mass[i];
    }
  }

  std::vector<double> deltas;
  if (cfg.p != 2.0) deltas = cfg.delta_schedule;
  deltas.push_back(cfg.delta);

  EngineResult out;
  std::vector<double> history;
  int iter = 0;
  std::vector<double> grad;
  std::vector<double> grad_prev;
  std::vector<double> z(len);
  std::vector<double> dir(len, 0.0);
  std::vector<double> trial_grad;
  std::vector<double> best_grad;
  DiscreteMap trial = u;
  DiscreteMap best = u;
  constexpr double kCurvature = 0.1;  // strong Wolfe parameter
  constexpr double kFlat = 1e-12;     // relative energy resolution

  for (std::size_t stage = 0; stage < deltas.size(); ++stage) {
    const double delta = deltas[stage];
    const bool last = stage + 1 == deltas.size();
    const double stage_tol = last ? cfg.residual_tol : 10.0 * cfg.residual_tol;
    double energy = evaluate(u, metric, cfg.p, delta, prob, grad);
    double res = residual_norm(g, grad, d);
    history.push_back(res);
    bool have_dir = false;
    double t_prev = cfg.initial_step;
    double slope_prev = 0.0;
    double zg_prev = 0.0;
    bool stage_done = false;
    while (true) {
      // The final stage also has to pass the unregularized residual.
      if (res <= stage_tol && (!last || !final_check || final_check(u) <= cfg.residual_tol)) {
        stage_done = true;
        break;
      }
      if (iter >= cfg.max_iters) break;

      for (std::size_t i = 0; i < count; ++i)
        for (int c = 0; c < d; ++c) z[i * d + c] = grad[i * d + c] / mass[i];
      const double zg = dot(z, grad);
      double beta = 0.0;
      if (have_dir && cfg.conjugate) {
        double num = 0.0;
        for (std::size_t k = 0; k < len; ++k) num += z[k] * (grad[k] - grad_prev[k]);
        beta = std::max(0.0, num / zg_prev);
        project(u, prob.kind, dir);
      }
      for (std::size_t k = 0; k < len; ++k) dir[k] = -z[k] + beta * dir[k];
      double slope = dot(grad, dir);
      if (!(slope < 0.0)) {
        for (std::size_t k = 0; k < len; ++k) dir[k] = -z[k];
        slope = -zg;
      }
      double t = have_dir ? std::clamp(t_prev * slope_prev / slope, 1e-14, 1e14) : cfg.initial_step;

      // Line search on φ(t) = E(retract(u + t·dir)). Sufficient decrease is
      // the Armijo test; once energy differences drop below floating-point
      // resolution the derivative decides instead.
      double lo = 0.0;
      double d_lo = slope;
      double hi = INFINITY;
      double d_hi = 0.0;
      bool found = false;
      double best_t = 0.0;
      double best_e = energy;
      double best_abs_d = INFINITY;
      for (int trial_no = 0; trial_no < 40; ++trial_no) {
        auto& tv = trial.values();
        const auto& cur = u.values();
        for (std::size_t k = 0; k < len; ++k) tv[k] = cur[k] + t * dir[k];
        retract(trial, prob);
        const double e_t = evaluate(trial, metric, cfg.p, delta, prob, trial_grad);
        if (!std::isfinite(e_t)) {
          hi = t;
          t = lo + cfg.backtrack * (hi - lo);
          continue;
        }
        const double d_t = dot(trial_grad, dir);
        const bool armijo = e_t <= energy + cfg.armijo_c * t * slope;
        const bool flat = std::abs(e_t - energy) <= kFlat * std::abs(energy) &&
                          d_t <= (1.0 - 2.0 * cfg.armijo_c) * -slope;
        if (armijo || flat) {
          if (std::abs(d_t) < best_abs_d) {
            found = true;
            best_t = t;
            best_e = e_t;
            best_abs_d = std::abs(d_t);
            std::swap(best.values(), trial.values());
            std::swap(best_grad, trial_grad);
          }
          if (std::abs(d_t) <= kCurvature * -slope) break;
          if (d_t < 0.0) {
            lo = t;
            d_lo = d_t;
          } else {
            hi = t;
            d_hi = d_t;
          }
        } else {
          hi = t;
          d_hi = d_t;
        }
        if (std::isinf(hi)) {
          t *= 4.0;
        } else if (d_hi > d_lo) {
          const double w = hi - lo;
          t = std::clamp(lo - d_lo * w / (d_hi - d_lo), lo + 0.1 * w, hi - 0.1 * w);
        } else {
          t = lo + cfg.backtrack * (hi - lo);
        }
        if (std::isfinite(hi) && hi - lo <= 1e-15 * hi) break;
      }
      if (!found) break;  // no admissible step representable in floating point

      grad_prev = grad;
      zg_prev = zg;
      slope_prev = slope;
      t_prev = best_t;
      have_dir = true;
      std::swap(u.values(), best.values());
      std::swap(grad, best_grad);
      energy = best_e;
      res = residual_norm(g, grad, d);
      ++iter;
      history.push_back(res);
      out.log.push_back(LogRow{iter, delta, energy, res, best_t});
    }
    if (!stage_done) {
      std::ostringstream os;
      os << "descent did not converge at delta=" << format_double(delta) << " after " << iter
         << " iterations (residual " << format_double(res) << ", tolerance " << format_double(stage_tol) << ")";
      throw NotConvergedError(os.str(), history);
    }
  }
  out.map = std::move(u);
  out.iterations = iter;
  return out;
}

}  // namespace detail

SolveResult minimize_free_boundary(const DiscreteMap& init, const MetricField& metric, const SolveConfig& config) {
  validate(config);
  if (!init.is_finite()) throw Error(ErrorCode::precondition, "initial map has non-finite values");
  if (!init.is_admissible()) throw Error(ErrorCode::precondition, "initial map violates |u| = 1 on the flat face");
  const HalfBallGrid& g = *init.grid();
  detail::Problem prob;
  prob.kind.resize(g.node_count());
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    switch (g.mask(i)) {
      case NodeMask::flat_boundary: prob.kind[i] = detail::NodeKind::sphere; break;
      case NodeMask::spherical_boundary:
        prob.kind[i] = config.free_spherical ? detail::NodeKind::free : detail::NodeKind::held;
        break;
      default: prob.kind[i] = detail::NodeKind::free; break;
    }
  }
  DiscreteMap start = init;
  start.renormalize_flat();
  const double p = config.p;
  const bool free = config.free_spherical;
  auto check = [&metric, p, free](const DiscreteMap& u) {
    return free ? weak_residual_free(u, metric, p).norm : weak_residual(u, metric, p).norm;
  };
  detail::EngineResult er = detail::descend(std::move(start), metric, config, prob, check);

  SolveResult r;
  r.map = std::move(er.map);
  r.log = std::move(er.log);
  r.iterations = er.iterations;
  r.energy = p_energy(r.map, metric, p).total;
  r.residual = check(r.map);
  r.max_principle = max_principle_check(r.map);
  return r;
}

void write_log_csv(std::ostream& os, const std::vector<LogRow>& log) {
  os << "iter,delta,energy,residual,step\n";
  for (const LogRow& row : log) {
    os << row.iter << ',' << format_double(row.delta) << ',' << format_double(row.energy) << ','
       << format_double(row.residual) << ',' << format_double(row.step) << '\n';
  }
}

Decoupling decoupling_check(const DiscreteMap& u, const DiscreteMap& v, const MetricField& metric, double p) {
  if (u.grid() != v.grid() || u.target_dim() != v.target_dim()) {
    throw Error(ErrorCode::precondition, "decoupling_check needs maps on the same grid and target");
  }
  DiscreteMap sum(u.grid(), u.target_dim());
  for (std::size_t k = 0; k < sum.values().size(); ++k) sum.values()[k] = u.values()[k] + v.values()[k];
  const double eu = p_energy(u, metric, p).total;
  const double ev = p_energy(v, metric, p).total;
  const double es = p_energy(sum, metric, p).total;
  const double nu = std::pow(eu, 1.0 / p);
  const double nv = std::pow(ev, 1.0 / p);
  Decoupling dc;
  dc.lhs = std::abs(es - eu);
  dc.rhs = p * std::pow(nu + nv + 1.0, p - 1.0) * nv;
  dc.slack = dc.rhs - dc.lhs;
  return dc;
}

}  // namespace btlab
