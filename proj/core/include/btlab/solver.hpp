#pragma once

#include <iosfwd>
#include <optional>
#include <vector>

#include "btlab/maps.hpp"

namespace btlab {

struct SolveConfig {
  double p = 2.0;
  // Final regularization level δ_min; the continuation runs through
  // delta_schedule first (ignored for p = 2, where δ has no effect).
  double delta = 1e-6;
  std::vector<double> delta_schedule{1e-1, 1e-2, 1e-3, 1e-4};
  double residual_tol = 1e-6;
  int max_iters = 50000;
  // Line search: Armijo sufficient decrease with constant armijo_c, first
  // trial step initial_step, shrink factor backtrack when a trial blows up.
  double initial_step = 1.0;
  double backtrack = 0.5;
  double armijo_c = 1e-4;
  // Preconditioned Polak-Ribière directions; false gives plain projected
  // (mass-lumped) gradient descent.
  bool conjugate = true;
  // Treat spherical-boundary nodes as free (natural boundary condition)
  // instead of holding them as Dirichlet data.
  bool free_spherical = false;
};

void validate(const SolveConfig& config);

struct LogRow {
  int iter = 0;
  double delta = 0.0;
  double energy = 0.0;
  double residual = 0.0;
  double step = 0.0;
};

struct SolveResult {
  DiscreteMap map;
  std::vector<LogRow> log;
  int iterations = 0;
  double energy = 0.0;    // unregularized p-energy of the output
  double residual = 0.0;  // weak residual norm of the output
  MaxPrincipleResult max_principle;
};

// Projected gradient descent for the constrained problem: flat nodes stay on
// the unit sphere, spherical nodes are held unless free_spherical is set.
// Throws NotConvergedError carrying the residual history.
SolveResult minimize_free_boundary(const DiscreteMap& init, const MetricField& metric, const SolveConfig& config);

// CSV with header `iter,delta,energy,residual,step`.
void write_log_csv(std::ostream& os, const std::vector<LogRow>& log);

enum class ExtensionInit { log_radial, linear_radial };

struct AnnulusProblem {
  AnnulusSpec annulus;
  int d = 2;
  // Dirichlet data, evaluated at chart points near the inner and outer
  // spheres (chart coordinates, i.e. including the annulus centre).
  PointFunction inner_data;
  PointFunction outer_data;
  double p = 2.0;
  // Metric in chart coordinates; empty means Euclidean.
  MetricField::Function metric;
  double h = 0.0;
};

struct ExtensionResult {
  DiscreteMap full;        // minimizer on the full annulus (centred at 0)
  DiscreteMap restricted;  // restriction to xₙ ≥ 0 when clipped, else = full
  double energy_full = 0.0;
  double energy = 0.0;  // energy on the problem domain (half of energy_full when clipped)
  double symmetry_defect = 0.0;
  bool constant_shortcut = false;
  int iterations = 0;
  std::vector<LogRow> log;
};

// Unconstrained minimizer of the regularized p-energy on the annulus. A
// clipped problem is solved on the full annulus with evenly reflected data and
// a symmetric iteration, then restricted back to the half annulus.
ExtensionResult annulus_extension(const AnnulusProblem& problem, const SolveConfig& config,
                                  ExtensionInit init = ExtensionInit::log_radial);

struct NeckComparison {
  double energy_u = 0.0;
  double energy_v = 0.0;
  double ratio = 0.0;
  double local_n_energy = 0.0;
};

// Compares u with its p-harmonic extension on the annulus. Refuses when the
// local n-energy of u there exceeds eps_star^n. The annulus centre must be a
// lattice point of u's grid.
NeckComparison neck_comparison(const DiscreteMap& u, const AnnulusSpec& spec, double p, const SolveConfig& config,
                               double eps_star, const MetricField::Function& metric = {});

struct Decoupling {
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;
};

// lhs = |E_p(u+v) - E_p(u)|, rhs = p(‖du‖_p + ‖dv‖_p + 1)^{p-1}‖dv‖_p.
Decoupling decoupling_check(const DiscreteMap& u, const DiscreteMap& v, const MetricField& metric, double p);

}  // namespace btlab
