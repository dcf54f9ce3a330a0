#pragma once

#include <span>
#include <vector>

#include "btlab/maps.hpp"

namespace btlab {

using Vec = std::vector<double>;

// Closed forms are guarded: evaluation within this distance of a singular
// point throws instead of returning a huge value.
inline constexpr double kGuardBand = 1e-9;

// ψ_a(x) = a + (1 - |a|²)(a - x)/|a - x|²; requires |a| < 1 and x ≠ a.
Vec mobius_psi(std::span<const double> a, std::span<const double> x);
// M_a = ψ_a/|ψ_a|², the conformal self-map of the unit ball; requires |x| ≤ 1.
Vec mobius(std::span<const double> a, std::span<const double> x);
// Same map in the cancelled form (a|y|² + s·y)/(|a|²|y|² + 2s a·y + s²),
// y = a - x, s = 1 - |a|², which is regular at x = a and up to the pole a/|a|².
void mobius_regular(std::span<const double> a, const double* x, double* out);
// M_a sampled on every active node (d = n).
DiscreteMap sample_mobius(GridPtr grid, std::span<const double> a);

// ι(q) = q/|q|² and Ξ(q) = dι(q) = Id/|q|² - 2 q⊗q/|q|⁴ (row-major d×d).
Vec inversion(std::span<const double> q);
Vec d_inversion(std::span<const double> q);

// Conformal chart π(x) = (2x', 1 - |x|²)/(|x'|² + (1 - xₙ)²) from the unit ball
// onto the closed upper half-space and its inverse
// π⁻¹(y) = (2y', |y|² - 1)/(|y'|² + (1 + yₙ)²).
Vec half_space_chart(std::span<const double> x);
Vec half_space_chart_inv(std::span<const double> y);
// Jacobians by central differences (row i = ∂/∂xᵢ, column = component).
Vec d_half_space_chart(std::span<const double> x, double step = 1e-5);
Vec d_half_space_chart_inv(std::span<const double> y, double step = 1e-5);
// Largest off-diagonal entry of dπᵀdπ relative to its mean diagonal entry.
double chart_conformality_defect(std::span<const double> x, double step = 1e-5);

// σ(x) = (x', -xₙ) and its (constant, orthogonal) differential.
Vec flat_reflection(std::span<const double> x);
Vec d_flat_reflection(int n);

struct ComparatorSpec {
  Vec a;
  Vec b;
  double inner = 0.0;
  double outer = 0.0;
  double p = 2.0;
};

void validate(const ComparatorSpec& spec);
// f(x) = a + log(|x|/R₁)/log(R₂/R₁)·(b - a), centred at the grid origin.
DiscreteMap log_comparator(GridPtr grid, const ComparatorSpec& spec);
// ∫_{R₁}^{R₂} ρ^{n-1-p} dρ; log(R₂/R₁) at p = n.
double radial_factor(int n, double p, double inner, double outer);
// Exact p-energy of f on the full annulus:
// |𝕊ⁿ⁻¹|·|b - a|ᵖ / log(R₂/R₁)ᵖ · radial_factor.
double comparator_energy(const ComparatorSpec& spec, int n);

}  // namespace btlab
