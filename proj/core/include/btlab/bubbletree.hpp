#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "btlab/concentration.hpp"
#include "btlab/maps.hpp"

namespace btlab {

// ---------------------------------------------------------------- rescaling

struct Rescaled {
  DiscreteMap map;
  MetricField metric;
  std::vector<double> anchor;
  double scale = 1.0;
  double radius = 0.0;  // window radius in rescaled units
};

// v(y) = u(a + λy) on the ball (half ball when aₙ = 0) of radius `radius`
// with spacing h/λ, by multilinear interpolation (exact when a is a lattice
// point). The metric g(a + λy) comes from `metric` when given. Throws
// Error(sub_resolution) when λ < h·min_scale_factor.
Rescaled rescale(const DiscreteMap& u, std::span<const double> anchor, double lambda, double radius,
                 const MetricField::Function& metric = {}, double min_scale_factor = 4.0);

// ----------------------------------------------------------- bubble windows

struct BubbleWindow {
  DiscreteMap omega;             // rescaled window; half grid when anchored on the face
  std::vector<double> anchor;    // a
  double scale = 1.0;            // λ
  std::vector<double> infinity;  // ω(∞)
};

// Mean of ω over the outermost `width` fraction of its window.
std::vector<double> value_at_infinity(const DiscreteMap& omega, double width = 0.1);

// w = u − Σ s(|x − a|/λ)·(ω((x − a)/λ) − ω(∞)), where s is 1 up to half
// the window radius R and falls off as log(R/ρ)/log 2 to 0 at R.
// Windows are extended below the flat face by even reflection.
DiscreteMap subtract_bubbles(const DiscreteMap& u, std::span<const BubbleWindow> windows);

// ---------------------------------------------------------------- sequences

struct SequenceSpec {
  int n = 2;
  std::vector<int> k;
  std::vector<double> alpha;       // p_k = n + α_k
  std::vector<DiscreteMap> maps;   // one per index; grids may differ
  MetricField::Function metric;    // empty: Euclidean
  std::optional<DiscreteMap> limit;  // weak limit, when known
  double energy_bound = 0.0;       // M
  std::vector<std::string> warnings;

  double p(std::size_t i) const { return n + alpha[i]; }
  std::size_t size() const { return k.size(); }
};

// α_k ≥ 0 nonincreasing, sizes consistent, sup E_{p_k}(u_k) ≤ M when M > 0.
void validate(const SequenceSpec& spec);

MetricField metric_on(const SequenceSpec& spec, const GridPtr& grid);

// Unit-scale bubble on the closed upper half-space together with its value at
// infinity.
struct BubblePrototype {
  std::string name;
  PointFunction omega;
  std::vector<double> at_infinity;
  int d = 2;
};

// π⁻¹ (or −π⁻¹ when `flipped`) in dimension n; d = n, ω(∞) = ±eₙ.
BubblePrototype chart_bubble(int n, bool flipped = false);

struct SyntheticBubble {
  BubblePrototype prototype;
  std::vector<std::vector<double>> centers;  // per sequence index
  std::vector<double> scales;
};

enum class Superposition {
  additive,        // u + Σ (ω − ω(∞)), then renormalized on the flat face
  complex_product  // n = d = 2: u·Π ω·conj(ω(∞)) as complex numbers
};

struct SyntheticSpec {
  int n = 2;
  double r = 0.5;
  std::vector<int> k;
  std::vector<double> alpha;
  std::vector<double> spacing;  // grid spacing per index
  PointFunction background;     // u
  int d = 2;
  std::vector<SyntheticBubble> bubbles;
  double min_scale_factor = 4.0;
  Superposition superposition = Superposition::additive;
};

// u_k = u + Σ (ωᵢ((x − a)/λ) − ωᵢ(∞)), renormalized on the flat face. Bubbles
// stacked at one point make the additive trace leave the sphere by O(1), and
// the face renormalization then creates a jump; the complex product keeps
// |u_k| = 1 on the face and agrees with the sum to first order when the
// scales separate. The limit is u sampled on the last grid; M is the largest
// energy. Throws Error(sub_resolution) naming k when some λ < h·min_scale_factor.
SequenceSpec make_synthetic_sequence(const SyntheticSpec& spec);

// --------------------------------------------------------------- extraction

struct ExtractConfig {
  double eps0 = 0.0;        // concentration threshold; 0: eps_b
  double eps_b = 0.0;       // energy gap; 0: 0.5·E_n(M₀)^{1/n}
  double eps_small = 0.0;   // annulus smallness ε_*; 0: eps_b
  double eps_star = 0.0;    // ε⋆ for every index; 0: min(ε₀/vol^{1/n−1/p}, ε_*, ε_b)
  double energy_bound = 0.0;  // M; 0: the sequence's bound
  double sep_threshold = 10.0;
  int max_generations = 6;
  double min_scale_factor = 4.0;
  double concentration_radius = 0.0;  // ρ for the concentration set; 0: r/4
  double region_radius = 0.0;         // extraction region; 0: r
  double max_scale_fraction = 0.5;    // stop once λ reaches this fraction of the region
  double neck_K = 10.0;
  double neck_eta = 0.25;
  std::size_t profile_samples = 12;  // Q(t) samples per index kept for plotting
  int jobs = 1;
};

struct Thresholds {
  double eps0 = 0.0;
  double eps_b = 0.0;
  double eps_small = 0.0;
  double energy_bound = 0.0;
  std::vector<double> eps_star;  // ε⋆ per sequence index
};

// E_n of the Möbius map M₀ measured by grid quadrature on a reference grid.
double reference_bubble_energy(int n);

struct BubbleRecord {
  int point = 0;
  int generation = 0;
  std::vector<int> k;  // indices at which the generation was detected
  std::vector<std::vector<double>> centers;
  std::vector<double> scales;
  std::vector<double> levels;
  std::vector<double> targets;
  BubbleWindow window;           // final detected index
  std::vector<double> window_energy;  // E_n(ω) per detected index
  double lambda_star = 1.0;
  double energy = 0.0;  // E_n(ω) at the final detected index
  std::optional<long> degree;
  bool quantized = true;  // E_n(ω) ≥ ε_bⁿ
};

struct EnergyLedger {
  double e_total = 0.0;
  double e_weak = 0.0;
  std::vector<double> parts;  // λ*ᵢ·E_n(ωᵢ)
  double defect = 0.0;
  std::vector<std::pair<int, double>> defect_by_k;
};

struct SeparationMatrix {
  std::vector<std::vector<double>> ratio;  // final-index max ratio, +inf on the diagonal
  std::vector<std::vector<int>> pass;      // 1 when separated
};

struct DegreeLedger {
  long deg_sequence = 0;  // deg(u_k) at the final index
  std::vector<long> deg_by_k;
  long deg_limit = 0;
  long deg_bubbles = 0;
};

struct ExtractionResult {
  std::vector<BubbleRecord> records;
  EnergyLedger ledger;
  std::vector<double> neck_energies;
  SeparationMatrix separation;
  Thresholds thresholds;
  std::vector<std::vector<double>> points;  // concentration set
  std::optional<DegreeLedger> degrees;
  // Q(t) of u_k on the first region, sampled per index (for plotting).
  std::vector<ConcentrationProfile> profiles;
  bool incomplete = false;
  std::vector<std::string> notes;
};

Thresholds resolve_thresholds(const SequenceSpec& spec, const ExtractConfig& config);

ExtractionResult extract_tree(const SequenceSpec& spec, const ExtractConfig& config = {});

// Separation of two (center, scale) sequences aligned by index.
double separation_ratio(std::span<const double> a1, double l1, std::span<const double> a2, double l2);
SeparationMatrix separation_check(std::span<const BubbleRecord> records, double threshold = 10.0);

// min over the last three indices of λ_k^{n−p_k}.
double lambda_star(std::span<const double> scales, std::span<const double> exponents, int n);

// p_K-energy of u_K on B(a_K, η) ∖ B(a_K, K·λ_K) at the record's last index.
double neck_energy(const SequenceSpec& spec, const BubbleRecord& record, double K = 10.0, double eta = 0.25);

}  // namespace btlab
