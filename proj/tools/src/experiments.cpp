#include "btlab_cli/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "btlab/analytic.hpp"
#include "btlab/bubbletree.hpp"
#include "btlab/degree.hpp"
#include "btlab/error.hpp"
#include "btlab/map_io.hpp"
#include "btlab/report.hpp"
#include "btlab/rng.hpp"
#include "btlab/solver.hpp"
#include "btlab_cli/pool.hpp"

namespace btlab::cli {

namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

Json num(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json nums(const std::vector<double>& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

// ------------------------------------------------------------------ context

struct Context {
  const Config& cfg;
  std::string kind;
  std::uint64_t seed = 0;
  int jobs = 1;
  fs::path out;
  std::vector<std::string> files;

  fs::path input(const std::string& p) const {
    const fs::path path(p);
    if (path.is_absolute() || cfg.base_dir().empty()) return path;
    return fs::path(cfg.base_dir()) / path;
  }

  void write(const std::string& name, const std::string& content) {
    fs::create_directories(out);
    const fs::path path = out / name;
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error(ErrorCode::io, "cannot write '" + path.string() + "'");
    os << content;
    if (!os) throw Error(ErrorCode::io, "write failed for '" + path.string() + "'");
    files.push_back(path.string());
  }
};

Json header(const Context& ctx) {
  Json j;
  j["experiment"] = ctx.kind;
  j["seed"] = ctx.seed;
  return j;
}

// --------------------------------------------------------------- parameters

GridPtr grid_from(const Config& c) {
  const long n = c.get_int("grid", "n", 2);
  if (n < 2 || n > 3) c.fail("grid", "n", "supported dimensions are 2 and 3");
  const double r = c.get_positive("grid", "r", 1.0);
  const double h = c.get_positive("grid", "h", 1.0 / 16);
  try {
    return make_grid(static_cast<int>(n), r, h, c.get_bool("grid", "half", true));
  } catch (const Error& e) {
    c.fail("grid", "h", e.what());
  }
}

MetricField::Function metric_fn(const Config& c, int n) {
  const std::string kind = c.get_string("metric", "kind", "euclidean");
  if (kind == "euclidean") {
    if (c.has("metric", "c")) c.fail("metric", "c", "only used with kind = conformal");
    return {};
  }
  if (kind != "conformal") c.fail("metric", "kind", "expected euclidean or conformal, got '" + kind + "'");
  // g = (1 + c|x|²)·Id
  const double k = c.get_double("metric", "c", 1.0);
  return [n, k](const double* x, double* g) {
    double r2 = 0.0;
    for (int i = 0; i < n; ++i) r2 += x[i] * x[i];
    for (int i = 0; i < n * n; ++i) g[i] = 0.0;
    for (int i = 0; i < n; ++i) g[i * n + i] = 1.0 + k * r2;
  };
}

MetricField metric_for(const MetricField::Function& fn, const GridPtr& grid) {
  return fn ? MetricField::from_function(grid, fn) : MetricField::euclidean(grid);
}

SolveConfig solver_from(const Config& c, int n) {
  SolveConfig s;
  s.p = c.get_double("solver", "p", n);
  s.delta = c.get_double("solver", "delta", s.delta);
  s.delta_schedule = c.get_doubles("solver", "delta_schedule", s.delta_schedule);
  s.residual_tol = c.get_positive("solver", "residual_tol", s.residual_tol);
  s.max_iters = static_cast<int>(c.get_int("solver", "max_iters", s.max_iters));
  s.initial_step = c.get_positive("solver", "initial_step", s.initial_step);
  s.backtrack = c.get_positive("solver", "backtrack", s.backtrack);
  s.armijo_c = c.get_positive("solver", "armijo_c", s.armijo_c);
  s.conjugate = c.get_bool("solver", "conjugate", s.conjugate);
  s.free_spherical = c.get_bool("solver", "free_spherical", s.free_spherical);
  try {
    validate(s);
  } catch (const Error& e) {
    throw Error(ErrorCode::parse, c.where("solver", "") + "[solver] " + e.what());
  }
  return s;
}

double eps_b_from(const Config& c, int n) {
  if (c.has("thresholds", "eps_b") && c.has("thresholds", "eps_b_factor")) {
    c.fail("thresholds", "eps_b_factor", "give either eps_b or eps_b_factor");
  }
  if (c.has("thresholds", "eps_b")) return c.get_positive("thresholds", "eps_b", 0.0);
  if (c.has("thresholds", "eps_b_factor")) {
    return c.get_positive("thresholds", "eps_b_factor", 0.0) * std::pow(reference_bubble_energy(n), 1.0 / n);
  }
  return 0.0;
}

// Smooth random map: a unit offset plus `modes` sine waves with seeded
// frequencies, phases and amplitudes. Draw order is fixed so (seed, stream)
// determines the map.
struct RandomField {
  int n = 2;
  int d = 3;
  int modes = 4;
  std::vector<double> freq, phase, amp, offset;

  RandomField(Rng& g, int n_, int d_, int modes_, double frequency) : n(n_), d(d_), modes(modes_) {
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    double len = 0.0;
    while (len < 1e-3) {
      offset.clear();
      len = 0.0;
      for (int c = 0; c < d; ++c) {
        offset.push_back(normal(g));
        len += offset.back() * offset.back();
      }
      len = std::sqrt(len);
    }
    for (double& o : offset) o /= len;
    for (int k = 0; k < modes * n; ++k) freq.push_back(frequency * uni(g));
    for (int k = 0; k < modes; ++k) phase.push_back(std::numbers::pi * uni(g));
    for (int k = 0; k < modes * d; ++k) amp.push_back(uni(g) / modes);
  }

  DiscreteMap sample_on(const GridPtr& grid, double amplitude) const {
    DiscreteMap u = btlab::sample(grid, d, [&](const double* x, double* out) {
      for (int c = 0; c < d; ++c) out[c] = offset[c];
      for (int k = 0; k < modes; ++k) {
        double arg = phase[k];
        for (int a = 0; a < n; ++a) arg += freq[k * n + a] * x[a];
        const double s = amplitude * std::sin(arg);
        for (int c = 0; c < d; ++c) out[c] += amp[k * d + c] * s;
      }
    });
    u.renormalize_flat();
    return u;
  }
};

std::vector<double> sized(const Config& c, const std::string& section, const std::string& key,
                          std::vector<double> fallback, std::size_t size) {
  std::vector<double> v = c.get_doubles(section, key, fallback);
  if (v.size() != size) c.fail(section, key, "expected " + std::to_string(size) + " values");
  return v;
}

DiscreteMap init_map(const Context& ctx, Rng& rng) {
  const Config& c = ctx.cfg;
  const std::string kind = c.require_string("init", "kind");
  if (kind == "file") return read_map(ctx.input(c.require_string("init", "file")).string());
  const GridPtr grid = grid_from(c);
  const int n = grid->dim();
  if (kind == "mobius") {
    const std::vector<double> a = sized(c, "init", "a", std::vector<double>(n, 0.0), n);
    double a2 = 0.0;
    for (double x : a) a2 += x * x;
    if (!(a2 < 1.0)) c.fail("init", "a", "requires |a| < 1");
    return sample_mobius(grid, a);
  }
  if (kind == "chart") {
    const std::vector<double> center = sized(c, "init", "center", std::vector<double>(n, 0.0), n);
    const double scale = c.get_positive("init", "scale", 1.0);
    const BubblePrototype proto = chart_bubble(n, c.get_bool("init", "flipped", false));
    return btlab::sample(grid, n, [&](const double* x, double* out) {
      std::vector<double> y(n);
      for (int i = 0; i < n; ++i) y[i] = (x[i] - center[i]) / scale;
      proto.omega(y.data(), out);
    });
  }
  if (kind == "random") {
    const long d = c.get_int("init", "d", n);
    if (d < 1) c.fail("init", "d", "must be positive");
    const long modes = c.get_int("init", "modes", 4);
    if (modes < 1) c.fail("init", "modes", "must be positive");
    const RandomField f(rng, n, static_cast<int>(d), static_cast<int>(modes),
                        c.get_positive("init", "frequency", 3.0));
    return f.sample_on(grid, c.get_positive("init", "amplitude", 0.1));
  }
  if (kind == "constant") {
    const std::vector<double> value = c.require_doubles("init", "value");
    DiscreteMap u = constant_map(grid, value);
    try {
      u.renormalize_flat();
    } catch (const Error&) {
      c.fail("init", "value", "must be nonzero");
    }
    return u;
  }
  c.fail("init", "kind", "expected mobius, chart, random, constant or file, got '" + kind + "'");
}

Json grid_json(const HalfBallGrid& g) {
  Json j;
  j["n"] = g.dim();
  j["r"] = num(g.radius());
  j["h"] = num(g.spacing());
  j["half"] = g.half();
  j["nodes"] = g.node_count();
  return j;
}

// ---------------------------------------------------------------- sequences

std::vector<double> alpha_values(const Config& c, const std::vector<int>& ks) {
  const std::string rule = c.get_string("sequence", "alpha_rule", "geometric");
  std::vector<double> alpha;
  if (rule == "list") {
    alpha = c.require_doubles("sequence", "alpha");
    if (alpha.size() != ks.size()) c.fail("sequence", "alpha", "needs one value per index");
    return alpha;
  }
  if (c.has("sequence", "alpha")) c.fail("sequence", "alpha", "only used with alpha_rule = list");
  const double ac = c.get_double("sequence", "alpha_c", 1.0);
  const double base = c.get_positive("sequence", "alpha_base", 0.5);
  for (int k : ks) {
    if (rule == "geometric") {
      alpha.push_back(ac * std::pow(base, k));
    } else if (rule == "harmonic") {
      if (k == 0) c.fail("sequence", "k", "harmonic exponents need k ≠ 0");
      alpha.push_back(ac / k);
    } else if (rule == "zero") {
      alpha.push_back(0.0);
    } else {
      c.fail("sequence", "alpha_rule", "expected geometric, harmonic, zero or list, got '" + rule + "'");
    }
  }
  return alpha;
}

std::vector<std::string> bubble_sections(const Config& c) {
  std::vector<std::string> out;
  for (const std::string& s : c.sections()) {
    if (s.rfind("bubble", 0) == 0) out.push_back(s);
  }
  return out;
}

double max_energy(const SequenceSpec& spec) {
  double m = 0.0;
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const DiscreteMap& u = spec.maps[i];
    m = std::max(m, p_energy(u, metric_on(spec, u.grid()), spec.p(i)).total);
  }
  return m;
}

SequenceSpec build_sequence(const Context& ctx) {
  const Config& c = ctx.cfg;
  const std::string source = c.get_string("sequence", "source", "synthetic");
  const std::vector<int> ks = c.require_ints("sequence", "k");
  const std::vector<double> alpha = alpha_values(c, ks);
  SequenceSpec spec;
  if (source == "synthetic") {
    if (c.has("sequence", "maps") || c.has("sequence", "limit")) {
      c.fail("sequence", c.has("sequence", "maps") ? "maps" : "limit", "only used with source = files");
    }
    SyntheticSpec s;
    const long n = c.get_int("synthetic", "n", 2);
    if (n < 2 || n > 3) c.fail("synthetic", "n", "supported dimensions are 2 and 3");
    s.n = static_cast<int>(n);
    s.d = s.n;
    s.r = c.get_positive("synthetic", "r", 0.5);
    s.k = ks;
    s.alpha = alpha;
    s.min_scale_factor = c.get_positive("synthetic", "min_scale_factor", 4.0);
    std::vector<double> e_n(s.n, 0.0);
    e_n.back() = 1.0;
    const std::vector<double> bg = sized(c, "synthetic", "background", e_n, s.n);
    s.background = [bg](const double*, double* v) { std::copy(bg.begin(), bg.end(), v); };
    const std::string sup = c.get_string("synthetic", "superposition", "additive");
    if (sup == "additive") {
      s.superposition = Superposition::additive;
    } else if (sup == "complex_product") {
      s.superposition = Superposition::complex_product;
    } else {
      c.fail("synthetic", "superposition", "expected additive or complex_product, got '" + sup + "'");
    }
    for (const std::string& sec : bubble_sections(c)) {
      const std::string proto = c.get_string(sec, "prototype", "chart");
      if (proto != "chart") c.fail(sec, "prototype", "only the chart bubble is available, got '" + proto + "'");
      SyntheticBubble b{chart_bubble(s.n, c.get_bool(sec, "flipped", false)), {}, {}};
      const std::vector<double> center = sized(c, sec, "center", std::vector<double>(s.n, 0.0), s.n);
      const double lc = c.get_positive(sec, "lambda_c", 1.0);
      const double lb = c.get_positive(sec, "lambda_base", 0.5);
      const double lp = c.get_double(sec, "lambda_power", 1.0);
      for (int k : ks) {
        b.centers.push_back(center);
        b.scales.push_back(lc * std::pow(lb, lp * k));
      }
      s.bubbles.push_back(std::move(b));
    }
    // h_k = min(h_max, max(h_min, λ_min/ratio)), λ_min the smallest scale at k
    const double ratio = c.get_positive("synthetic", "spacing_ratio", 8.0);
    const double h_min = c.get_double("synthetic", "h_min", 0.0);
    const double h_max = c.get_positive("synthetic", "h_max", 1.0 / 64);
    for (std::size_t i = 0; i < ks.size(); ++i) {
      double lmin = INFINITY;
      for (const SyntheticBubble& b : s.bubbles) lmin = std::min(lmin, b.scales[i]);
      s.spacing.push_back(std::min(h_max, std::max(h_min, lmin / ratio)));
    }
    spec = make_synthetic_sequence(s);
    spec.metric = metric_fn(c, s.n);
    if (spec.metric) spec.energy_bound = max_energy(spec);
  } else if (source == "files") {
    const std::string pattern = c.require_string("sequence", "maps");
    const auto slot = pattern.find("{k}");
    if (slot == std::string::npos) c.fail("sequence", "maps", "pattern needs a {k} placeholder");
    spec.k = ks;
    spec.alpha = alpha;
    for (int k : ks) {
      std::string path = pattern;
      path.replace(slot, 3, std::to_string(k));
      spec.maps.push_back(read_map(ctx.input(path).string()));
    }
    spec.n = spec.maps.front().grid()->dim();
    if (c.has("sequence", "limit")) spec.limit = read_map(ctx.input(c.require_string("sequence", "limit")).string());
    spec.metric = metric_fn(c, spec.n);
    spec.energy_bound = max_energy(spec);
  } else {
    c.fail("sequence", "source", "expected synthetic or files, got '" + source + "'");
  }
  if (c.has("thresholds", "energy_bound")) spec.energy_bound = c.get_positive("thresholds", "energy_bound", 0.0);
  validate(spec);
  return spec;
}

ExtractConfig extract_config(const Context& ctx, int n) {
  const Config& c = ctx.cfg;
  ExtractConfig e;
  e.eps0 = c.get_positive("thresholds", "eps0", 0.0);
  e.eps_b = eps_b_from(c, n);
  e.eps_small = c.get_positive("thresholds", "eps_small", 0.0);
  e.eps_star = c.get_positive("thresholds", "eps_star", 0.0);
  e.energy_bound = c.get_positive("thresholds", "energy_bound", 0.0);
  e.sep_threshold = c.get_positive("thresholds", "sep_threshold", e.sep_threshold);
  const long gens = c.get_int("extract", "max_generations", e.max_generations);
  if (gens < 1) c.fail("extract", "max_generations", "must be positive");
  e.max_generations = static_cast<int>(gens);
  e.min_scale_factor = c.get_positive("extract", "min_scale_factor", e.min_scale_factor);
  e.concentration_radius = c.get_positive("extract", "concentration_radius", 0.0);
  e.region_radius = c.get_positive("extract", "region_radius", 0.0);
  e.max_scale_fraction = c.get_positive("extract", "max_scale_fraction", e.max_scale_fraction);
  const long samples = c.get_int("extract", "profile_samples", static_cast<long>(e.profile_samples));
  if (samples < 0) c.fail("extract", "profile_samples", "must be nonnegative");
  e.profile_samples = static_cast<std::size_t>(samples);
  e.neck_K = c.get_positive("neck", "K", e.neck_K);
  e.neck_eta = c.get_positive("neck", "eta", e.neck_eta);
  e.jobs = ctx.jobs;
  return e;
}

struct Extraction {
  SequenceSpec spec;
  ExtractionResult result;
};

Extraction run_extraction(const Context& ctx) {
  Extraction x;
  x.spec = build_sequence(ctx);
  x.result = extract_tree(x.spec, extract_config(ctx, x.spec.n));
  return x;
}

// -------------------------------------------------------------- experiments

int solve(Context& ctx, Json& report) {
  Rng rng = make_rng(ctx.seed, 0);
  const DiscreteMap init = init_map(ctx, rng);
  const GridPtr grid = init.grid();
  const MetricField metric = metric_for(metric_fn(ctx.cfg, grid->dim()), grid);
  const SolveConfig sc = solver_from(ctx.cfg, grid->dim());
  const SolveResult r = minimize_free_boundary(init, metric, sc);
  // independent re-assembly of the residual from the output map
  const double reassembled =
      (sc.free_spherical ? weak_residual_free(r.map, metric, sc.p) : weak_residual(r.map, metric, sc.p)).norm;
  bool monotone = true;
  for (std::size_t i = 1; i < r.log.size(); ++i) {
    const LogRow& a = r.log[i - 1];
    const LogRow& b = r.log[i];
    if (a.delta == b.delta && b.energy > a.energy + 1e-12 * std::abs(a.energy)) monotone = false;
  }
  report["grid"] = grid_json(*grid);
  report["p"] = num(sc.p);
  report["iterations"] = r.iterations;
  report["energy_initial"] = num(p_energy(init, metric, sc.p).total);
  report["energy"] = num(r.energy);
  report["residual"] = num(r.residual);
  report["residual_reassembled"] = num(reassembled);
  report["residual_tol"] = num(sc.residual_tol);
  report["converged"] = reassembled <= sc.residual_tol;
  report["monotone_descent"] = monotone;
  report["max_principle"] = {{"ok", r.max_principle.ok}, {"worst_norm", num(r.max_principle.worst_norm)}};
  report["oscillation"] = num(oscillation(r.map));
  std::ostringstream map, log;
  write_map(map, r.map);
  write_log_csv(log, r.log);
  ctx.write("solution.map", map.str());
  ctx.write("log.csv", log.str());
  return 0;
}

int mobius_sweep(Context& ctx, Json& report) {
  const Config& c = ctx.cfg;
  const GridPtr grid = grid_from(c);
  const int n = grid->dim();
  const MetricField metric = metric_for(metric_fn(c, n), grid);
  const std::vector<double> as = c.get_doubles("sweep", "a", {0.0, 0.3, 0.6, 0.9});
  if (as.empty()) c.fail("sweep", "a", "empty list");
  for (double a : as) {
    if (!(a >= 0.0 && a < 1.0)) c.fail("sweep", "a", "every |a| must lie in [0, 1)");
  }
  std::vector<double> dir(n, 0.0);
  dir[0] = 1.0;
  dir = sized(c, "sweep", "direction", dir, n);
  double len = 0.0;
  for (double x : dir) len += x * x;
  if (!(len > 0.0)) c.fail("sweep", "direction", "must be nonzero");
  for (double& x : dir) x /= std::sqrt(len);

  std::vector<double> energy(as.size());
  parallel_for(as.size(), ctx.jobs, [&](std::size_t i) {
    std::vector<double> a(n);
    for (int j = 0; j < n; ++j) a[j] = as[i] * dir[j];
    energy[i] = p_energy(sample_mobius(grid, a), metric, n).total;
  });
  const auto [lo, hi] = std::minmax_element(energy.begin(), energy.end());
  double mean = 0.0;
  for (double e : energy) mean += e;
  mean /= static_cast<double>(energy.size());

  report["grid"] = grid_json(*grid);
  report["direction"] = nums(dir);
  Json rows = Json::array();
  std::ostringstream csv;
  csv << "a,energy\n";
  for (std::size_t i = 0; i < as.size(); ++i) {
    rows.push_back({{"a", num(as[i])}, {"energy", num(energy[i])}});
    csv << format_double(as[i]) << ',' << format_double(energy[i]) << '\n';
  }
  report["rows"] = rows;
  report["mean_energy"] = num(mean);
  // (max − min)/mean
  report["max_relative_spread"] = num((*hi - *lo) / mean);
  ctx.write("mobius.csv", csv.str());
  return 0;
}

int extract(Context& ctx, Json& report) {
  const Extraction x = run_extraction(ctx);
  report["incomplete"] = x.result.incomplete;
  report["extraction"] = Json::parse(extraction_json(x.result));
  std::ostringstream profile, defect;
  write_profile_csv(profile, x.spec, x.result);
  write_defect_csv(defect, x.result);
  ctx.write("profile.csv", profile.str());
  ctx.write("defect.csv", defect.str());
  return x.result.incomplete ? 2 : 0;
}

int verify_identity(Context& ctx, Json& report) {
  const Config& c = ctx.cfg;
  const double defect_tol = c.get_positive("check", "defect_tol", 0.05);
  const double super_tol = c.get_positive("check", "superadditivity_tol", 0.05);
  const Extraction x = run_extraction(ctx);
  const ExtractionResult& r = x.result;
  const EnergyLedger& L = r.ledger;
  const int n = x.spec.n;

  Json checks = Json::array();
  bool all = true;
  auto add = [&](const std::string& name, Json value, Json bound, std::optional<bool> pass) {
    checks.push_back({{"name", name}, {"value", value}, {"bound", bound}, {"pass", pass ? Json(*pass) : Json(nullptr)}});
    if (pass && !*pass) all = false;
  };

  const double rel_defect = L.e_total > 0.0 ? L.defect / L.e_total : 0.0;
  add("energy_identity", num(rel_defect), num(defect_tol), std::abs(rel_defect) <= defect_tol);
  double parts = 0.0;
  for (double v : L.parts) parts += v;
  const double super = L.e_total > 0.0 ? parts / L.e_total : 0.0;
  add("superadditivity", num(super), num(1.0 + super_tol), super <= 1.0 + super_tol);

  const double eps_bn = std::pow(r.thresholds.eps_b, n);
  const double lstar_hi = r.thresholds.energy_bound / eps_bn;
  bool lstar_ok = true, quant_ok = true;
  double min_energy = INFINITY;
  Json lstars = Json::array();
  for (const BubbleRecord& rec : r.records) {
    lstars.push_back(num(rec.lambda_star));
    lstar_ok = lstar_ok && rec.lambda_star >= 1.0 - 1e-9 && rec.lambda_star <= lstar_hi;
    quant_ok = quant_ok && rec.quantized;
    min_energy = std::min(min_energy, rec.energy);
  }
  add("lambda_star_range", lstars, nums({1.0 - 1e-9, lstar_hi}), lstar_ok);
  add("energy_quantization", num(min_energy), num(eps_bn), quant_ok);

  bool sep_ok = true;
  for (std::size_t i = 0; i < r.separation.pass.size(); ++i) {
    for (std::size_t j = 0; j < r.separation.pass[i].size(); ++j) {
      if (i != j && !r.separation.pass[i][j]) sep_ok = false;
    }
  }
  double min_ratio = INFINITY;
  for (std::size_t i = 0; i < r.separation.ratio.size(); ++i) {
    for (std::size_t j = 0; j < r.separation.ratio[i].size(); ++j) {
      if (i != j) min_ratio = std::min(min_ratio, r.separation.ratio[i][j]);
    }
  }
  add("separation", num(min_ratio), num(c.get_positive("thresholds", "sep_threshold", 10.0)), sep_ok);

  if (r.degrees) {
    const DegreeLedger& d = *r.degrees;
    add("degree_additivity", d.deg_sequence, d.deg_limit + d.deg_bubbles, d.deg_sequence == d.deg_limit + d.deg_bubbles);
  } else {
    add("degree_additivity", nullptr, nullptr, std::nullopt);
  }

  report["incomplete"] = r.incomplete;
  report["records"] = r.records.size();
  report["E_total"] = num(L.e_total);
  report["E_weak"] = num(L.e_weak);
  report["defect"] = num(L.defect);
  report["checks"] = checks;
  report["pass"] = all;
  report["notes"] = r.notes;
  return r.incomplete ? 2 : 0;
}

int gap_test(Context& ctx, Json& report) {
  const Config& c = ctx.cfg;
  const GridPtr grid = grid_from(c);
  const int n = grid->dim();
  const MetricField metric = metric_for(metric_fn(c, n), grid);
  SolveConfig sc = solver_from(c, n);
  if (c.has("solver", "free_spherical") && !sc.free_spherical) {
    c.fail("solver", "free_spherical", "the gap test needs a free spherical boundary");
  }
  sc.free_spherical = true;
  const long trials = c.get_int("gap", "trials", 20);
  if (trials < 1) c.fail("gap", "trials", "must be positive");
  const long d = c.get_int("gap", "d", 3);
  if (d < 1) c.fail("gap", "d", "must be positive");
  const long modes = c.get_int("gap", "modes", 4);
  if (modes < 1) c.fail("gap", "modes", "must be positive");
  const double amplitude = c.get_positive("gap", "amplitude", 0.5);
  const double frequency = c.get_positive("gap", "frequency", 3.0);
  const double fraction = c.get_positive("gap", "energy_fraction", 1.0);
  const double osc_tol = c.get_positive("gap", "osc_tol", 1e-3);
  double eps_b = eps_b_from(c, n);
  if (eps_b == 0.0) eps_b = 0.5 * std::pow(reference_bubble_energy(n), 1.0 / n);
  const double bound = fraction * std::pow(eps_b / 2.0, n);

  struct Trial {
    double amplitude = 0.0;
    double energy_init = 0.0;
    double energy = NAN;
    double residual = NAN;
    double oscillation = NAN;
    int iterations = 0;
    bool converged = false;
    bool constant = false;
  };
  std::vector<Trial> rows(static_cast<std::size_t>(trials));
  parallel_for(rows.size(), ctx.jobs, [&](std::size_t t) {
    Rng rng = make_rng(ctx.seed, t);
    const RandomField f(rng, n, static_cast<int>(d), static_cast<int>(modes), frequency);
    Trial& row = rows[t];
    row.amplitude = amplitude;
    DiscreteMap u = f.sample_on(grid, row.amplitude);
    row.energy_init = p_energy(u, metric, n).total;
    for (int halvings = 0; row.energy_init >= bound; ++halvings) {
      if (halvings == 60) throw Error(ErrorCode::precondition, "trial " + std::to_string(t) + ": cannot reach the energy bound");
      row.amplitude /= 2.0;
      u = f.sample_on(grid, row.amplitude);
      row.energy_init = p_energy(u, metric, n).total;
    }
    try {
      const SolveResult r = minimize_free_boundary(u, metric, sc);
      row.energy = r.energy;
      row.residual = weak_residual_free(r.map, metric, sc.p).norm;
      row.oscillation = oscillation(r.map);
      row.iterations = r.iterations;
      row.converged = row.residual <= sc.residual_tol;
      row.constant = row.oscillation <= osc_tol;
    } catch (const NotConvergedError&) {
      row.converged = false;
    }
  });

  bool all = true;
  Json out = Json::array();
  std::ostringstream csv;
  csv << "trial,amplitude,energy_init,energy,residual,oscillation,iterations,constant\n";
  for (std::size_t t = 0; t < rows.size(); ++t) {
    const Trial& r = rows[t];
    all = all && r.constant;
    out.push_back({{"trial", t},
                   {"amplitude", num(r.amplitude)},
                   {"energy_init", num(r.energy_init)},
                   {"energy", num(r.energy)},
                   {"residual", num(r.residual)},
                   {"oscillation", num(r.oscillation)},
                   {"iterations", r.iterations},
                   {"converged", r.converged},
                   {"constant", r.constant}});
    csv << t << ',' << format_double(r.amplitude) << ',' << format_double(r.energy_init) << ','
        << format_double(r.energy) << ',' << format_double(r.residual) << ',' << format_double(r.oscillation) << ','
        << r.iterations << ',' << (r.constant ? 1 : 0) << '\n';
  }
  report["grid"] = grid_json(*grid);
  report["eps_b"] = num(eps_b);
  report["energy_bound"] = num(bound);
  report["osc_tol"] = num(osc_tol);
  report["trials"] = out;
  report["constant"] = all;
  ctx.write("trials.csv", csv.str());
  return 0;
}

int degree_experiment(Context& ctx, Json& report) {
  const Config& c = ctx.cfg;
  Rng rng = make_rng(ctx.seed, 0);
  const DiscreteMap u = init_map(ctx, rng);
  const std::string which = c.get_string("degree", "boundary", "automatic");
  DegreeBoundary b = DegreeBoundary::automatic;
  if (which == "flat_face") {
    b = DegreeBoundary::flat_face;
  } else if (which == "sphere") {
    b = DegreeBoundary::sphere;
  } else if (which != "automatic") {
    c.fail("degree", "boundary", "expected automatic, flat_face or sphere, got '" + which + "'");
  }
  const DegreeResult r = degree(u, b);
  report["grid"] = grid_json(*u.grid());
  report["boundary"] = which;
  report["value"] = r.value;
  report["raw"] = num(r.raw);
  return 0;
}

// Mean of u over nodes with lo ≤ |x − a| < hi; empty when no node qualifies.
std::vector<double> shell_mean(const DiscreteMap& u, const std::vector<double>& a, double lo, double hi) {
  const HalfBallGrid& g = *u.grid();
  std::vector<double> sum(u.target_dim(), 0.0), x(g.dim());
  double weight = 0.0;
  for (std::size_t j = 0; j < g.node_count(); ++j) {
    g.position(j, x.data());
    double r2 = 0.0;
    for (int i = 0; i < g.dim(); ++i) r2 += (x[i] - a[i]) * (x[i] - a[i]);
    const double r = std::sqrt(r2);
    if (r < lo || r >= hi) continue;
    const double w = g.weight(j);
    for (int k = 0; k < u.target_dim(); ++k) sum[k] += w * u.at(j)[k];
    weight += w;
  }
  if (weight == 0.0) return {};
  for (double& s : sum) s /= weight;
  return sum;
}

int neck(Context& ctx, Json& report) {
  const Config& c = ctx.cfg;
  const double K = c.get_positive("neck", "K", 10.0);
  const double eta = c.get_positive("neck", "eta", 0.25);
  const double collar = c.get_positive("neck", "collar", 0.25);
  if (collar >= 1.0) c.fail("neck", "collar", "must be below 1");
  const Extraction x = run_extraction(ctx);
  const SequenceSpec& spec = x.spec;

  Json rows = Json::array();
  std::ostringstream csv;
  csv << "record,k,scale,neck_energy,relative,collar_gap\n";
  for (std::size_t j = 0; j < x.result.records.size(); ++j) {
    const BubbleRecord& rec = x.result.records[j];
    for (std::size_t t = 0; t < rec.k.size(); ++t) {
      BubbleRecord prefix = rec;
      prefix.k.resize(t + 1);
      prefix.centers.resize(t + 1);
      prefix.scales.resize(t + 1);
      const double e = neck_energy(spec, prefix, K, eta);
      const double lambda = rec.scales[t];
      const double we = t < rec.window_energy.size() ? rec.window_energy[t] : NAN;
      // |mean over the inner collar − mean over the outer collar|
      double gap = NAN;
      const double in_lo = K * lambda, in_hi = K * lambda * (1.0 + collar);
      const double out_lo = eta * (1.0 - collar), out_hi = eta;
      if (in_hi <= out_lo) {
        const std::size_t i = static_cast<std::size_t>(std::find(spec.k.begin(), spec.k.end(), rec.k[t]) - spec.k.begin());
        const std::vector<double> mi = shell_mean(spec.maps[i], rec.centers[t], in_lo, in_hi);
        const std::vector<double> mo = shell_mean(spec.maps[i], rec.centers[t], out_lo, out_hi);
        if (!mi.empty() && !mo.empty()) {
          double s = 0.0;
          for (std::size_t k = 0; k < mi.size(); ++k) s += (mi[k] - mo[k]) * (mi[k] - mo[k]);
          gap = std::sqrt(s);
        }
      }
      const double rel = std::isfinite(we) && we > 0.0 ? e / we : NAN;
      rows.push_back({{"record", j},
                      {"k", rec.k[t]},
                      {"scale", num(lambda)},
                      {"neck_energy", num(e)},
                      {"relative", num(rel)},
                      {"collar_gap", num(gap)}});
      csv << j << ',' << rec.k[t] << ',' << format_double(lambda) << ',' << format_double(e) << ','
          << format_double(rel) << ',' << format_double(gap) << '\n';
    }
  }
  report["incomplete"] = x.result.incomplete;
  report["K"] = num(K);
  report["eta"] = num(eta);
  report["collar"] = num(collar);
  report["rows"] = rows;
  report["notes"] = x.result.notes;
  ctx.write("neck.csv", csv.str());
  return x.result.incomplete ? 2 : 0;
}

using Runner = int (*)(Context&, Json&);

Runner runner_for(const std::string& kind) {
  if (kind == "solve") return solve;
  if (kind == "mobius-sweep") return mobius_sweep;
  if (kind == "extract") return extract;
  if (kind == "verify-identity") return verify_identity;
  if (kind == "gap-test") return gap_test;
  if (kind == "degree") return degree_experiment;
  if (kind == "neck") return neck;
  return nullptr;
}

}  // namespace

const std::vector<std::string>& experiment_kinds() {
  static const std::vector<std::string> kinds{"solve",    "mobius-sweep", "extract", "verify-identity",
                                              "gap-test", "degree",       "neck"};
  return kinds;
}

Schema schema_for(const std::string& kind) {
  Schema s{{"experiment", {"kind", "seed", "jobs"}}, {"output", {"dir"}}};
  const std::vector<std::string> grid{"n", "r", "h", "half"};
  const std::vector<std::string> metric{"kind", "c"};
  const std::vector<std::string> solver{"p",         "delta",        "delta_schedule", "residual_tol", "max_iters",
                                        "initial_step", "backtrack", "armijo_c",       "conjugate",    "free_spherical"};
  const std::vector<std::string> init{"kind",      "a",    "scale", "center", "flipped", "amplitude",
                                      "modes",     "frequency", "d", "value",  "file"};
  auto sequence_sections = [&] {
    s["metric"] = metric;
    s["sequence"] = {"source", "k", "alpha_rule", "alpha_c", "alpha_base", "alpha", "maps", "limit"};
    s["synthetic"] = {"n", "r", "background", "superposition", "spacing_ratio", "h_min", "h_max", "min_scale_factor"};
    s["bubble#"] = {"prototype", "flipped", "center", "lambda_c", "lambda_base", "lambda_power"};
    s["thresholds"] = {"eps0", "eps_b", "eps_b_factor", "eps_small", "eps_star", "energy_bound", "sep_threshold"};
    s["extract"] = {"max_generations", "min_scale_factor", "concentration_radius", "region_radius",
                    "max_scale_fraction", "profile_samples"};
    s["neck"] = {"K", "eta", "collar"};
  };
  if (kind == "solve") {
    s["grid"] = grid;
    s["metric"] = metric;
    s["solver"] = solver;
    s["init"] = init;
  } else if (kind == "mobius-sweep") {
    s["grid"] = grid;
    s["metric"] = metric;
    s["sweep"] = {"a", "direction"};
  } else if (kind == "extract" || kind == "neck") {
    sequence_sections();
  } else if (kind == "verify-identity") {
    sequence_sections();
    s["check"] = {"defect_tol", "superadditivity_tol"};
  } else if (kind == "gap-test") {
    s["grid"] = grid;
    s["metric"] = metric;
    s["solver"] = solver;
    s["thresholds"] = {"eps_b", "eps_b_factor"};
    s["gap"] = {"trials", "amplitude", "modes", "frequency", "d", "energy_fraction", "osc_tol"};
  } else if (kind == "degree") {
    s["grid"] = grid;
    s["init"] = init;
    s["degree"] = {"boundary"};
  }
  return s;
}

Outcome run_experiment(const Config& config, const std::string& requested, const Overrides& overrides) {
  std::string kind = requested;
  if (config.has("experiment", "kind")) {
    const std::string in_file = config.get_string("experiment", "kind", "");
    if (!kind.empty() && kind != in_file) {
      config.fail("experiment", "kind", "config is for '" + in_file + "' but '" + kind + "' was requested");
    }
    kind = in_file;
  }
  if (kind.empty()) config.fail("experiment", "kind", "required key is missing");
  const Runner runner = runner_for(kind);
  if (!runner) config.fail("experiment", "kind", "unknown experiment '" + kind + "'");
  check_schema(config, schema_for(kind));

  Context ctx{config, kind, 0, 1, {}, {}};
  const long seed = config.get_int("experiment", "seed", 0);
  if (seed < 0) config.fail("experiment", "seed", "must be nonnegative");
  ctx.seed = overrides.seed.value_or(static_cast<std::uint64_t>(seed));
  const long jobs = config.get_int("experiment", "jobs", 1);
  if (jobs < 1) config.fail("experiment", "jobs", "must be positive");
  ctx.jobs = overrides.jobs.value_or(static_cast<int>(jobs));
  if (ctx.jobs < 1) throw Error(ErrorCode::precondition, "--jobs must be positive");
  ctx.out = overrides.out_dir.value_or(config.get_string("output", "dir", "."));

  Json report = header(ctx);
  Outcome o;
  o.exit_code = runner(ctx, report);
  o.report = report.dump(2) + "\n";
  ctx.write("report.json", o.report);
  o.files = ctx.files;
  return o;
}

int run(const std::string& kind, const std::string& config_path, const Overrides& overrides, std::ostream& out,
        std::ostream& err) {
  try {
    const Config config = Config::load(config_path);
    const Outcome o = run_experiment(config, kind, overrides);
    for (const std::string& f : o.files) out << "wrote " << f << '\n';
    if (o.exit_code == 2) err << "warning: extraction INCOMPLETE (see notes in the report)\n";
    return o.exit_code;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
  }
  return 1;
}

}  // namespace btlab::cli
