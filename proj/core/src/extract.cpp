#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <sstream>
#include <thread>

#include "btlab/bubbletree.hpp"
#include "btlab/degree.hpp"
#include "btlab/error.hpp"
#include "btlab/map_io.hpp"

namespace btlab {

namespace {

double dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

double generation_level(int q) { return q == 0 ? 0.5 : 1.0 - 1.0 / (2.0 * (q + 2)); }

struct Found {
  int point = 0;
  int generation = 0;
  Detection det;
  BubbleWindow window;
  double omega_energy = 0.0;
};

struct IndexOutcome {
  std::vector<Found> found;
  DiscreteMap remainder;
  bool incomplete = false;
  std::vector<std::string> notes;
  ConcentrationProfile profile;
};

struct Point {
  std::vector<double> center;
  double radius = 0.0;
};

// Energy of the map in dyadic annuli around c decreases while the window is
// still inside the bubble's neck; the window ends in the middle of the first
// annulus after which the energy rises again, or at rho_max.
double window_radius(const ConcentrationField& field, std::span<const double> c, double lambda, double rho_max) {
  double inner = 2.0 * lambda;
  if (inner * 2.0 > rho_max) return rho_max;
  double prev_ring = field.ball_energy(c, 2.0 * inner) - field.ball_energy(c, inner);
  while (inner * 4.0 <= rho_max) {
    const double next_ring = field.ball_energy(c, 4.0 * inner) - field.ball_energy(c, 2.0 * inner);
    if (next_ring >= prev_ring) return inner * std::sqrt(2.0);
    prev_ring = next_ring;
    inner *= 2.0;
  }
  return rho_max;
}

IndexOutcome run_index(const SequenceSpec& spec, std::size_t i, const ExtractConfig& cfg, const Thresholds& thr,
                       const std::vector<Point>& points, double rho_s, std::size_t profile_samples) {
  IndexOutcome out;
  const int n = spec.n;
  const double p = spec.p(i);
  const DiscreteMap& u = spec.maps[i];
  const GridPtr grid = u.grid();
  const HalfBallGrid& g = *grid;
  const MetricField metric = metric_on(spec, grid);
  const double eps = thr.eps_star[i];
  DiscreteMap w = u;

  if (profile_samples > 0 && !points.empty()) {
    const ConcentrationField f(u, metric, p, Region{points[0].center, points[0].radius});
    std::vector<double> radii;
    const double t0 = g.spacing();
    const double t1 = 2.0 * std::min(points[0].radius, g.radius());
    for (std::size_t s = 0; s < profile_samples; ++s) {
      radii.push_back(t0 * std::pow(t1 / t0, static_cast<double>(s) / std::max<std::size_t>(profile_samples - 1, 1)));
    }
    out.profile = f.profile(radii);
  }

  for (std::size_t pi = 0; pi < points.size(); ++pi) {
    const Point& pt = points[pi];
    const Region region{pt.center, pt.radius};
    double limit_part = 0.0;
    if (spec.limit) {
      const MetricField lm = metric_on(spec, spec.limit->grid());
      limit_part = ConcentrationField(*spec.limit, lm, n, region).total();
    }
    bool done = false;
    for (int q = 0; q < cfg.max_generations && !done; ++q) {
      const ConcentrationField field(w, metric, p, region);
      const double remaining = spec.limit ? field.total() - limit_part : field.q(rho_s);
      if (remaining < std::pow(eps, n)) break;
      const double target = generation_level(q) * std::pow(eps, p);
      const Detection det = field.detect(target);
      if (!det.found) break;
      if (det.scale >= cfg.max_scale_fraction * pt.radius) break;
      if (det.scale < g.spacing() * cfg.min_scale_factor) {
        std::ostringstream os;
        os << "k = " << spec.k[i] << ": detected scale " << format_double(det.scale)
           << " is below the resolution limit; extraction stopped";
        out.notes.push_back(os.str());
        out.incomplete = true;
        break;
      }
      // Bubbles close to the face (relative to their scale) are anchored at
      // the foot point with a half window; interior ones get a full window.
      std::vector<double> anchor = det.center;
      const bool interior = !g.half() || det.center[n - 1] >= 8.0 * det.scale;
      if (!interior) anchor[n - 1] = 0.0;
      double rho_max = std::min(g.radius() - dist(anchor, std::vector<double>(n, 0.0)),
                                pt.radius - dist(anchor, pt.center));
      if (interior && g.half()) rho_max = std::min(rho_max, anchor[n - 1]);
      if (!(rho_max > 2.0 * g.spacing())) break;
      const double rho_w = window_radius(field, anchor, det.scale, rho_max);
      Rescaled rs = rescale(w, anchor, det.scale, rho_w / det.scale, spec.metric, cfg.min_scale_factor);
      Found f;
      f.point = static_cast<int>(pi);
      f.generation = q;
      f.det = det;
      f.omega_energy = p_energy(rs.map, rs.metric, n).total;
      f.window.infinity = value_at_infinity(rs.map);
      f.window.anchor = anchor;
      f.window.scale = det.scale;
      f.window.omega = std::move(rs.map);
      w = subtract_bubbles(w, std::span<const BubbleWindow>(&f.window, 1));
      out.found.push_back(std::move(f));
      if (q + 1 == cfg.max_generations) {
        const ConcentrationField after(w, metric, p, region);
        const double left = spec.limit ? after.total() - limit_part : after.q(rho_s);
        if (left >= std::pow(eps, n)) {
          std::ostringstream os;
          os << "k = " << spec.k[i] << ": generation cap reached with concentrated energy "
             << format_double(left) << " remaining";
          out.notes.push_back(os.str());
          out.incomplete = true;
        }
        done = true;
      }
    }
  }
  out.remainder = std::move(w);
  return out;
}

template <class F>
void parallel_for(std::size_t count, int jobs, F&& body) {
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        body(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int threads = std::max(1, std::min<int>(jobs, static_cast<int>(count)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

Thresholds resolve_thresholds(const SequenceSpec& spec, const ExtractConfig& cfg) {
  Thresholds t;
  const int n = spec.n;
  t.eps_b = cfg.eps_b > 0.0 ? cfg.eps_b : 0.5 * std::pow(reference_bubble_energy(n), 1.0 / n);
  t.eps0 = cfg.eps0 > 0.0 ? cfg.eps0 : t.eps_b;
  t.eps_small = cfg.eps_small > 0.0 ? cfg.eps_small : t.eps_b;
  t.energy_bound = cfg.energy_bound > 0.0 ? cfg.energy_bound : spec.energy_bound;
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const HalfBallGrid& g = *spec.maps[i].grid();
    const double r1 = cfg.region_radius > 0.0 ? cfg.region_radius : g.radius();
    double vol = 0.0;
    for (std::size_t j = 0; j < g.node_count(); ++j)
      if (g.norm(j) < r1) vol += g.weight(j);
    const double e = t.eps0 / std::pow(vol, 1.0 / n - 1.0 / spec.p(i));
    t.eps_star.push_back(cfg.eps_star > 0.0 ? cfg.eps_star : std::min({e, t.eps_small, t.eps_b}));
  }
  return t;
}

ExtractionResult extract_tree(const SequenceSpec& spec, const ExtractConfig& cfg) {
  validate(spec);
  if (cfg.max_generations < 1) throw Error(ErrorCode::precondition, "generation cap must be positive");
  ExtractionResult res;
  res.thresholds = resolve_thresholds(spec, cfg);
  const Thresholds& thr = res.thresholds;
  const int n = spec.n;
  const std::size_t last = spec.size() - 1;
  const DiscreteMap& uK = spec.maps[last];
  const HalfBallGrid& gK = *uK.grid();
  const double r = gK.radius();
  const double rho_s = cfg.concentration_radius > 0.0 ? cfg.concentration_radius : 0.25 * r;
  const double region_r = cfg.region_radius > 0.0 ? cfg.region_radius : r;

  // Concentration set from the final index: greedy maxima of the local
  // n-energy at radius ρ, at least 2ρ apart.
  {
    const ConcentrationField f(uK, metric_on(spec, uK.grid()), n);
    const std::vector<double> sums = f.ball_sums(rho_s);
    const double level = std::pow(thr.eps0, n);
    std::vector<std::size_t> cand;
    for (std::size_t j = 0; j < gK.node_count(); ++j)
      if (sums[j] >= level) cand.push_back(j);
    std::stable_sort(cand.begin(), cand.end(), [&](std::size_t a, std::size_t b) { return sums[a] > sums[b]; });
    for (std::size_t j : cand) {
      const std::vector<double> x = gK.position(j);
      bool near = false;
      for (const auto& pnt : res.points) near = near || dist(x, pnt) < 2.0 * rho_s;
      if (!near) res.points.push_back(x);
    }
  }
  std::vector<Point> points;
  for (const auto& c : res.points) {
    double rad = region_r;
    for (const auto& o : res.points)
      if (&o != &c) rad = std::min(rad, 0.5 * dist(c, o));
    points.push_back(Point{c, rad});
  }

  std::vector<IndexOutcome> outcomes(spec.size());
  parallel_for(spec.size(), cfg.jobs, [&](std::size_t i) {
    outcomes[i] = run_index(spec, i, cfg, thr, points, rho_s, cfg.profile_samples);
  });

  for (std::size_t i = 0; i < spec.size(); ++i) {
    res.incomplete = res.incomplete || outcomes[i].incomplete;
    for (auto& note : outcomes[i].notes) res.notes.push_back(note);
    res.profiles.push_back(outcomes[i].profile);
  }

  // Records: one per (point, generation), matched across indices by order.
  for (std::size_t pi = 0; pi < points.size(); ++pi) {
    for (int q = 0;; ++q) {
      BubbleRecord rec;
      rec.point = static_cast<int>(pi);
      rec.generation = q;
      std::vector<double> exps;
      for (std::size_t i = 0; i < spec.size(); ++i) {
        for (const Found& f : outcomes[i].found) {
          if (f.point != static_cast<int>(pi) || f.generation != q) continue;
          rec.k.push_back(spec.k[i]);
          rec.centers.push_back(f.det.center);
          rec.scales.push_back(f.det.scale);
          rec.levels.push_back(f.det.level);
          rec.targets.push_back(f.det.target);
          rec.window_energy.push_back(f.omega_energy);
          rec.window = f.window;
          exps.push_back(spec.p(i));
        }
      }
      if (rec.k.empty()) break;
      rec.lambda_star = lambda_star(rec.scales, exps, n);
      rec.energy = rec.window_energy.back();
      rec.quantized = rec.energy >= std::pow(thr.eps_b, n);
      res.records.push_back(std::move(rec));
    }
  }

  // Ledger at the final index, and the same balance per index.
  auto weak_energy = [&](std::size_t i) {
    if (spec.limit) return p_energy(*spec.limit, metric_on(spec, spec.limit->grid()), n).total;
    const DiscreteMap& rem = outcomes[i].remainder;
    return p_energy(rem, metric_on(spec, rem.grid()), n).total;
  };
  EnergyLedger& L = res.ledger;
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const double total = p_energy(spec.maps[i], metric_on(spec, spec.maps[i].grid()), spec.p(i)).total;
    double parts = 0.0;
    for (const BubbleRecord& rec : res.records) {
      const auto it = std::find(rec.k.begin(), rec.k.end(), spec.k[i]);
      if (it == rec.k.end()) continue;
      parts += rec.lambda_star * rec.window_energy[static_cast<std::size_t>(it - rec.k.begin())];
    }
    const double weak = weak_energy(i);
    L.defect_by_k.emplace_back(spec.k[i], total - weak - parts);
    if (i == last) {
      L.e_total = total;
      L.e_weak = weak;
    }
  }
  double sum = 0.0;
  for (const BubbleRecord& rec : res.records) {
    L.parts.push_back(rec.lambda_star * rec.energy);
    sum += L.parts.back();
  }
  L.defect = L.e_total - L.e_weak - sum;

  for (const BubbleRecord& rec : res.records) res.neck_energies.push_back(neck_energy(spec, rec, cfg.neck_K, cfg.neck_eta));
  res.separation = separation_check(res.records, cfg.sep_threshold);

  if (uK.target_dim() == n && (n == 2 || n == 3)) {
    DegreeLedger dl;
    bool complete = true;
    auto try_degree = [&](const DiscreteMap& m, const std::string& what) -> std::optional<long> {
      try {
        return degree(m).value;
      } catch (const Error& e) {
        res.notes.push_back("degree of " + what + " unavailable: " + e.what());
        complete = false;
        return std::nullopt;
      }
    };
    for (std::size_t i = 0; i < spec.size(); ++i) {
      const auto d = try_degree(spec.maps[i], "u_k at k = " + std::to_string(spec.k[i]));
      dl.deg_by_k.push_back(d.value_or(0));
      if (i == last && d) dl.deg_sequence = *d;
    }
    if (spec.limit) {
      if (const auto d = try_degree(*spec.limit, "the weak limit")) dl.deg_limit = *d;
    } else {
      res.notes.push_back("no weak limit given; its degree is taken as 0");
    }
    for (std::size_t j = 0; j < res.records.size(); ++j) {
      BubbleRecord& rec = res.records[j];
      rec.degree = try_degree(rec.window.omega, "bubble " + std::to_string(j));
      if (rec.degree) dl.deg_bubbles += *rec.degree;
    }
    if (complete) res.degrees = dl;
  }
  return res;
}

}  // namespace btlab
