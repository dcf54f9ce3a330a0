#include "btlab/concentration.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <stdexcept>

#include "btlab/error.hpp"

namespace btlab {

namespace {

// FFTW's planner is not thread-safe; execution is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

int good_fft_size(int x) {
  for (int s = std::max(x, 1);; ++s) {
    int r = s;
    for (int f : {2, 3, 5, 7})
      while (r % f == 0) r /= f;
    if (r == 1) return s;
  }
}

// Integer vectors o with |o|² ≤ m.
std::vector<std::vector<int>> lattice_ball(int n, long m) {
  std::vector<std::vector<int>> out;
  if (m < 0) return out;
  const int r = static_cast<int>(std::floor(std::sqrt(static_cast<double>(m))));
  std::vector<int> o(n, -r);
  while (true) {
    long s = 0;
    for (int v : o) s += static_cast<long>(v) * v;
    if (s <= m) out.push_back(o);
    int a = n - 1;
    while (a >= 0 && ++o[a] > r) {
      o[a] = -r;
      --a;
    }
    if (a < 0) break;
  }
  return out;
}

struct FftwBuffers {
  double* real = nullptr;
  fftw_complex* spec = nullptr;
  ~FftwBuffers() {
    fftw_free(real);
    fftw_free(spec);
  }
};

}  // namespace

ConcentrationField::ConcentrationField(const DiscreteMap& u, const MetricField& metric, double p,
                                       const Region& region)
    : ConcentrationField(u.grid(), [&] {
        const EnergyReport e = p_energy(u, metric, p);
        const HalfBallGrid& g = *u.grid();
        std::vector<double> out(g.node_count());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = e.density[i] * g.weight(i) * metric.sqrt_det(i);
        return out;
      }(), region) {}

ConcentrationField::ConcentrationField(GridPtr grid, std::vector<double> node_energy, const Region& region)
    : grid_(std::move(grid)), energy_(std::move(node_energy)) {
  const HalfBallGrid& g = *grid_;
  const int n = g.dim();
  if (energy_.size() != g.node_count()) throw Error(ErrorCode::precondition, "energy size does not match grid");
  const bool bounded = std::isfinite(region.radius);
  if (bounded && static_cast<int>(region.center.size()) != n) {
    throw Error(ErrorCode::precondition, "region center has the wrong dimension");
  }
  center_ok_.assign(g.node_count(), 1);
  std::vector<int> lo(n, 0), hi(n, 0);
  bool any = false;
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    if (bounded) {
      double d2 = 0.0;
      for (int a = 0; a < n; ++a) {
        const double t = g.coord(i, a) - region.center[a];
        d2 += t * t;
      }
      if (!(d2 < region.radius * region.radius)) {
        center_ok_[i] = 0;
        energy_[i] = 0.0;
        continue;
      }
    }
    centers_.push_back(i);
    total_ += energy_[i];
    for (int a = 0; a < n; ++a) {
      const int k = g.index(i)[a];
      lo[a] = any ? std::min(lo[a], k) : k;
      hi[a] = any ? std::max(hi[a], k) : k;
    }
    any = true;
  }
  if (centers_.empty()) throw Error(ErrorCode::precondition, "concentration region contains no nodes");
  for (int a = 0; a < n; ++a) max_dist2_ += static_cast<double>(hi[a] - lo[a]) * (hi[a] - lo[a]);
  quantum_ = total_ > 0.0 ? std::ldexp(total_, -kFixedBits) : 1.0;
  fixed_.assign(g.node_count(), 0);
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    if (energy_[i] < 0.0 || !std::isfinite(energy_[i])) {
      throw Error(ErrorCode::precondition, "node energies must be finite and nonnegative");
    }
    fixed_[i] = static_cast<std::uint64_t>(std::llround(energy_[i] / quantum_));
  }
}

double ConcentrationField::best(const std::vector<double>& sums, std::size_t* argmax) const {
  double mx = -INFINITY;
  for (std::size_t i : centers_) mx = std::max(mx, sums[i]);
  const double tol = 1e-12 * std::max(total_, 1e-300);
  for (std::size_t i : centers_) {
    if (sums[i] >= mx - tol) {
      if (argmax) *argmax = i;
      break;
    }
  }
  return std::max(mx, 0.0);
}

void ConcentrationField::sums_direct(long m, std::vector<std::uint64_t>& out) const {
  const HalfBallGrid& g = *grid_;
  const int n = g.dim();
  const auto offsets = lattice_ball(n, m);
  const int r = static_cast<int>(std::floor(std::sqrt(static_cast<double>(m))));
  // Dense copy of the energy on the grid box padded by r on every side.
  std::vector<long> dims(n), stride(n);
  long size = 1;
  for (int a = n - 1; a >= 0; --a) {
    dims[a] = g.box_count(a) + 2 * r;
    stride[a] = size;
    size *= dims[a];
  }
  std::vector<std::uint64_t> dense(static_cast<std::size_t>(size), 0);
  auto linear = [&](std::size_t i) {
    long s = 0;
    for (int a = 0; a < n; ++a) s += (g.index(i)[a] - g.box_lo(a) + r) * stride[a];
    return s;
  };
  for (std::size_t i = 0; i < g.node_count(); ++i)
    if (fixed_[i] != 0) dense[static_cast<std::size_t>(linear(i))] = fixed_[i];
  std::vector<long> lin;
  lin.reserve(offsets.size());
  for (const auto& o : offsets) {
    long s = 0;
    for (int a = 0; a < n; ++a) s += o[a] * stride[a];
    lin.push_back(s);
  }
  out.assign(g.node_count(), 0);
  for (std::size_t i : centers_) {
    const long base = linear(i);
    std::uint64_t s = 0;
    for (long o : lin) s += dense[static_cast<std::size_t>(base + o)];
    out[i] = s;
  }
}

void ConcentrationField::sums_fft(long m, std::vector<std::uint64_t>& out) const {
  const HalfBallGrid& g = *grid_;
  const int n = g.dim();
  const int r = static_cast<int>(std::floor(std::sqrt(static_cast<double>(m))));
  std::vector<int> dims(n);
  std::size_t total = 1;
  for (int a = 0; a < n; ++a) {
    dims[a] = good_fft_size(g.box_count(a) + r);
    total *= static_cast<std::size_t>(dims[a]);
  }
  const std::size_t last_c = static_cast<std::size_t>(dims[n - 1] / 2 + 1);
  const std::size_t spec_size = total / static_cast<std::size_t>(dims[n - 1]) * last_c;

  FftwBuffers a_buf, k_buf;
  fftw_plan fwd_a, fwd_k, back;
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    a_buf.real = fftw_alloc_real(total);
    a_buf.spec = fftw_alloc_complex(spec_size);
    k_buf.real = fftw_alloc_real(total);
    k_buf.spec = fftw_alloc_complex(spec_size);
    fwd_a = fftw_plan_dft_r2c(n, dims.data(), a_buf.real, a_buf.spec, FFTW_ESTIMATE);
    fwd_k = fftw_plan_dft_r2c(n, dims.data(), k_buf.real, k_buf.spec, FFTW_ESTIMATE);
    back = fftw_plan_dft_c2r(n, dims.data(), a_buf.spec, a_buf.real, FFTW_ESTIMATE);
  }
  std::fill(k_buf.real, k_buf.real + total, 0.0);
  auto linear = [&](const int* idx) {
    std::size_t s = 0;
    for (int a = 0; a < n; ++a) {
      const int k = ((idx[a] % dims[a]) + dims[a]) % dims[a];
      s = s * static_cast<std::size_t>(dims[a]) + static_cast<std::size_t>(k);
    }
    return s;
  };
  std::vector<int> idx(n);
  for (const auto& o : lattice_ball(n, m)) k_buf.real[linear(o.data())] += 1.0;
  fftw_execute(fwd_k);

  // The fixed-point energies are split into 16-bit limbs; each limb's
  // correlation is an integer below 2^16·|ball| and is recovered exactly by
  // rounding.
  out.assign(g.node_count(), 0);
  const double scale = 1.0 / static_cast<double>(total);
  double worst = 0.0;
  for (int limb = 0; limb < kFixedBits; limb += 16) {
    std::fill(a_buf.real, a_buf.real + total, 0.0);
    bool any = false;
    for (std::size_t i = 0; i < g.node_count(); ++i) {
      const std::uint64_t v = (fixed_[i] >> limb) & 0xffffu;
      if (v == 0) continue;
      any = true;
      for (int a = 0; a < n; ++a) idx[a] = g.index(i)[a] - g.box_lo(a);
      a_buf.real[linear(idx.data())] = static_cast<double>(v);
    }
    if (!any) continue;
    fftw_execute(fwd_a);
    for (std::size_t k = 0; k < spec_size; ++k) {
      const double ar = a_buf.spec[k][0], ai = a_buf.spec[k][1];
      const double br = k_buf.spec[k][0], bi = k_buf.spec[k][1];
      a_buf.spec[k][0] = ar * br - ai * bi;
      a_buf.spec[k][1] = ar * bi + ai * br;
    }
    fftw_execute(back);
    for (std::size_t i : centers_) {
      for (int a = 0; a < n; ++a) idx[a] = g.index(i)[a] - g.box_lo(a);
      const double v = a_buf.real[linear(idx.data())] * scale;
      const double rv = std::nearbyint(v);
      worst = std::max(worst, std::abs(v - rv));
      out[i] += static_cast<std::uint64_t>(rv) << limb;
    }
  }
  if (worst > 0.25) throw std::logic_error("FFT ball sums lost integer exactness");
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(fwd_a);
    fftw_destroy_plan(fwd_k);
    fftw_destroy_plan(back);
  }
}

namespace {

// Radii within a relative 1e-12 of a lattice distance count as on it, so
// t = j·h excludes the nodes at distance exactly j·h.
long strict_lattice_bound(double t, double h) {
  const double s = t / h;
  return static_cast<long>(std::ceil(s * s * (1.0 - 1e-12))) - 1;
}

}  // namespace

std::vector<double> ConcentrationField::ball_sums(double t) const {
  std::vector<double> sums(grid_->node_count(), 0.0);
  if (!(t > 0.0)) return sums;
  const long m = strict_lattice_bound(t, grid_->spacing());
  if (static_cast<double>(m) >= max_dist2_) {
    for (std::size_t i : centers_) sums[i] = total_;
    return sums;
  }
  lattice_sums(m, sums);
  return sums;
}

void ConcentrationField::lattice_sums(long m, std::vector<double>& sums) const {
  const HalfBallGrid& g = *grid_;
  const int n = g.dim();
  const double ball = unit_ball_volume(n) * std::pow(std::sqrt(static_cast<double>(m)) + 1.0, n);
  double box = 1.0;
  const int r = static_cast<int>(std::floor(std::sqrt(static_cast<double>(m))));
  for (int a = 0; a < n; ++a) box *= good_fft_size(g.box_count(a) + r);
  const double direct_cost = static_cast<double>(centers_.size()) * ball;
  const double fft_cost = 6.0 * box * std::log2(std::max(box, 2.0));
  std::vector<std::uint64_t> fixed;
  if (direct_cost <= fft_cost) {
    sums_direct(m, fixed);
  } else {
    sums_fft(m, fixed);
  }
  sums.resize(fixed.size());
  for (std::size_t i = 0; i < fixed.size(); ++i) sums[i] = quantum_ * static_cast<double>(fixed[i]);
}

double ConcentrationField::q_lattice(long m, std::size_t* argmax) const {
  if (argmax) *argmax = centers_.front();
  if (m < 0) return 0.0;
  if (static_cast<double>(m) >= max_dist2_) {
    // Every region node lies within the ball around any center.
    return total_;
  }
  std::vector<double> sums;
  lattice_sums(m, sums);
  return std::min(best(sums, argmax), total_);
}

double ConcentrationField::q(double t, std::size_t* argmax) const {
  if (!(t > 0.0)) {
    if (argmax) *argmax = centers_.front();
    return 0.0;
  }
  // strict ball: |o|² < (t/h)²
  return q_lattice(strict_lattice_bound(t, grid_->spacing()), argmax);
}

ConcentrationProfile ConcentrationField::profile(std::span<const double> radii) const {
  ConcentrationProfile pr;
  double prev = -INFINITY;
  for (double t : radii) {
    if (!(t >= prev)) throw Error(ErrorCode::precondition, "profile radii must be increasing");
    prev = t;
    std::size_t arg = 0;
    pr.radii.push_back(t);
    pr.q.push_back(q(t, &arg));
    pr.argmax.push_back(arg);
  }
  return pr;
}

Detection ConcentrationField::detect(double target) const {
  Detection det;
  det.target = target;
  const HalfBallGrid& g = *grid_;
  if (!(target > 0.0)) {
    det.found = true;
    det.node = centers_.front();
    det.center = g.position(det.node);
    return det;
  }
  if (total_ < target) return det;
  // Q_lattice(lo) < target ≤ Q_lattice(hi). Grow the bracket geometrically
  // first: small radii are cheap and most detections are local.
  long lo = -1;
  long hi = 1;
  const long top = static_cast<long>(std::ceil(max_dist2_));
  while (hi < top && q_lattice(hi) < target) {
    lo = hi;
    hi *= 4;
  }
  hi = std::min(hi, top);
  while (hi - lo > 1) {
    const long mid = lo + (hi - lo) / 2;
    if (q_lattice(mid) >= target) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  det.found = true;
  det.level = q_lattice(hi, &det.node);
  det.scale = g.spacing() * std::sqrt(static_cast<double>(hi));
  det.center = g.position(det.node);
  return det;
}

double ConcentrationField::ball_energy(std::span<const double> center, double t) const {
  const HalfBallGrid& g = *grid_;
  const int n = g.dim();
  double s = 0.0;
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    if (energy_[i] == 0.0) continue;
    double d2 = 0.0;
    for (int a = 0; a < n; ++a) {
      const double c = g.coord(i, a) - center[a];
      d2 += c * c;
    }
    if (d2 < t * t) s += energy_[i];
  }
  return s;
}

}  // namespace btlab
