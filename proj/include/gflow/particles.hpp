#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gflow/density.hpp"
#include "gflow/error.hpp"
#include "gflow/grid.hpp"
#include "gflow/interpolation.hpp"
#include "gflow/rng.hpp"
#include "gflow/targets.hpp"

namespace gflow {

using Point = std::array<double, 2>;

/// m realizations of Y_t in R^dim, stored row-major (m x dim).
struct ParticleEnsemble {
  int dim = 1;
  std::vector<double> positions;
  double time = 0.0;
  std::uint64_t seed = 0;

  std::size_t size() const noexcept { return positions.size() / static_cast<std::size_t>(dim); }

  Point point(std::size_t i) const noexcept {
    Point p{positions[i * dim], 0.0};
    if (dim == 2) p[1] = positions[i * dim + 1];
    return p;
  }

  double coordinate(std::size_t i, int axis) const noexcept { return positions[i * dim + axis]; }
};

/// Product of independent 1-D marginals; one marginal for dim = 1.
class ProductModel {
public:
  ProductModel(TargetModel x) : marginals_{std::move(x)} {}  // NOLINT: implicit on purpose
  ProductModel(TargetModel x, TargetModel y) : marginals_{std::move(x), std::move(y)} {}

  int dim() const noexcept { return static_cast<int>(marginals_.size()); }
  const TargetModel& marginal(int axis) const { return marginals_.at(static_cast<std::size_t>(axis)); }

  double log_pdf(const Point& y) const {
    double s = 0.0;
    for (int a = 0; a < dim(); ++a) s += marginals_[a].log_pdf(y[a]);
    return s;
  }
  double pdf(const Point& y) const { return std::exp(log_pdf(y)); }

  Point grad_log_pdf(const Point& y) const {
    Point g{0.0, 0.0};
    for (int a = 0; a < dim(); ++a) g[a] = marginals_[a].grad_log_pdf(y[a]);
    return g;
  }

private:
  std::vector<TargetModel> marginals_;
};

inline ParticleEnsemble init_ensemble(const ProductModel& model, std::size_t m, std::uint64_t seed) {
  if (m < 1) throw std::invalid_argument("ensemble size must be >= 1");
  const int dim = model.dim();
  ParticleEnsemble e{dim, std::vector<double>(m * dim), 0.0, seed};
  for (int a = 0; a < dim; ++a) {
    const auto draws = model.marginal(a).sample(derive_seed(seed, "init_ensemble", static_cast<std::uint64_t>(a)), m);
    for (std::size_t i = 0; i < m; ++i) e.positions[i * dim + a] = draws[i];
  }
  return e;
}

// ---------------------------------------------------------------------------
// Kernel density estimation

struct BandwidthRule {
  enum class Kind { silverman, fixed };
  Kind kind = Kind::silverman;
  double h = 0.0;

  static BandwidthRule silverman() { return {Kind::silverman, 0.0}; }
  static BandwidthRule fixed(double h) {
    if (!(h > 0.0) || !std::isfinite(h)) throw BandwidthError("fixed bandwidth must be > 0");
    return {Kind::fixed, h};
  }
};

namespace detail {

inline double sample_sd(const ParticleEnsemble& e, int axis) {
  const std::size_t m = e.size();
  double mean = 0.0;
  for (std::size_t i = 0; i < m; ++i) mean += e.coordinate(i, axis);
  mean /= static_cast<double>(m);
  double ss = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double d = e.coordinate(i, axis) - mean;
    ss += d * d;
  }
  return std::sqrt(ss / static_cast<double>(m - 1));
}

inline constexpr double inv_sqrt_2pi = 0.398942280401432677939946059934;

} // namespace detail

/// Per-axis bandwidths: 1.06 sd m^{-1/5} in 1-D, the normal-reference sd m^{-1/6} in 2-D.
inline Point select_bandwidth(const ParticleEnsemble& e, const BandwidthRule& rule) {
  if (rule.kind == BandwidthRule::Kind::fixed) return {rule.h, rule.h};
  const std::size_t m = e.size();
  if (m < 2) throw BandwidthError("the Silverman rule needs at least 2 particles");
  const double md = static_cast<double>(m);
  const double factor = e.dim == 1 ? 1.06 * std::pow(md, -0.2) : std::pow(md, -1.0 / 6.0);
  Point h{0.0, 0.0};
  for (int a = 0; a < e.dim; ++a) {
    const double sd = detail::sample_sd(e, a);
    if (!(sd > 0.0)) throw BandwidthError("degenerate ensemble: zero sample variance on axis " + std::to_string(a));
    h[a] = factor * sd;
  }
  return h;
}

/// Gaussian product-kernel estimate evaluated exactly (O(m) per query).
class KdeDensity {
public:
  KdeDensity(const ParticleEnsemble& source, const BandwidthRule& rule)
      : dim_(source.dim), positions_(source.positions), h_(select_bandwidth(source, rule)) {}

  int dim() const noexcept { return dim_; }
  Point bandwidth() const noexcept { return h_; }
  std::size_t size() const noexcept { return positions_.size() / static_cast<std::size_t>(dim_); }

  double pdf(const Point& y) const { return eval(y).value; }
  Point gradient(const Point& y) const { return eval(y).grad; }

  struct Value {
    double value;
    Point grad;
  };

  Value eval(const Point& y) const {
    const std::size_t m = size();
    double norm = 1.0 / static_cast<double>(m);
    for (int a = 0; a < dim_; ++a) norm *= detail::inv_sqrt_2pi / h_[a];
    Value out{0.0, {0.0, 0.0}};
    for (std::size_t i = 0; i < m; ++i) {
      double z2 = 0.0;
      Point dz{0.0, 0.0};
      for (int a = 0; a < dim_; ++a) {
        const double z = (y[a] - positions_[i * dim_ + a]) / h_[a];
        z2 += z * z;
        dz[a] = -z / h_[a];
      }
      const double k = std::exp(-0.5 * z2);
      out.value += k;
      for (int a = 0; a < dim_; ++a) out.grad[a] += k * dz[a];
    }
    out.value *= norm;
    out.grad[0] *= norm;
    out.grad[1] *= norm;
    return out;
  }

private:
  int dim_;
  std::vector<double> positions_;
  Point h_;
};

/// 1-D Gaussian KDE on a fine bin grid: linear binning of the particles, then exact convolution of
/// the bin weights with the kernel and its derivative. Queries interpolate linearly between bins, so
/// an m-particle refit costs O(m + cells * kernel width) instead of O(m^2).
class BinnedKde {
public:
  BinnedKde(const ParticleEnsemble& source, const BandwidthRule& rule, std::size_t cells = 4096) {
    if (source.dim != 1) throw DimensionError("binned KDE supports dim = 1 only");
    if (cells < 16) throw std::invalid_argument("binned KDE needs at least 16 cells");
    h_ = select_bandwidth(source, rule)[0];
    const auto& x = source.positions;
    const auto [mn, mx] = std::minmax_element(x.begin(), x.end());
    const double pad = 6.0 * h_;
    grid_ = Grid::uniform(*mn - pad, *mx + pad, cells);

    std::vector<double> weight(cells, 0.0);
    const double share = 1.0 / static_cast<double>(x.size());
    for (double xi : x) {
      const double pos = (xi - grid_.lower) / grid_.h;
      const auto j = std::min(static_cast<std::size_t>(pos), cells - 2);
      const double t = pos - static_cast<double>(j);
      weight[j] += (1.0 - t) * share;
      weight[j + 1] += t * share;
    }

    const auto reach = static_cast<std::ptrdiff_t>(std::ceil(6.0 * h_ / grid_.h));
    std::vector<double> k(2 * reach + 1);
    std::vector<double> dk(2 * reach + 1);
    for (std::ptrdiff_t s = -reach; s <= reach; ++s) {
      const double z = static_cast<double>(s) * grid_.h / h_;
      const double kv = detail::inv_sqrt_2pi / h_ * std::exp(-0.5 * z * z);
      k[s + reach] = kv;
      dk[s + reach] = -z / h_ * kv;
    }
    value_.assign(cells, 0.0);
    deriv_.assign(cells, 0.0);
    const auto n = static_cast<std::ptrdiff_t>(cells);
    for (std::ptrdiff_t j = 0; j < n; ++j) {
      if (weight[j] == 0.0) continue;
      const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, j - reach);
      const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(n - 1, j + reach);
      for (std::ptrdiff_t i = lo; i <= hi; ++i) {
        value_[i] += weight[j] * k[i - j + reach];
        deriv_[i] += weight[j] * dk[i - j + reach];
      }
    }
  }

  double bandwidth() const noexcept { return h_; }
  const Grid& bins() const noexcept { return grid_; }

  double pdf(double y) const { return linear_interpolate(grid_, value_, y); }
  double derivative(double y) const { return linear_interpolate(grid_, deriv_, y); }

private:
  double h_ = 0.0;
  Grid grid_;
  std::vector<double> value_;
  std::vector<double> deriv_;
};

// ---------------------------------------------------------------------------
// Discriminators and the Euler step

struct DiscValue {
  double d;
  Point grad;
};

/// D = rho_d / (rho_d + rho_hat) with the analytic gradient
/// grad D = D (1 - D) (grad ln rho_d - grad ln rho_hat).
inline DiscValue discriminator_value(double log_rho_d, const Point& score_d, double rho_hat, const Point& grad_rho_hat,
                                     int dim) {
  if (!(rho_hat > 0.0)) return {1.0, {0.0, 0.0}};
  // D = 1 / (1 + exp(ln rho_hat - ln rho_d)) keeps precision when both densities are tiny
  const double d = 1.0 / (1.0 + std::exp(std::log(rho_hat) - log_rho_d));
  const double w = d * (1.0 - d);
  DiscValue out{d, {0.0, 0.0}};
  for (int a = 0; a < dim; ++a) out.grad[a] = w * (score_d[a] - grad_rho_hat[a] / rho_hat);
  return out;
}

inline DiscValue exact_discriminator(const ProductModel& rho_d, const KdeDensity& rho_hat, const Point& y) {
  if (rho_d.dim() != rho_hat.dim()) throw DimensionError("discriminator dimension mismatch");
  const auto kde = rho_hat.eval(y);
  return discriminator_value(rho_d.log_pdf(y), rho_d.grad_log_pdf(y), kde.value, kde.grad, rho_d.dim());
}

inline DiscValue exact_discriminator(const ProductModel& rho_d, const BinnedKde& rho_hat, const Point& y) {
  if (rho_d.dim() != 1) throw DimensionError("binned discriminator supports dim = 1 only");
  return discriminator_value(rho_d.log_pdf(y), rho_d.grad_log_pdf(y), rho_hat.pdf(y[0]),
                             {rho_hat.derivative(y[0]), 0.0}, 1);
}

/// Discriminator built from two analytic densities. With rho_hat = rho_d it is exactly 1/2 with zero gradient.
inline DiscValue analytic_discriminator(const ProductModel& rho_d, const ProductModel& rho_hat, const Point& y) {
  const double ld = rho_d.log_pdf(y);
  const double lh = rho_hat.log_pdf(y);
  const double d = 1.0 / (1.0 + std::exp(lh - ld));
  const Point sd = rho_d.grad_log_pdf(y);
  const Point sh = rho_hat.grad_log_pdf(y);
  const double w = d * (1.0 - d);
  return {d, {w * (sd[0] - sh[0]), w * (sd[1] - sh[1])}};
}

/// y <- y + eps grad D(y) / (2 (1 - D(y))) for every particle; time advances by eps.
template <class Discriminator>
ParticleEnsemble euler_step(const ParticleEnsemble& ens, Discriminator&& discriminator, double eps,
                            double d_ceiling = default_d_ceiling) {
  if (!(eps > 0.0)) throw std::invalid_argument("euler_step needs eps > 0");
  const std::size_t m = ens.size();
  const int dim = ens.dim;
  ParticleEnsemble out = ens;
  std::vector<std::size_t> saturated;
  for (std::size_t i = 0; i < m; ++i) {
    const DiscValue dv = discriminator(ens.point(i));
    if (!(dv.d <= 1.0 - d_ceiling)) {
      saturated.push_back(i);
      continue;
    }
    const double scale = eps / (2.0 * (1.0 - dv.d));
    for (int a = 0; a < dim; ++a) out.positions[i * dim + a] += scale * dv.grad[a];
  }
  if (!saturated.empty()) throw SaturationError(std::move(saturated));
  for (double p : out.positions)
    if (!std::isfinite(p)) throw std::domain_error("euler_step produced a non-finite position");
  out.time = ens.time + eps;
  return out;
}

// ---------------------------------------------------------------------------
// Histogram diagnostics

/// Normalized fixed-bin histogram: mass[b] = (#particles in bin b) / m. Particles outside the window
/// count toward m but toward no bin.
struct Histogram {
  double lower;
  double upper;
  std::vector<double> mass;

  double width() const { return (upper - lower) / static_cast<double>(mass.size()); }
  double edge(std::size_t b) const {
    return b == mass.size() ? upper : lower + static_cast<double>(b) * width();
  }
};

inline Histogram histogram(std::span<const double> xs, double lower, double upper, std::size_t bins,
                           std::size_t stride = 1, std::size_t offset = 0) {
  if (bins < 1 || !(upper > lower)) throw std::invalid_argument("histogram needs bins >= 1 and lower < upper");
  Histogram hist{lower, upper, std::vector<double>(bins, 0.0)};
  const std::size_t m = xs.size() / stride;
  const double share = 1.0 / static_cast<double>(m);
  const double inv_w = static_cast<double>(bins) / (upper - lower);
  for (std::size_t i = 0; i < m; ++i) {
    const double x = xs[i * stride + offset];
    if (!(x >= lower) || x > upper) continue;
    const auto b = std::min(static_cast<std::size_t>((x - lower) * inv_w), bins - 1);
    hist.mass[b] += share;
  }
  return hist;
}

inline Histogram marginal_histogram(const ParticleEnsemble& e, double lower, double upper, std::size_t bins,
                                    int axis = 0) {
  return histogram(e.positions, lower, upper, bins, static_cast<std::size_t>(e.dim), static_cast<std::size_t>(axis));
}

/// Discrete JSD between histogram bin masses and the model's exact bin probabilities.
inline double histogram_jsd(const Histogram& hist, const TargetModel& model) {
  double s = 0.0;
  for (std::size_t b = 0; b < hist.mass.size(); ++b) {
    const double q = model.cdf(hist.edge(b + 1)) - model.cdf(hist.edge(b));
    const double lo = std::min(hist.mass[b], q);
    const double hi = std::max(hist.mass[b], q);
    s += detail::jsd_integrand(lo, hi);
  }
  return 0.5 * s;
}

/// Exact L1 distance between the histogram's step density and the piecewise-linear interpolant of u.
/// Mass of u outside the histogram window is included.
inline double histogram_l1(const Histogram& hist, const GridDensity& u) {
  const Grid& g = u.grid();
  std::vector<double> cuts;
  cuts.reserve(hist.mass.size() + g.n + 2);
  for (std::size_t b = 0; b <= hist.mass.size(); ++b) cuts.push_back(hist.edge(b));
  for (std::size_t i = 0; i < g.n; ++i) cuts.push_back(g.node(i));
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  const double inv_w = 1.0 / hist.width();
  const auto step_at = [&](double x) {
    if (x < hist.lower || x >= hist.upper) return 0.0;
    const auto b = std::min(static_cast<std::size_t>((x - hist.lower) * inv_w), hist.mass.size() - 1);
    return hist.mass[b] * inv_w;
  };
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double a = cuts[k];
    const double b = cuts[k + 1];
    const double c = step_at(0.5 * (a + b));
    const double fa = linear_interpolate(g, u.values(), a) - c;
    const double fb = linear_interpolate(g, u.values(), b) - c;
    const double len = b - a;
    if ((fa >= 0.0) == (fb >= 0.0)) {
      total += 0.5 * std::abs(fa + fb) * len;
    } else {
      // linear piece crosses zero: two triangles
      total += 0.5 * (fa * fa + fb * fb) / (std::abs(fa) + std::abs(fb)) * len;
    }
  }
  return total;
}

// ---------------------------------------------------------------------------
// Simulation driver

struct ParticleTraceRow {
  int step;
  double time;
  double hist_jsd;
  Point mean;
  Point variance;
};

struct SimulateOptions {
  BandwidthRule bandwidth = BandwidthRule::silverman();
  bool binned = true;              ///< 1-D only; the exact KDE is O(m^2) per refit
  std::size_t kde_cells = 4096;
  double hist_lower = -8.0;
  double hist_upper = 8.0;
  std::size_t hist_bins = 200;
  int record_every = 1;
};

struct SimulationResult {
  ParticleEnsemble ensemble;
  std::vector<ParticleTraceRow> trace;
};

namespace detail {

inline ParticleTraceRow particle_row(const ParticleEnsemble& e, int step, const ProductModel& rho_d,
                                     const SimulateOptions& opt) {
  ParticleTraceRow row{step, e.time, 0.0, {0.0, 0.0}, {0.0, 0.0}};
  const std::size_t m = e.size();
  for (int a = 0; a < e.dim; ++a) {
    double mean = 0.0;
    for (std::size_t i = 0; i < m; ++i) mean += e.coordinate(i, a);
    mean /= static_cast<double>(m);
    double ss = 0.0;
    for (std::size_t i = 0; i < m; ++i) ss += (e.coordinate(i, a) - mean) * (e.coordinate(i, a) - mean);
    row.mean[a] = mean;
    row.variance[a] = ss / static_cast<double>(m);
  }
  row.hist_jsd = histogram_jsd(marginal_histogram(e, opt.hist_lower, opt.hist_upper, opt.hist_bins), rho_d.marginal(0));
  return row;
}

} // namespace detail

/// Euler integration of dY = grad D / (2 (1 - D)) dt with D re-estimated from a KDE of the
/// ensemble every refit_every steps.
inline SimulationResult simulate(const ProductModel& rho0, const ProductModel& rho_d, std::size_t m, double eps,
                                 int n_steps, int refit_every, std::uint64_t seed, const SimulateOptions& opt = {}) {
  if (rho0.dim() != rho_d.dim()) throw DimensionError("rho_0 and rho_d must share a dimension");
  if (!(eps > 0.0)) throw std::invalid_argument("simulate needs eps > 0");
  if (n_steps < 0) throw std::invalid_argument("simulate needs n_steps >= 0");
  if (refit_every < 1) throw std::invalid_argument("refit_every must be >= 1");
  if (opt.record_every < 1) throw std::invalid_argument("record_every must be >= 1");

  SimulationResult res{init_ensemble(rho0, m, seed), {}};
  res.trace.push_back(detail::particle_row(res.ensemble, 0, rho_d, opt));

  const bool binned = opt.binned && rho_d.dim() == 1;
  std::optional<BinnedKde> binned_kde;
  std::optional<KdeDensity> exact_kde;
  for (int step = 1; step <= n_steps; ++step) {
    if ((step - 1) % refit_every == 0) {
      if (binned) binned_kde.emplace(res.ensemble, opt.bandwidth, opt.kde_cells);
      else exact_kde.emplace(res.ensemble, opt.bandwidth);
    }
    if (binned) {
      res.ensemble = euler_step(res.ensemble, [&](const Point& y) { return exact_discriminator(rho_d, *binned_kde, y); }, eps);
    } else {
      res.ensemble = euler_step(res.ensemble, [&](const Point& y) { return exact_discriminator(rho_d, *exact_kde, y); }, eps);
    }
    if (step % opt.record_every == 0 || step == n_steps)
      res.trace.push_back(detail::particle_row(res.ensemble, step, rho_d, opt));
  }
  return res;
}

} // namespace gflow
