#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "gflow/error.hpp"
#include "gflow/grid.hpp"
#include "gflow/interpolation.hpp"

namespace gflow {

inline constexpr double default_mass_tol = 1e-8;
inline constexpr double default_v_floor = 1e-12;
inline constexpr double default_d_ceiling = 1e-12;

/// Nonnegative nodal density on a uniform grid.
class GridDensity {
public:
  GridDensity(Grid grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
    require_length(grid_, values_.size(), "GridDensity");
    for (double v : values_)
      if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("density values must be finite and >= 0");
  }

  const Grid& grid() const noexcept { return grid_; }
  std::span<const double> values() const noexcept { return values_; }
  double operator[](std::size_t i) const noexcept { return values_[i]; }
  std::size_t size() const noexcept { return values_.size(); }

  double mass() const { return trapezoid(grid_, values_); }

  GridDensity normalized() const {
    const double m = mass();
    if (!(m > 0.0)) throw std::domain_error("cannot normalize a density with zero mass");
    std::vector<double> v(values_);
    for (double& x : v) x /= m;
    return {grid_, std::move(v)};
  }

  /// Throws unless the trapezoidal mass is within mass_tol of 1.
  void require_probability(double mass_tol = default_mass_tol) const {
    const double m = mass();
    if (std::abs(m - 1.0) > mass_tol)
      throw std::domain_error("density mass " + std::to_string(m) + " is not 1 within tolerance");
  }

private:
  Grid grid_;
  std::vector<double> values_;
};

/// v = u / rho_d, the density of u relative to the data measure.
class RatioField {
public:
  RatioField(Grid grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
    require_length(grid_, values_.size(), "RatioField");
    for (double v : values_)
      if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("ratio values must be finite and >= 0");
  }

  const Grid& grid() const noexcept { return grid_; }
  std::span<const double> values() const noexcept { return values_; }
  double operator[](std::size_t i) const noexcept { return values_[i]; }
  std::size_t size() const noexcept { return values_.size(); }

  double max() const { return *std::max_element(values_.begin(), values_.end()); }
  double min() const { return *std::min_element(values_.begin(), values_.end()); }

private:
  Grid grid_;
  std::vector<double> values_;
};

/// Drift b(y) sampled at grid nodes.
struct VectorFieldSample {
  Grid grid;
  std::vector<double> values;
};

inline RatioField ratio_of(const GridDensity& u, const GridDensity& rho_d) {
  require_same_grid(u.grid(), rho_d.grid());
  std::vector<std::size_t> bad;
  std::vector<double> v(u.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!(rho_d[i] > 0.0)) bad.push_back(i);
    else v[i] = u[i] / rho_d[i];
  }
  if (!bad.empty()) throw PositivityError(std::move(bad));
  return {u.grid(), std::move(v)};
}

inline GridDensity density_of(const RatioField& v, const GridDensity& rho_d) {
  require_same_grid(v.grid(), rho_d.grid());
  std::vector<double> u(v.size());
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = v[i] * rho_d[i];
  return {v.grid(), std::move(u)};
}

// ---------------------------------------------------------------------------
// Divergences. All integrals use the trapezoidal rule of the shared grid.

/// KL(p || q). 0 ln 0 := 0; +infinity when p > 0 somewhere q = 0.
inline double kl_divergence(const GridDensity& p, const GridDensity& q) {
  require_same_grid(p.grid(), q.grid());
  const auto w = trapezoid_weights(p.grid());
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] == 0.0) return std::numeric_limits<double>::infinity();
    s += w[i] * p[i] * std::log(p[i] / q[i]);
  }
  return s;
}

namespace detail {

// a ln(2a/(a+b)) + b ln(2b/(a+b)), symmetric in (a, b) bit-for-bit.
inline double jsd_integrand(double a, double b) {
  const double s = a + b;
  if (s == 0.0) return 0.0;
  double t = 0.0;
  if (a > 0.0) t += a * std::log(2.0 * a / s);
  if (b > 0.0) t += b * std::log(2.0 * b / s);
  // pointwise nonnegative; clip rounding below zero
  return t > 0.0 ? t : 0.0;
}

} // namespace detail

/// Jensen-Shannon divergence: 1/2 KL(p||m) + 1/2 KL(q||m), m = (p+q)/2.
inline double jsd(const GridDensity& p, const GridDensity& q) {
  require_same_grid(p.grid(), q.grid());
  const auto w = trapezoid_weights(p.grid());
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    // the integrand is evaluated on the unordered pair so swapping p and q is exact
    const double lo = std::min(p[i], q[i]);
    const double hi = std::max(p[i], q[i]);
    s += w[i] * detail::jsd_integrand(lo, hi);
  }
  return 0.5 * s;
}

inline double l1_distance(const GridDensity& p, const GridDensity& q) {
  require_same_grid(p.grid(), q.grid());
  const auto w = trapezoid_weights(p.grid());
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += w[i] * std::abs(p[i] - q[i]);
  return s;
}

inline double tv_distance(const GridDensity& p, const GridDensity& q) { return 0.5 * l1_distance(p, q); }

// ---------------------------------------------------------------------------
// First variation of J(rho) = JSD(rho, rho_d) and the drift it induces.

/// 1/2 ln(2 rho / (rho_d + rho)) node-wise; -infinity where rho = 0.
inline std::vector<double> functional_derivative_J(const GridDensity& rho, const GridDensity& rho_d) {
  require_same_grid(rho.grid(), rho_d.grid());
  std::vector<std::size_t> bad;
  for (std::size_t i = 0; i < rho_d.size(); ++i)
    if (!(rho_d[i] > 0.0)) bad.push_back(i);
  if (!bad.empty()) throw PositivityError(std::move(bad));

  std::vector<double> out(rho.size());
  for (std::size_t i = 0; i < rho.size(); ++i) {
    out[i] = rho[i] == 0.0 ? -std::numeric_limits<double>::infinity()
                           : 0.5 * std::log(2.0 * rho[i] / (rho_d[i] + rho[i]));
  }
  return out;
}

/// b = -1/2 grad v / (v (1 + v)), the steepest-descent drift of J written in the ratio v = u / rho_d.
inline VectorFieldSample descent_drift(const RatioField& v, double v_floor = default_v_floor) {
  std::vector<std::size_t> bad;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (v[i] < v_floor) bad.push_back(i);
  if (!bad.empty()) throw DriftSingularityError(std::move(bad));

  const auto dv = gradient(v.grid(), v.values());
  std::vector<double> b(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) b[i] = -0.5 * dv[i] / (v[i] * (1.0 + v[i]));
  return {v.grid(), std::move(b)};
}

/// b = grad D / (2 (1 - D)), the same drift written through the optimal discriminator.
inline VectorFieldSample drift_from_discriminator(const Grid& grid, std::span<const double> d,
                                                  std::span<const double> grad_d,
                                                  double d_ceiling = default_d_ceiling) {
  require_length(grid, d.size(), "drift_from_discriminator");
  require_length(grid, grad_d.size(), "drift_from_discriminator");
  std::vector<std::size_t> bad;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!(d[i] >= 0.0) || d[i] > 1.0) throw std::invalid_argument("discriminator values must lie in [0, 1]");
    if (d[i] > 1.0 - d_ceiling) bad.push_back(i);
  }
  if (!bad.empty()) throw SaturationError(std::move(bad));

  std::vector<double> b(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) b[i] = grad_d[i] / (2.0 * (1.0 - d[i]));
  return {grid, std::move(b)};
}

/// Optimal discriminator D = rho_d / (rho_d + u) = 1 / (1 + v) and its gradient by the chain rule
/// through the shared nodal stencil, grad D = -grad v / (1 + v)^2.
struct DiscriminatorField {
  std::vector<double> d;
  std::vector<double> grad_d;
};

inline DiscriminatorField discriminator_from_ratio(const RatioField& v) {
  const auto dv = gradient(v.grid(), v.values());
  DiscriminatorField out{std::vector<double>(v.size()), std::vector<double>(v.size())};
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double one_plus = 1.0 + v[i];
    out.d[i] = 1.0 / one_plus;
    out.grad_d[i] = -dv[i] / (one_plus * one_plus);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pushforward under y -> y + eps * xi(y) and the first-variation identity.

namespace detail {

inline void check_transport(const Grid& grid, const CubicSpline& xi, std::span<const double> xi_nodes, double eps) {
  const double edge_tol = 1e-12;
  if (std::abs(xi_nodes.front()) > edge_tol || std::abs(xi_nodes.back()) > edge_tol)
    throw InvalidTransportError("perturbation field must vanish at the window edges");
  for (std::size_t i = 0; i < grid.n; ++i) {
    if (!(1.0 + eps * xi.derivative(grid.node(i)) > 0.0))
      throw InvalidTransportError("map I + eps*xi is not monotone at node " + std::to_string(i));
  }
  for (std::size_t i = 0; i + 1 < grid.n; ++i) {
    const double a = grid.node(i) + eps * xi_nodes[i];
    const double b = grid.node(i + 1) + eps * xi_nodes[i + 1];
    if (!(b > a)) throw InvalidTransportError("map I + eps*xi is not monotone on cell " + std::to_string(i));
  }
}

} // namespace detail

/// Density of the pushforward of rho under I + eps*xi:
/// rho(T^{-1}(y)) / (1 + eps*xi'(T^{-1}(y))), with T^{-1} found by bisection to 1e-12.
inline GridDensity pushforward_density(const GridDensity& rho, std::span<const double> xi, double eps) {
  const Grid& grid = rho.grid();
  require_length(grid, xi.size(), "pushforward_density");
  if (eps == 0.0 || std::all_of(xi.begin(), xi.end(), [](double x) { return x == 0.0; })) return rho;

  const CubicSpline xi_s(grid, xi);
  const CubicSpline rho_s(grid, rho.values());
  detail::check_transport(grid, xi_s, xi, eps);

  const auto transport = [&](double x) { return x + eps * xi_s(x); };
  std::vector<double> out(grid.n);
  for (std::size_t i = 0; i < grid.n; ++i) {
    const double y = grid.node(i);
    double lo = grid.lower;
    double hi = grid.upper;
    while (hi - lo > 1e-12) {
      const double mid = 0.5 * (lo + hi);
      if (transport(mid) < y) lo = mid;
      else hi = mid;
    }
    const double x = 0.5 * (lo + hi);
    const double jac = 1.0 + eps * xi_s.derivative(x);
    out[i] = std::max(0.0, rho_s(x)) / jac;
  }
  return {grid, std::move(out)};
}

struct DirectionalDerivative {
  double lhs; ///< (J(rho_eps) - J(rho)) / eps
  double rhs; ///< integral of grad(dJ/drho) . xi rho
};

inline DirectionalDerivative directional_derivative_check(const GridDensity& rho, const GridDensity& rho_d,
                                                          std::span<const double> xi, double eps) {
  require_same_grid(rho.grid(), rho_d.grid());
  if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
  const Grid& grid = rho.grid();

  const GridDensity pushed = pushforward_density(rho, xi, eps);
  const double lhs = (jsd(pushed, rho_d) - jsd(rho, rho_d)) / eps;

  const auto dj = functional_derivative_J(rho, rho_d);
  const auto grad_dj = gradient(grid, dj);
  std::vector<double> integrand(grid.n);
  for (std::size_t i = 0; i < grid.n; ++i)
    integrand[i] = (rho[i] > 0.0 && std::isfinite(grad_dj[i])) ? grad_dj[i] * xi[i] * rho[i] : 0.0;
  return {lhs, trapezoid(grid, integrand)};
}

} // namespace gflow
