#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "gflow/error.hpp"

namespace gflow {

/// Uniform 1-D grid with nodes x_i = lower + i*h, i = 0..n-1.
struct Grid {
  double lower = 0.0;
  double upper = 1.0;
  std::size_t n = 3;
  double h = 0.5;

  static Grid uniform(double lower, double upper, std::size_t n) {
    if (n < 3) throw std::invalid_argument("grid needs at least 3 nodes");
    if (!(upper > lower) || !std::isfinite(lower) || !std::isfinite(upper))
      throw std::invalid_argument("grid window must satisfy lower < upper");
    return Grid{lower, upper, n, (upper - lower) / static_cast<double>(n - 1)};
  }

  double node(std::size_t i) const noexcept {
    // the last node is pinned to `upper` so windows round-trip exactly
    return i + 1 == n ? upper : lower + static_cast<double>(i) * h;
  }

  std::vector<double> nodes() const {
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = node(i);
    return x;
  }

  friend bool operator==(const Grid& a, const Grid& b) noexcept {
    return a.lower == b.lower && a.upper == b.upper && a.n == b.n;
  }
};

inline void require_same_grid(const Grid& a, const Grid& b) {
  if (!(a == b)) throw GridMismatchError();
}

inline void require_length(const Grid& g, std::size_t len, const char* what) {
  if (len != g.n) throw DimensionError(std::string(what) + ": length does not match grid");
}

/// Trapezoidal quadrature weights (h inside, h/2 at the two ends).
inline std::vector<double> trapezoid_weights(const Grid& g) {
  std::vector<double> w(g.n, g.h);
  w.front() = w.back() = 0.5 * g.h;
  return w;
}

inline double trapezoid(const Grid& g, std::span<const double> f) {
  require_length(g, f.size(), "trapezoid");
  double s = 0.5 * (f.front() + f.back());
  for (std::size_t i = 1; i + 1 < f.size(); ++i) s += f[i];
  return s * g.h;
}

/// Nodal derivative: central differences inside, second-order one-sided at the ends. The end
/// stencils are written in difference form so a constant field differentiates to exactly 0.
inline std::vector<double> gradient(const Grid& g, std::span<const double> f) {
  require_length(g, f.size(), "gradient");
  const std::size_t n = g.n;
  std::vector<double> d(n);
  const double inv2h = 1.0 / (2.0 * g.h);
  d[0] = (3.0 * (f[1] - f[0]) - (f[2] - f[1])) * inv2h;
  for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (f[i + 1] - f[i - 1]) * inv2h;
  d[n - 1] = (3.0 * (f[n - 1] - f[n - 2]) - (f[n - 2] - f[n - 3])) * inv2h;
  return d;
}

} // namespace gflow
