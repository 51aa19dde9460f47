#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "gflow/grid.hpp"
#include "gflow/tridiagonal.hpp"

namespace gflow {

/// Natural cubic spline through nodal values on a uniform grid.
class CubicSpline {
public:
  CubicSpline(const Grid& grid, std::span<const double> values)
      : grid_(grid), y_(values.begin(), values.end()), m_(grid.n, 0.0) {
    require_length(grid, values.size(), "CubicSpline");
    const std::size_t n = grid.n;
    // Interior second derivatives; natural ends M_0 = M_{n-1} = 0.
    const std::size_t k = n - 2;
    TridiagonalMatrix a(k);
    std::vector<double> rhs(k);
    const double s = 6.0 / (grid.h * grid.h);
    for (std::size_t i = 0; i < k; ++i) {
      a.diag[i] = 4.0;
      if (i > 0) a.lower[i] = 1.0;
      if (i + 1 < k) a.upper[i] = 1.0;
      rhs[i] = s * (y_[i] - 2.0 * y_[i + 1] + y_[i + 2]);
    }
    ThomasSolver(a).solve(rhs);
    std::copy(rhs.begin(), rhs.end(), m_.begin() + 1);
  }

  double operator()(double x) const {
    auto [i, t] = locate(x);
    const double h = grid_.h;
    const double u = 1.0 - t;
    return u * y_[i] + t * y_[i + 1] + (h * h / 6.0) * ((u * u * u - u) * m_[i] + (t * t * t - t) * m_[i + 1]);
  }

  double derivative(double x) const {
    auto [i, t] = locate(x);
    const double h = grid_.h;
    const double u = 1.0 - t;
    return (y_[i + 1] - y_[i]) / h + (h / 6.0) * (-(3.0 * u * u - 1.0) * m_[i] + (3.0 * t * t - 1.0) * m_[i + 1]);
  }

private:
  struct Cell {
    std::size_t i;
    double t;
  };

  Cell locate(double x) const {
    const double pos = (x - grid_.lower) / grid_.h;
    const double last = static_cast<double>(grid_.n - 2);
    const double cell = std::clamp(std::floor(pos), 0.0, last);
    return {static_cast<std::size_t>(cell), pos - cell};
  }

  Grid grid_;
  std::vector<double> y_;
  std::vector<double> m_;
};

/// Piecewise-linear interpolation of nodal values; zero outside the grid.
inline double linear_interpolate(const Grid& grid, std::span<const double> values, double x) {
  if (x < grid.lower || x > grid.upper) return 0.0;
  const double pos = (x - grid.lower) / grid.h;
  const double cell = std::min(std::floor(pos), static_cast<double>(grid.n - 2));
  const auto i = static_cast<std::size_t>(cell);
  const double t = pos - cell;
  return (1.0 - t) * values[i] + t * values[i + 1];
}

/// Exact integral of the piecewise-linear interpolant over [a, b] (clipped to the grid).
inline double integrate_linear(const Grid& grid, std::span<const double> values, double a, double b) {
  a = std::max(a, grid.lower);
  b = std::min(b, grid.upper);
  if (!(b > a)) return 0.0;
  const auto cell_of = [&](double x) {
    const double c = std::floor((x - grid.lower) / grid.h);
    return static_cast<std::size_t>(std::clamp(c, 0.0, static_cast<double>(grid.n - 2)));
  };
  double total = 0.0;
  for (std::size_t i = cell_of(a); i + 1 < grid.n; ++i) {
    const double x0 = grid.node(i);
    const double x1 = grid.node(i + 1);
    if (x0 >= b) break;
    const double lo = std::max(a, x0);
    const double hi = std::min(b, x1);
    if (hi <= lo) continue;
    const double f_lo = linear_interpolate(grid, values, lo);
    const double f_hi = linear_interpolate(grid, values, hi);
    total += 0.5 * (f_lo + f_hi) * (hi - lo);
  }
  return total;
}

} // namespace gflow
