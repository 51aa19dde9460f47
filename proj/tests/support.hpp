#pragma once

// Test-side helpers. The oracles here are written independently of the library: their own
// quadrature, their own copy of the discrete operator and their own linear solver.

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "gflow/density.hpp"
#include "gflow/grid.hpp"
#include "gflow/rng.hpp"
#include "gflow/targets.hpp"

namespace testing_support {

/// Adaptive Simpson quadrature with Richardson correction.
inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol,
                               int depth = 50) {
  const auto simpson = [&](double lo, double hi, double flo, double fmid, double fhi) {
    return (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
  };
  const std::function<double(double, double, double, double, double, double, double, int)> rec =
      [&](double lo, double hi, double flo, double fmid, double fhi, double whole, double eps, int d) {
        const double mid = 0.5 * (lo + hi);
        const double lm = 0.5 * (lo + mid);
        const double rm = 0.5 * (mid + hi);
        const double flm = f(lm);
        const double frm = f(rm);
        const double left = simpson(lo, mid, flo, flm, fmid);
        const double right = simpson(mid, hi, fmid, frm, fhi);
        if (d <= 0 || std::abs(left + right - whole) <= 15.0 * eps)
          return left + right + (left + right - whole) / 15.0;
        return rec(lo, mid, flo, flm, fmid, left, 0.5 * eps, d - 1) + rec(mid, hi, fmid, frm, fhi, right, 0.5 * eps, d - 1);
      };
  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(0.5 * (a + b));
  return rec(a, b, fa, fm, fb, simpson(a, b, fa, fm, fb), tol, depth);
}

/// Splits [a, b] into `pieces` panels so narrow features are not missed by the first Simpson pass.
inline double integrate(const std::function<double(double)>& f, double a, double b, double tol = 1e-13,
                        int pieces = 64) {
  double s = 0.0;
  const double w = (b - a) / pieces;
  for (int k = 0; k < pieces; ++k) s += adaptive_simpson(f, a + k * w, a + (k + 1) * w, tol / pieces);
  return s;
}

inline gflow::GridDensity sampled(const gflow::TargetModel& m, const gflow::Grid& g) {
  return gflow::discretize(m, g).density;
}

/// Smooth, strictly positive random density on the grid.
inline gflow::GridDensity random_density(const gflow::Grid& g, gflow::Rng& rng) {
  const int modes = 1 + static_cast<int>(rng.uniform() * 3.0);
  std::vector<double> v(g.n, 0.0);
  const double span = g.upper - g.lower;
  for (int k = 0; k < modes; ++k) {
    const double mu = g.lower + span * (0.2 + 0.6 * rng.uniform());
    const double sd = span * (0.02 + 0.1 * rng.uniform());
    const double w = 0.2 + rng.uniform();
    for (std::size_t i = 0; i < g.n; ++i) {
      const double z = (g.node(i) - mu) / sd;
      v[i] += w * std::exp(-0.5 * z * z);
    }
  }
  for (double& x : v) x += 1e-300;
  const double mass = gflow::trapezoid(g, v);
  for (double& x : v) x /= mass;
  return {g, std::move(v)};
}

/// Independent solver for the implicit step in w = ln(1 + v):
///   F(w) = e^w - 1 - (lambda/2) L w - f = 0,
/// L the divergence-form weighted Laplacian (rebuilt here from rho_d), by damped Newton.
class NewtonResolvent {
public:
  explicit NewtonResolvent(const gflow::GridDensity& rho_d) : n_(rho_d.size()), h_(rho_d.grid().h) {
    lo_.assign(n_, 0.0);
    up_.assign(n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
      const double c = (i == 0 || i + 1 == n_) ? 0.5 : 1.0;
      if (i > 0) lo_[i] = std::sqrt(rho_d[i - 1] / rho_d[i]) / (c * h_ * h_);
      if (i + 1 < n_) up_[i] = std::sqrt(rho_d[i + 1] / rho_d[i]) / (c * h_ * h_);
    }
  }

  std::vector<double> laplacian(const std::vector<double>& w) const {
    std::vector<double> out(n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
      if (i > 0) out[i] += lo_[i] * (w[i - 1] - w[i]);
      if (i + 1 < n_) out[i] += up_[i] * (w[i + 1] - w[i]);
    }
    return out;
  }

  double residual_norm(const std::vector<double>& w, const std::vector<double>& f, double lambda) const {
    const auto lap = laplacian(w);
    double r = 0.0;
    for (std::size_t i = 0; i < n_; ++i) r = std::max(r, std::abs(std::expm1(w[i]) - 0.5 * lambda * lap[i] - f[i]));
    return r;
  }

  std::vector<double> solve(const std::vector<double>& f, double lambda, double tol = 1e-14, int max_iter = 100) const {
    std::vector<double> w(n_);
    for (std::size_t i = 0; i < n_; ++i) w[i] = std::log1p(f[i]);
    const double s = 0.5 * lambda;
    for (int it = 0; it < max_iter; ++it) {
      const auto lap = laplacian(w);
      std::vector<double> F(n_);
      double norm = 0.0;
      for (std::size_t i = 0; i < n_; ++i) {
        F[i] = std::expm1(w[i]) - s * lap[i] - f[i];
        norm = std::max(norm, std::abs(F[i]));
      }
      if (norm < tol) break;
      // Jacobian: diag(e^w) - s L, tridiagonal; solved by a plain Thomas sweep
      std::vector<double> a(n_), b(n_), c(n_), d(F);
      for (std::size_t i = 0; i < n_; ++i) {
        a[i] = -s * lo_[i];
        c[i] = -s * up_[i];
        b[i] = std::exp(w[i]) + s * (lo_[i] + up_[i]);
      }
      for (std::size_t i = 1; i < n_; ++i) {
        const double m = a[i] / b[i - 1];
        b[i] -= m * c[i - 1];
        d[i] -= m * d[i - 1];
      }
      std::vector<double> step(n_);
      step[n_ - 1] = d[n_ - 1] / b[n_ - 1];
      for (std::size_t i = n_ - 1; i-- > 0;) step[i] = (d[i] - c[i] * step[i + 1]) / b[i];

      double damp = 1.0;
      for (int k = 0; k < 40; ++k) {
        std::vector<double> trial(n_);
        for (std::size_t i = 0; i < n_; ++i) trial[i] = w[i] - damp * step[i];
        if (residual_norm(trial, f, lambda) < norm || k == 39) {
          w = std::move(trial);
          break;
        }
        damp *= 0.5;
      }
    }
    std::vector<double> v(n_);
    for (std::size_t i = 0; i < n_; ++i) v[i] = std::expm1(w[i]);
    return v;
  }

private:
  std::size_t n_;
  double h_;
  std::vector<double> lo_;
  std::vector<double> up_;
};

} // namespace testing_support
