#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "gflow/density.hpp"
#include "gflow/error.hpp"
#include "gflow/grid.hpp"
#include "gflow/rng.hpp"
#include "gflow/tridiagonal.hpp"

namespace gflow {

/// Weighted Laplacian  Delta_mu w = Delta w + (ln rho_d)' w'  in divergence form on a uniform grid.
///
/// Node i carries the control volume c_i h with c_i = 1 inside and 1/2 at the two ends, the same
/// weights as the trapezoidal rule. Fluxes across cell midpoints use the geometric-mean weight
/// rho_{i+1/2} = sqrt(rho_i rho_{i+1}); no flux leaves the window. With this choice
///   sum_i c_i h rho_i a_i (Delta_mu b)_i = -sum_edges rho_{i+1/2} (a_{i+1}-a_i)(b_{i+1}-b_i) / h
/// holds exactly, so the operator is self-adjoint and mass-preserving in the trapezoidal L2(mu_d).
class WeightedOperator {
public:
  explicit WeightedOperator(GridDensity rho_d) : rho_d_(std::move(rho_d)) {
    const Grid& g = rho_d_.grid();
    std::vector<std::size_t> bad;
    for (std::size_t i = 0; i < g.n; ++i)
      if (!(rho_d_[i] > 0.0)) bad.push_back(i);
    if (!bad.empty()) throw PositivityError(std::move(bad));

    const std::size_t n = g.n;
    half_.resize(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) half_[i] = std::sqrt(rho_d_[i] * rho_d_[i + 1]);

    lo_.assign(n, 0.0);
    up_.assign(n, 0.0);
    const double inv_h2 = 1.0 / (g.h * g.h);
    for (std::size_t i = 0; i < n; ++i) {
      const double c = (i == 0 || i + 1 == n) ? 0.5 : 1.0;
      // ratios rather than rho_{i+1/2} / rho_i keep deep-tail nodes free of underflow
      if (i > 0) lo_[i] = std::sqrt(rho_d_[i - 1] / rho_d_[i]) * inv_h2 / c;
      if (i + 1 < n) up_[i] = std::sqrt(rho_d_[i + 1] / rho_d_[i]) * inv_h2 / c;
    }
    quad_ = trapezoid_weights(g);
    for (std::size_t i = 0; i < n; ++i) quad_[i] *= rho_d_[i];
  }

  const Grid& grid() const noexcept { return rho_d_.grid(); }
  const GridDensity& rho_d() const noexcept { return rho_d_; }
  std::span<const double> half_weights() const noexcept { return half_; }
  /// Trapezoidal weights of the measure mu_d: w_i * rho_d(x_i).
  std::span<const double> measure_weights() const noexcept { return quad_; }

  std::vector<double> apply(std::span<const double> w) const {
    require_length(grid(), w.size(), "apply_weighted_laplacian");
    const std::size_t n = w.size();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      if (i > 0) s += lo_[i] * (w[i - 1] - w[i]);
      if (i + 1 < n) s += up_[i] * (w[i + 1] - w[i]);
      out[i] = s;
    }
    return out;
  }

  /// A_h v = -1/2 Delta_mu ln(1 + v).
  std::vector<double> apply_A(std::span<const double> v) const {
    std::vector<double> w(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) w[i] = std::log1p(v[i]);
    auto out = apply(w);
    for (double& x : out) x *= -0.5;
    return out;
  }

  /// Matrix of diag(alpha) - scale * Delta_mu.
  TridiagonalMatrix shifted(std::span<const double> alpha, double scale) const {
    const std::size_t n = grid().n;
    TridiagonalMatrix m(n);
    for (std::size_t i = 0; i < n; ++i) {
      m.lower[i] = -scale * lo_[i];
      m.upper[i] = -scale * up_[i];
      m.diag[i] = alpha[i] + scale * (lo_[i] + up_[i]);
    }
    return m;
  }

  double inner(std::span<const double> a, std::span<const double> b) const {
    double s = 0.0;
    for (std::size_t i = 0; i < quad_.size(); ++i) s += quad_[i] * a[i] * b[i];
    return s;
  }

  double weighted_mass(std::span<const double> a) const {
    double s = 0.0;
    for (std::size_t i = 0; i < quad_.size(); ++i) s += quad_[i] * a[i];
    return s;
  }

  double weighted_l1(std::span<const double> a) const {
    double s = 0.0;
    for (std::size_t i = 0; i < quad_.size(); ++i) s += quad_[i] * std::abs(a[i]);
    return s;
  }

  /// Edge form of the Dirichlet energy, equal to -<Delta_mu a, b>_mu.
  double dirichlet(std::span<const double> a, std::span<const double> b) const {
    double s = 0.0;
    for (std::size_t i = 0; i < half_.size(); ++i) s += half_[i] * (a[i + 1] - a[i]) * (b[i + 1] - b[i]);
    return s / grid().h;
  }

private:
  GridDensity rho_d_;
  std::vector<double> half_;
  std::vector<double> lo_;
  std::vector<double> up_;
  std::vector<double> quad_;
};

inline std::vector<double> apply_weighted_laplacian(const WeightedOperator& op, std::span<const double> w) {
  return op.apply(w);
}

/// One implicit step  v + lambda A v = f  with 0 <= f <= beta.
struct ResolventProblem {
  double lambda;
  double beta;
  RatioField f;
  double alpha;

  ResolventProblem(double lambda_, double beta_, RatioField f_)
      : ResolventProblem(lambda_, beta_, std::move(f_), 1.0 + beta_) {}

  ResolventProblem(double lambda_, double beta_, RatioField f_, double alpha_)
      : lambda(lambda_), beta(beta_), f(std::move(f_)), alpha(alpha_) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("resolvent lambda must be > 0");
    if (!(beta >= 1.0) || !std::isfinite(beta)) throw std::invalid_argument("resolvent beta must be >= 1");
    if (!(alpha >= 1.0 + beta)) throw std::invalid_argument("resolvent alpha must be >= 1 + beta");
    if (f.max() > beta * (1.0 + 1e-12)) throw std::invalid_argument("resolvent right-hand side exceeds beta");
  }
};

/// How the monotone iteration picks its shift.
///   uniform:  alpha = problem.alpha everywhere, factorized once; contraction rate about beta/alpha.
///   adaptive: alpha_i = exp(wbar_{k-1,i}), the largest slope of exp over the current bracket at
///             node i. Both sequences keep their monotone structure and the rate becomes superlinear.
enum class ShiftRule { uniform, adaptive };

struct ResolventResult {
  RatioField v;
  int iterations = 0;
  double bracket_gap = 0.0;
  double residual = 0.0;          ///< sup |v + lambda A_h v - f|
  double max_sub_decrease = 0.0;  ///< largest drop of a subsolution iterate (0 in exact arithmetic)
  double max_super_increase = 0.0;
  double max_inversion = 0.0;     ///< largest wsub - wsup seen
};

inline ResolventResult solve_resolvent(const ResolventProblem& problem, const WeightedOperator& op,
                                       double tol = 1e-10, int max_iters = 500,
                                       ShiftRule rule = ShiftRule::adaptive) {
  require_same_grid(problem.f.grid(), op.grid());
  if (!(tol > 0.0)) throw std::invalid_argument("resolvent tol must be > 0");
  if (max_iters < 1) throw std::invalid_argument("resolvent max_iters must be >= 1");

  const std::size_t n = op.grid().n;
  const double scale = 0.5 * problem.lambda;
  const auto f = problem.f.values();

  std::vector<double> lo(n, 0.0);
  std::vector<double> hi(n, std::log1p(problem.beta));
  std::vector<double> alpha(n, problem.alpha);
  std::vector<double> rhs_lo(n);
  std::vector<double> rhs_hi(n);

  std::optional<ThomasSolver> fixed;
  if (rule == ShiftRule::uniform) fixed.emplace(op.shifted(alpha, scale));

  const auto residual_of = [&](std::span<const double> w) {
    const auto lap = op.apply(w);
    double r = 0.0;
    for (std::size_t i = 0; i < n; ++i) r = std::max(r, std::abs(std::expm1(w[i]) - scale * lap[i] - f[i]));
    return r;
  };

  ResolventResult out{problem.f, 0, 0.0, 0.0, 0.0, 0.0, 0.0};
  double gap = std::log1p(problem.beta);
  for (int k = 1; k <= max_iters; ++k) {
    if (rule == ShiftRule::adaptive)
      for (std::size_t i = 0; i < n; ++i) alpha[i] = std::exp(hi[i]);
    for (std::size_t i = 0; i < n; ++i) {
      rhs_lo[i] = alpha[i] * lo[i] - std::expm1(lo[i]) + f[i];
      rhs_hi[i] = alpha[i] * hi[i] - std::expm1(hi[i]) + f[i];
    }
    if (fixed) {
      fixed->solve(rhs_lo);
      fixed->solve(rhs_hi);
    } else {
      const ThomasSolver solver(op.shifted(alpha, scale));
      solver.solve(rhs_lo);
      solver.solve(rhs_hi);
    }

    gap = 0.0;
    double inversion = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      out.max_sub_decrease = std::max(out.max_sub_decrease, lo[i] - rhs_lo[i]);
      out.max_super_increase = std::max(out.max_super_increase, rhs_hi[i] - hi[i]);
      inversion = std::max(inversion, rhs_lo[i] - rhs_hi[i]);
      gap = std::max(gap, std::abs(rhs_hi[i] - rhs_lo[i]));
    }
    out.max_inversion = std::max(out.max_inversion, inversion);
    if (inversion > tol) throw MonotonicityViolationError(k, inversion);
    lo.swap(rhs_lo);
    hi.swap(rhs_hi);

    if (gap < tol) {
      const double r = residual_of(hi);
      // a closed bracket with a large residual means the linear solves lost accuracy; keep going
      if (r <= 10.0 * tol || k == max_iters) {
        std::vector<double> v(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = std::max(0.0, std::expm1(hi[i]));
        out.v = RatioField(op.grid(), std::move(v));
        out.iterations = k;
        out.bracket_gap = gap;
        out.residual = r;
        return out;
      }
    }
  }
  throw NonConvergenceError(max_iters, gap);
}

/// Per-step diagnostics of a Crandall-Liggett run. Index 0 is the initial state.
struct FlowTrace {
  std::vector<double> times;
  std::vector<double> jsd_values;
  std::vector<double> masses;
  std::vector<double> sup_v;
  std::vector<double> inf_v;
  std::vector<double> energy_partial_sums;  ///< sum over steps of lambda * |grad v|^2 in L2(mu_d)
  std::vector<double> dissipation;           ///< (lambda/4) <grad ln(1+v), grad ln(v/(1+v))>_mu per step
  double lambda = 0.0;
  double beta = 1.0;

  std::size_t size() const noexcept { return times.size(); }
};

struct EvolveStats {
  int total_iterations = 0;
  int max_iterations = 0;
  double max_bracket_gap = 0.0;
  double max_residual = 0.0;
  double max_mass_defect = 0.0;      ///< max over steps of |int v_k dmu - int v_{k-1} dmu|
  double max_sub_decrease = 0.0;
  double max_super_increase = 0.0;
  double max_inversion = 0.0;
  double min_inf_v = 0.0;
  double max_sup_v = 0.0;
};

struct EvolveResult {
  RatioField v;
  FlowTrace trace;
  EvolveStats stats;
};

namespace detail {

inline double flow_jsd(const WeightedOperator& op, std::span<const double> v) {
  std::vector<double> u(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) u[i] = v[i] * op.rho_d()[i];
  return jsd(GridDensity(op.grid(), std::move(u)), op.rho_d());
}

// Edge form of (1/4) int grad ln(1+v) . grad ln(v/(1+v)) dmu_d; edges touching v = 0 are skipped.
inline double dissipation_density(const WeightedOperator& op, std::span<const double> v) {
  const auto hw = op.half_weights();
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < v.size(); ++i) {
    if (!(v[i] > 0.0) || !(v[i + 1] > 0.0)) continue;
    const double a = std::log1p(v[i + 1]) - std::log1p(v[i]);
    const double b = (std::log(v[i + 1]) - std::log1p(v[i + 1])) - (std::log(v[i]) - std::log1p(v[i]));
    s += hw[i] * a * b;
  }
  return 0.25 * s / op.grid().h;
}

} // namespace detail

/// Max over the grid of rho_0 / rho_d; the smallest beta with rho_0 <= beta rho_d.
inline double beta_of(const GridDensity& rho0, const GridDensity& rho_d) {
  const RatioField v = ratio_of(rho0, rho_d);
  const double b = v.max();
  if (!(b <= 1e6)) throw std::domain_error("rho_0 / rho_d exceeds 1e6; the L-infinity bound is not usable");
  return b;
}

/// v(t) = (I + lambda A)^{-n} v0 with lambda = t_final / n_steps; diagnostics after every step.
inline EvolveResult crandall_liggett_evolve(const RatioField& v0, const WeightedOperator& op, double t_final,
                                            int n_steps, double tol = 1e-10, int max_iters = 500,
                                            ShiftRule rule = ShiftRule::adaptive) {
  require_same_grid(v0.grid(), op.grid());
  if (n_steps < 1) throw std::invalid_argument("n_steps must be >= 1");
  if (!(t_final > 0.0)) throw std::invalid_argument("t_final must be > 0");
  if (v0.min() < 0.0) throw std::invalid_argument("initial ratio must be >= 0");

  const double beta = std::max(1.0, v0.max());
  const double lambda = t_final / n_steps;

  EvolveResult res{v0, {}, {}};
  FlowTrace& tr = res.trace;
  tr.lambda = lambda;
  tr.beta = beta;
  const auto reserve = static_cast<std::size_t>(n_steps) + 1;
  for (auto* vec : {&tr.times, &tr.jsd_values, &tr.masses, &tr.sup_v, &tr.inf_v, &tr.energy_partial_sums,
                    &tr.dissipation})
    vec->reserve(reserve);

  const auto record = [&](double t, const RatioField& v, double energy, double diss) {
    tr.times.push_back(t);
    tr.jsd_values.push_back(detail::flow_jsd(op, v.values()));
    tr.masses.push_back(op.weighted_mass(v.values()));
    tr.sup_v.push_back(v.max());
    tr.inf_v.push_back(v.min());
    tr.energy_partial_sums.push_back(energy);
    tr.dissipation.push_back(diss);
  };
  record(0.0, v0, 0.0, 0.0);
  res.stats.min_inf_v = v0.min();
  res.stats.max_sup_v = v0.max();

  double energy = 0.0;
  for (int step = 1; step <= n_steps; ++step) {
    ResolventResult r = [&] {
      try {
        return solve_resolvent(ResolventProblem(lambda, beta, res.v), op, tol, max_iters, rule);
      } catch (const NonConvergenceError& e) {
        throw e.at_step(step);
      } catch (const MonotonicityViolationError& e) {
        throw e.at_step(step);
      }
    }();

    auto& st = res.stats;
    st.total_iterations += r.iterations;
    st.max_iterations = std::max(st.max_iterations, r.iterations);
    st.max_bracket_gap = std::max(st.max_bracket_gap, r.bracket_gap);
    st.max_residual = std::max(st.max_residual, r.residual);
    st.max_sub_decrease = std::max(st.max_sub_decrease, r.max_sub_decrease);
    st.max_super_increase = std::max(st.max_super_increase, r.max_super_increase);
    st.max_inversion = std::max(st.max_inversion, r.max_inversion);
    const double defect = std::abs(op.weighted_mass(r.v.values()) - op.weighted_mass(res.v.values()));
    st.max_mass_defect = std::max(st.max_mass_defect, defect);
    st.min_inf_v = std::min(st.min_inf_v, r.v.min());
    st.max_sup_v = std::max(st.max_sup_v, r.v.max());

    energy += lambda * op.dirichlet(r.v.values(), r.v.values());
    const double diss = lambda * detail::dissipation_density(op, r.v.values());
    res.v = std::move(r.v);
    record(lambda * step, res.v, energy, diss);
  }
  return res;
}

struct DescentAudit {
  bool is_monotone;
  double dissipation_check;  ///< max_k J_k - J_{k-1} + dissipation_k; <= 0 up to rounding
};

inline DescentAudit jsd_descent_audit(const FlowTrace& trace, double slack = 1e-10) {
  DescentAudit a{true, 0.0};
  const auto& j = trace.jsd_values;
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < j.size(); ++k) {
    if (j[k] - j[k - 1] > slack) a.is_monotone = false;
    const double d = k < trace.dissipation.size() ? trace.dissipation[k] : 0.0;
    worst = std::max(worst, j[k] - j[k - 1] + d);
  }
  a.dissipation_check = j.size() > 1 ? worst : 0.0;
  return a;
}

namespace detail {

// beta * logistic(sum of a few random sinusoids): smooth, strictly inside (0, beta).
inline std::vector<double> random_smooth_field(const Grid& g, double beta, Rng& rng) {
  const int modes = 4;
  double amp[modes];
  double phase[modes];
  for (int k = 0; k < modes; ++k) {
    amp[k] = 2.0 * rng.normal() / (k + 1);
    phase[k] = 2.0 * std::numbers::pi * rng.uniform();
  }
  const double offset = rng.normal();
  const double len = g.upper - g.lower;
  std::vector<double> v(g.n);
  for (std::size_t i = 0; i < g.n; ++i) {
    const double s = (g.node(i) - g.lower) / len;
    double z = offset;
    for (int k = 0; k < modes; ++k) z += amp[k] * std::sin(std::numbers::pi * (k + 1) * s + phase[k]);
    v[i] = beta / (1.0 + std::exp(-z));
  }
  return v;
}

} // namespace detail

/// Max over random smooth pairs of ||v1 - v2|| - ||(v1 + lambda A v1) - (v2 + lambda A v2)|| in L1(mu_d).
inline double accretivity_check(const WeightedOperator& op, double beta, double lambda, int trials,
                                std::uint64_t rng_seed) {
  if (trials < 1) throw std::invalid_argument("accretivity_check needs trials >= 1");
  if (!(lambda > 0.0)) throw std::invalid_argument("accretivity_check needs lambda > 0");
  Rng rng(rng_seed);
  const std::size_t n = op.grid().n;
  double worst = -std::numeric_limits<double>::infinity();
  std::vector<double> diff(n);
  std::vector<double> img(n);
  for (int t = 0; t < trials; ++t) {
    const auto v1 = detail::random_smooth_field(op.grid(), beta, rng);
    const auto v2 = detail::random_smooth_field(op.grid(), beta, rng);
    const auto a1 = op.apply_A(v1);
    const auto a2 = op.apply_A(v2);
    for (std::size_t i = 0; i < n; ++i) {
      diff[i] = v1[i] - v2[i];
      img[i] = diff[i] + lambda * (a1[i] - a2[i]);
    }
    worst = std::max(worst, op.weighted_l1(diff) - op.weighted_l1(img));
  }
  return worst;
}

} // namespace gflow
