#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gflow/error.hpp"
#include "gflow/mlp.hpp"
#include "gflow/particles.hpp"
#include "gflow/rng.hpp"
#include "gflow/targets.hpp"

namespace gflow {

/// One draw of noise z (m x noise_dim) and data x (m x 1), row-major.
struct Minibatch {
  std::size_t m = 0;
  std::size_t noise_dim = 1;
  std::vector<double> z;
  std::vector<double> x;
  std::uint64_t seed = 0;

  std::span<const double> noise(std::size_t i) const { return {z.data() + i * noise_dim, noise_dim}; }
};

inline Minibatch make_minibatch(const TargetModel& noise, const TargetModel& data, std::size_t m,
                                std::size_t noise_dim, std::uint64_t seed) {
  if (m < 1) throw std::invalid_argument("minibatch size must be >= 1");
  if (noise_dim < 1) throw DimensionError("noise dimension must be >= 1");
  Minibatch b{m, noise_dim, noise.sample(derive_seed(seed, "noise"), m * noise_dim),
              data.sample(derive_seed(seed, "data"), m), seed};
  return b;
}

struct LossGradient {
  double value = 0.0;
  std::vector<double> grad;
};

inline constexpr double default_log_guard = 1e-12;

namespace detail {

inline void require_scalar_pair(const Mlp& G, const Mlp& D) {
  if (D.output_activation() != Activation::sigmoid) throw std::invalid_argument("D must have a sigmoid output");
  if (G.output_dim() != D.input_dim()) throw DimensionError("G output and D input dimensions differ");
}

inline void require_finite(std::span<const double> params, const char* what, int iteration) {
  for (double p : params)
    if (!std::isfinite(p)) throw DivergenceError(std::string(what) + " has a non-finite parameter", iteration);
}

} // namespace detail

/// D at a batch of points (rows x d) with the exact input gradient of its logit;
/// grad_x D = D (1 - D) grad_x logit.
struct DiscriminatorProbe {
  std::vector<double> d;
  std::vector<double> logit;
  std::vector<double> grad_logit;  ///< rows x d
};

inline DiscriminatorProbe probe_discriminator(const Mlp& D, std::span<const double> xs, std::size_t rows = 1) {
  const Tape t = D.forward_batch(xs, rows);
  DiscriminatorProbe p{std::vector<double>(t.output().begin(), t.output().end()),
                       std::vector<double>(t.logit().begin(), t.logit().end()),
                       std::vector<double>(rows * D.input_dim())};
  const std::vector<double> ones(rows, 1.0);
  D.backward_from_logit(t, ones, {}, p.grad_logit);
  return p;
}

/// Generator outputs G(z_i), row-major m x d.
inline std::vector<double> generator_outputs(const Mlp& G, const Minibatch& batch) {
  if (G.input_dim() != batch.noise_dim) throw DimensionError("G input does not match the noise dimension");
  Tape t = G.forward_batch(batch.z, batch.m);
  return std::move(t.a.back());
}

/// Discriminator objective (1/m) sum ln D(x_i) + (1/m) sum ln(1 - D(y_i)) and its parameter gradient
/// (to be ascended). real and fake are row-major m x d.
inline LossGradient discriminator_gradient(const Mlp& D, std::span<const double> real, std::span<const double> fake,
                                           double guard = default_log_guard) {
  const std::size_t d = D.input_dim();
  if (real.size() % d != 0 || fake.size() % d != 0) throw DimensionError("samples do not match D's input dimension");
  const std::size_t m_real = real.size() / d;
  const std::size_t m_fake = fake.size() / d;
  if (m_real == 0 || m_fake == 0) throw std::invalid_argument("discriminator_gradient needs samples");

  LossGradient out{0.0, std::vector<double>(D.parameter_count(), 0.0)};
  std::vector<std::size_t> saturated;
  // ln D = -softplus(-l) and ln(1 - D) = -softplus(l), so the logit slopes are 1 - D and -D
  {
    const Tape t = D.forward_batch(real, m_real);
    std::vector<double> g(m_real);
    for (std::size_t i = 0; i < m_real; ++i) {
      const double dv = t.output()[i];
      if (dv < guard) saturated.push_back(i);
      out.value -= softplus(-t.logit()[i]) / static_cast<double>(m_real);
      g[i] = (1.0 - dv) / static_cast<double>(m_real);
    }
    D.backward_from_logit(t, g, out.grad, {});
  }
  {
    const Tape t = D.forward_batch(fake, m_fake);
    std::vector<double> g(m_fake);
    for (std::size_t i = 0; i < m_fake; ++i) {
      const double dv = t.output()[i];
      if (dv > 1.0 - guard) saturated.push_back(m_real + i);
      out.value -= softplus(t.logit()[i]) / static_cast<double>(m_fake);
      g[i] = -dv / static_cast<double>(m_fake);
    }
    D.backward_from_logit(t, g, out.grad, {});
  }
  if (!saturated.empty()) throw SaturationError(std::move(saturated));
  return out;
}

/// (1/m) sum |G(z_i) - y_i|^2 with fixed targets y, and its parameter gradient.
inline LossGradient generator_mse_gradient(const Mlp& G, const Minibatch& batch, std::span<const double> targets) {
  const std::size_t d = G.output_dim();
  if (targets.size() != batch.m * d) throw DimensionError("targets must be m x d");
  if (G.input_dim() != batch.noise_dim) throw DimensionError("G input does not match the noise dimension");
  LossGradient out{0.0, std::vector<double>(G.parameter_count(), 0.0)};
  const Tape t = G.forward_batch(batch.z, batch.m);
  std::vector<double> g(batch.m * d);
  const double inv_m = 1.0 / static_cast<double>(batch.m);
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double r = t.output()[k] - targets[k];
    out.value += r * r * inv_m;
    g[k] = 2.0 * r * inv_m;
  }
  G.backward(t, g, out.grad, {});
  return out;
}

/// (1/m) sum ln(1 - D(G(z_i))) and its gradient with respect to G's parameters.
inline LossGradient generator_vanilla_gradient(const Mlp& G, const Mlp& D, const Minibatch& batch,
                                               double guard = default_log_guard) {
  detail::require_scalar_pair(G, D);
  if (G.input_dim() != batch.noise_dim) throw DimensionError("G input does not match the noise dimension");
  const std::size_t d = G.output_dim();
  LossGradient out{0.0, std::vector<double>(G.parameter_count(), 0.0)};
  const Tape t = G.forward_batch(batch.z, batch.m);
  const auto p = probe_discriminator(D, t.output(), batch.m);
  std::vector<double> g(batch.m * d);
  std::vector<std::size_t> saturated;
  const double inv_m = 1.0 / static_cast<double>(batch.m);
  for (std::size_t i = 0; i < batch.m; ++i) {
    if (p.d[i] > 1.0 - guard) saturated.push_back(i);
    out.value -= softplus(p.logit[i]) * inv_m;
    // d ln(1 - D) / dx = -D grad logit
    for (std::size_t k = 0; k < d; ++k) g[i * d + k] = -p.d[i] * p.grad_logit[i * d + k] * inv_m;
  }
  if (!saturated.empty()) throw SaturationError(std::move(saturated));
  G.backward(t, g, out.grad, {});
  return out;
}

/// New points y_i = G(z_i) + eps grad D(G(z_i)) / (2 (1 - D(G(z_i)))), row-major m x d.
struct TransportTargets {
  std::vector<double> outputs;
  std::vector<double> targets;
};

inline TransportTargets transport_targets(const Mlp& G, const Mlp& D, const Minibatch& batch, double eps,
                                          double d_ceiling = default_d_ceiling) {
  detail::require_scalar_pair(G, D);
  const std::size_t d = G.output_dim();
  TransportTargets tt{generator_outputs(G, batch), {}};
  tt.targets = tt.outputs;
  const auto p = probe_discriminator(D, tt.outputs, batch.m);
  std::vector<std::size_t> saturated;
  for (std::size_t i = 0; i < batch.m; ++i) {
    if (!(p.d[i] <= 1.0 - d_ceiling)) {
      saturated.push_back(i);
      continue;
    }
    const double one_minus = 1.0 - p.d[i];
    for (std::size_t k = 0; k < d; ++k) {
      const double grad_d = p.d[i] * one_minus * p.grad_logit[i * d + k];
      tt.targets[i * d + k] = tt.outputs[i * d + k] + eps * grad_d / (2.0 * one_minus);
    }
  }
  if (!saturated.empty()) throw SaturationError(std::move(saturated));
  return tt;
}

/// Reorders targets so the i-th smallest output is paired with the i-th smallest target.
inline std::vector<double> sorted_matching_targets(std::span<const double> outputs, std::span<const double> targets,
                                                   std::size_t dim = 1) {
  if (dim != 1) throw DimensionError("sorted matching is defined for 1-D outputs only");
  if (outputs.size() != targets.size()) throw DimensionError("outputs and targets differ in length");
  const std::size_t m = outputs.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return outputs[a] < outputs[b]; });
  std::vector<double> sorted_targets(targets.begin(), targets.end());
  std::stable_sort(sorted_targets.begin(), sorted_targets.end());
  std::vector<double> out(m);
  for (std::size_t r = 0; r < m; ++r) out[order[r]] = sorted_targets[r];
  return out;
}

struct GradReport {
  std::vector<double> grad_mse_path;
  std::vector<double> grad_vanilla;
  double eps = 0.0;
  double rel_error = 0.0;
};

inline double relative_gap(std::span<const double> a, std::span<const double> b_scaled) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num = std::max(num, std::abs(a[i] - b_scaled[i]));
    den = std::max(den, std::abs(b_scaled[i]));
  }
  return num / std::max(den, 1e-30);
}

/// The MSE fit to the transported points and the vanilla generator loss have proportional
/// gradients: grad MSE = eps * grad (1/m) sum ln(1 - D(G(z))).
inline GradReport equivalence_report(const Mlp& G, const Mlp& D, const Minibatch& batch, double eps,
                                     const std::vector<double>* override_targets = nullptr) {
  if (!(eps >= 0.0)) throw std::invalid_argument("eps must be >= 0");
  const auto tt = transport_targets(G, D, batch, eps);
  const auto& targets = override_targets ? *override_targets : tt.targets;
  GradReport r;
  r.eps = eps;
  r.grad_mse_path = generator_mse_gradient(G, batch, targets).grad;
  r.grad_vanilla = generator_vanilla_gradient(G, D, batch).grad;
  std::vector<double> scaled(r.grad_vanilla.size());
  for (std::size_t i = 0; i < scaled.size(); ++i) scaled[i] = eps * r.grad_vanilla[i];
  r.rel_error = relative_gap(r.grad_mse_path, scaled);
  return r;
}

// ---------------------------------------------------------------------------
// Optimizers and the training loop

struct Optimizer {
  enum class Kind { sgd, adam };
  Kind kind = Kind::sgd;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::vector<double> m1;
  std::vector<double> m2;
  long steps = 0;

  /// params -= lr * direction (sign = +1) or params += lr * direction (sign = -1, ascent).
  void apply(std::span<double> params, std::span<const double> grad, double sign = 1.0) {
    if (kind == Kind::sgd) {
      for (std::size_t i = 0; i < params.size(); ++i) params[i] -= sign * lr * grad[i];
      return;
    }
    if (m1.size() != params.size()) {
      m1.assign(params.size(), 0.0);
      m2.assign(params.size(), 0.0);
      steps = 0;
    }
    ++steps;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(steps));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(steps));
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double g = sign * grad[i];
      m1[i] = beta1 * m1[i] + (1.0 - beta1) * g;
      m2[i] = beta2 * m2[i] + (1.0 - beta2) * g * g;
      params[i] -= lr * (m1[i] / c1) / (std::sqrt(m2[i] / c2) + epsilon);
    }
  }
};

enum class Matching { pointwise, sorted };

struct Algorithm1Config {
  std::size_t m = 256;
  std::size_t noise_dim = 1;
  double eps = 0.5;
  int k_D = 1;
  int g_steps = 1;
  Matching matching = Matching::pointwise;
};

struct GanState {
  Mlp G;
  Mlp D;
  Optimizer opt_G;
  Optimizer opt_D;
  int iteration = 0;
};

struct Algorithm1Diagnostics {
  double mean_displacement = 0.0;  ///< mean |y_i - G(z_i)| of the transport targets
  double grad_norm_D = 0.0;        ///< Euclidean norm of the last discriminator gradient
  double grad_norm_G = 0.0;        ///< Euclidean norm of the last generator gradient
  double d_objective = 0.0;
  double mse = 0.0;
};

inline double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

/// One training round: k_D ascent steps on D, new points by the transport map, g_steps descent
/// steps of G on the MSE to those points. The state advances in place.
inline Algorithm1Diagnostics algorithm1_iteration(GanState& s, const TargetModel& rho_d, const TargetModel& noise,
                                                  const Algorithm1Config& cfg, std::uint64_t seed) {
  detail::require_scalar_pair(s.G, s.D);
  if (cfg.k_D < 1 || cfg.g_steps < 1) throw std::invalid_argument("k_D and g_steps must be >= 1");
  if (!(cfg.eps >= 0.0)) throw std::invalid_argument("eps must be >= 0");
  if (cfg.matching == Matching::sorted && s.G.output_dim() != 1)
    throw DimensionError("sorted matching is defined for 1-D outputs only");
  ++s.iteration;
  Algorithm1Diagnostics diag;

  for (int k = 0; k < cfg.k_D; ++k) {
    const auto batch = make_minibatch(noise, rho_d, cfg.m, cfg.noise_dim, derive_seed(seed, "calibrate", k));
    const auto fake = generator_outputs(s.G, batch);
    const auto lg = discriminator_gradient(s.D, batch.x, fake);
    s.opt_D.apply(s.D.parameters(), lg.grad, -1.0);
    diag.grad_norm_D = l2_norm(lg.grad);
    diag.d_objective = lg.value;
  }
  detail::require_finite(s.D.parameters(), "D", s.iteration);

  const auto batch = make_minibatch(noise, rho_d, cfg.m, cfg.noise_dim, derive_seed(seed, "new_points"));
  auto tt = transport_targets(s.G, s.D, batch, cfg.eps);
  if (cfg.matching == Matching::sorted) tt.targets = sorted_matching_targets(tt.outputs, tt.targets);
  const std::size_t d = s.G.output_dim();
  for (std::size_t i = 0; i < batch.m; ++i) {
    double r2 = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      const double r = tt.targets[i * d + k] - tt.outputs[i * d + k];
      r2 += r * r;
    }
    diag.mean_displacement += std::sqrt(r2) / static_cast<double>(batch.m);
  }

  for (int k = 0; k < cfg.g_steps; ++k) {
    const auto lg = generator_mse_gradient(s.G, batch, tt.targets);
    s.opt_G.apply(s.G.parameters(), lg.grad);
    diag.grad_norm_G = l2_norm(lg.grad);
    diag.mse = lg.value;
  }
  detail::require_finite(s.G.parameters(), "G", s.iteration);
  return diag;
}

/// Histogram JSD between the generator's pushforward of n noise draws and rho_d.
inline double generator_histogram_jsd(const Mlp& G, const TargetModel& noise, const TargetModel& rho_d,
                                      std::size_t n, std::uint64_t seed, double lower, double upper,
                                      std::size_t bins) {
  if (G.output_dim() != 1) throw DimensionError("generator histogram needs 1-D outputs");
  const std::size_t nd = G.input_dim();
  const auto z = noise.sample(seed, n * nd);
  const Tape t = G.forward_batch(z, n);
  const auto y = t.output();
  return histogram_jsd(histogram(y, lower, upper, bins), rho_d);
}

// ---------------------------------------------------------------------------
// Training drivers

struct GanTraceRow {
  int iteration;
  double jsd_hist;
  double mean_displacement;
  double grad_norm_D;
  double grad_norm_G;
};

struct GanTrainConfig {
  TargetModel rho_d = TargetModel::gaussian(0.0, 1.0);
  TargetModel noise = TargetModel::gaussian(0.0, 1.0);
  std::vector<std::size_t> g_layers{1, 32, 32, 1};
  std::vector<std::size_t> d_layers{1, 32, 32, 1};
  Activation g_hidden = Activation::tanh;
  Activation d_hidden = Activation::tanh;
  double g_init_gain = 1.0;
  double d_init_gain = 1.0;
  Optimizer::Kind optimizer = Optimizer::Kind::sgd;
  double lr_G = 0.02;
  double lr_D = 0.2;
  Algorithm1Config alg{128, 1, 1.0, 3, 1, Matching::pointwise};
  int iterations = 2000;
  int record_every = 50;
  std::size_t eval_samples = 20000;
  double hist_lower = -8.0;
  double hist_upper = 8.0;
  std::size_t hist_bins = 200;
  std::uint64_t seed = 1;
};

inline GanState initial_gan_state(const GanTrainConfig& c) {
  GanState s{Mlp::random(c.g_layers, c.g_hidden, Activation::identity, derive_seed(c.seed, "init_G"), c.g_init_gain),
             Mlp::random(c.d_layers, c.d_hidden, Activation::sigmoid, derive_seed(c.seed, "init_D"), c.d_init_gain),
             {}, {}, 0};
  s.opt_G.kind = s.opt_D.kind = c.optimizer;
  s.opt_G.lr = c.lr_G;
  s.opt_D.lr = c.lr_D;
  return s;
}

struct GanRun {
  GanState state;
  std::vector<GanTraceRow> trace;
};

/// A training run hit a non-finite parameter; carries the trace recorded up to that point.
class TrainingDivergedError : public DivergenceError {
public:
  TrainingDivergedError(const DivergenceError& cause, std::vector<GanTraceRow> trace)
      : DivergenceError(cause.what(), cause.iteration()), trace_(std::move(trace)) {}
  const std::vector<GanTraceRow>& trace() const noexcept { return trace_; }

private:
  std::vector<GanTraceRow> trace_;
};

inline GanRun gan_train(const GanTrainConfig& c) {
  if (c.iterations < 0 || c.record_every < 1) throw std::invalid_argument("invalid iteration settings");
  if (!(c.lr_G > 0.0) || !(c.lr_D > 0.0)) throw std::invalid_argument("learning rates must be > 0");
  GanRun run{initial_gan_state(c), {}};
  const std::uint64_t eval_seed = derive_seed(c.seed, "evaluate");
  const auto jsd_now = [&] {
    return generator_histogram_jsd(run.state.G, c.noise, c.rho_d, c.eval_samples, eval_seed, c.hist_lower,
                                   c.hist_upper, c.hist_bins);
  };
  run.trace.push_back({0, jsd_now(), 0.0, 0.0, 0.0});
  for (int it = 1; it <= c.iterations; ++it) {
    Algorithm1Diagnostics diag;
    try {
      diag = algorithm1_iteration(run.state, c.rho_d, c.noise, c.alg,
                                  derive_seed(c.seed, "iteration", static_cast<std::uint64_t>(it)));
    } catch (const DivergenceError& e) {
      throw TrainingDivergedError(e, std::move(run.trace));
    }
    if (it % c.record_every == 0 || it == c.iterations)
      run.trace.push_back({it, jsd_now(), diag.mean_displacement, diag.grad_norm_D, diag.grad_norm_G});
  }
  return run;
}

struct DivergenceResult {
  std::vector<GanTraceRow> pointwise;
  std::vector<GanTraceRow> sorted;
};

/// Two arms that differ only in how the transported points are assigned to the generator outputs.
inline DivergenceResult divergence_experiment(GanTrainConfig c) {
  DivergenceResult r;
  c.alg.matching = Matching::pointwise;
  r.pointwise = gan_train(c).trace;
  c.alg.matching = Matching::sorted;
  r.sorted = gan_train(c).trace;
  return r;
}

} // namespace gflow
