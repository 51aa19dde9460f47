#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "gflow/density.hpp"
#include "gflow/error.hpp"
#include "gflow/fokker_planck.hpp"
#include "gflow/gan.hpp"
#include "gflow/grid.hpp"
#include "gflow/particles.hpp"
#include "gflow/rng.hpp"
#include "gflow/targets.hpp"
#include "gflow/experiments/config.hpp"
#include "gflow/experiments/csv.hpp"
#include "gflow/experiments/manifest.hpp"
#include "gflow/experiments/svg.hpp"

namespace gflow::experiments {

namespace detail {

// Owns the output directory of one run and keeps the manifest's artifact list in sync.
class Outputs {
public:
  Outputs(std::filesystem::path dir, RunManifest& manifest, bool svg)
      : dir_(std::move(dir)), manifest_(manifest), svg_(svg) {
    std::filesystem::create_directories(dir_);
  }

  void text(const std::string& name, const std::string& body) {
    write_atomically(dir_ / name, body);
    manifest_.artifacts.push_back(name);
  }
  void csv(const std::string& name, const CsvTable& table) { text(name, table.str()); }
  void svg(const std::string& name, const std::vector<Series>& series, const PlotSpec& spec) {
    if (svg_) text(name, render_svg(series, spec));
  }

private:
  std::filesystem::path dir_;
  RunManifest& manifest_;
  bool svg_;
};

inline Grid grid_of(const ExperimentConfig& c) { return Grid::uniform(c.grid.lower, c.grid.upper, c.grid.n); }

inline ShiftRule shift_of(const std::string& s) { return s == "uniform" ? ShiftRule::uniform : ShiftRule::adaptive; }

struct PdeSolution {
  Discretization rho0;
  Discretization rho_d;
  double beta;
  EvolveResult result;
};

inline PdeSolution solve_pde(const ExperimentConfig& c, const Grid& grid, double t_final, int n_steps) {
  Discretization d0 = discretize(c.rho0.build(), grid);
  Discretization dd = discretize(c.rho_d.build(), grid);
  const double beta = beta_of(d0.density, dd.density);
  const WeightedOperator op(dd.density);
  EvolveResult res = crandall_liggett_evolve(ratio_of(d0.density, dd.density), op, t_final, n_steps, c.pde.tol,
                                             c.pde.max_iters, shift_of(c.pde.shift));
  return {std::move(d0), std::move(dd), beta, std::move(res)};
}

inline GanTrainConfig gan_config_of(const ExperimentConfig& c) {
  GanTrainConfig g;
  g.rho_d = c.rho_d.build();
  g.noise = TargetModel::gaussian(0.0, 1.0);
  g.g_layers = c.gan.g_layers;
  g.d_layers = c.gan.d_layers;
  g.g_hidden = Mlp::parse_activation(c.gan.g_hidden);
  g.d_hidden = Mlp::parse_activation(c.gan.d_hidden);
  g.optimizer = c.gan.optimizer == "adam" ? Optimizer::Kind::adam : Optimizer::Kind::sgd;
  g.lr_G = c.gan.lr_G;
  g.lr_D = c.gan.lr_D;
  g.alg.m = c.gan.m;
  g.alg.noise_dim = c.gan.g_layers.front();
  g.alg.eps = c.gan.eps;
  g.alg.k_D = c.gan.k_D;
  g.alg.g_steps = c.gan.g_steps;
  g.alg.matching = c.gan.matching == "sorted" ? Matching::sorted : Matching::pointwise;
  g.iterations = c.gan.iterations;
  g.record_every = c.gan.record_every;
  g.eval_samples = c.gan.eval_samples;
  g.hist_lower = c.grid.lower;
  g.hist_upper = c.grid.upper;
  g.hist_bins = c.gan.hist_bins;
  g.seed = static_cast<std::uint64_t>(c.seed);
  return g;
}

inline CsvTable gan_trace_table(const std::vector<GanTraceRow>& rows) {
  CsvTable t({"iteration", "jsd_hist", "mean_displacement", "grad_norm_D", "grad_norm_G"});
  for (const auto& r : rows)
    t.add_row({std::int64_t{r.iteration}, r.jsd_hist, r.mean_displacement, r.grad_norm_D, r.grad_norm_G});
  return t;
}

inline Series gan_series(const std::string& label, const std::vector<GanTraceRow>& rows) {
  Series s{label, {}, {}};
  for (const auto& r : rows) {
    s.x.push_back(r.iteration);
    s.y.push_back(r.jsd_hist);
  }
  return s;
}

// ---------------------------------------------------------------------------

inline void run_pde_flow(const ExperimentConfig& c, RunManifest& m, Outputs& out) {
  const Grid grid = grid_of(c);
  const PdeSolution sol = solve_pde(c, grid, c.pde.t_final, c.pde.n_steps);
  const FlowTrace& tr = sol.result.trace;
  const EvolveStats& st = sol.result.stats;

  CsvTable trace({"step", "time", "jsd", "mass", "sup_v", "inf_v", "energy", "dissipation"});
  for (std::size_t k = 0; k < tr.size(); ++k)
    trace.add_row({static_cast<std::int64_t>(k), tr.times[k], tr.jsd_values[k], tr.masses[k], tr.sup_v[k], tr.inf_v[k],
                   tr.energy_partial_sums[k], tr.dissipation[k]});
  out.csv("trace.csv", trace);

  const GridDensity u = density_of(sol.result.v, sol.rho_d.density);
  CsvTable fin({"x", "u", "rho_d", "v"});
  for (std::size_t i = 0; i < grid.n; ++i)
    fin.add_row({grid.node(i), u[i], sol.rho_d.density[i], sol.result.v[i]});
  out.csv("final_density.csv", fin);

  Series s{"JSD(u(t), rho_d)", tr.times, tr.jsd_values};
  out.svg("jsd.svg", {s}, {"JSD along the flow", "t", "JSD", false, 640, 400});

  const double final_l1 = l1_distance(u, sol.rho_d.density);
  const double beta = sol.beta;
  auto& d = m.derived;
  d["beta"] = beta;
  d["lambda"] = tr.lambda;
  d["rho0_renormalization"] = sol.rho0.renormalization;
  d["rho_d_renormalization"] = sol.rho_d.renormalization;
  d["rho0_window_mass"] = sol.rho0.truncated_mass;
  d["rho_d_window_mass"] = sol.rho_d.truncated_mass;
  d["final_jsd"] = tr.jsd_values.back();
  d["final_l1"] = final_l1;
  d["total_resolvent_iterations"] = st.total_iterations;
  d["max_resolvent_iterations"] = st.max_iterations;
  d["max_residual"] = st.max_residual;
  d["energy"] = tr.energy_partial_sums.back();
  d["energy_bound"] = (1.0 + beta) * beta * beta;

  const DescentAudit da = jsd_descent_audit(tr, c.audit.jsd_slack);
  double worst_rise = 0.0;
  for (std::size_t k = 1; k < tr.size(); ++k) worst_rise = std::max(worst_rise, tr.jsd_values[k] - tr.jsd_values[k - 1]);
  m.audit("jsd_nonincreasing", worst_rise, "<=", c.audit.jsd_slack);
  m.audit("dissipation_inequality", da.dissipation_check, "<=", c.audit.dissipation_tol);
  m.audit("mass_conservation", st.max_mass_defect, "<=", c.audit.mass_tol);
  m.audit("lower_bound", st.min_inf_v, ">=", 0.0);
  m.audit("upper_bound", st.max_sup_v, "<=", beta + c.audit.bound_slack);
  m.audit("energy_bound", tr.energy_partial_sums.back(), "<=", c.audit.energy_factor * (1.0 + beta) * beta * beta);
  m.audit("bracket_sub_nondecreasing", st.max_sub_decrease, "<=", c.pde.tol);
  m.audit("bracket_super_nonincreasing", st.max_super_increase, "<=", c.pde.tol);
  m.audit("bracket_no_inversion", st.max_inversion, "<=", c.pde.tol);
  m.audit("bracket_final_gap", st.max_bracket_gap, "<=", c.pde.tol);
  if (c.rho0 == c.rho_d) {
    double worst = 0.0;
    for (double j : tr.jsd_values) worst = std::max(worst, j);
    m.audit("stationary_jsd", worst, "<=", c.audit.stationary_tol);
  }
  if (c.audit.l1_target > 0.0) m.audit("l1_to_target", final_l1, "<=", c.audit.l1_target);
}

inline void run_particle_flow(const ExperimentConfig& c, RunManifest& m, Outputs& out) {
  const auto& p = c.particle;
  const TargetModel r0 = c.rho0.build();
  const TargetModel rd = c.rho_d.build();
  const ProductModel rho0 = p.dim == 1 ? ProductModel(r0) : ProductModel(r0, r0);
  const ProductModel rho_d = p.dim == 1 ? ProductModel(rd) : ProductModel(rd, rd);
  const auto seed = static_cast<std::uint64_t>(c.seed);

  SimulateOptions opt;
  opt.bandwidth = p.bandwidth_rule == "fixed" ? BandwidthRule::fixed(p.bandwidth) : BandwidthRule::silverman();
  opt.binned = p.binned;
  opt.kde_cells = p.kde_cells;
  opt.hist_lower = c.grid.lower;
  opt.hist_upper = c.grid.upper;
  opt.hist_bins = p.hist_bins;
  opt.record_every = p.record_every;

  SimulationResult sim;
  if (p.discriminator == "kde") {
    sim = simulate(rho0, rho_d, p.m, p.eps, p.n_steps, p.refit_every, seed, opt);
  } else {
    // rho_hat is held at the rho0 model; only meaningful as a stationarity probe with rho0 = rho_d
    sim.ensemble = init_ensemble(rho0, p.m, seed);
    sim.trace.push_back(gflow::detail::particle_row(sim.ensemble, 0, rho_d, opt));
    for (int step = 1; step <= p.n_steps; ++step) {
      sim.ensemble = euler_step(sim.ensemble, [&](const Point& y) { return analytic_discriminator(rho_d, rho0, y); }, p.eps);
      if (step % p.record_every == 0 || step == p.n_steps)
        sim.trace.push_back(gflow::detail::particle_row(sim.ensemble, step, rho_d, opt));
    }
  }

  std::vector<std::string> header{"step", "time", "hist_jsd"};
  if (p.dim == 1) {
    header.insert(header.end(), {"mean", "variance"});
  } else {
    header.insert(header.end(), {"mean_0", "mean_1", "variance_0", "variance_1"});
  }
  CsvTable trace(header);
  for (const auto& r : sim.trace) {
    std::vector<Cell> row{std::int64_t{r.step}, r.time, r.hist_jsd};
    if (p.dim == 1) {
      row.insert(row.end(), {r.mean[0], r.variance[0]});
    } else {
      row.insert(row.end(), {r.mean[0], r.mean[1], r.variance[0], r.variance[1]});
    }
    trace.add_row(std::move(row));
  }
  out.csv("trace.csv", trace);

  CsvTable snap(p.dim == 1 ? std::vector<std::string>{"x"} : std::vector<std::string>{"x", "y"});
  for (std::size_t i = 0; i < sim.ensemble.size(); ++i) {
    if (p.dim == 1) snap.add_row({sim.ensemble.coordinate(i, 0)});
    else snap.add_row({sim.ensemble.coordinate(i, 0), sim.ensemble.coordinate(i, 1)});
  }
  out.csv("ensemble.csv", snap);

  Series s{"histogram JSD", {}, {}};
  for (const auto& r : sim.trace) {
    s.x.push_back(r.time);
    s.y.push_back(r.hist_jsd);
  }
  out.svg("hist_jsd.svg", {s}, {"Particle flow", "t", "histogram JSD", false, 640, 400});

  m.derived["final_time"] = sim.ensemble.time;
  m.derived["final_hist_jsd"] = sim.trace.back().hist_jsd;
  m.derived["initial_bandwidth"] = select_bandwidth(init_ensemble(rho0, p.m, seed), opt.bandwidth)[0];

  bool finite = true;
  for (double x : sim.ensemble.positions) finite = finite && std::isfinite(x);
  m.audit("particle_count", static_cast<double>(sim.ensemble.size()), ">=", static_cast<double>(p.m));
  m.audit("finite_positions", finite ? 0.0 : 1.0, "<=", 0.0);

  if (p.discriminator == "frozen" && c.rho0 == c.rho_d) {
    const ParticleEnsemble start = init_ensemble(rho0, p.m, seed);
    double moved = 0.0;
    for (std::size_t i = 0; i < start.positions.size(); ++i)
      moved = std::max(moved, std::abs(start.positions[i] - sim.ensemble.positions[i]));
    m.derived["max_displacement"] = moved;
    m.audit("stationary_ensemble", moved, "<=", c.audit.stationary_tol);
  }

  if (p.compare_pde && p.dim == 1 && p.n_steps > 0 && p.discriminator == "kde") {
    const Grid grid = grid_of(c);
    const double t = sim.ensemble.time;
    const PdeSolution sol = solve_pde(c, grid, t, p.pde_steps);
    const GridDensity u = density_of(sol.result.v, sol.rho_d.density);
    const Histogram h = marginal_histogram(sim.ensemble, c.grid.lower, c.grid.upper, p.hist_bins);
    const double l1 = histogram_l1(h, u);
    m.derived["pde_final_jsd"] = sol.result.trace.jsd_values.back();
    m.derived["l1_to_pde"] = l1;
    m.audit("l1_to_pde", l1, "<=", c.audit.particle_l1);
  }
}

inline void run_gan_train(const ExperimentConfig& c, RunManifest& m, Outputs& out) {
  const GanTrainConfig g = gan_config_of(c);
  const GanRun run = [&] {
    try {
      return gan_train(g);
    } catch (const TrainingDivergedError& e) {
      out.csv("trace.csv", gan_trace_table(e.trace()));
      throw;
    }
  }();
  out.csv("trace.csv", gan_trace_table(run.trace));
  std::ostringstream gs;
  run.state.G.save(gs);
  out.text("generator.txt", gs.str());
  std::ostringstream ds;
  run.state.D.save(ds);
  out.text("discriminator.txt", ds.str());
  out.svg("jsd.svg", {gan_series("generator", run.trace)}, {"GAN training", "iteration", "histogram JSD", false, 640, 400});

  m.derived["initial_jsd"] = run.trace.front().jsd_hist;
  m.derived["final_jsd"] = run.trace.back().jsd_hist;
  m.derived["generator_parameters"] = run.state.G.parameter_count();
  m.derived["discriminator_parameters"] = run.state.D.parameter_count();
  if (c.audit.gan_jsd > 0.0) m.audit("final_jsd", run.trace.back().jsd_hist, "<=", c.audit.gan_jsd);
}

inline void run_gan_equivalence(const ExperimentConfig& c, RunManifest& m, Outputs& out) {
  const auto& e = c.equivalence;
  const TargetModel noise = TargetModel::gaussian(0.0, 1.0);
  const TargetModel data = c.rho_d.build();
  const auto seed = static_cast<std::uint64_t>(c.seed);
  const Activation gh = Mlp::parse_activation(c.gan.g_hidden);
  const Activation dh = Mlp::parse_activation(c.gan.d_hidden);

  CsvTable table({"trial", "eps", "rel_error", "grad_norm_mse", "grad_norm_vanilla"});
  double worst = 0.0;
  Series s{"relative error", {}, {}};
  for (int t = 0; t < e.trials; ++t) {
    const std::uint64_t ts = derive_seed(seed, "equivalence", static_cast<std::uint64_t>(t));
    const Mlp G = Mlp::random(c.gan.g_layers, gh, Activation::identity, derive_seed(ts, "G"));
    const Mlp D = Mlp::random(c.gan.d_layers, dh, Activation::sigmoid, derive_seed(ts, "D"));
    const Minibatch batch = make_minibatch(noise, data, e.m, c.gan.g_layers.front(), derive_seed(ts, "batch"));
    const double eps = e.eps[static_cast<std::size_t>(t) % e.eps.size()];
    const GradReport r = equivalence_report(G, D, batch, eps);
    table.add_row({std::int64_t{t}, eps, r.rel_error, l2_norm(r.grad_mse_path), l2_norm(r.grad_vanilla)});
    worst = std::max(worst, r.rel_error);
    s.x.push_back(t);
    s.y.push_back(r.rel_error);
  }
  out.csv("equivalence.csv", table);
  out.svg("rel_error.svg", {s}, {"MSE path vs vanilla generator gradient", "trial", "relative error", false, 640, 400});

  // the check must be able to fail: one corrupted target has to show up
  const std::uint64_t ns = derive_seed(seed, "negative_control");
  const Mlp G = Mlp::random(c.gan.g_layers, gh, Activation::identity, derive_seed(ns, "G"));
  const Mlp D = Mlp::random(c.gan.d_layers, dh, Activation::sigmoid, derive_seed(ns, "D"));
  const Minibatch batch = make_minibatch(noise, data, e.m, c.gan.g_layers.front(), derive_seed(ns, "batch"));
  const double eps = e.eps.back() > 0.0 ? e.eps.back() : 1.0;
  auto corrupted = transport_targets(G, D, batch, eps).targets;
  corrupted[0] += 1.0;
  const double control = equivalence_report(G, D, batch, eps, &corrupted).rel_error;

  m.derived["max_rel_error"] = worst;
  m.derived["negative_control_rel_error"] = control;
  m.audit("max_rel_error", worst, "<=", e.tol);
  m.audit("negative_control_detected", control, ">", 1e-3);
}

inline void run_mse_divergence(const ExperimentConfig& c, RunManifest& m, Outputs& out) {
  const DivergenceResult r = divergence_experiment(gan_config_of(c));
  out.csv("pointwise.csv", gan_trace_table(r.pointwise));
  out.csv("sorted.csv", gan_trace_table(r.sorted));
  CsvTable both({"iteration", "jsd_pointwise", "jsd_sorted"});
  for (std::size_t k = 0; k < r.pointwise.size(); ++k)
    both.add_row({std::int64_t{r.pointwise[k].iteration}, r.pointwise[k].jsd_hist, r.sorted[k].jsd_hist});
  out.csv("divergence.csv", both);
  out.svg("divergence.svg", {gan_series("point-wise MSE", r.pointwise), gan_series("sorted matching", r.sorted)},
          {"Point-wise vs set-wise fitting", "iteration", "histogram JSD", false, 640, 400});

  const double pw = r.pointwise.back().jsd_hist;
  const double so = r.sorted.back().jsd_hist;
  m.derived["final_jsd_pointwise"] = pw;
  m.derived["final_jsd_sorted"] = so;
  m.audit("sorted_below_pointwise", so, "<", pw);
}

/// Positive density exp(smooth random field), normalized on the grid.
inline GridDensity random_density(const Grid& grid, Rng& rng) {
  auto v = gflow::detail::random_smooth_field(grid, 1.0, rng);
  const double sharp = 4.0 + 8.0 * rng.uniform();
  for (double& x : v) x = std::exp(sharp * (x - 1.0));
  const double mass = trapezoid(grid, v);
  for (double& x : v) x /= mass;
  return {grid, std::move(v)};
}

inline void run_metrics_audit(const ExperimentConfig& c, RunManifest& m, Outputs& out) {
  const Grid grid = grid_of(c);
  Rng rng(derive_seed(static_cast<std::uint64_t>(c.seed), "metrics"));
  CsvTable pairs({"pair", "jsd", "jsd_swapped", "l1", "tv"});
  double asym = 0.0;
  double below = 0.0;
  double above = 0.0;
  double tv_gap = 0.0;
  double pinsker = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < c.metrics.pairs; ++k) {
    const GridDensity p = random_density(grid, rng);
    const GridDensity q = random_density(grid, rng);
    const double j = jsd(p, q);
    const double js = jsd(q, p);
    const double l1 = l1_distance(p, q);
    const double tv = tv_distance(p, q);
    pairs.add_row({std::int64_t{k}, j, js, l1, tv});
    asym = std::max(asym, std::abs(j - js));
    below = std::max(below, -std::min(j, js));
    above = std::max(above, std::max(j, js) - std::numbers::ln2);
    tv_gap = std::max(tv_gap, std::abs(tv - 0.5 * l1));
    pinsker = std::max(pinsker, 2.0 * j - std::numbers::ln2 * l1);
  }
  out.csv("metrics.csv", pairs);

  const Discretization d0 = discretize(c.rho0.build(), grid);
  const Discretization dd = discretize(c.rho_d.build(), grid);
  std::vector<double> xi(grid.n);
  for (std::size_t i = 0; i < grid.n; ++i) {
    const double x = grid.node(i);
    const double edge = std::sin(std::numbers::pi * (x - grid.lower) / (grid.upper - grid.lower));
    xi[i] = edge * edge * std::sin(x - 1.0);
  }
  CsvTable fv({"eps", "lhs", "rhs", "gap"});
  std::vector<double> gaps;
  Series s{"|difference quotient - first variation|", {}, {}};
  for (double eps : c.metrics.variation_eps) {
    const DirectionalDerivative dv = directional_derivative_check(d0.density, dd.density, xi, eps);
    const double gap = std::abs(dv.lhs - dv.rhs);
    fv.add_row({eps, dv.lhs, dv.rhs, gap});
    gaps.push_back(gap);
    s.x.push_back(eps);
    s.y.push_back(gap);
  }
  out.csv("first_variation.csv", fv);
  out.svg("first_variation.svg", {s}, {"First-variation check", "eps", "gap", true, 640, 400});

  double worst_ratio = 0.0;
  for (std::size_t k = 1; k < gaps.size(); ++k) {
    const double shrink = c.metrics.variation_eps[k] / c.metrics.variation_eps[k - 1];
    // rescale so that a halving of eps is the reference step
    const double ratio = std::pow(gaps[k] / gaps[k - 1], std::log(0.5) / std::log(shrink));
    worst_ratio = std::max(worst_ratio, ratio);
  }
  const double tol = c.audit.metric_tol;
  m.derived["max_jsd_asymmetry"] = asym;
  m.derived["max_tv_minus_half_l1"] = tv_gap;
  m.derived["max_pinsker_excess"] = pinsker;
  m.derived["worst_variation_ratio"] = worst_ratio;
  m.audit("jsd_symmetry", asym, "<=", tol);
  m.audit("jsd_nonnegative", below, "<=", tol);
  m.audit("jsd_at_most_ln2", above, "<=", tol);
  m.audit("tv_half_l1", tv_gap, "<=", tol);
  m.audit("jsd_l1_bound", pinsker, "<=", tol);
  m.audit("first_variation_shrinks", worst_ratio, "<=", c.audit.variation_ratio);
}

inline ErrorRecord error_record(const std::exception& e, int& code) {
  ErrorRecord r{"error", e.what(), nlohmann::ordered_json::object()};
  code = exit_numerical;
  if (const auto* nc = dynamic_cast<const NonConvergenceError*>(&e)) {
    r.kind = "non_convergence";
    r.details["iterations"] = nc->iterations();
    r.details["bracket_gap"] = nc->bracket_gap();
    if (nc->step()) r.details["step"] = *nc->step();
  } else if (const auto* mv = dynamic_cast<const MonotonicityViolationError*>(&e)) {
    r.kind = "monotonicity_violation";
    r.details["iteration"] = mv->iteration();
    r.details["inversion"] = mv->inversion();
    if (mv->step()) r.details["step"] = *mv->step();
  } else if (const auto* dv = dynamic_cast<const DivergenceError*>(&e)) {
    r.kind = "divergence";
    r.details["iteration"] = dv->iteration();
  } else if (const auto* se = dynamic_cast<const SaturationError*>(&e)) {
    r.kind = "saturation";
    r.details["count"] = se->locations().size();
  } else if (dynamic_cast<const DriftSingularityError*>(&e)) {
    r.kind = "drift_singularity";
  } else if (dynamic_cast<const BandwidthError*>(&e)) {
    r.kind = "bandwidth";
  } else if (const auto* w = dynamic_cast<const WindowTooNarrowError*>(&e)) {
    r.kind = "window_too_narrow";
    r.details["captured_mass"] = w->captured_mass();
    code = exit_config;
  } else if (dynamic_cast<const InvalidTransportError*>(&e)) {
    r.kind = "invalid_transport";
    code = exit_config;
  } else if (dynamic_cast<const PositivityError*>(&e)) {
    r.kind = "positivity";
    code = exit_config;
  } else if (dynamic_cast<const std::invalid_argument*>(&e) || dynamic_cast<const std::domain_error*>(&e)) {
    r.kind = "precondition";
    code = exit_config;
  }
  return r;
}

} // namespace detail

/// Runs one experiment, writes its CSV/SVG artifacts and manifest.json into config.output_dir, and
/// returns the manifest. The exit code is 0 only when every audit passed.
inline RunManifest run(const ExperimentConfig& c) {
  const auto start = std::chrono::steady_clock::now();
  RunManifest m;
  m.experiment = experiment_name(c.experiment);
  m.config = c.echo;
  const std::filesystem::path dir(c.output_dir);
  detail::Outputs out(dir, m, c.svg);

  try {
    switch (c.experiment) {
    case Experiment::pde_flow: detail::run_pde_flow(c, m, out); break;
    case Experiment::particle_flow: detail::run_particle_flow(c, m, out); break;
    case Experiment::gan_train: detail::run_gan_train(c, m, out); break;
    case Experiment::gan_equivalence: detail::run_gan_equivalence(c, m, out); break;
    case Experiment::mse_divergence: detail::run_mse_divergence(c, m, out); break;
    case Experiment::metrics_audit: detail::run_metrics_audit(c, m, out); break;
    }
    m.exit_code = m.all_audits_pass() ? exit_pass : exit_audit;
  } catch (const std::exception& e) {
    int code = exit_numerical;
    m.errors.push_back(detail::error_record(e, code));
    m.exit_code = code;
  }

  m.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  save_manifest(dir / "manifest.json", m);
  return m;
}

} // namespace gflow::experiments
