#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gflow/error.hpp"
#include "gflow/experiments/csv.hpp"
#include "gflow/targets.hpp"

namespace gflow::experiments {

enum class Experiment { pde_flow, particle_flow, gan_train, gan_equivalence, mse_divergence, metrics_audit };

inline constexpr Experiment all_experiments[] = {Experiment::pde_flow,        Experiment::particle_flow,
                                                 Experiment::gan_train,       Experiment::gan_equivalence,
                                                 Experiment::mse_divergence,  Experiment::metrics_audit};

inline const char* experiment_name(Experiment e) {
  switch (e) {
  case Experiment::pde_flow: return "pde_flow";
  case Experiment::particle_flow: return "particle_flow";
  case Experiment::gan_train: return "gan_train";
  case Experiment::gan_equivalence: return "gan_equivalence";
  case Experiment::mse_divergence: return "mse_divergence";
  case Experiment::metrics_audit: return "metrics_audit";
  }
  return "?";
}

inline std::optional<Experiment> parse_experiment(std::string_view s) {
  for (Experiment e : all_experiments)
    if (s == experiment_name(e)) return e;
  return std::nullopt;
}

struct ConfigIssue {
  int line = 0;  ///< 0 when the problem is not tied to one line
  std::string key;
  std::string message;

  std::string str() const {
    std::string s = line > 0 ? "line " + std::to_string(line) + ": " : std::string();
    if (!key.empty()) s += key + ": ";
    return s + message;
  }
};

class ConfigError : public Error {
public:
  explicit ConfigError(std::vector<ConfigIssue> issues) : Error(join(issues)), issues_(std::move(issues)) {}
  const std::vector<ConfigIssue>& issues() const noexcept { return issues_; }

private:
  static std::string join(const std::vector<ConfigIssue>& issues) {
    std::string s = std::to_string(issues.size()) + " configuration error(s)";
    for (const auto& i : issues) s += "\n  " + i.str();
    return s;
  }
  std::vector<ConfigIssue> issues_;
};

/// A one-dimensional model written as family + parameters.
struct ModelSpec {
  std::string family = "gaussian";
  double mean = 0.0;
  double sd = 1.0;
  double loc = 0.0;
  double scale = 1.0;
  std::vector<GaussianComponent> components;

  TargetModel build() const {
    if (family == "gaussian") return TargetModel::gaussian(mean, sd);
    if (family == "mixture") return TargetModel::mixture(components);
    if (family == "logistic") return TargetModel::logistic(loc, scale);
    if (family == "cauchy") return TargetModel::cauchy(loc, scale);
    throw std::invalid_argument("unknown model family '" + family + "'");
  }

  bool operator==(const ModelSpec& o) const {
    if (family != o.family) return false;
    if (family == "gaussian") return mean == o.mean && sd == o.sd;
    if (family == "mixture") {
      if (components.size() != o.components.size()) return false;
      for (std::size_t i = 0; i < components.size(); ++i) {
        const auto& a = components[i];
        const auto& b = o.components[i];
        if (a.weight != b.weight || a.mean != b.mean || a.sd != b.sd) return false;
      }
      return true;
    }
    return loc == o.loc && scale == o.scale;
  }
};

struct GridParams {
  double lower = -8.0;
  double upper = 8.0;
  std::size_t n = 401;
};

struct PdeParams {
  double t_final = 6.0;
  int n_steps = 600;
  double tol = 1e-10;
  int max_iters = 500;
  std::string shift = "adaptive";
};

struct ParticleParams {
  std::size_t m = 100000;
  double eps = 0.005;
  int n_steps = 200;
  int refit_every = 1;
  int dim = 1;
  std::string discriminator = "kde";  ///< kde | frozen (rho_hat fixed to the rho0 model)
  std::string bandwidth_rule = "silverman";
  double bandwidth = 0.0;
  bool binned = true;
  std::size_t kde_cells = 4096;
  std::size_t hist_bins = 200;
  int record_every = 1;
  bool compare_pde = true;
  int pde_steps = 200;
};

struct GanParams {
  std::size_t m = 128;
  double eps = 1.0;
  int k_D = 3;
  int g_steps = 1;
  double lr_G = 0.02;
  double lr_D = 0.2;
  std::string optimizer = "sgd";
  int iterations = 2000;
  int record_every = 50;
  std::size_t eval_samples = 20000;
  std::vector<std::size_t> g_layers{1, 32, 32, 1};
  std::vector<std::size_t> d_layers{1, 32, 32, 1};
  std::string g_hidden = "tanh";
  std::string d_hidden = "tanh";
  std::string matching = "pointwise";
  std::size_t hist_bins = 200;
};

struct EquivalenceParams {
  int trials = 50;
  std::size_t m = 64;
  std::vector<double> eps{1e-3, 1e-1, 1.0};
  double tol = 1e-10;
};

struct MetricsParams {
  int pairs = 1000;
  std::vector<double> variation_eps{0.08, 0.04, 0.02, 0.01};
};

struct AuditParams {
  double jsd_slack = 1e-10;
  double dissipation_tol = 1e-6;
  double mass_tol = 1e-9;
  double bound_slack = 1e-12;
  double energy_factor = 1.05;
  double stationary_tol = 1e-10;
  double l1_target = 0.0;     ///< PDE distance-to-target audit, off when 0
  double particle_l1 = 0.1;
  double gan_jsd = 0.05;      ///< off when 0
  double metric_tol = 1e-12;
  double variation_ratio = 0.75;
};

/// Effective value of one key after defaults and overrides.
struct EchoEntry {
  std::string value;
  std::string source;  ///< default | file | cli
};

struct ExperimentConfig {
  Experiment experiment = Experiment::pde_flow;
  std::int64_t seed = 1;
  std::string output_dir = "out";
  bool svg = true;
  ModelSpec rho0{"gaussian", 2.0, 0.7, 0.0, 1.0, {}};
  ModelSpec rho_d{};
  GridParams grid;
  PdeParams pde;
  ParticleParams particle;
  GanParams gan;
  EquivalenceParams equivalence;
  MetricsParams metrics;
  AuditParams audit;
  std::map<std::string, EchoEntry> echo;

  void set_seed(std::int64_t s, const std::string& source = "cli") {
    seed = s;
    echo["seed"] = {std::to_string(s), source};
  }
  void set_output_dir(const std::string& dir, const std::string& source = "cli") {
    output_dir = dir;
    echo["output_dir"] = {dir, source};
  }
  void set_svg(bool on, const std::string& source = "cli") {
    svg = on;
    echo["svg"] = {on ? "true" : "false", source};
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct RawEntry {
  std::string value;
  int line;
};

// Typed access to the raw key/value table; every read records its effective value for the echo
// and every problem lands in the shared issue list.
class Reader {
public:
  Reader(std::map<std::string, RawEntry> raw, std::vector<ConfigIssue>& issues,
         std::map<std::string, EchoEntry>& echo)
      : raw_(std::move(raw)), issues_(issues), echo_(echo) {}

  int line_of(const std::string& key) const {
    const auto it = raw_.find(key);
    return it == raw_.end() ? 0 : it->second.line;
  }
  bool present(const std::string& key) const { return raw_.count(key) != 0; }
  void fail(const std::string& key, const std::string& msg) { issues_.push_back({line_of(key), key, msg}); }

  double real(const std::string& key, double def) {
    return read<double>(key, def, format_real(def), [](std::string_view s) -> std::optional<double> {
      double v = 0.0;
      const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
      if (r.ec != std::errc() || r.ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
      return v;
    }, "a finite real number");
  }

  std::int64_t integer(const std::string& key, std::int64_t def) {
    return read<std::int64_t>(key, def, std::to_string(def), [](std::string_view s) -> std::optional<std::int64_t> {
      std::int64_t v = 0;
      const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
      if (r.ec != std::errc() || r.ptr != s.data() + s.size()) return std::nullopt;
      return v;
    }, "an integer");
  }

  bool boolean(const std::string& key, bool def) {
    return read<bool>(key, def, def ? "true" : "false", [](std::string_view s) -> std::optional<bool> {
      if (s == "true" || s == "yes" || s == "on" || s == "1") return true;
      if (s == "false" || s == "no" || s == "off" || s == "0") return false;
      return std::nullopt;
    }, "a boolean (true/false)");
  }

  std::string text(const std::string& key, const std::string& def) {
    return read<std::string>(key, def, def, [](std::string_view s) -> std::optional<std::string> {
      return std::string(s);
    }, "a string");
  }

  std::string choice(const std::string& key, const std::string& def, std::initializer_list<const char*> allowed) {
    std::string v = text(key, def);
    for (const char* a : allowed)
      if (v == a) return v;
    std::string list;
    for (const char* a : allowed) list += list.empty() ? a : std::string(", ") + a;
    fail(key, "expected one of {" + list + "}, got '" + v + "'");
    return def;
  }

  std::vector<double> reals(const std::string& key, const std::vector<double>& def) {
    return list<double>(key, def, [this](std::string_view s) { return parse_real(s); }, "real numbers");
  }

  std::vector<std::size_t> sizes(const std::string& key, const std::vector<std::size_t>& def) {
    return list<std::size_t>(key, def, [](std::string_view s) -> std::optional<std::size_t> {
      std::size_t v = 0;
      const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
      if (r.ec != std::errc() || r.ptr != s.data() + s.size()) return std::nullopt;
      return v;
    }, "nonnegative integers");
  }

  /// weight:mean:sd triples separated by commas.
  std::vector<GaussianComponent> components(const std::string& key, const std::vector<GaussianComponent>& def) {
    const auto it = raw_.find(key);
    if (it == raw_.end()) {
      echo_[key] = {render_components(def), "default"};
      return def;
    }
    consumed_.insert(key);
    std::vector<GaussianComponent> out;
    for (std::string_view item : split(it->second.value, ',')) {
      std::vector<double> parts;
      for (std::string_view p : split(item, ':')) {
        auto v = parse_real(p);
        if (!v) {
          fail(key, "expected weight:mean:sd triples, got '" + it->second.value + "'");
          return def;
        }
        parts.push_back(*v);
      }
      if (parts.size() != 3) {
        fail(key, "expected weight:mean:sd triples, got '" + it->second.value + "'");
        return def;
      }
      out.push_back({parts[0], parts[1], parts[2]});
    }
    echo_[key] = {render_components(out), "file"};
    return out;
  }

  std::vector<std::string> unconsumed() const {
    std::vector<std::string> keys;
    for (const auto& [k, v] : raw_)
      if (!consumed_.count(k)) keys.push_back(k);
    return keys;
  }

  static std::string render_components(const std::vector<GaussianComponent>& cs) {
    std::string s;
    for (const auto& c : cs) {
      if (!s.empty()) s += ", ";
      s += format_real(c.weight) + ":" + format_real(c.mean) + ":" + format_real(c.sd);
    }
    return s;
  }

private:
  static std::optional<double> parse_real(std::string_view s) {
    s = trim(s);
    double v = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
  }

  static std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
      const auto pos = s.find(sep, start);
      out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
      if (pos == std::string_view::npos) break;
      start = pos + 1;
    }
    return out;
  }

  template <class T, class Parse>
  T read(const std::string& key, const T& def, const std::string& def_text, Parse parse, const char* expected) {
    const auto it = raw_.find(key);
    if (it == raw_.end()) {
      echo_[key] = {def_text, "default"};
      return def;
    }
    consumed_.insert(key);
    if (auto v = parse(std::string_view(it->second.value))) {
      echo_[key] = {it->second.value, "file"};
      return *v;
    }
    fail(key, std::string("expected ") + expected + ", got '" + it->second.value + "'");
    echo_[key] = {def_text, "default"};
    return def;
  }

  template <class T, class Parse>
  std::vector<T> list(const std::string& key, const std::vector<T>& def, Parse parse, const char* expected) {
    const auto render = [](const std::vector<T>& xs) {
      std::string s;
      for (const T& x : xs) {
        if (!s.empty()) s += ", ";
        if constexpr (std::is_same_v<T, double>) s += format_real(x);
        else s += std::to_string(x);
      }
      return s;
    };
    const auto it = raw_.find(key);
    if (it == raw_.end()) {
      echo_[key] = {render(def), "default"};
      return def;
    }
    consumed_.insert(key);
    std::vector<T> out;
    for (std::string_view item : split(it->second.value, ',')) {
      auto v = parse(item);
      if (!v) {
        fail(key, std::string("expected a comma-separated list of ") + expected + ", got '" + it->second.value + "'");
        echo_[key] = {render(def), "default"};
        return def;
      }
      out.push_back(*v);
    }
    echo_[key] = {render(out), "file"};
    return out;
  }

  std::map<std::string, RawEntry> raw_;
  std::vector<ConfigIssue>& issues_;
  std::map<std::string, EchoEntry>& echo_;
  std::set<std::string> consumed_;
};

inline ModelSpec read_model(Reader& r, const std::string& prefix, const ModelSpec& def) {
  ModelSpec m;
  m.family = r.choice(prefix + ".family", def.family, {"gaussian", "mixture", "logistic", "cauchy"});
  if (m.family == "gaussian") {
    m.mean = r.real(prefix + ".mean", def.family == "gaussian" ? def.mean : 0.0);
    m.sd = r.real(prefix + ".sd", def.family == "gaussian" ? def.sd : 1.0);
    if (!(m.sd > 0.0)) r.fail(prefix + ".sd", "must be > 0");
  } else if (m.family == "mixture") {
    m.components = r.components(prefix + ".components", def.components);
    if (m.components.empty()) {
      r.fail(prefix + ".components", "a mixture needs at least one weight:mean:sd component");
    } else {
      double total = 0.0;
      for (const auto& c : m.components) {
        if (!(c.weight > 0.0)) r.fail(prefix + ".components", "component weights must be > 0");
        if (!(c.sd > 0.0)) r.fail(prefix + ".components", "component sd must be > 0");
        total += c.weight;
      }
      if (std::abs(total - 1.0) > 1e-9) r.fail(prefix + ".components", "component weights must sum to 1");
    }
  } else {
    m.loc = r.real(prefix + ".loc", 0.0);
    m.scale = r.real(prefix + ".scale", 1.0);
    if (!(m.scale > 0.0)) r.fail(prefix + ".scale", "must be > 0");
  }
  return m;
}

template <class T>
void require_positive(Reader& r, const std::string& key, T v) {
  if (!(v > T(0))) r.fail(key, "must be > 0");
}

template <class T>
void require_at_least(Reader& r, const std::string& key, T v, T lo) {
  if (v < lo) r.fail(key, "must be >= " + std::to_string(lo));
}

inline int to_int(Reader& r, const std::string& key, std::int64_t v) {
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
    r.fail(key, "out of range");
    return 0;
  }
  return static_cast<int>(v);
}

inline std::size_t to_size(Reader& r, const std::string& key, std::int64_t v) {
  if (v < 0) {
    r.fail(key, "must be >= 0");
    return 0;
  }
  return static_cast<std::size_t>(v);
}

// Window must capture at least 1 - 1e-3 of the model's mass.
inline void check_window(Reader& r, const std::string& prefix, const ModelSpec& spec, const GridParams& g) {
  try {
    const TargetModel model = spec.build();
    const double captured = model.cdf(g.upper) - model.cdf(g.lower);
    if (window_is_too_narrow(model, captured))
      r.fail(prefix + ".family", "grid window [" + format_real(g.lower) + ", " + format_real(g.upper) +
                                     "] captures only " + format_real(captured) + " of the model mass");
  } catch (const std::exception& e) {
    r.fail(prefix + ".family", e.what());
  }
}

} // namespace detail

/// Parses the line-oriented `key = value` format. Sections are dotted key prefixes; `#` starts a
/// comment. Every problem found is reported, each with its line number.
inline ExperimentConfig parse_config(std::string_view text, std::optional<Experiment> forced = std::nullopt) {
  std::vector<ConfigIssue> issues;
  std::map<std::string, detail::RawEntry> raw;

  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      issues.push_back({line_no, "", "expected 'key = value', got '" + std::string(line) + "'"});
      continue;
    }
    const std::string key(detail::trim(line.substr(0, eq)));
    std::string_view value = detail::trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    if (key.empty()) {
      issues.push_back({line_no, "", "missing key before '='"});
      continue;
    }
    if (raw.count(key)) {
      issues.push_back({line_no, key, "duplicate key (first set on line " + std::to_string(raw[key].line) + ")"});
      continue;
    }
    raw[key] = {std::string(value), line_no};
  }

  ExperimentConfig c;
  detail::Reader r(std::move(raw), issues, c.echo);

  const std::string exp_text = r.text("experiment", forced ? experiment_name(*forced) : "");
  if (auto e = parse_experiment(exp_text)) {
    c.experiment = *e;
    if (forced && *e != *forced)
      r.fail("experiment", std::string("file selects '") + exp_text + "' but the command asks for '" +
                               experiment_name(*forced) + "'");
  } else if (exp_text.empty()) {
    r.fail("experiment", "missing; name one of pde_flow, particle_flow, gan_train, gan_equivalence, "
                         "mse_divergence, metrics_audit");
  } else {
    r.fail("experiment", "unknown experiment '" + exp_text + "'");
  }

  c.seed = r.integer("seed", 1);
  c.output_dir = r.text("output_dir", "out");
  if (c.output_dir.empty()) r.fail("output_dir", "must not be empty");
  c.svg = r.boolean("svg", true);

  // Defaults differ by experiment so that a minimal file reproduces the standard benchmark.
  ModelSpec rho0_def = c.rho0;
  ModelSpec rho_d_def = c.rho_d;
  if (c.experiment == Experiment::mse_divergence) rho_d_def = {"mixture", 0.0, 1.0, 0.0, 1.0, {{0.5, -3.0, 0.5}, {0.5, 3.0, 0.5}}};
  c.rho0 = detail::read_model(r, "rho0", rho0_def);
  c.rho_d = detail::read_model(r, "rho_d", rho_d_def);

  c.grid.lower = r.real("grid.lower", c.grid.lower);
  c.grid.upper = r.real("grid.upper", c.grid.upper);
  c.grid.n = detail::to_size(r, "grid.n", r.integer("grid.n", static_cast<std::int64_t>(c.grid.n)));
  if (!(c.grid.upper > c.grid.lower)) r.fail("grid.upper", "must exceed grid.lower");
  if (c.grid.n < 3) r.fail("grid.n", "must be >= 3");

  auto& p = c.pde;
  p.t_final = r.real("pde.t_final", p.t_final);
  p.n_steps = detail::to_int(r, "pde.n_steps", r.integer("pde.n_steps", p.n_steps));
  p.tol = r.real("pde.tol", p.tol);
  p.max_iters = detail::to_int(r, "pde.max_iters", r.integer("pde.max_iters", p.max_iters));
  p.shift = r.choice("pde.shift", p.shift, {"adaptive", "uniform"});
  detail::require_positive(r, "pde.t_final", p.t_final);
  detail::require_at_least(r, "pde.n_steps", p.n_steps, 1);
  detail::require_positive(r, "pde.tol", p.tol);
  detail::require_at_least(r, "pde.max_iters", p.max_iters, 1);

  auto& q = c.particle;
  q.m = detail::to_size(r, "particle.m", r.integer("particle.m", static_cast<std::int64_t>(q.m)));
  q.eps = r.real("particle.eps", q.eps);
  q.n_steps = detail::to_int(r, "particle.n_steps", r.integer("particle.n_steps", q.n_steps));
  q.refit_every = detail::to_int(r, "particle.refit_every", r.integer("particle.refit_every", q.refit_every));
  q.dim = detail::to_int(r, "particle.dim", r.integer("particle.dim", q.dim));
  q.discriminator = r.choice("particle.discriminator", q.discriminator, {"kde", "frozen"});
  q.bandwidth_rule = r.choice("particle.bandwidth_rule", q.bandwidth_rule, {"silverman", "fixed"});
  q.bandwidth = r.real("particle.bandwidth", q.bandwidth);
  q.binned = r.boolean("particle.binned", q.binned);
  q.kde_cells = detail::to_size(r, "particle.kde_cells", r.integer("particle.kde_cells", static_cast<std::int64_t>(q.kde_cells)));
  q.hist_bins = detail::to_size(r, "particle.hist_bins", r.integer("particle.hist_bins", static_cast<std::int64_t>(q.hist_bins)));
  q.record_every = detail::to_int(r, "particle.record_every", r.integer("particle.record_every", q.record_every));
  q.compare_pde = r.boolean("particle.compare_pde", q.compare_pde);
  q.pde_steps = detail::to_int(r, "particle.pde_steps", r.integer("particle.pde_steps", q.pde_steps));
  detail::require_at_least<std::size_t>(r, "particle.m", q.m, 2);
  detail::require_positive(r, "particle.eps", q.eps);
  detail::require_at_least(r, "particle.n_steps", q.n_steps, 0);
  detail::require_at_least(r, "particle.refit_every", q.refit_every, 1);
  if (q.dim != 1 && q.dim != 2) r.fail("particle.dim", "must be 1 or 2");
  if (q.bandwidth_rule == "silverman" && r.present("particle.bandwidth"))
    r.fail("particle.bandwidth", "conflicts with particle.bandwidth_rule = silverman; a fixed bandwidth needs "
                                 "particle.bandwidth_rule = fixed");
  if (q.bandwidth_rule == "fixed" && !(q.bandwidth > 0.0))
    r.fail("particle.bandwidth", "must be > 0 when particle.bandwidth_rule = fixed");
  detail::require_at_least<std::size_t>(r, "particle.kde_cells", q.kde_cells, 16);
  detail::require_at_least<std::size_t>(r, "particle.hist_bins", q.hist_bins, 1);
  detail::require_at_least(r, "particle.record_every", q.record_every, 1);
  detail::require_at_least(r, "particle.pde_steps", q.pde_steps, 1);

  auto& g = c.gan;
  g.m = detail::to_size(r, "gan.m", r.integer("gan.m", static_cast<std::int64_t>(g.m)));
  g.eps = r.real("gan.eps", c.experiment == Experiment::mse_divergence ? 10.0 : g.eps);
  g.k_D = detail::to_int(r, "gan.k_D", r.integer("gan.k_D", g.k_D));
  g.g_steps = detail::to_int(r, "gan.g_steps", r.integer("gan.g_steps", g.g_steps));
  g.lr_G = r.real("gan.lr_G", c.experiment == Experiment::mse_divergence ? 0.05 : g.lr_G);
  g.lr_D = r.real("gan.lr_D", g.lr_D);
  g.optimizer = r.choice("gan.optimizer", g.optimizer, {"sgd", "adam"});
  g.iterations = detail::to_int(r, "gan.iterations", r.integer("gan.iterations", c.experiment == Experiment::mse_divergence ? 1000 : g.iterations));
  g.record_every = detail::to_int(r, "gan.record_every", r.integer("gan.record_every", g.record_every));
  g.eval_samples = detail::to_size(r, "gan.eval_samples", r.integer("gan.eval_samples", static_cast<std::int64_t>(
                                                              c.experiment == Experiment::mse_divergence ? 10000 : g.eval_samples)));
  g.g_layers = r.sizes("gan.g_layers", g.g_layers);
  g.d_layers = r.sizes("gan.d_layers", g.d_layers);
  g.g_hidden = r.choice("gan.g_hidden", g.g_hidden, {"tanh", "relu"});
  g.d_hidden = r.choice("gan.d_hidden", g.d_hidden, {"tanh", "relu"});
  g.matching = r.choice("gan.matching", g.matching, {"pointwise", "sorted"});
  g.hist_bins = detail::to_size(r, "gan.hist_bins", r.integer("gan.hist_bins", static_cast<std::int64_t>(g.hist_bins)));
  detail::require_at_least<std::size_t>(r, "gan.m", g.m, 1);
  if (g.eps < 0.0) r.fail("gan.eps", "must be >= 0");
  detail::require_at_least(r, "gan.k_D", g.k_D, 1);
  detail::require_at_least(r, "gan.g_steps", g.g_steps, 1);
  detail::require_positive(r, "gan.lr_G", g.lr_G);
  detail::require_positive(r, "gan.lr_D", g.lr_D);
  detail::require_at_least(r, "gan.iterations", g.iterations, 0);
  detail::require_at_least(r, "gan.record_every", g.record_every, 1);
  detail::require_at_least<std::size_t>(r, "gan.eval_samples", g.eval_samples, 1);
  detail::require_at_least<std::size_t>(r, "gan.hist_bins", g.hist_bins, 1);
  for (const char* key : {"gan.g_layers", "gan.d_layers"}) {
    const auto& sizes = std::string(key) == "gan.g_layers" ? g.g_layers : g.d_layers;
    if (sizes.size() < 2 || std::find(sizes.begin(), sizes.end(), 0u) != sizes.end())
      r.fail(key, "needs at least two positive layer sizes");
  }
  if (g.d_layers.size() >= 2 && (g.d_layers.front() != 1 || g.d_layers.back() != 1))
    r.fail("gan.d_layers", "the discriminator maps R to (0,1); first and last sizes must be 1");
  if (g.g_layers.size() >= 2 && g.g_layers.back() != 1)
    r.fail("gan.g_layers", "the generator output dimension must be 1");
  if (g.matching == "sorted" && g.g_layers.size() >= 2 && g.g_layers.back() != 1)
    r.fail("gan.matching", "sorted matching is one-dimensional only");

  auto& e = c.equivalence;
  e.trials = detail::to_int(r, "equivalence.trials", r.integer("equivalence.trials", e.trials));
  e.m = detail::to_size(r, "equivalence.m", r.integer("equivalence.m", static_cast<std::int64_t>(e.m)));
  e.eps = r.reals("equivalence.eps", e.eps);
  e.tol = r.real("equivalence.tol", e.tol);
  detail::require_at_least(r, "equivalence.trials", e.trials, 1);
  detail::require_at_least<std::size_t>(r, "equivalence.m", e.m, 1);
  detail::require_positive(r, "equivalence.tol", e.tol);
  if (e.eps.empty()) r.fail("equivalence.eps", "needs at least one value");
  for (double x : e.eps)
    if (x < 0.0) r.fail("equivalence.eps", "values must be >= 0");

  auto& mp = c.metrics;
  mp.pairs = detail::to_int(r, "metrics.pairs", r.integer("metrics.pairs", mp.pairs));
  mp.variation_eps = r.reals("metrics.variation_eps", mp.variation_eps);
  detail::require_at_least(r, "metrics.pairs", mp.pairs, 1);
  if (mp.variation_eps.size() < 2) r.fail("metrics.variation_eps", "needs at least two step sizes");
  for (double x : mp.variation_eps)
    if (!(x > 0.0)) r.fail("metrics.variation_eps", "values must be > 0");

  auto& a = c.audit;
  a.jsd_slack = r.real("audit.jsd_slack", a.jsd_slack);
  a.dissipation_tol = r.real("audit.dissipation_tol", a.dissipation_tol);
  a.mass_tol = r.real("audit.mass_tol", a.mass_tol);
  a.bound_slack = r.real("audit.bound_slack", a.bound_slack);
  a.energy_factor = r.real("audit.energy_factor", a.energy_factor);
  a.stationary_tol = r.real("audit.stationary_tol", a.stationary_tol);
  a.l1_target = r.real("audit.l1_target", a.l1_target);
  a.particle_l1 = r.real("audit.particle_l1", a.particle_l1);
  a.gan_jsd = r.real("audit.gan_jsd", c.rho_d == ModelSpec{} ? a.gan_jsd : 0.0);
  a.metric_tol = r.real("audit.metric_tol", a.metric_tol);
  a.variation_ratio = r.real("audit.variation_ratio", a.variation_ratio);
  const std::pair<const char*, double> tolerances[] = {
      {"audit.jsd_slack", a.jsd_slack},           {"audit.dissipation_tol", a.dissipation_tol},
      {"audit.mass_tol", a.mass_tol},             {"audit.bound_slack", a.bound_slack},
      {"audit.energy_factor", a.energy_factor},   {"audit.stationary_tol", a.stationary_tol},
      {"audit.particle_l1", a.particle_l1},       {"audit.metric_tol", a.metric_tol},
      {"audit.variation_ratio", a.variation_ratio}};
  for (const auto& [key, v] : tolerances)
    if (!(v > 0.0)) r.fail(key, "tolerances must be > 0");
  if (a.l1_target < 0.0) r.fail("audit.l1_target", "must be >= 0 (0 disables the audit)");
  if (a.gan_jsd < 0.0) r.fail("audit.gan_jsd", "must be >= 0 (0 disables the audit)");

  // Window checks only matter where the grid is used to discretize or histogram the models.
  if (c.grid.upper > c.grid.lower && c.grid.n >= 3) {
    if (c.experiment == Experiment::pde_flow || c.experiment == Experiment::particle_flow ||
        c.experiment == Experiment::metrics_audit) {
      detail::check_window(r, "rho0", c.rho0, c.grid);
      detail::check_window(r, "rho_d", c.rho_d, c.grid);
    } else if (c.experiment == Experiment::gan_train || c.experiment == Experiment::mse_divergence) {
      detail::check_window(r, "rho_d", c.rho_d, c.grid);
    }
  }

  for (const auto& key : r.unconsumed()) issues.push_back({r.line_of(key), key, "unknown key"});

  std::stable_sort(issues.begin(), issues.end(), [](const ConfigIssue& x, const ConfigIssue& y) { return x.line < y.line; });
  if (!issues.empty()) throw ConfigError(std::move(issues));
  return c;
}

/// A config with every key at its default, as if read from an empty file for the given experiment.
inline ExperimentConfig default_config(Experiment e) { return parse_config("", e); }

} // namespace gflow::experiments
