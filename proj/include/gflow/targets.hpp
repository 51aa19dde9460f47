#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gflow/density.hpp"
#include "gflow/grid.hpp"
#include "gflow/rng.hpp"

namespace gflow {

struct GaussianComponent {
  double weight = 1.0;
  double mean = 0.0;
  double sd = 1.0;
};

/// Analytic 1-D density family for rho_d and rho_0: strictly positive pdf, finite score,
/// exact sampler.
class TargetModel {
public:
  enum class Family { gaussian, gaussian_mixture, logistic, cauchy };

  static TargetModel gaussian(double mean, double sd) {
    if (!(sd > 0.0) || !std::isfinite(mean)) throw std::invalid_argument("gaussian needs sd > 0");
    TargetModel m(Family::gaussian);
    m.components_ = {{1.0, mean, sd}};
    m.cache_normalizers();
    return m;
  }

  static TargetModel mixture(std::vector<GaussianComponent> components) {
    if (components.empty()) throw std::invalid_argument("mixture needs at least one component");
    double total = 0.0;
    for (const auto& c : components) {
      if (!(c.weight > 0.0)) throw std::invalid_argument("mixture weights must be positive");
      if (!(c.sd > 0.0)) throw std::invalid_argument("mixture components need sd > 0");
      total += c.weight;
    }
    if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("mixture weights must sum to 1");
    TargetModel m(Family::gaussian_mixture);
    m.components_ = std::move(components);
    m.cache_normalizers();
    return m;
  }

  static TargetModel logistic(double location, double scale) {
    if (!(scale > 0.0)) throw std::invalid_argument("logistic needs scale > 0");
    TargetModel m(Family::logistic);
    m.location_ = location;
    m.scale_ = scale;
    return m;
  }

  static TargetModel cauchy(double location, double scale) {
    if (!(scale > 0.0)) throw std::invalid_argument("cauchy needs scale > 0");
    TargetModel m(Family::cauchy);
    m.location_ = location;
    m.scale_ = scale;
    return m;
  }

  Family family() const noexcept { return family_; }
  const std::vector<GaussianComponent>& components() const noexcept { return components_; }
  double location() const noexcept { return family_ == Family::gaussian ? components_[0].mean : location_; }
  double scale() const noexcept { return family_ == Family::gaussian ? components_[0].sd : scale_; }

  double log_pdf(double y) const {
    switch (family_) {
    case Family::gaussian:
    case Family::gaussian_mixture: {
      if (components_.size() == 1) return component_log(0, y);
      // log-sum-exp over components
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < components_.size(); ++k) mx = std::max(mx, component_log(k, y));
      double s = 0.0;
      for (std::size_t k = 0; k < components_.size(); ++k) s += std::exp(component_log(k, y) - mx);
      return mx + std::log(s);
    }
    case Family::logistic: {
      const double z = std::abs((y - location_) / scale_);
      return -z - 2.0 * std::log1p(std::exp(-z)) - std::log(scale_);
    }
    case Family::cauchy: {
      const double z = (y - location_) / scale_;
      return -std::log(std::numbers::pi * scale_) - std::log1p(z * z);
    }
    }
    return 0.0;
  }

  double pdf(double y) const { return std::exp(log_pdf(y)); }

  /// d/dy ln pdf(y).
  double grad_log_pdf(double y) const {
    switch (family_) {
    case Family::gaussian:
    case Family::gaussian_mixture: {
      if (components_.size() == 1) return -(y - components_[0].mean) / (components_[0].sd * components_[0].sd);
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < components_.size(); ++k) mx = std::max(mx, component_log(k, y));
      double num = 0.0;
      double den = 0.0;
      for (std::size_t k = 0; k < components_.size(); ++k) {
        const auto& c = components_[k];
        const double r = std::exp(component_log(k, y) - mx);
        num += r * (-(y - c.mean) / (c.sd * c.sd));
        den += r;
      }
      return num / den;
    }
    case Family::logistic:
      return -std::tanh(0.5 * (y - location_) / scale_) / scale_;
    case Family::cauchy: {
      const double z = (y - location_) / scale_;
      return -2.0 * z / (scale_ * (1.0 + z * z));
    }
    }
    return 0.0;
  }

  double cdf(double y) const {
    switch (family_) {
    case Family::gaussian:
    case Family::gaussian_mixture: {
      double s = 0.0;
      for (const auto& c : components_) s += c.weight * 0.5 * std::erfc(-(y - c.mean) / (c.sd * std::numbers::sqrt2));
      return s;
    }
    case Family::logistic:
      return 1.0 / (1.0 + std::exp(-(y - location_) / scale_));
    case Family::cauchy:
      return 0.5 + std::atan((y - location_) / scale_) / std::numbers::pi;
    }
    return 0.0;
  }

  double draw(Rng& rng) const {
    switch (family_) {
    case Family::gaussian:
      return components_[0].mean + components_[0].sd * rng.normal();
    case Family::gaussian_mixture: {
      const double u = rng.uniform();
      double acc = 0.0;
      const GaussianComponent* pick = &components_.back();
      for (const auto& c : components_) {
        acc += c.weight;
        if (u < acc) {
          pick = &c;
          break;
        }
      }
      return pick->mean + pick->sd * rng.normal();
    }
    case Family::logistic: {
      const double u = rng.uniform_open();
      return location_ + scale_ * std::log(u / (1.0 - u));
    }
    case Family::cauchy: {
      const double u = rng.uniform_open();
      return location_ + scale_ * std::tan(std::numbers::pi * (u - 0.5));
    }
    }
    return 0.0;
  }

  /// m i.i.d. draws; identical seeds give identical arrays.
  std::vector<double> sample(std::uint64_t seed, std::size_t m) const {
    if (m < 1) throw std::invalid_argument("sample size must be >= 1");
    Rng rng(seed);
    std::vector<double> out(m);
    for (double& x : out) x = draw(rng);
    return out;
  }

  std::string describe() const {
    std::ostringstream os;
    switch (family_) {
    case Family::gaussian:
      os << "gaussian(" << components_[0].mean << ", " << components_[0].sd << ")";
      break;
    case Family::gaussian_mixture:
      os << "mixture(";
      for (std::size_t i = 0; i < components_.size(); ++i)
        os << (i ? ", " : "") << components_[i].weight << ":" << components_[i].mean << ":" << components_[i].sd;
      os << ")";
      break;
    case Family::logistic:
      os << "logistic(" << location_ << ", " << scale_ << ")";
      break;
    case Family::cauchy:
      os << "cauchy(" << location_ << ", " << scale_ << ")";
      break;
    }
    return os.str();
  }

private:
  explicit TargetModel(Family f) : family_(f) {}

  // log(weight / (sd sqrt(2 pi))) per component, so that evaluation needs no logarithms
  void cache_normalizers() {
    log_norms_.clear();
    for (const auto& c : components_)
      log_norms_.push_back(std::log(c.weight) - std::log(c.sd) - 0.5 * std::log(2.0 * std::numbers::pi));
  }

  double component_log(std::size_t k, double y) const {
    const auto& c = components_[k];
    const double z = (y - c.mean) / c.sd;
    return log_norms_[k] - 0.5 * z * z;
  }

  Family family_;
  std::vector<GaussianComponent> components_;
  std::vector<double> log_norms_;
  double location_ = 0.0;
  double scale_ = 1.0;
};

inline const char* family_name(TargetModel::Family f) {
  switch (f) {
  case TargetModel::Family::gaussian: return "gaussian";
  case TargetModel::Family::gaussian_mixture: return "mixture";
  case TargetModel::Family::logistic: return "logistic";
  case TargetModel::Family::cauchy: return "cauchy";
  }
  return "?";
}

struct Discretization {
  GridDensity density;
  double renormalization;  ///< values[i] = pdf(x_i) * renormalization
  double truncated_mass;   ///< analytic mass of the window, cdf(upper) - cdf(lower)
};

/// Whether a window that misses part of the model's mass is acceptable. Cauchy tails are too heavy
/// for any desk-sized window, so that family is renormalized on the window instead.
inline bool window_is_too_narrow(const TargetModel& model, double captured) {
  return model.family() != TargetModel::Family::cauchy && captured < 1.0 - 1e-3;
}

/// Samples the pdf at the grid nodes and renormalizes to unit trapezoidal mass.
/// Throws WindowTooNarrowError when a light-tailed model loses more than 1e-3 of its mass.
inline Discretization discretize(const TargetModel& model, const Grid& grid) {
  const double captured = model.cdf(grid.upper) - model.cdf(grid.lower);
  if (window_is_too_narrow(model, captured)) throw WindowTooNarrowError(captured);
  std::vector<double> v(grid.n);
  for (std::size_t i = 0; i < grid.n; ++i) v[i] = model.pdf(grid.node(i));
  const double factor = 1.0 / trapezoid(grid, v);
  for (double& x : v) x *= factor;
  return {GridDensity(grid, std::move(v)), factor, captured};
}

/// Trapezoidal estimate of the Fisher information integral of (rho')^2 / rho on the window.
inline double fisher_information(const TargetModel& model, const Grid& grid) {
  std::vector<double> f(grid.n);
  for (std::size_t i = 0; i < grid.n; ++i) {
    const double y = grid.node(i);
    const double s = model.grad_log_pdf(y);
    f[i] = s * s * model.pdf(y);
  }
  return trapezoid(grid, f);
}

} // namespace gflow
