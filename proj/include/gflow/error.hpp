#pragma once

#include <cstddef>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gflow {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class GridMismatchError : public Error {
public:
  GridMismatchError() : Error("operands live on different grids") {}
};

namespace detail {

inline std::string format_indices(std::string_view what, const std::vector<std::size_t>& idx) {
  std::ostringstream os;
  os << what << " at " << idx.size() << " location(s):";
  const std::size_t shown = idx.size() < 8 ? idx.size() : 8;
  for (std::size_t i = 0; i < shown; ++i) os << ' ' << idx[i];
  if (shown < idx.size()) os << " ...";
  return os.str();
}

} // namespace detail

/// A strictly positive quantity (typically rho_d) vanished at some nodes.
class PositivityError : public Error {
public:
  explicit PositivityError(std::vector<std::size_t> nodes)
      : Error(detail::format_indices("non-positive reference density", nodes)), nodes_(std::move(nodes)) {}
  const std::vector<std::size_t>& nodes() const noexcept { return nodes_; }

private:
  std::vector<std::size_t> nodes_;
};

/// The ratio field fell below the drift floor, where the descent drift is undefined.
class DriftSingularityError : public Error {
public:
  explicit DriftSingularityError(std::vector<std::size_t> nodes)
      : Error(detail::format_indices("ratio field below drift floor", nodes)), nodes_(std::move(nodes)) {}
  const std::vector<std::size_t>& nodes() const noexcept { return nodes_; }

private:
  std::vector<std::size_t> nodes_;
};

/// The discriminator reached 0 or 1 where a logarithm or 1/(1-D) is needed.
class SaturationError : public Error {
public:
  explicit SaturationError(std::vector<std::size_t> where)
      : Error(detail::format_indices("discriminator saturated", where)), where_(std::move(where)) {}
  const std::vector<std::size_t>& locations() const noexcept { return where_; }

private:
  std::vector<std::size_t> where_;
};

class InvalidTransportError : public Error {
public:
  using Error::Error;
};

class WindowTooNarrowError : public Error {
public:
  WindowTooNarrowError(double captured_mass)
      : Error("truncation window captures only " + std::to_string(captured_mass) + " of the mass"),
        captured_mass_(captured_mass) {}
  double captured_mass() const noexcept { return captured_mass_; }

private:
  double captured_mass_;
};

/// Monotone resolvent iteration ran out of iterations.
class NonConvergenceError : public Error {
public:
  NonConvergenceError(int iterations, double bracket_gap, std::optional<int> step = std::nullopt)
      : Error(message(iterations, bracket_gap, step)), iterations_(iterations), bracket_gap_(bracket_gap),
        step_(step) {}

  int iterations() const noexcept { return iterations_; }
  double bracket_gap() const noexcept { return bracket_gap_; }
  std::optional<int> step() const noexcept { return step_; }

  NonConvergenceError at_step(int step) const { return {iterations_, bracket_gap_, step}; }

private:
  static std::string message(int iterations, double gap, std::optional<int> step) {
    std::ostringstream os;
    os << "resolvent did not converge after " << iterations << " iterations (bracket gap " << gap << ")";
    if (step) os << " at step " << *step;
    return os.str();
  }

  int iterations_;
  double bracket_gap_;
  std::optional<int> step_;
};

/// Sub- and supersolution iterates crossed: the discrete comparison principle failed.
class MonotonicityViolationError : public Error {
public:
  MonotonicityViolationError(int iteration, double inversion, std::optional<int> step = std::nullopt)
      : Error("sub/supersolution bracket inverted by " + std::to_string(inversion) + " at iteration " +
              std::to_string(iteration) + (step ? " of step " + std::to_string(*step) : std::string{})),
        iteration_(iteration), inversion_(inversion), step_(step) {}

  int iteration() const noexcept { return iteration_; }
  double inversion() const noexcept { return inversion_; }
  std::optional<int> step() const noexcept { return step_; }
  MonotonicityViolationError at_step(int step) const { return {iteration_, inversion_, step}; }

private:
  int iteration_;
  double inversion_;
  std::optional<int> step_;
};

class DimensionError : public Error {
public:
  using Error::Error;
};

class BandwidthError : public Error {
public:
  using Error::Error;
};

/// Training produced a non-finite parameter.
class DivergenceError : public Error {
public:
  DivergenceError(std::string what, int iteration) : Error(std::move(what)), iteration_(iteration) {}
  int iteration() const noexcept { return iteration_; }

private:
  int iteration_;
};

} // namespace gflow
