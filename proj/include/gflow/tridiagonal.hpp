#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace gflow {

/// Tridiagonal matrix in three-band storage. lower[0] and upper[n-1] are unused.
struct TridiagonalMatrix {
  std::vector<double> lower;
  std::vector<double> diag;
  std::vector<double> upper;

  explicit TridiagonalMatrix(std::size_t n = 0) : lower(n, 0.0), diag(n, 0.0), upper(n, 0.0) {}
  std::size_t size() const noexcept { return diag.size(); }

  std::vector<double> multiply(std::span<const double> x) const {
    const std::size_t n = size();
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      double s = diag[i] * x[i];
      if (i > 0) s += lower[i] * x[i - 1];
      if (i + 1 < n) s += upper[i] * x[i + 1];
      y[i] = s;
    }
    return y;
  }
};

/// Thomas-algorithm factorization, reusable across right-hand sides.
/// No pivoting: the matrix must be diagonally dominant (M-matrices in this library are).
class ThomasSolver {
public:
  ThomasSolver() = default;

  explicit ThomasSolver(const TridiagonalMatrix& a) : lower_(a.lower), c_star_(a.size()), inv_m_(a.size()) {
    const std::size_t n = a.size();
    if (n == 0) throw std::invalid_argument("empty tridiagonal system");
    double m = a.diag[0];
    if (m == 0.0) throw std::domain_error("zero pivot in tridiagonal solve");
    inv_m_[0] = 1.0 / m;
    c_star_[0] = a.upper[0] * inv_m_[0];
    for (std::size_t i = 1; i < n; ++i) {
      m = a.diag[i] - a.lower[i] * c_star_[i - 1];
      if (m == 0.0) throw std::domain_error("zero pivot in tridiagonal solve");
      inv_m_[i] = 1.0 / m;
      c_star_[i] = i + 1 < n ? a.upper[i] * inv_m_[i] : 0.0;
    }
  }

  std::size_t size() const noexcept { return inv_m_.size(); }

  /// Solves in place: rhs becomes the solution.
  void solve(std::span<double> rhs) const {
    const std::size_t n = size();
    if (rhs.size() != n) throw std::invalid_argument("tridiagonal rhs has wrong length");
    rhs[0] *= inv_m_[0];
    for (std::size_t i = 1; i < n; ++i) rhs[i] = (rhs[i] - lower_[i] * rhs[i - 1]) * inv_m_[i];
    for (std::size_t i = n - 1; i-- > 0;) rhs[i] -= c_star_[i] * rhs[i + 1];
  }

private:
  std::vector<double> lower_;
  std::vector<double> c_star_;
  std::vector<double> inv_m_;
};

inline std::vector<double> solve_tridiagonal(const TridiagonalMatrix& a, std::span<const double> rhs) {
  std::vector<double> x(rhs.begin(), rhs.end());
  ThomasSolver(a).solve(x);
  return x;
}

} // namespace gflow
