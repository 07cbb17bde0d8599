#pragma once

// Precision-generic scalar helpers and the small dense kernels used on
// covariance matrices. `Real` is either double or BigFloat.

#include "optoent/bigfloat.hpp"

#include <cmath>
#include <concepts>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace optoent {

template <typename T>
concept WorkingReal = std::same_as<T, double> || std::same_as<T, BigFloat>;

inline double to_double(double x) { return x; }
inline double to_double(const BigFloat& x) { return x.to_double(); }
inline long double to_long_double(double x) { return x; }
inline long double to_long_double(const BigFloat& x) { return x.to_long_double(); }

/// Binary exponent e with |x| in [2^(e-1), 2^e); 0 for zero.
inline long binary_exponent(double x) {
  if (x == 0.0 || !std::isfinite(x)) return 0;
  int e = 0;
  std::frexp(x, &e);
  return e;
}

inline long binary_exponent(const BigFloat& x) {
  long e = 0;
  x.split(e);
  return e;
}

inline double scale_by_power_of_two(double x, long e) { return std::ldexp(x, static_cast<int>(e)); }
inline BigFloat scale_by_power_of_two(const BigFloat& x, long e) { return ldexp(x, e); }

inline void add_scaled(double& acc, double x, double c, double& /*scratch*/) { acc += x * c; }
inline void add_scaled(BigFloat& acc, const BigFloat& x, double c, BigFloat& scratch) {
  fused_add_scaled(acc, x, c, scratch);
}

inline bool abs_greater(double a, double b) { return std::fabs(a) > std::fabs(b); }
inline bool abs_greater(const BigFloat& a, const BigFloat& b) { return mpfr_cmpabs(a.get(), b.get()) > 0; }

inline bool is_finite(double x) { return std::isfinite(x); }
inline bool is_finite(const BigFloat& x) { return isfinite(x); }

inline void set_bits(double& /*x*/, long /*bits*/) {}
inline void set_bits(BigFloat& x, long bits) { x.set_precision(bits); }

/// Natural log of a positive value given as x * 2^e, evaluated at the
/// precision of x and returned in double.
template <WorkingReal Real>
double log_scaled(const Real& x, long e) {
  using std::log;
  return to_double(log(x)) + static_cast<double>(e) * std::log(2.0);
}

/// Determinant of a row-major n x n matrix by LU with full pivoting.
template <WorkingReal Real>
Real determinant(std::span<const Real> a, std::size_t n) {
  std::vector<Real> m(a.begin(), a.end());
  Real det = 1.0;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t pr = k;
    std::size_t pc = k;
    for (std::size_t i = k; i < n; ++i) {
      for (std::size_t j = k; j < n; ++j) {
        if (abs_greater(m[i * n + j], m[pr * n + pc])) {
          pr = i;
          pc = j;
        }
      }
    }
    if (m[pr * n + pc] == 0.0) return Real(0.0);
    if (pr != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(m[k * n + j], m[pr * n + j]);
      det = -det;
    }
    if (pc != k) {
      for (std::size_t i = 0; i < n; ++i) std::swap(m[i * n + k], m[i * n + pc]);
      det = -det;
    }
    const Real pivot = m[k * n + k];
    det *= pivot;
    for (std::size_t i = k + 1; i < n; ++i) {
      const Real factor = m[i * n + k] / pivot;
      for (std::size_t j = k + 1; j < n; ++j) {
        m[i * n + j] -= factor * m[k * n + j];
      }
    }
  }
  return det;
}

/// Lower Cholesky factor of a symmetric positive-definite row-major matrix.
/// Throws std::domain_error if the matrix is not positive definite.
template <WorkingReal Real>
std::vector<Real> cholesky(std::span<const Real> a, std::size_t n) {
  using std::sqrt;
  std::vector<Real> l(n * n, Real(0.0));
  for (std::size_t j = 0; j < n; ++j) {
    Real d = a[j * n + j];
    for (std::size_t k = 0; k < j; ++k) d -= l[j * n + k] * l[j * n + k];
    if (!(d > 0.0)) throw std::domain_error("matrix is not positive definite");
    l[j * n + j] = sqrt(d);
    for (std::size_t i = j + 1; i < n; ++i) {
      Real s = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= l[i * n + k] * l[j * n + k];
      l[i * n + j] = s / l[j * n + j];
    }
  }
  return l;
}

/// Eigenvalues of a real symmetric matrix by cyclic Jacobi rotations,
/// unsorted. Jacobi keeps high relative accuracy for graded matrices.
template <WorkingReal Real>
std::vector<Real> symmetric_eigenvalues(std::span<const Real> a, std::size_t n) {
  using std::abs;
  using std::sqrt;
  std::vector<Real> m(a.begin(), a.end());
  for (int sweep = 0; sweep < 100; ++sweep) {
    Real off = 0.0;
    Real diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      diag += m[i * n + i] * m[i * n + i];
      for (std::size_t j = i + 1; j < n; ++j) off += m[i * n + j] * m[i * n + j];
    }
    if (off == 0.0) break;
    // Stop once the off-diagonal mass is below the working precision.
    const double rel = to_double(off / diag);
    const double eps = std::same_as<Real, double> ? 1e-34 : std::ldexp(1.0, -2 * static_cast<int>(working_precision()) + 4);
    if (rel < eps && sweep > 0) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const Real apq = m[p * n + q];
        if (apq == 0.0) continue;
        const Real theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
        Real t = 1.0 / (abs(theta) + sqrt(theta * theta + 1.0));
        if (theta < 0.0) t = -t;
        const Real c = 1.0 / sqrt(t * t + 1.0);
        const Real s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const Real akp = m[k * n + p];
          const Real akq = m[k * n + q];
          m[k * n + p] = c * akp - s * akq;
          m[k * n + q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const Real apk = m[p * n + k];
          const Real aqk = m[q * n + k];
          m[p * n + k] = c * apk - s * aqk;
          m[q * n + k] = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<Real> ev;
  ev.reserve(n);
  for (std::size_t i = 0; i < n; ++i) ev.push_back(m[i * n + i]);
  return ev;
}

}  // namespace optoent
