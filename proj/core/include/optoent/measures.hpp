#pragma once

// Entanglement, purity and occupation observables of Gaussian states.
//
// Everything works on the scaled representation V = W * 2^s used by the
// integrator; determinants are formed from the mantissas W at the working
// precision of W, and only logarithms or final values are brought back to
// long double.

#include "optoent/core.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

namespace optoent::measures {

struct Negativity {
  double e_n = 0.0;               // max(0, -ln(2 eta_minus))
  long double eta_minus = 0.5L;   // smallest symplectic eigenvalue of PT(V)
  double log_eta_minus = 0.0;     // ln(eta_minus), finite even if eta_minus underflows
};

struct MeasureSample {
  double t = 0.0;
  double e_n = 0.0;
  long double eta_minus = 0.5L;
  long double purity = 1.0L;
  double log_purity = 0.0;
  long double n_p = 0.0L;
  long double n_m = 0.0L;
  std::vector<long double> symplectic;  // of V, ascending
};

struct TrajectoryStats {
  double stabilized_peak = 0.0;
  double stabilized_mean = 0.0;
  std::vector<std::pair<double, double>> esd_intervals;
  double window_fraction = 0.2;
  std::size_t peak_count = 0;
};

namespace detail {

template <WorkingReal Real>
Real det2(const std::vector<Real>& w, std::size_t n, std::size_t r, std::size_t c) {
  return w[r * n + c] * w[(r + 1) * n + c + 1] - w[r * n + c + 1] * w[(r + 1) * n + c];
}

// Row-major 4x4 sub-block of modes (m1, m2).
template <WorkingReal Real>
std::vector<Real> two_mode_block(const std::vector<Real>& w, std::size_t n, std::size_t m1, std::size_t m2) {
  const std::size_t idx[4] = {2 * m1, 2 * m1 + 1, 2 * m2, 2 * m2 + 1};
  std::vector<Real> out;
  out.reserve(16);
  for (auto i : idx) {
    for (auto j : idx) out.push_back(w[i * n + j]);
  }
  return out;
}

inline long double ldexp_ld(long double x, long e) {
  if (e > 20000) return x == 0.0L ? 0.0L : std::copysign(HUGE_VALL, x);
  if (e < -20000) return 0.0L;
  return std::ldexp(x, static_cast<int>(e));
}

template <WorkingReal Real>
long double physical(const Real& mantissa, long exponent) {
  long e = 0;
  double m = 0.0;
  if constexpr (std::same_as<Real, double>) {
    int ie = 0;
    m = std::frexp(mantissa, &ie);
    e = ie;
  } else {
    m = mantissa.split(e);
  }
  return ldexp_ld(static_cast<long double>(m), e + exponent);
}

// Symplectic eigenvalues of a 4x4 mantissa block given Delta = detA + detB
// +/- 2 detC and det V, returned as (nu_minus^2, nu_plus^2) mantissas at
// scale 2^(2s). The small root uses the product form to avoid cancellation.
template <WorkingReal Real>
std::pair<Real, Real> two_mode_squares(const Real& delta, const Real& det_v, double tol) {
  using std::sqrt;
  Real disc = delta * delta - 4.0 * det_v;
  if (disc < 0.0) {
    const Real scale = delta * delta;
    if (-disc > scale * tol) throw NonPhysicalCM("Sigma^2 < 4 det V: covariance matrix is not physical");
    disc = 0.0;
  }
  if (!(det_v > 0.0) || !(delta > 0.0)) throw NonPhysicalCM("covariance matrix is not positive definite");
  const Real root = sqrt(disc);
  const Real big = delta + root;
  Real small = 2.0 * det_v / big;
  Real large = big / 2.0;
  return {small, large};
}

}  // namespace detail

/// Logarithmic negativity of a two-mode CM (or of modes (m1, m2) of a larger
/// one) via eta_-^2 = 2 det V / (Sigma + sqrt(Sigma^2 - 4 det V)),
/// Sigma = det A + det B - 2 det C.
template <WorkingReal Real>
Negativity log_negativity(const CovarianceMatrix<Real>& v, std::size_t m1 = 0, std::size_t m2 = 1,
                          double tol = 1e-9) {
  const std::size_t n = v.dim();
  std::vector<Real> w = n == 4 ? v.entries() : detail::two_mode_block(v.entries(), n, m1, m2);
  const Real det_a = detail::det2(w, 4, 0, 0);
  const Real det_b = detail::det2(w, 4, 2, 2);
  const Real det_c = detail::det2(w, 4, 0, 2);
  const Real det_v = determinant<Real>(std::span<const Real>(w), 4);
  const Real sigma = det_a + det_b - 2.0 * det_c;
  const auto [small, large] = detail::two_mode_squares(sigma, det_v, tol);
  (void)large;
  Negativity out;
  const double ln2 = std::log(2.0);
  // eta^2 mantissa carries scale 2^(2s).
  const double log_eta_sq = log_scaled(small, 2 * v.scale_exponent());
  out.log_eta_minus = 0.5 * log_eta_sq;
  out.eta_minus = std::exp(static_cast<long double>(out.log_eta_minus));
  out.e_n = std::max(0.0, -(ln2 + out.log_eta_minus));
  return out;
}

/// Symplectic eigenvalues through the Williamson route (Cholesky of V, then
/// Jacobi on K^T K with K = L^T Omega L) for any number of modes.
template <WorkingReal Real>
std::vector<long double> symplectic_eigs_williamson(const CovarianceMatrix<Real>& v, bool partial_transpose = false,
                                                    std::size_t pt_mode = 1) {
  const std::size_t n = v.dim();
  const long s = v.scale_exponent();
  std::vector<Real> w = v.entries();
  std::optional<PrecisionScope> scope;
  if constexpr (std::same_as<Real, BigFloat>) {
    long bits = working_precision();
    for (const auto& x : w) bits = std::max(bits, x.precision());
    scope.emplace(2 * bits + 64);
    for (auto& x : w) x.set_precision(2 * bits + 64);
  }
  if (partial_transpose) {
    const std::size_t k = 2 * pt_mode + 1;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == k) continue;
      w[k * n + j] = -w[k * n + j];
      w[j * n + k] = -w[j * n + k];
    }
  }
  std::vector<Real> l;
  try {
    l = cholesky<Real>(std::span<const Real>(w), n);
  } catch (const std::domain_error&) {
    throw NonPhysicalCM("covariance matrix is not positive definite");
  }
  // K = L^T Omega L, Omega = blockdiag([[0, 1], [-1, 0]]).
  std::vector<Real> ol(n * n, Real(0.0));
  for (std::size_t i = 0; i < n; i += 2) {
    for (std::size_t j = 0; j < n; ++j) {
      ol[i * n + j] = l[(i + 1) * n + j];
      ol[(i + 1) * n + j] = -l[i * n + j];
    }
  }
  std::vector<Real> k(n * n, Real(0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      Real acc = 0.0;
      for (std::size_t r = 0; r < n; ++r) acc += l[r * n + i] * ol[r * n + j];
      k[i * n + j] = acc;
    }
  }
  // -K^2 = K^T K is symmetric positive semidefinite with eigenvalues nu^2, each twice.
  std::vector<Real> ktk(n * n, Real(0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      Real acc = 0.0;
      for (std::size_t r = 0; r < n; ++r) acc += k[r * n + i] * k[r * n + j];
      ktk[i * n + j] = acc;
      ktk[j * n + i] = acc;
    }
  }
  auto ev = symmetric_eigenvalues<Real>(std::span<const Real>(ktk), n);
  std::vector<long double> nu;
  nu.reserve(n);
  for (const auto& x : ev) {
    if (!(x > 0.0)) {
      nu.push_back(0.0L);
      continue;
    }
    nu.push_back(std::exp(0.5L * static_cast<long double>(log_scaled(x, 2 * s))));
  }
  std::sort(nu.begin(), nu.end());
  std::vector<long double> out;
  for (std::size_t i = 0; i < n; i += 2) out.push_back(0.5L * (nu[i] + nu[i + 1]));
  return out;
}

/// Sorted symplectic eigenvalues of V, or of its partial transpose (momentum
/// of the last mode flipped for two modes, of mode index `pt_mode` otherwise).
/// Two-mode matrices use the closed form; larger ones Cholesky + Jacobi at
/// twice the working precision.
template <WorkingReal Real>
std::vector<long double> symplectic_eigs(const CovarianceMatrix<Real>& v, bool partial_transpose = false,
                                         std::size_t pt_mode = 1) {
  using std::sqrt;
  const std::size_t n = v.dim();
  const long s = v.scale_exponent();
  if (n == 4) {
    const auto& w = v.entries();
    const Real det_a = detail::det2(w, 4, 0, 0);
    const Real det_b = detail::det2(w, 4, 2, 2);
    const Real det_c = detail::det2(w, 4, 0, 2);
    const Real det_v = determinant<Real>(std::span<const Real>(w), 4);
    const Real delta = partial_transpose ? det_a + det_b - 2.0 * det_c : det_a + det_b + 2.0 * det_c;
    const auto [small, large] = detail::two_mode_squares(delta, det_v, 1e-9);
    const long double lo = std::exp(0.5L * static_cast<long double>(log_scaled(small, 2 * s)));
    const long double hi = std::exp(0.5L * static_cast<long double>(log_scaled(large, 2 * s)));
    return {lo, hi};
  }
  return symplectic_eigs_williamson(v, partial_transpose, pt_mode);
}

/// ln of det V, evaluated on the mantissas at working precision.
template <WorkingReal Real>
double log_det(const CovarianceMatrix<Real>& v) {
  const Real d = determinant<Real>(std::span<const Real>(v.entries()), v.dim());
  if (!(d > 0.0)) throw NonPhysicalCM("det V is not positive");
  return log_scaled(d, static_cast<long>(v.dim()) * v.scale_exponent());
}

/// ln(purity) = -N ln 2 - ln(det V)/2 for N modes.
template <WorkingReal Real>
double log_purity(const CovarianceMatrix<Real>& v) {
  return -static_cast<double>(v.modes()) * std::log(2.0) - 0.5 * log_det(v);
}

/// Purity 1/(2^N sqrt(det V)); 1/(4 sqrt(det V)) for two modes.
template <WorkingReal Real>
long double purity(const CovarianceMatrix<Real>& v) {
  return std::exp(static_cast<long double>(log_purity(v)));
}

/// (V_xx + V_pp - 1)/2 of the given mode; n_m for the mechanical mode.
template <WorkingReal Real>
long double mode_fluctuation(const CovarianceMatrix<Real>& v, std::size_t mode) {
  const Real sum = v.entry(2 * mode, 2 * mode) + v.entry(2 * mode + 1, 2 * mode + 1);
  return (detail::physical(sum, v.scale_exponent()) - 1.0L) / 2.0L;
}

template <WorkingReal Real>
long double phonon_fluctuation(const CovarianceMatrix<Real>& v) {
  return mode_fluctuation(v, kMechanicalMode);
}

/// n_p = |<a> + D(t)|^2 + (V_xx + V_pp - 1)/2 for the cavity mode `mode`.
template <WorkingReal Real>
long double photon_number(const MeanVector& mean, const CovarianceMatrix<Real>& v, std::complex<double> d_t,
                          std::size_t mode = 0) {
  const std::complex<long double> a = mean.amplitude(mode);
  const std::complex<long double> total = a + std::complex<long double>(d_t.real(), d_t.imag());
  return std::norm(total) + mode_fluctuation(v, mode);
}

/// All per-sample observables. Negativity is taken between cavity mode 0
/// and the mechanical mode.
template <WorkingReal Real>
MeasureSample evaluate(double t, const MeanVector& mean, const CovarianceMatrix<Real>& v) {
  MeasureSample m;
  m.t = t;
  const auto neg = log_negativity(v, 0, kMechanicalMode);
  m.e_n = neg.e_n;
  m.eta_minus = neg.eta_minus;
  m.log_purity = log_purity(v);
  m.purity = std::exp(static_cast<long double>(m.log_purity));
  m.n_m = phonon_fluctuation(v);
  const std::complex<double> d = mean.displacements.empty() ? std::complex<double>{} : mean.displacements[0];
  m.n_p = photon_number(mean, v, d, 0);
  m.symplectic = symplectic_eigs(v);
  return m;
}

/// Late-window statistics of a sampled E_N(t). `period` is the oscillation
/// period used for the window-length check (0 disables it).
TrajectoryStats trajectory_stats(const std::vector<double>& t, const std::vector<double>& e_n, double period,
                                 double window_fraction = 0.2);

}  // namespace optoent::measures
