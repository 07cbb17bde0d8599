#pragma once

// Domain types shared by every module. All rates are in units of the cavity
// damping rate kappa (kappa == 1) and times are reported as kappa * t.

#include "optoent/errors.hpp"
#include "optoent/numeric.hpp"

#include <complex>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace optoent {

struct SystemParams {
  double g_m = 1e-4;      // single-photon optomechanical coupling
  double omega_m = 10.0;  // mechanical frequency
  double kappa = 1.0;     // cavity damping, the unit
  double gamma_m = 1e-5;  // mechanical damping
  double n_th = 0.0;      // mechanical reservoir occupation
  double n_c = 0.0;       // cavity reservoir occupation

  /// Q = omega_m / gamma_m; derived, never stored.
  double quality_factor() const { return omega_m / gamma_m; }

  /// Throws ConfigError when an invariant is violated.
  void validate() const;
};

/// Build params from a quality factor instead of gamma_m.
SystemParams params_with_quality(double g_m, double omega_m, double quality, double n_th, double n_c = 0.0);

struct DriveSpec {
  double amplitude = 0.0;  // E, units of kappa
  double detuning = 0.0;   // Delta = omega_c - omega_l

  /// Effective squeezing coupling J = g_m E / omega_m.
  double coupling(const SystemParams& p) const { return p.g_m * amplitude / p.omega_m; }

  static DriveSpec blue_sideband(double amplitude, const SystemParams& p) { return {amplitude, -p.omega_m}; }
  static DriveSpec red_sideband(double amplitude, const SystemParams& p) { return {amplitude, p.omega_m}; }
};

struct NoiseToggle {
  bool cavity_noise_on = true;
  bool mechanical_noise_on = true;
};

enum class PrecisionMode { FixedDouble, FixedExtended, Adaptive };

struct PrecisionPolicy {
  PrecisionMode mode = PrecisionMode::Adaptive;
  long bits = 256;         // FixedExtended working precision
  long base_bits = 64;     // Adaptive: floor
  double growth = 1.0;     // Adaptive: bits per bit of dynamic range
  long max_bits = 1 << 16; // Adaptive: cap, beyond which PrecisionExhausted

  static PrecisionPolicy fixed_double() { return {PrecisionMode::FixedDouble, 53, 53, 0.0, 53}; }
  static PrecisionPolicy extended(long bits) { return {PrecisionMode::FixedExtended, bits, bits, 0.0, bits}; }
  static PrecisionPolicy adaptive(long base = 64, double growth = 1.0) {
    return {PrecisionMode::Adaptive, base, base, growth, 1 << 16};
  }

  /// Parse "double", "ext:<bits>" or "adaptive".
  static PrecisionPolicy parse(const std::string& text);
  std::string to_string() const;

  /// Bits the policy wants for a state with the given dynamic range
  /// log2(max |V| / smallest symplectic scale).
  long required_bits(double dynamic_range_bits) const;
};

/// Real symmetric 2N x 2N quadrature covariance matrix, ordered
/// (x1, p1, x2, p2, ...), stored as entries * 2^scale_exponent.
/// Vacuum has diagonal 1/2.
template <WorkingReal Real>
class CovarianceMatrix {
 public:
  CovarianceMatrix() = default;
  explicit CovarianceMatrix(std::size_t dim) : dim_(dim), entries_(dim * dim, Real(0.0)) {}
  CovarianceMatrix(std::size_t dim, std::vector<Real> entries, long scale_exponent = 0)
      : dim_(dim), entries_(std::move(entries)), scale_exponent_(scale_exponent) {
    if (entries_.size() != dim_ * dim_) throw std::invalid_argument("covariance entries do not match dim");
    symmetrize();
  }

  std::size_t dim() const { return dim_; }
  std::size_t modes() const { return dim_ / 2; }
  long scale_exponent() const { return scale_exponent_; }

  /// Scaled entry (row-major, 0-based). The physical value is
  /// entry(i, j) * 2^scale_exponent().
  const Real& entry(std::size_t i, std::size_t j) const { return entries_[i * dim_ + j]; }
  const std::vector<Real>& entries() const { return entries_; }

  /// Physical value of element (i, j), 0-based, as long double.
  long double value(std::size_t i, std::size_t j) const {
    return std::ldexp(to_long_double(entry(i, j)), static_cast<int>(scale_exponent_));
  }

  void set(std::size_t i, std::size_t j, const Real& v) {
    entries_[i * dim_ + j] = v;
    entries_[j * dim_ + i] = v;
  }

  /// Replace entries and exponent in one step, symmetrizing.
  void assign(std::vector<Real> entries, long scale_exponent) {
    entries_ = std::move(entries);
    scale_exponent_ = scale_exponent;
    symmetrize();
  }

  void symmetrize() {
    for (std::size_t i = 0; i < dim_; ++i) {
      for (std::size_t j = i + 1; j < dim_; ++j) {
        Real avg = entries_[i * dim_ + j] + entries_[j * dim_ + i];
        avg *= 0.5;
        entries_[i * dim_ + j] = avg;
        entries_[j * dim_ + i] = avg;
      }
    }
  }

  /// Binary exponent of the largest |entry| (before applying the scale).
  long max_entry_exponent() const {
    long e = 0;
    bool first = true;
    for (const auto& x : entries_) {
      if (x == 0.0) continue;
      const long ex = binary_exponent(x);
      if (first || ex > e) e = ex;
      first = false;
    }
    return e;
  }

  /// Move a factor 2^k from the entries into the exponent, keeping the
  /// physical matrix unchanged (exact for binary floating point).
  void rebase(long k) {
    if (k == 0) return;
    for (auto& x : entries_) x = scale_by_power_of_two(x, -k);
    scale_exponent_ += k;
  }

  /// Rebase so that the largest entry has binary exponent 0.
  void normalize() { rebase(max_entry_exponent()); }

  template <WorkingReal Other>
  CovarianceMatrix<Other> convert() const {
    std::vector<Other> out;
    out.reserve(entries_.size());
    for (const auto& x : entries_) {
      if constexpr (std::same_as<Other, Real>) {
        out.push_back(x);
      } else if constexpr (std::same_as<Other, double>) {
        out.push_back(to_double(x));
      } else {
        out.push_back(Other(to_double(x)));
      }
    }
    CovarianceMatrix<Other> c(dim_, std::move(out), scale_exponent_);
    return c;
  }

  /// Copy with the shared exponent folded into the entries.
  std::vector<Real> unscaled_entries() const {
    std::vector<Real> out;
    out.reserve(entries_.size());
    for (const auto& x : entries_) out.push_back(scale_by_power_of_two(x, scale_exponent_));
    return out;
  }

 private:
  std::size_t dim_ = 0;
  std::vector<Real> entries_;
  long scale_exponent_ = 0;
};

/// First moments. The quadrature means are stored as mantissas times
/// 2^scale_exponent; displacements D_i(t) of the cavity modes are kept
/// alongside so physical photon numbers can be formed.
struct MeanVector {
  std::vector<double> quadratures;  // (x1, p1, x2, p2, ...)
  long scale_exponent = 0;
  std::vector<std::complex<double>> displacements;  // one per cavity mode

  std::size_t modes() const { return quadratures.size() / 2; }
  /// <c> = (<x> + i<p>) / sqrt(2) for mode index k.
  std::complex<long double> amplitude(std::size_t k) const;
};

/// Index (0-based mode number) of the mechanical mode; ordering is (a, b)
/// for two modes and (a1, b, a2) for three.
constexpr std::size_t kMechanicalMode = 1;

/// Cavity vacuum times mechanical thermal state, zero means.
std::pair<MeanVector, CovarianceMatrix<double>> initial_state(const SystemParams& params, int n_modes);

struct ValidityCheck {
  std::string name;
  double value = 0.0;
  bool pass = true;
  std::string message;
};

struct ValidityReport {
  std::vector<ValidityCheck> checks;
  bool all_pass() const;
  const ValidityCheck* find(const std::string& name) const;
};

/// Reports g_m/omega_m (weak coupling), omega_m/kappa (sideband resolution),
/// gamma_m/kappa and Q/n_th.
ValidityReport validity_report(const SystemParams& params);

/// Library version, "major.minor.patch".
const char* version();

}  // namespace optoent
