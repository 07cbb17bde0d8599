#pragma once

// Linear Langevin models: drift M(t), diffusion D and coherent drive
// lambda(t) of the moment equations
//
//   d<u>/dt = M(t) <u> + lambda(t),   dV/dt = M(t) V + V M(t)^T + D
//
// in the real quadrature basis u = (x1, p1, x2, p2, ...), where
// x = (c + c^dag)/sqrt(2) and p = -i (c - c^dag)/sqrt(2).

#include "optoent/core.hpp"

#include <Eigen/Dense>

#include <complex>
#include <optional>
#include <string>
#include <vector>

namespace optoent::dynamics {

enum class ModelKind {
  FullTwoMode,          // time-dependent two-mode equations, one CW drive
  AsymptoticTwoMode,    // omega_m/kappa -> infinity, constant coupling J
  ThreeModeTwoDrive,    // blue + red drive, modes (a1, b, a2)
  AsymptoticThreeMode,  // omega_m/kappa -> infinity reduction of the above
};

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& text);

/// Cavity displacement D(t) = integral_0^t e^{i Delta (t - tau)} E dtau for a
/// CW drive: E (e^{i Delta t} - 1) / (i Delta), or E t when Delta == 0.
std::complex<double> displacement(const DriveSpec& drive, double t);

class LinearModel {
 public:
  ModelKind kind() const { return kind_; }
  std::size_t modes() const { return modes_; }
  std::size_t dim() const { return 2 * modes_; }
  bool time_dependent() const { return kind_ == ModelKind::FullTwoMode || kind_ == ModelKind::ThreeModeTwoDrive; }

  const SystemParams& params() const { return params_; }
  const std::vector<DriveSpec>& drives() const { return drives_; }
  const NoiseToggle& noise() const { return noise_; }
  /// Squeezing couplings J_i for the asymptotic kinds (empty otherwise).
  const std::vector<double>& couplings() const { return couplings_; }

  /// Drift in the complex mode basis (c1, c1^dag, c2, c2^dag, ...).
  Eigen::MatrixXcd complex_drift(double t) const;
  /// Coherent drive in the complex mode basis.
  Eigen::VectorXcd complex_coherent(double t) const;

  /// Real quadrature drift M(t).
  Eigen::MatrixXd drift(double t) const;
  /// Real quadrature coherent drive lambda(t).
  Eigen::VectorXd coherent(double t) const;
  /// Constant diagonal diffusion matrix D.
  const Eigen::MatrixXd& diffusion() const { return diffusion_; }

  /// Displacement of each cavity mode at time t (cycle average for the
  /// asymptotic kinds).
  std::vector<std::complex<double>> displacements(double t) const;

  /// Period of the fastest coefficient oscillation, 2 pi / omega_m, or 0 for
  /// constant-coefficient models.
  double oscillation_period() const;

 private:
  friend LinearModel build_full_two_mode(const SystemParams&, const DriveSpec&, NoiseToggle);
  friend LinearModel build_asymptotic_two_mode(double, const SystemParams&, NoiseToggle);
  friend LinearModel build_three_mode(const SystemParams&, const DriveSpec&, const DriveSpec&, NoiseToggle);
  friend LinearModel build_asymptotic_three_mode(double, double, const SystemParams&, NoiseToggle);

  ModelKind kind_ = ModelKind::FullTwoMode;
  std::size_t modes_ = 2;
  SystemParams params_;
  std::vector<DriveSpec> drives_;
  std::vector<double> couplings_;
  NoiseToggle noise_;
  Eigen::MatrixXd diffusion_;
};

LinearModel build_full_two_mode(const SystemParams& params, const DriveSpec& drive, NoiseToggle noise = {});

/// a' = -kappa a + J b^dag + i kappa J / g_m,  b' = -gamma_m b + J a^dag - i J^2 / g_m.
LinearModel build_asymptotic_two_mode(double coupling, const SystemParams& params, NoiseToggle noise = {});

LinearModel build_three_mode(const SystemParams& params, const DriveSpec& blue, const DriveSpec& red,
                             NoiseToggle noise = {});

/// Period average of the three-mode drift for Delta1 = -omega_m,
/// Delta2 = +omega_m:
///   a1' = -kappa a1 - J1 b^dag,  b' = -gamma_m b - J1 a1^dag - J2 a2,
///   a2' = -kappa a2 + J2 b.
LinearModel build_asymptotic_three_mode(double coupling_blue, double coupling_red, const SystemParams& params,
                                        NoiseToggle noise = {});

/// T X T^{-1} for the per-mode change of basis (c, c^dag) -> (x, p). The
/// result is real for any physical drift; the imaginary part is returned so
/// callers can check that.
Eigen::MatrixXcd to_quadrature_basis(const Eigen::MatrixXcd& complex_matrix);
Eigen::VectorXcd to_quadrature_basis(const Eigen::VectorXcd& complex_vector);

/// Average of drift(t) over one oscillation period using `samples` equally
/// spaced points (exact for trigonometric polynomials of low degree).
Eigen::MatrixXd averaged_drift(const LinearModel& model, int samples = 64);

/// Largest real part among the eigenvalues of a real matrix.
double max_real_eigenvalue(const Eigen::MatrixXd& m);

}  // namespace optoent::dynamics
