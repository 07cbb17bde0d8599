#pragma once

// Closed-form results for the asymptotic (omega_m/kappa -> infinity) model.

#include "optoent/errors.hpp"

#include <string>
#include <utility>
#include <vector>

namespace optoent::analytic {

/// CODATA 2018.
inline constexpr double kHbar = 1.054571817e-34;      // J s
inline constexpr double kBoltzmann = 1.380649e-23;    // J / K

struct PhasePoint {
  double j_over_kappa = 0.0;
  double gn_over_kappa = 0.0;
  double e_n = 0.0;
};

/// Argument X of E_N = max(0, -ln X) for the steady state of the asymptotic
/// two-mode model; gn is gamma_m * n_th.
double entanglement_argument(double j, double kappa, double gn);

/// Steady logarithmic negativity of the asymptotic model. Throws DomainError
/// for J <= 0, kappa <= 0 or gamma_m n_th < 0. Appends a warning when
/// gamma_m/kappa > 1e-2 and `warnings` is given.
double analytic_EN(double j, double kappa, double gamma_m, double n_th, std::vector<std::string>* warnings = nullptr);

struct Boundary {
  double gn_star = 0.0;     // root of X(gn) = 1
  double asymptotic = 0.0;  // the large-J boundary gn = J
};

/// Thermal load at which the steady entanglement vanishes, by bisection to
/// 1e-10 relative. Throws NoRoot if no sign change is found.
Boundary boundary_gn(double j, double kappa);

/// Bose-Einstein occupation for temperature T [K] and angular frequency
/// omega [rad/s].
double thermal_occupation(double temperature_k, double omega_rad_s);

/// J at which the asymptotic two-mode drift turns unstable: sqrt(kappa gamma_m).
double stability_threshold_two_mode(double kappa, double gamma_m);

/// The two distinct drift eigenvalues -(kappa+gamma)/2 -/+ sqrt(J^2 + (kappa-gamma)^2/4),
/// each of multiplicity two in quadrature form.
std::pair<double, double> two_mode_drift_eigenvalues(double j, double kappa, double gamma_m);

/// E_N on the grid j x gn (row-major over j, then gn).
std::vector<PhasePoint> phase_diagram(const std::vector<double>& j_values, const std::vector<double>& gn_values,
                                      double kappa = 1.0);

}  // namespace optoent::analytic
