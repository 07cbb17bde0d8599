#include "optoent/analytic.hpp"

#include <cmath>
#include <sstream>

namespace optoent::analytic {

double entanglement_argument(double j, double kappa, double gn) {
  const double s = std::sqrt(4.0 * j * j + kappa * kappa);
  const double j2 = j * j;
  return (j2 * (kappa + 2.0 * gn) - (kappa * s - kappa * kappa) * gn) / (j2 * s);
}

double analytic_EN(double j, double kappa, double gamma_m, double n_th, std::vector<std::string>* warnings) {
  const double gn = gamma_m * n_th;
  if (!(j > 0.0) || !std::isfinite(j)) throw DomainError("analytic_EN: J must be positive and finite");
  if (!(kappa > 0.0)) throw DomainError("analytic_EN: kappa must be positive");
  if (!(gn >= 0.0) || !std::isfinite(gn)) throw DomainError("analytic_EN: gamma_m n_th must be non-negative");
  if (warnings != nullptr && gamma_m / kappa > 1e-2) {
    std::ostringstream msg;
    msg << "gamma_m/kappa = " << gamma_m / kappa << " > 1e-2: steady-state formula assumes kappa >> gamma_m";
    warnings->push_back(msg.str());
  }
  const double x = entanglement_argument(j, kappa, gn);
  if (!(x > 0.0)) throw DomainError("analytic_EN: log argument is not positive");
  return std::max(0.0, -std::log(x));
}

Boundary boundary_gn(double j, double kappa) {
  if (!(j > 0.0) || !(kappa > 0.0)) throw DomainError("boundary_gn: J and kappa must be positive");
  auto f = [&](double gn) { return entanglement_argument(j, kappa, gn) - 1.0; };
  double lo = 0.0;
  double hi = std::max(j, kappa);
  if (!(f(lo) < 0.0)) throw NoRoot("boundary_gn: no entanglement at gamma_m n_th = 0");
  int expansions = 0;
  while (f(hi) < 0.0) {
    lo = hi;
    hi *= 2.0;
    if (++expansions > 200) throw NoRoot("boundary_gn: no sign change in the scanned range");
  }
  while (hi - lo > 1e-10 * hi) {
    const double mid = 0.5 * (lo + hi);
    if (f(mid) < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return {0.5 * (lo + hi), j};
}

double thermal_occupation(double temperature_k, double omega_rad_s) {
  if (!(temperature_k > 0.0)) throw DomainError("thermal_occupation: temperature must be positive");
  if (!(omega_rad_s > 0.0)) throw DomainError("thermal_occupation: frequency must be positive");
  const double x = kHbar * omega_rad_s / (kBoltzmann * temperature_k);
  return 1.0 / std::expm1(x);
}

double stability_threshold_two_mode(double kappa, double gamma_m) {
  if (!(kappa > 0.0) || !(gamma_m > 0.0)) throw DomainError("stability_threshold_two_mode: rates must be positive");
  return std::sqrt(kappa * gamma_m);
}

std::pair<double, double> two_mode_drift_eigenvalues(double j, double kappa, double gamma_m) {
  const double mid = -(kappa + gamma_m) / 2.0;
  const double half = (kappa - gamma_m) / 2.0;
  const double r = std::sqrt(j * j + half * half);
  return {mid - r, mid + r};
}

std::vector<PhasePoint> phase_diagram(const std::vector<double>& j_values, const std::vector<double>& gn_values,
                                      double kappa) {
  std::vector<PhasePoint> out;
  out.reserve(j_values.size() * gn_values.size());
  for (double j : j_values) {
    for (double gn : gn_values) {
      const double e = j > 0.0 ? std::max(0.0, -std::log(entanglement_argument(j, kappa, gn))) : 0.0;
      out.push_back({j / kappa, gn / kappa, e});
    }
  }
  return out;
}

}  // namespace optoent::analytic
