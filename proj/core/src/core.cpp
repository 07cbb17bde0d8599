#include "optoent/core.hpp"

#include <cmath>
#include <sstream>

namespace optoent {

void SystemParams::validate() const {
  if (kappa != 1.0) throw ConfigError("kappa must be 1 (all rates are in units of kappa)");
  if (!(omega_m > 0.0)) throw ConfigError("omega_m must be positive");
  if (!(gamma_m > 0.0)) throw ConfigError("gamma_m must be positive");
  if (!(n_th >= 0.0)) throw ConfigError("n_th must be non-negative");
  if (!(n_c >= 0.0)) throw ConfigError("n_c must be non-negative");
  if (!(g_m >= 0.0)) throw ConfigError("g_m must be non-negative");
}

SystemParams params_with_quality(double g_m, double omega_m, double quality, double n_th, double n_c) {
  if (!(quality > 0.0)) throw ConfigError("quality factor must be positive");
  SystemParams p;
  p.g_m = g_m;
  p.omega_m = omega_m;
  p.gamma_m = omega_m / quality;
  p.n_th = n_th;
  p.n_c = n_c;
  return p;
}

PrecisionPolicy PrecisionPolicy::parse(const std::string& text) {
  if (text == "double") return fixed_double();
  if (text == "adaptive") return adaptive();
  if (text.rfind("ext:", 0) == 0) {
    const std::string digits = text.substr(4);
    std::size_t used = 0;
    long bits = 0;
    try {
      bits = std::stol(digits, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != digits.size() || bits < 53 || bits > (1L << 20)) {
      throw ConfigError("invalid precision '" + text + "': ext:<bits> needs 53 <= bits <= 2^20");
    }
    return extended(bits);
  }
  throw ConfigError("invalid precision '" + text + "': expected double, ext:<bits> or adaptive");
}

std::string PrecisionPolicy::to_string() const {
  switch (mode) {
    case PrecisionMode::FixedDouble: return "double";
    case PrecisionMode::FixedExtended: return "ext:" + std::to_string(bits);
    case PrecisionMode::Adaptive: return "adaptive";
  }
  return "adaptive";
}

long PrecisionPolicy::required_bits(double dynamic_range_bits) const {
  switch (mode) {
    case PrecisionMode::FixedDouble: return 53;
    case PrecisionMode::FixedExtended: return bits;
    case PrecisionMode::Adaptive: {
      const double extra = growth * std::max(0.0, dynamic_range_bits);
      return base_bits + static_cast<long>(std::ceil(extra));
    }
  }
  return bits;
}

std::complex<long double> MeanVector::amplitude(std::size_t k) const {
  const long double x = std::ldexp(static_cast<long double>(quadratures.at(2 * k)), static_cast<int>(scale_exponent));
  const long double p = std::ldexp(static_cast<long double>(quadratures.at(2 * k + 1)), static_cast<int>(scale_exponent));
  const long double r = 1.0L / std::sqrt(2.0L);
  return {x * r, p * r};
}

std::pair<MeanVector, CovarianceMatrix<double>> initial_state(const SystemParams& params, int n_modes) {
  if (n_modes != 2 && n_modes != 3) {
    throw ConfigError("initial_state: n_modes must be 2 or 3, got " + std::to_string(n_modes));
  }
  params.validate();
  const auto dim = static_cast<std::size_t>(2 * n_modes);
  MeanVector mean;
  mean.quadratures.assign(dim, 0.0);
  mean.displacements.assign(static_cast<std::size_t>(n_modes - 1), {0.0, 0.0});

  CovarianceMatrix<double> v(dim);
  for (std::size_t mode = 0; mode < static_cast<std::size_t>(n_modes); ++mode) {
    const double var = mode == kMechanicalMode ? params.n_th + 0.5 : params.n_c + 0.5;
    v.set(2 * mode, 2 * mode, var);
    v.set(2 * mode + 1, 2 * mode + 1, var);
  }
  return {mean, v};
}

bool ValidityReport::all_pass() const {
  for (const auto& c : checks) {
    if (!c.pass) return false;
  }
  return true;
}

const ValidityCheck* ValidityReport::find(const std::string& name) const {
  for (const auto& c : checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

ValidityReport validity_report(const SystemParams& p) {
  ValidityReport r;
  const double weak = p.g_m / p.omega_m;
  r.checks.push_back({"g_m/omega_m", weak, weak <= 0.01,
                      weak <= 0.01 ? "weak coupling" : "weak-coupling approximation invalid (g_m/omega_m > 0.01)"});
  const double resolved = p.omega_m / p.kappa;
  r.checks.push_back({"omega_m/kappa", resolved, resolved >= 1.0,
                      resolved >= 1.0 ? "resolved sideband" : "unresolved sideband (omega_m < kappa)"});
  const double damping = p.gamma_m / p.kappa;
  r.checks.push_back({"gamma_m/kappa", damping, damping <= 1e-2,
                      damping <= 1e-2 ? "kappa >> gamma_m" : "gamma_m not small against kappa"});
  // Informational: Q/n_th is the classic decoupling figure, not a validity bound.
  const double q_over_n = p.n_th > 0.0 ? p.quality_factor() / p.n_th : INFINITY;
  std::ostringstream msg;
  msg << "Q/n_th = " << q_over_n;
  r.checks.push_back({"Q/n_th", q_over_n, true, msg.str()});
  return r;
}

const char* version() { return OPTOENT_VERSION; }

}  // namespace optoent
