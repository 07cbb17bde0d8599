#include "optoent/model.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>

namespace optoent::dynamics {

namespace {

using cd = std::complex<double>;
constexpr cd kI{0.0, 1.0};

Eigen::MatrixXd diagonal_diffusion(const SystemParams& p, std::size_t modes, NoiseToggle noise) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(2 * modes, 2 * modes);
  for (std::size_t m = 0; m < modes; ++m) {
    double v = 0.0;
    if (m == kMechanicalMode) {
      if (noise.mechanical_noise_on) v = p.gamma_m * (2.0 * p.n_th + 1.0);
    } else if (noise.cavity_noise_on) {
      v = p.kappa * (2.0 * p.n_c + 1.0);
    }
    d(2 * m, 2 * m) = v;
    d(2 * m + 1, 2 * m + 1) = v;
  }
  return d;
}

// Sets the (c, c^dag) row pair of `mode` from the coefficients of the row for
// c; the c^dag row is its complex conjugate with c and c^dag swapped.
void set_row_pair(Eigen::MatrixXcd& m, std::size_t mode, std::size_t col_mode, cd coef_c, cd coef_cdag) {
  const auto r = 2 * mode;
  const auto c = 2 * col_mode;
  m(r, c) += coef_c;
  m(r, c + 1) += coef_cdag;
  m(r + 1, c) += std::conj(coef_cdag);
  m(r + 1, c + 1) += std::conj(coef_c);
}

void set_damping(Eigen::MatrixXcd& m, std::size_t mode, double rate) {
  m(2 * mode, 2 * mode) = -rate;
  m(2 * mode + 1, 2 * mode + 1) = -rate;
}

void set_drive(Eigen::VectorXcd& v, std::size_t mode, cd value) {
  v(2 * mode) = value;
  v(2 * mode + 1) = std::conj(value);
}

}  // namespace

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::FullTwoMode: return "full_two_mode";
    case ModelKind::AsymptoticTwoMode: return "asymptotic_two_mode";
    case ModelKind::ThreeModeTwoDrive: return "three_mode";
    case ModelKind::AsymptoticThreeMode: return "asymptotic_three_mode";
  }
  return "full_two_mode";
}

ModelKind parse_model_kind(const std::string& text) {
  if (text == "full_two_mode") return ModelKind::FullTwoMode;
  if (text == "asymptotic_two_mode") return ModelKind::AsymptoticTwoMode;
  if (text == "three_mode") return ModelKind::ThreeModeTwoDrive;
  if (text == "asymptotic_three_mode") return ModelKind::AsymptoticThreeMode;
  throw ConfigError("unknown model kind '" + text +
                    "' (expected full_two_mode, asymptotic_two_mode, three_mode or asymptotic_three_mode)");
}

std::complex<double> displacement(const DriveSpec& drive, double t) {
  if (drive.detuning == 0.0) return {drive.amplitude * t, 0.0};
  // E (e^{i Delta t} - 1) / (i Delta), with e^{ix} - 1 = 2i sin(x/2) e^{ix/2}
  // to keep relative accuracy for small Delta t.
  const double x = drive.detuning * t;
  const cd numerator = 2.0 * kI * std::sin(0.5 * x) * std::exp(kI * (0.5 * x));
  return drive.amplitude * numerator / (kI * drive.detuning);
}

Eigen::MatrixXcd LinearModel::complex_drift(double t) const {
  const auto n = dim();
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  const auto& p = params_;
  const std::size_t a1 = 0;
  const std::size_t b = kMechanicalMode;
  const std::size_t a2 = 2;
  set_damping(m, a1, p.kappa);
  set_damping(m, b, p.gamma_m);
  if (modes_ == 3) set_damping(m, a2, p.kappa);

  switch (kind_) {
    case ModelKind::FullTwoMode:
    case ModelKind::ThreeModeTwoDrive: {
      const cd rot = std::exp(kI * (p.omega_m * t));  // e^{i omega_m t}
      for (std::size_t k = 0; k < drives_.size(); ++k) {
        const std::size_t cav = k == 0 ? a1 : a2;
        const cd d = displacement(drives_[k], t);
        // a' += i g D (e^{-i w t} b + e^{i w t} b^dag)
        set_row_pair(m, cav, b, kI * p.g_m * d * std::conj(rot), kI * p.g_m * d * rot);
        // b' += i g e^{i w t} (D* a + D a^dag)
        set_row_pair(m, b, cav, kI * p.g_m * rot * std::conj(d), kI * p.g_m * rot * d);
      }
      break;
    }
    case ModelKind::AsymptoticTwoMode: {
      const double j = couplings_[0];
      set_row_pair(m, a1, b, 0.0, j);
      set_row_pair(m, b, a1, 0.0, j);
      break;
    }
    case ModelKind::AsymptoticThreeMode: {
      const double j1 = couplings_[0];
      const double j2 = couplings_[1];
      set_row_pair(m, a1, b, 0.0, -j1);
      set_row_pair(m, b, a1, 0.0, -j1);
      set_row_pair(m, b, a2, -j2, 0.0);
      set_row_pair(m, a2, b, j2, 0.0);
      break;
    }
  }
  return m;
}

Eigen::VectorXcd LinearModel::complex_coherent(double t) const {
  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(dim()));
  const auto& p = params_;
  switch (kind_) {
    case ModelKind::FullTwoMode:
    case ModelKind::ThreeModeTwoDrive: {
      double sq = 0.0;
      for (std::size_t k = 0; k < drives_.size(); ++k) {
        const cd d = displacement(drives_[k], t);
        set_drive(v, k == 0 ? 0 : 2, -p.kappa * d);
        sq += std::norm(d);
      }
      set_drive(v, kMechanicalMode, kI * p.g_m * std::exp(kI * (p.omega_m * t)) * sq);
      break;
    }
    case ModelKind::AsymptoticTwoMode: {
      const double j = couplings_[0];
      set_drive(v, 0, kI * p.kappa * j / p.g_m);
      set_drive(v, kMechanicalMode, -kI * j * j / p.g_m);
      break;
    }
    case ModelKind::AsymptoticThreeMode: {
      const double j1 = couplings_[0];
      const double j2 = couplings_[1];
      set_drive(v, 0, kI * p.kappa * j1 / p.g_m);
      set_drive(v, kMechanicalMode, -kI * (j1 * j1 + j2 * j2) / p.g_m);
      set_drive(v, 2, -kI * p.kappa * j2 / p.g_m);
      break;
    }
  }
  return v;
}

Eigen::MatrixXd LinearModel::drift(double t) const { return to_quadrature_basis(complex_drift(t)).real(); }

Eigen::VectorXd LinearModel::coherent(double t) const { return to_quadrature_basis(complex_coherent(t)).real(); }

std::vector<std::complex<double>> LinearModel::displacements(double t) const {
  std::vector<cd> out;
  switch (kind_) {
    case ModelKind::FullTwoMode:
    case ModelKind::ThreeModeTwoDrive:
      for (const auto& d : drives_) out.push_back(displacement(d, t));
      break;
    case ModelKind::AsymptoticTwoMode:
      out.push_back(-kI * couplings_[0] / params_.g_m);
      break;
    case ModelKind::AsymptoticThreeMode:
      out.push_back(-kI * couplings_[0] / params_.g_m);
      out.push_back(kI * couplings_[1] / params_.g_m);
      break;
  }
  return out;
}

double LinearModel::oscillation_period() const {
  return time_dependent() ? 2.0 * std::numbers::pi / params_.omega_m : 0.0;
}

LinearModel build_full_two_mode(const SystemParams& params, const DriveSpec& drive, NoiseToggle noise) {
  params.validate();
  if (!(drive.amplitude >= 0.0)) throw ConfigError("drive amplitude must be non-negative");
  LinearModel m;
  m.kind_ = ModelKind::FullTwoMode;
  m.modes_ = 2;
  m.params_ = params;
  m.drives_ = {drive};
  m.noise_ = noise;
  m.diffusion_ = diagonal_diffusion(params, 2, noise);
  return m;
}

LinearModel build_asymptotic_two_mode(double coupling, const SystemParams& params, NoiseToggle noise) {
  params.validate();
  if (!(coupling >= 0.0)) throw ConfigError("coupling J must be non-negative");
  if (coupling > 0.0 && !(params.g_m > 0.0)) throw ConfigError("asymptotic model with J > 0 needs g_m > 0");
  LinearModel m;
  m.kind_ = ModelKind::AsymptoticTwoMode;
  m.modes_ = 2;
  m.params_ = params;
  m.couplings_ = {coupling};
  m.noise_ = noise;
  m.diffusion_ = diagonal_diffusion(params, 2, noise);
  return m;
}

LinearModel build_three_mode(const SystemParams& params, const DriveSpec& blue, const DriveSpec& red,
                             NoiseToggle noise) {
  params.validate();
  if (!(blue.amplitude >= 0.0) || !(red.amplitude >= 0.0)) throw ConfigError("drive amplitude must be non-negative");
  LinearModel m;
  m.kind_ = ModelKind::ThreeModeTwoDrive;
  m.modes_ = 3;
  m.params_ = params;
  m.drives_ = {blue, red};
  m.noise_ = noise;
  m.diffusion_ = diagonal_diffusion(params, 3, noise);
  return m;
}

LinearModel build_asymptotic_three_mode(double coupling_blue, double coupling_red, const SystemParams& params,
                                        NoiseToggle noise) {
  params.validate();
  if (!(coupling_blue >= 0.0) || !(coupling_red >= 0.0)) throw ConfigError("couplings must be non-negative");
  if (!(params.g_m > 0.0)) throw ConfigError("asymptotic model needs g_m > 0");
  LinearModel m;
  m.kind_ = ModelKind::AsymptoticThreeMode;
  m.modes_ = 3;
  m.params_ = params;
  m.couplings_ = {coupling_blue, coupling_red};
  m.noise_ = noise;
  m.diffusion_ = diagonal_diffusion(params, 3, noise);
  return m;
}

Eigen::MatrixXcd to_quadrature_basis(const Eigen::MatrixXcd& x) {
  const auto n = x.rows();
  const double r = 1.0 / std::sqrt(2.0);
  Eigen::MatrixXcd t = Eigen::MatrixXcd::Zero(n, n);
  Eigen::MatrixXcd t_inv = Eigen::MatrixXcd::Zero(n, n);
  for (Eigen::Index k = 0; k < n; k += 2) {
    // x = (c + c^dag)/sqrt2, p = -i (c - c^dag)/sqrt2
    t(k, k) = r;
    t(k, k + 1) = r;
    t(k + 1, k) = -kI * r;
    t(k + 1, k + 1) = kI * r;
    t_inv(k, k) = r;
    t_inv(k, k + 1) = kI * r;
    t_inv(k + 1, k) = r;
    t_inv(k + 1, k + 1) = -kI * r;
  }
  return t * x * t_inv;
}

Eigen::VectorXcd to_quadrature_basis(const Eigen::VectorXcd& v) {
  Eigen::VectorXcd out(v.size());
  const double r = 1.0 / std::sqrt(2.0);
  for (Eigen::Index k = 0; k < v.size(); k += 2) {
    out(k) = r * (v(k) + v(k + 1));
    out(k + 1) = -kI * r * (v(k) - v(k + 1));
  }
  return out;
}

Eigen::MatrixXd averaged_drift(const LinearModel& model, int samples) {
  if (!model.time_dependent()) return model.drift(0.0);
  const double period = model.oscillation_period();
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(model.dim()),
                                              static_cast<Eigen::Index>(model.dim()));
  for (int k = 0; k < samples; ++k) acc += model.drift(period * k / samples);
  return acc / samples;
}

double max_real_eigenvalue(const Eigen::MatrixXd& m) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(m, false);
  return es.eigenvalues().real().maxCoeff();
}

}  // namespace optoent::dynamics
