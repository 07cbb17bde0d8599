#include "optoent/checks.hpp"

#include "optoent/analytic.hpp"
#include "optoent/measures.hpp"
#include "optoent/model.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace optoent::checks {

namespace {

Eigen::MatrixXd omega(std::size_t modes) {
  const auto n = static_cast<Eigen::Index>(2 * modes);
  Eigen::MatrixXd o = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; i += 2) {
    o(i, i + 1) = 1.0;
    o(i + 1, i) = -1.0;
  }
  return o;
}

std::string fmt(double x) {
  std::ostringstream s;
  s.precision(4);
  s << x;
  return s.str();
}

}  // namespace

CovarianceMatrix<double> random_covariance(std::mt19937_64& rng, std::size_t modes, double squeeze, double thermal) {
  const auto n = static_cast<Eigen::Index>(2 * modes);
  std::normal_distribution<double> normal(0.0, squeeze);
  std::exponential_distribution<double> expo(thermal > 0.0 ? 1.0 / thermal : 1.0);
  Eigen::MatrixXd h(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) h(i, j) = h(j, i) = normal(rng);
  }
  const Eigen::MatrixXd s = (omega(modes) * h).exp();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index k = 0; k < n; k += 2) {
    const double nu = 0.5 + (thermal > 0.0 ? expo(rng) : 0.0);
    d(k, k) = d(k + 1, k + 1) = nu;
  }
  const Eigen::MatrixXd v = s * d * s.transpose();
  std::vector<double> entries(static_cast<std::size_t>(n * n));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) entries[static_cast<std::size_t>(i * n + j)] = v(i, j);
  }
  CovarianceMatrix<double> out(static_cast<std::size_t>(n), std::move(entries));
  out.normalize();
  return out;
}

PhysicalityReport physicality(const dynamics::Trajectory& trajectory, double rel_tol) {
  PhysicalityReport r;
  if (trajectory.samples.empty()) return r;
  const long double mu0 = trajectory.samples.front().measures.purity;
  for (const auto& s : trajectory.samples) {
    ++r.samples;
    const auto& nu = s.measures.symplectic;
    if (!nu.empty()) {
      const double ratio = static_cast<double>(*std::min_element(nu.begin(), nu.end()) / 0.5L);
      if (ratio < r.worst_nu_ratio) {
        r.worst_nu_ratio = ratio;
        r.at_time = s.t;
      }
    }
    const double excess = static_cast<double>(s.measures.purity / mu0 - 1.0L);
    r.worst_purity_excess = std::max(r.worst_purity_excess, excess);
  }
  r.pass = r.worst_nu_ratio >= 1.0 - rel_tol && r.worst_purity_excess <= rel_tol;
  return r;
}

double negativity_route_disagreement(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const auto v = random_covariance(rng, 2);
    const auto closed = measures::log_negativity(v);
    const auto nu = measures::symplectic_eigs_williamson(v, true);
    const long double eta = nu.front();
    const double rel = static_cast<double>(std::fabs(closed.eta_minus - eta) / eta);
    worst = std::max(worst, rel);
  }
  return worst;
}

std::vector<CheckResult> invariant_suite(std::uint64_t seed) {
  std::vector<CheckResult> out;

  {
    const double d = negativity_route_disagreement(1000, seed);
    out.push_back({"negativity routes agree (1000 random CMs)", d <= 1e-10, "max rel diff " + fmt(d)});
  }
  {
    SystemParams p;
    p.n_th = 100.0;
    const auto model = dynamics::build_full_two_mode(p, DriveSpec::blue_sideband(1e5, p));
    double worst = 0.0;
    for (int k = 0; k < 16; ++k) {
      const double t = 0.0371 * k;
      const auto c = dynamics::to_quadrature_basis(model.complex_drift(t));
      worst = std::max(worst, c.imag().cwiseAbs().maxCoeff() / std::max(1.0, c.real().cwiseAbs().maxCoeff()));
    }
    out.push_back({"quadrature drift is real", worst < 1e-14, "max |Im| " + fmt(worst)});
  }
  {
    SystemParams p;
    const auto model = dynamics::build_full_two_mode(p, DriveSpec::blue_sideband(0.0, p));
    dynamics::IntegratorConfig cfg;
    cfg.precision = PrecisionPolicy::fixed_double();
    const auto tr = dynamics::integrate(model, initial_state(p, 2), 5.0, cfg);
    double dev = 0.0;
    for (const auto& s : tr.samples) {
      for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 4; ++j) {
          dev = std::max(dev, static_cast<double>(std::fabs(s.covariance.value(i, j) - (i == j ? 0.5L : 0.0L))));
        }
      }
    }
    out.push_back({"vacuum stays vacuum without drive", dev < 1e-12, "max |V - I/2| " + fmt(dev)});
  }
  {
    SystemParams p;
    p.gamma_m = 1e-5;
    p.n_th = 1e5;
    const auto model = dynamics::build_asymptotic_two_mode(2.5, p);
    const auto tr = dynamics::integrate(model, initial_state(p, 2), 30.0, dynamics::IntegratorConfig{});
    const auto ph = physicality(tr);
    out.push_back({"physicality along the asymptotic reference run", ph.pass,
                   "min nu/0.5 " + fmt(ph.worst_nu_ratio) + ", purity excess " + fmt(ph.worst_purity_excess)});
    const auto st = measures::trajectory_stats(tr.times(), tr.log_negativity(), 0.0);
    const double target = analytic::analytic_EN(2.5, 1.0, p.gamma_m, p.n_th);
    const double diff = std::fabs(st.stabilized_mean - target);
    out.push_back({"asymptotic steady state matches the closed form", diff < 1e-3,
                   "numeric " + fmt(st.stabilized_mean) + " vs " + fmt(target)});
  }
  {
    SystemParams p;
    p.gamma_m = 1e-5;
    p.n_th = 6e4;
    const auto model = dynamics::build_full_two_mode(p, DriveSpec::blue_sideband(1e5, p));
    const auto tr = dynamics::integrate(model, initial_state(p, 2), 10.0, dynamics::IntegratorConfig{});
    const auto ph = physicality(tr);
    out.push_back({"physicality along a full two-mode run", ph.pass,
                   "min nu/0.5 " + fmt(ph.worst_nu_ratio) + ", purity excess " + fmt(ph.worst_purity_excess)});
  }
  return out;
}

}  // namespace optoent::checks
