#include "optoent/analytic.hpp"
#include "optoent/integrator.hpp"

#include <doctest.h>

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <numbers>

using namespace optoent;
using namespace optoent::dynamics;

namespace {

Eigen::MatrixXd to_eigen(const CovarianceMatrix<double>& v) {
  const auto n = static_cast<Eigen::Index>(v.dim());
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = static_cast<double>(v.value(i, j));
  }
  return m;
}

Eigen::VectorXd to_eigen(const MeanVector& mu) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(mu.quadratures.size()));
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    x(i) = std::ldexp(mu.quadratures[static_cast<std::size_t>(i)], static_cast<int>(mu.scale_exponent));
  }
  return x;
}

double rel_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff());
}

// Exact moments for constant M, D, lambda:
//   vec V(t) = e^{Kt} vec V0 + K^{-1} (e^{Kt} - I) vec D,  K = I (x) M + M (x) I
//   mu(t)    = e^{Mt} mu0 + M^{-1} (e^{Mt} - I) lambda
std::pair<Eigen::VectorXd, Eigen::MatrixXd> exact_constant(const LinearModel& m, const Eigen::VectorXd& mu0,
                                                           const Eigen::MatrixXd& v0, double t) {
  const Eigen::Index n = v0.rows();
  const Eigen::MatrixXd a = m.drift(0.0);
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd k = Eigen::kroneckerProduct(id, a) + Eigen::kroneckerProduct(a, id);
  const Eigen::MatrixXd ek = (k * t).exp();
  const Eigen::VectorXd vec0 = Eigen::Map<const Eigen::VectorXd>(v0.data(), n * n);
  const Eigen::VectorXd vecd = Eigen::Map<const Eigen::VectorXd>(m.diffusion().data(), n * n);
  const Eigen::MatrixXd nn = Eigen::MatrixXd::Identity(n * n, n * n);
  const Eigen::VectorXd vec = ek * vec0 + k.fullPivLu().solve((ek - nn) * vecd);
  const Eigen::MatrixXd ea = (a * t).exp();
  const Eigen::VectorXd mu = ea * mu0 + a.fullPivLu().solve((ea - id) * m.coherent(0.0));
  return {mu, Eigen::Map<const Eigen::MatrixXd>(vec.data(), n, n)};
}

// Classical RK4 on the moment equations, used as an independent reference.
std::pair<Eigen::VectorXd, Eigen::MatrixXd> rk4(const LinearModel& m, Eigen::VectorXd mu, Eigen::MatrixXd v,
                                                double t_end, int steps) {
  const double h = t_end / steps;
  const Eigen::MatrixXd& d = m.diffusion();
  auto fv = [&](double t, const Eigen::MatrixXd& x) {
    const Eigen::MatrixXd a = m.drift(t);
    return Eigen::MatrixXd(a * x + x * a.transpose() + d);
  };
  auto fm = [&](double t, const Eigen::VectorXd& x) { return Eigen::VectorXd(m.drift(t) * x + m.coherent(t)); };
  for (int i = 0; i < steps; ++i) {
    const double t = i * h;
    const Eigen::MatrixXd k1 = fv(t, v);
    const Eigen::MatrixXd k2 = fv(t + h / 2, v + h / 2 * k1);
    const Eigen::MatrixXd k3 = fv(t + h / 2, v + h / 2 * k2);
    const Eigen::MatrixXd k4 = fv(t + h, v + h * k3);
    v += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    const Eigen::VectorXd l1 = fm(t, mu);
    const Eigen::VectorXd l2 = fm(t + h / 2, mu + h / 2 * l1);
    const Eigen::VectorXd l3 = fm(t + h / 2, mu + h / 2 * l2);
    const Eigen::VectorXd l4 = fm(t + h, mu + h * l3);
    mu += h / 6 * (l1 + 2 * l2 + 2 * l3 + l4);
  }
  return {mu, v};
}

SystemParams warm_params() {
  SystemParams p;
  p.gamma_m = 1e-5;
  p.n_th = 6e4;
  return p;
}

}  // namespace

TEST_SUITE("integrator") {

TEST_CASE("constant model matches the matrix-exponential solution") {
  for (double j : {0.002, 0.8, 2.5}) {
    const auto p = warm_params();
    const auto model = build_asymptotic_two_mode(j, p);
    const auto init = initial_state(p, 2);
    IntegratorConfig cfg;
    cfg.precision = PrecisionPolicy::extended(256);
    cfg.sample_stride = 0.25;
    const auto tr = integrate(model, init, 3.0, cfg);
    const auto [mu, v] = exact_constant(model, to_eigen(init.first), to_eigen(init.second), 3.0);
    const auto& last = tr.samples.back();
    CHECK(last.t == doctest::Approx(3.0));
    CHECK(rel_diff(to_eigen(last.covariance), v) < 1e-9);
    CHECK((to_eigen(last.mean) - mu).cwiseAbs().maxCoeff() / std::max(1.0, mu.cwiseAbs().maxCoeff()) < 1e-9);
  }
}

TEST_CASE("stable steady state solves the Lyapunov equation") {
  auto p = warm_params();
  p.gamma_m = 0.05;
  p.n_th = 3.0;
  const auto model = build_asymptotic_two_mode(0.1, p);
  IntegratorConfig cfg;
  cfg.precision = PrecisionPolicy::fixed_double();
  cfg.sample_stride = 5.0;
  const auto tr = integrate(model, initial_state(p, 2), 600.0, cfg);
  const Eigen::MatrixXd v = to_eigen(tr.samples.back().covariance);
  const Eigen::MatrixXd a = model.drift(0.0);
  const Eigen::MatrixXd residual = a * v + v * a.transpose() + model.diffusion();
  CHECK(residual.cwiseAbs().maxCoeff() < 1e-8 * v.cwiseAbs().maxCoeff());
}

TEST_CASE("time-dependent model agrees with RK4 and with Dormand-Prince") {
  const auto p = warm_params();
  const auto model = build_full_two_mode(p, DriveSpec::blue_sideband(1e5, p));
  const auto init = initial_state(p, 2);
  const double t_end = 1.0;
  const auto [mu_ref, v_ref] = rk4(model, to_eigen(init.first), to_eigen(init.second), t_end, 200000);

  IntegratorConfig cfg;
  cfg.precision = PrecisionPolicy::extended(192);
  cfg.sample_stride = 0.05;
  const auto magnus = integrate(model, init, t_end, cfg);
  CHECK(rel_diff(to_eigen(magnus.samples.back().covariance), v_ref) < 1e-8);
  CHECK((to_eigen(magnus.samples.back().mean) - mu_ref).cwiseAbs().maxCoeff() / mu_ref.cwiseAbs().maxCoeff() < 1e-8);

  cfg.method = Method::DormandPrince45;
  cfg.precision = PrecisionPolicy::fixed_double();
  const auto dopri = integrate(model, init, t_end, cfg);
  CHECK(rel_diff(to_eigen(dopri.samples.back().covariance), v_ref) < 1e-7);
  CHECK(magnus.samples.back().measures.e_n ==
        doctest::Approx(dopri.samples.back().measures.e_n).epsilon(1e-6));
}

TEST_CASE("stride is snapped to a divisor of the mechanical period") {
  const auto p = warm_params();
  const auto model = build_full_two_mode(p, DriveSpec::blue_sideband(1e5, p));
  IntegratorConfig cfg;
  cfg.sample_stride = 0.01;
  const double period = 2.0 * std::numbers::pi / p.omega_m;
  const double s = effective_stride(model, cfg);
  const double k = period / s;
  CHECK(std::fabs(k - std::round(k)) < 1e-9);
  CHECK(s <= 0.01);
  CHECK(s > 0.0099);
  CHECK(is_periodic(model));
  CHECK_FALSE(is_periodic(build_asymptotic_two_mode(1.0, p)));
  CHECK(effective_stride(build_asymptotic_two_mode(1.0, p), cfg) == 0.01);
}

TEST_CASE("periodic channels are built once per phase") {
  const auto p = warm_params();
  const auto model = build_full_two_mode(p, DriveSpec::blue_sideband(1e5, p));
  IntegratorConfig cfg;
  cfg.sample_stride = 0.05;
  const auto tr = integrate(model, initial_state(p, 2), 10.0, cfg);
  const double period = 2.0 * std::numbers::pi / p.omega_m;
  const auto per_period = static_cast<std::uint64_t>(std::llround(period / tr.stride));
  CHECK(tr.channels_built <= per_period + 1);
  CHECK(tr.samples.size() > 150);
}

TEST_CASE("adaptive precision follows the dynamic range") {
  const auto p = warm_params();
  const auto model = build_full_two_mode(p, DriveSpec::blue_sideband(1e5, p));
  IntegratorConfig cfg;
  cfg.sample_stride = 0.1;
  const auto tr = integrate(model, initial_state(p, 2), 20.0, cfg);
  CHECK(tr.status == "ok");
  CHECK(tr.max_precision_bits > 64);
  CHECK(tr.min_margin_bits > 0.0);
  // Precision never decreases along the run.
  for (std::size_t i = 1; i < tr.samples.size(); ++i) {
    CHECK(tr.samples[i].precision_bits >= tr.samples[i - 1].precision_bits);
  }

  cfg.precision = PrecisionPolicy::adaptive();
  cfg.precision.max_bits = 96;
  CHECK_THROWS_AS(integrate(model, initial_state(p, 2), 20.0, cfg), PrecisionExhausted);
  try {
    integrate(model, initial_state(p, 2), 20.0, cfg);
  } catch (const PrecisionExhausted& e) {
    CHECK(e.partial().status == "precision_exhausted");
    CHECK(!e.partial().samples.empty());
  }
}

TEST_CASE("Monte-Carlo moments agree with the ODE") {
  auto p = warm_params();
  p.gamma_m = 0.1;
  p.n_th = 2.0;
  const auto model = build_asymptotic_two_mode(0.6, p);
  const auto init = initial_state(p, 2);
  MonteCarloConfig mc;
  mc.n_traj = 4000;
  mc.dt = 1e-3;
  mc.threads = 1;
  const auto est = monte_carlo_cross_check(model, init, 1.0, mc);
  IntegratorConfig cfg;
  cfg.sample_stride = 0.5;
  cfg.precision = PrecisionPolicy::fixed_double();
  const auto tr = integrate(model, init, 1.0, cfg);
  const Eigen::MatrixXd v = to_eigen(tr.samples.back().covariance);
  const Eigen::VectorXd mu = to_eigen(tr.samples.back().mean);
  double worst_z = 0.0;
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    worst_z = std::max(worst_z, std::fabs(est.mean[k] - mu(i)) / (est.mean_se[k] + std::fabs(est.mean_bias[k])));
    for (Eigen::Index j = 0; j < v.cols(); ++j) {
      const auto kk = static_cast<std::size_t>(i * v.cols() + j);
      const double tol = est.covariance_se[kk] + 2e-3 * std::fabs(v(i, j));
      worst_z = std::max(worst_z, std::fabs(est.covariance[kk] - v(i, j)) / tol);
    }
  }
  CHECK(worst_z < 5.0);
  CHECK(est.trajectories == 4000);
}

TEST_CASE("config validation") {
  const auto p = warm_params();
  const auto model = build_asymptotic_two_mode(1.0, p);
  IntegratorConfig cfg;
  cfg.oversample = 10;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.rel_tol = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.sample_stride = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  CHECK_THROWS_AS(integrate(model, initial_state(p, 2), 0.0, cfg), ConfigError);
  CHECK(parse_method(to_string(Method::DormandPrince45)) == Method::DormandPrince45);
  CHECK_THROWS_AS(parse_method("euler"), ConfigError);
}

TEST_CASE("affine channel composition") {
  const auto p = warm_params();
  const auto model = build_full_two_mode(p, DriveSpec::blue_sideband(1e5, p));
  IntegratorConfig cfg;
  const auto whole = build_channel(model, 0.0, 0.2, cfg);
  const auto first = build_channel(model, 0.0, 0.1, cfg);
  const auto second = build_channel(model, 0.1, 0.2, cfg);
  const auto joined = first.then(second);
  CHECK(rel_diff(joined.phi, whole.phi) < 1e-10);
  CHECK(rel_diff(joined.q, whole.q) < 1e-10);
  CHECK((joined.f - whole.f).cwiseAbs().maxCoeff() < 1e-8 * std::max(1.0, whole.f.cwiseAbs().maxCoeff()));
  // Phi of a real linear flow with trace(M) = -2 (kappa + gamma_m) has det e^{trace(M) t}.
  CHECK(whole.phi.determinant() == doctest::Approx(std::exp(-2.0 * (1.0 + p.gamma_m) * 0.2)).epsilon(1e-9));
}

TEST_CASE("asymptotic steady entanglement matches the closed form on a grid") {
  double worst = 0.0;
  for (double j : {0.5, 1.625, 2.75, 3.875, 5.0}) {
    for (double gn : {0.0, 0.5, 1.0, 1.5, 2.0}) {
      SystemParams p;
      p.gamma_m = 1e-4;
      p.n_th = gn / p.gamma_m;
      const auto model = build_asymptotic_two_mode(j, p);
      IntegratorConfig cfg;
      cfg.sample_stride = 0.05;
      // E_N settles on the scale of the unstable growth rate.
      const auto [lo, hi] = analytic::two_mode_drift_eigenvalues(j, 1.0, p.gamma_m);
      (void)lo;
      const double t_end = 40.0 / hi;
      const auto tr = integrate(model, initial_state(p, 2), t_end, cfg);
      const double numeric = tr.samples.back().measures.e_n;
      const double target = analytic::analytic_EN(j, 1.0, p.gamma_m, p.n_th);
      worst = std::max(worst, std::fabs(numeric - target));
      CHECK_MESSAGE(std::fabs(numeric - target) < 1e-3, "J=", j, " gn=", gn, " numeric ", numeric, " analytic ", target);
    }
  }
  MESSAGE("max |numeric - analytic| = ", worst);
}

}  // TEST_SUITE
