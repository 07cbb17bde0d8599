#include "optoent/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>

namespace optoent::dynamics {

namespace {

// Euler-Maruyama for dx = (M x + lambda) dt + sqrt(D) dW from one sample of
// the initial Gaussian state.
Eigen::VectorXd one_path(const LinearModel& model, const Eigen::VectorXd& mu0, const Eigen::MatrixXd& chol0,
                         double t_end, double dt, std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto n = mu0.size();
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) z(i) = normal(rng);
  Eigen::VectorXd x = mu0 + chol0 * z;
  const Eigen::VectorXd noise_sd = model.diffusion().diagonal().cwiseSqrt();
  const auto steps = static_cast<long>(std::llround(t_end / dt));
  const double sq = std::sqrt(dt);
  for (long k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    Eigen::VectorXd dx = (model.drift(t) * x + model.coherent(t)) * dt;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (noise_sd(i) != 0.0) dx(i) += noise_sd(i) * sq * normal(rng);
    }
    x += dx;
  }
  return x;
}

Eigen::VectorXd deterministic_mean(const LinearModel& model, const Eigen::VectorXd& mu0, double t_end, double dt) {
  Eigen::VectorXd x = mu0;
  const auto steps = static_cast<long>(std::llround(t_end / dt));
  for (long k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    x += (model.drift(t) * x + model.coherent(t)) * dt;
  }
  return x;
}

}  // namespace

MonteCarloEstimate monte_carlo_cross_check(const LinearModel& model,
                                           const std::pair<MeanVector, CovarianceMatrix<double>>& init,
                                           double t_end, const MonteCarloConfig& cfg) {
  if (cfg.n_traj < 2) throw ConfigError("monte_carlo_cross_check needs at least 2 trajectories");
  if (!(cfg.dt > 0.0) || !(t_end >= 0.0)) throw ConfigError("monte_carlo_cross_check: bad time step or span");
  const auto n = static_cast<Eigen::Index>(model.dim());
  Eigen::VectorXd mu0(n);
  Eigen::MatrixXd v0(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    mu0(i) = std::ldexp(init.first.quadratures[static_cast<std::size_t>(i)], static_cast<int>(init.first.scale_exponent));
    for (Eigen::Index j = 0; j < n; ++j) {
      v0(i, j) = static_cast<double>(init.second.value(static_cast<std::size_t>(i), static_cast<std::size_t>(j)));
    }
  }
  const Eigen::MatrixXd chol0 = v0.llt().matrixL();

  std::vector<Eigen::VectorXd> finals(cfg.n_traj);
  unsigned threads = cfg.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : cfg.threads;
  threads = std::min<unsigned>(threads, static_cast<unsigned>(cfg.n_traj));
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < cfg.n_traj; i += threads) {
        finals[i] = one_path(model, mu0, chol0, t_end, cfg.dt, cfg.seed, i);
      }
    });
  }
  for (auto& th : pool) th.join();

  const auto count = static_cast<double>(cfg.n_traj);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(n);
  for (const auto& x : finals) mean += x;
  mean /= count;
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(n, n);
  for (const auto& x : finals) {
    const Eigen::VectorXd d = x - mean;
    cov += d * d.transpose();
  }
  cov /= count - 1.0;
  // Standard error of each covariance entry from the spread of the products.
  Eigen::MatrixXd prod_var = Eigen::MatrixXd::Zero(n, n);
  for (const auto& x : finals) {
    const Eigen::VectorXd d = x - mean;
    const Eigen::MatrixXd p = d * d.transpose() - cov;
    prod_var += p.cwiseProduct(p);
  }
  prod_var /= count - 1.0;

  MonteCarloEstimate est;
  est.trajectories = cfg.n_traj;
  est.dt = cfg.dt;
  for (Eigen::Index i = 0; i < n; ++i) {
    est.mean.push_back(mean(i));
    est.mean_se.push_back(std::sqrt(cov(i, i) / count));
  }
  const Eigen::VectorXd bias =
      2.0 * (deterministic_mean(model, mu0, t_end, cfg.dt) - deterministic_mean(model, mu0, t_end, 0.5 * cfg.dt));
  for (Eigen::Index i = 0; i < n; ++i) est.mean_bias.push_back(bias(i));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      est.covariance.push_back(cov(i, j));
      est.covariance_se.push_back(std::sqrt(prod_var(i, j) / count));
    }
  }
  return est;
}

}  // namespace optoent::dynamics
