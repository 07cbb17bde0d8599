#pragma once

// Invariant checks shared by `optoent check` and the acceptance runner.

#include "optoent/core.hpp"
#include "optoent/integrator.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace optoent::checks {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

/// Random physical covariance matrix S diag(nu_k, nu_k) S^T with
/// S = exp(Omega H) for a random symmetric H of scale `squeeze`, and
/// nu_k = 1/2 + exponential noise of mean `thermal`.
CovarianceMatrix<double> random_covariance(std::mt19937_64& rng, std::size_t modes, double squeeze = 0.7,
                                           double thermal = 1.0);

struct PhysicalityReport {
  bool pass = true;
  double worst_nu_ratio = 1.0;        // min over samples of nu_min / (1/2)
  double worst_purity_excess = 0.0;   // max over samples of mu(t)/mu(0) - 1
  double at_time = 0.0;               // time of the worst violation (or of the minimum)
  std::size_t samples = 0;
};

/// nu_min >= 1/2 (1 - rel_tol) and mu(t) <= mu(0) (1 + rel_tol) along a trajectory.
PhysicalityReport physicality(const dynamics::Trajectory& trajectory, double rel_tol = 1e-9);

/// Largest relative disagreement between the closed-form negativity and the
/// Williamson route over `count` random two-mode matrices.
double negativity_route_disagreement(std::size_t count, std::uint64_t seed);

/// Quick invariants: negativity routes, drift realness, vacuum stability,
/// physicality of reference runs, asymptotic steady state vs closed form.
std::vector<CheckResult> invariant_suite(std::uint64_t seed = 1);

}  // namespace optoent::checks
