#pragma once

// Propagation of the first and second moments of a LinearModel.
//
// The default method splits [0, t_end] into sample segments and builds, for
// each segment, the affine Gaussian channel
//
//   V -> Phi V Phi^T + Q,    mu -> Phi mu + f
//
// with an adaptive fourth-order Magnus exponential integrator (Van Loan
// augmented generator, step doubling for error control). The channels are
// computed in double and cached by phase when the coefficients are periodic;
// V itself is updated at the working precision chosen by the PrecisionPolicy.
// Reusing one channel per phase makes the double rounding of Phi a fixed,
// slightly perturbed but still physical channel instead of fresh noise at every
// step, which is what keeps the symplectic invariants of huge matrices intact.
//
// DormandPrince45 integrates the moment ODEs directly with an embedded 5(4)
// Runge-Kutta pair at working precision. Its local errors are unstructured, so
// it is only suitable while V stays moderate.

#include "optoent/core.hpp"
#include "optoent/measures.hpp"
#include "optoent/model.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace optoent::dynamics {

enum class Method { Magnus4, DormandPrince45 };

std::string to_string(Method m);
Method parse_method(const std::string& text);

struct IntegratorConfig {
  Method method = Method::Magnus4;
  double rel_tol = 1e-11;
  double abs_tol = 1e-13;
  int oversample = 40;                 // max step = (2 pi / omega_m) / oversample, >= 20
  PrecisionPolicy precision = PrecisionPolicy::adaptive();
  double sample_stride = 0.01;         // snapped to (2 pi / omega_m) / k for periodic models
  long rebase_exponent = 512;          // rebase V when its largest entry exceeds 2^this
  double min_step = 1e-13;             // relative to the segment length
  double healthy_margin_bits = 30.0;   // monitor threshold for precision headroom

  void validate() const;
};

struct TrajectorySample {
  double t = 0.0;
  MeanVector mean;
  CovarianceMatrix<double> covariance;  // normalized mantissas and exponent
  measures::MeasureSample measures;
  long precision_bits = 53;
  double margin_bits = 0.0;             // precision minus the dynamic range of V
};

struct Trajectory {
  std::vector<TrajectorySample> samples;
  double stride = 0.0;
  long max_precision_bits = 53;
  double min_margin_bits = 0.0;
  std::uint64_t steps = 0;
  std::uint64_t rejected_steps = 0;
  std::uint64_t channels_built = 0;
  std::string method;
  std::string precision;
  std::string status = "ok";
  std::string diagnostic;

  std::vector<double> times() const;
  std::vector<double> log_negativity() const;
};

class IntegrationError : public NumericalError {
 public:
  IntegrationError(const std::string& what, Trajectory partial)
      : NumericalError(what), partial_(std::move(partial)) {}
  const Trajectory& partial() const { return partial_; }

 private:
  Trajectory partial_;
};

class StepSizeUnderflow : public IntegrationError {
 public:
  using IntegrationError::IntegrationError;
};

class PrecisionExhausted : public IntegrationError {
 public:
  using IntegrationError::IntegrationError;
};

/// Affine Gaussian channel over [t0, t1].
struct AffineChannel {
  Eigen::MatrixXd phi;
  Eigen::MatrixXd q;
  Eigen::VectorXd f;
  double t0 = 0.0;
  double t1 = 0.0;

  static AffineChannel identity(std::size_t dim, double t);
  /// This channel followed by `next`.
  AffineChannel then(const AffineChannel& next) const;
};

/// One Magnus-4 step of length h starting at t.
AffineChannel magnus4_step(const LinearModel& model, double t, double h);

struct ChannelStats {
  std::uint64_t steps = 0;
  std::uint64_t rejected = 0;
};

/// Adaptive Magnus-4 channel over [t0, t1]. Throws StepSizeUnderflow (with an
/// empty partial trajectory) if the controller cannot meet the tolerances.
AffineChannel build_channel(const LinearModel& model, double t0, double t1, const IntegratorConfig& cfg,
                            ChannelStats* stats = nullptr);

/// Whether the model's coefficients repeat with period 2 pi / omega_m.
bool is_periodic(const LinearModel& model);

/// Sample stride actually used for the given config.
double effective_stride(const LinearModel& model, const IntegratorConfig& cfg);

Trajectory integrate(const LinearModel& model, const std::pair<MeanVector, CovarianceMatrix<double>>& init,
                     double t_end, const IntegratorConfig& cfg);

/// Sample moments from Euler-Maruyama trajectories of the Langevin equations.
struct MonteCarloEstimate {
  std::vector<double> mean;        // quadrature means
  std::vector<double> mean_se;     // standard errors
  std::vector<double> covariance;  // row-major 2N x 2N
  std::vector<double> covariance_se;
  /// Estimated Euler-Maruyama bias of the mean, 2 (m(dt) - m(dt/2)) from
  /// noise-free runs; large coherent drives make it exceed the sampling error.
  std::vector<double> mean_bias;
  std::size_t trajectories = 0;
  double dt = 0.0;
};

struct MonteCarloConfig {
  std::size_t n_traj = 4000;
  std::uint64_t seed = 1;
  double dt = 1e-3;
  unsigned threads = 0;  // 0: hardware concurrency
};

MonteCarloEstimate monte_carlo_cross_check(const LinearModel& model,
                                           const std::pair<MeanVector, CovarianceMatrix<double>>& init,
                                           double t_end, const MonteCarloConfig& cfg);

}  // namespace optoent::dynamics
