#include "optoent/integrator.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>

namespace optoent::dynamics {

std::string to_string(Method m) { return m == Method::Magnus4 ? "magnus4" : "dopri45"; }

Method parse_method(const std::string& text) {
  if (text == "magnus4") return Method::Magnus4;
  if (text == "dopri45" || text == "rk45") return Method::DormandPrince45;
  throw ConfigError("unknown integrator method '" + text + "' (expected magnus4 or dopri45)");
}

void IntegratorConfig::validate() const {
  if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) throw ConfigError("integrator tolerances must be positive");
  if (oversample < 20) throw ConfigError("integrator oversample must be >= 20");
  if (!(sample_stride > 0.0)) throw ConfigError("sample_stride must be positive");
  if (rebase_exponent < 16) throw ConfigError("rebase_exponent must be >= 16");
  if (precision.mode == PrecisionMode::Adaptive && precision.max_bits < precision.base_bits) {
    throw ConfigError("adaptive precision cap is below the base precision");
  }
}

std::vector<double> Trajectory::times() const {
  std::vector<double> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.t);
  return out;
}

std::vector<double> Trajectory::log_negativity() const {
  std::vector<double> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.measures.e_n);
  return out;
}

AffineChannel AffineChannel::identity(std::size_t dim, double t) {
  const auto n = static_cast<Eigen::Index>(dim);
  return {Eigen::MatrixXd::Identity(n, n), Eigen::MatrixXd::Zero(n, n), Eigen::VectorXd::Zero(n), t, t};
}

AffineChannel AffineChannel::then(const AffineChannel& next) const {
  AffineChannel out;
  out.phi = next.phi * phi;
  out.q = next.phi * q * next.phi.transpose() + next.q;
  out.q = 0.5 * (out.q + out.q.transpose()).eval();
  out.f = next.phi * f + next.f;
  out.t0 = t0;
  out.t1 = next.t1;
  return out;
}

namespace {

// [[M, sd D, sl lambda], [0, -M^T, 0], [0, 0, 0]]
Eigen::MatrixXd augmented(const LinearModel& model, double t, double sd, double sl) {
  const auto n = static_cast<Eigen::Index>(model.dim());
  const Eigen::MatrixXd m = model.drift(t);
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(2 * n + 1, 2 * n + 1);
  g.topLeftCorner(n, n) = m;
  g.block(0, n, n, n) = sd * model.diffusion();
  g.block(n, n, n, n) = -m.transpose();
  g.block(0, 2 * n, n, 1) = sl * model.coherent(t);
  return g;
}

double inv_scale(double magnitude) { return magnitude > 0.0 ? 1.0 / magnitude : 1.0; }

double max_abs(const Eigen::MatrixXd& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

double block_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const IntegratorConfig& cfg) {
  return max_abs(a - b) / (cfg.abs_tol + cfg.rel_tol * max_abs(b));
}

}  // namespace

AffineChannel magnus4_step(const LinearModel& model, double t, double h) {
  const double c = std::sqrt(3.0) / 6.0;
  const double t1 = t + (0.5 - c) * h;
  const double t2 = t + (0.5 + c) * h;
  const double sd = inv_scale(max_abs(model.diffusion()));
  const double sl = inv_scale(std::max(model.coherent(t1).cwiseAbs().maxCoeff(), model.coherent(t2).cwiseAbs().maxCoeff()));
  const Eigen::MatrixXd g1 = augmented(model, t1, sd, sl);
  const Eigen::MatrixXd g2 = augmented(model, t2, sd, sl);
  const Eigen::MatrixXd omega = 0.5 * h * (g1 + g2) + (std::sqrt(3.0) / 12.0) * h * h * (g2 * g1 - g1 * g2);
  const Eigen::MatrixXd f = omega.exp();

  const auto n = static_cast<Eigen::Index>(model.dim());
  AffineChannel ch;
  ch.phi = f.topLeftCorner(n, n);
  ch.q = f.block(0, n, n, n) * ch.phi.transpose() / sd;
  ch.q = 0.5 * (ch.q + ch.q.transpose()).eval();
  ch.f = f.block(0, 2 * n, n, 1) / sl;
  ch.t0 = t;
  ch.t1 = t + h;
  return ch;
}

AffineChannel build_channel(const LinearModel& model, double t0, double t1, const IntegratorConfig& cfg,
                            ChannelStats* stats) {
  const double span = t1 - t0;
  AffineChannel acc = AffineChannel::identity(model.dim(), t0);
  if (!(span > 0.0)) return acc;
  double h_max = span;
  if (model.time_dependent()) h_max = std::min(h_max, model.oscillation_period() / cfg.oversample);
  const double norm = model.drift(t0).cwiseAbs().rowwise().sum().maxCoeff();
  double h = std::min(h_max, norm > 0.0 ? 0.5 / norm : h_max);
  double t = t0;
  ChannelStats local;
  while (t1 - t > 1e-14 * span) {
    const double step = std::min(h, t1 - t);
    const bool last = step < h;
    const AffineChannel full = magnus4_step(model, t, step);
    const AffineChannel half =
        magnus4_step(model, t, 0.5 * step).then(magnus4_step(model, t + 0.5 * step, 0.5 * step));
    const double err = std::max({block_error(full.phi, half.phi, cfg), block_error(full.q, half.q, cfg),
                                 block_error(full.f, half.f, cfg)}) /
                       15.0;
    const bool accepted = err <= 1.0 && std::isfinite(err);
    if (accepted) {
      acc = acc.then(half);
      t = t + step;
      ++local.steps;
    } else {
      ++local.rejected;
    }
    const double factor = std::isfinite(err) ? (err > 0.0 ? 0.9 * std::pow(err, -0.2) : 4.0) : 0.2;
    const double proposal = std::min(h_max, step * std::clamp(factor, 0.2, 4.0));
    h = accepted && last ? std::max(h, proposal) : proposal;
    if (!accepted && h < cfg.min_step * span) {
      std::ostringstream msg;
      msg << "step size underflow at t = " << t << " (h = " << h << ")";
      throw StepSizeUnderflow(msg.str(), Trajectory{});
    }
  }
  acc.t1 = t1;
  if (stats != nullptr) {
    stats->steps += local.steps;
    stats->rejected += local.rejected;
  }
  return acc;
}

bool is_periodic(const LinearModel& model) {
  if (!model.time_dependent()) return false;
  const double w = model.params().omega_m;
  for (const auto& d : model.drives()) {
    if (d.amplitude == 0.0) continue;
    if (std::fabs(std::fabs(d.detuning) - w) > 1e-12 * w) return false;
  }
  return true;
}

double effective_stride(const LinearModel& model, const IntegratorConfig& cfg) {
  if (!is_periodic(model)) return cfg.sample_stride;
  const double period = model.oscillation_period();
  const double k = std::max(1.0, std::ceil(period / cfg.sample_stride - 1e-9));
  return period / k;
}

namespace {

constexpr double kLn2 = std::numbers::ln2;

// Working-precision moment state: V = w * 2^s, mu = m * 2^e.
template <WorkingReal Real>
struct State {
  std::size_t n = 0;
  std::vector<Real> w;
  long s = 0;
  std::vector<double> mu;
  long e = 0;
  // scratch
  std::vector<Real> tmp;
  std::vector<Real> next;
  Real scratch = 0.0;

  void set_bits(long bits) {
    if constexpr (std::same_as<Real, BigFloat>) {
      for (auto& x : w) x.set_precision(bits);
      for (auto& x : tmp) x.set_precision(bits);
      for (auto& x : next) x.set_precision(bits);
      scratch.set_precision(bits);
    } else {
      (void)bits;
    }
  }

  CovarianceMatrix<Real> covariance() const { return CovarianceMatrix<Real>(n, w, s); }

  void rebase(long threshold) {
    long top = 0;
    bool any = false;
    for (const auto& x : w) {
      if (x == 0.0) continue;
      const long ex = binary_exponent(x);
      if (!any || ex > top) top = ex;
      any = true;
    }
    if (any && (top > threshold || top < -threshold)) {
      for (auto& x : w) x = scale_by_power_of_two(x, -top);
      s += top;
    }
    double big = 0.0;
    for (double x : mu) big = std::max(big, std::fabs(x));
    if (big > 0.0) {
      const long ex = binary_exponent(big);
      if (ex > threshold || ex < -threshold) {
        for (auto& x : mu) x = std::ldexp(x, static_cast<int>(-ex));
        e += ex;
      }
    }
  }
};

// acc += q * 2^k for a double q.
inline void add_pow2(double& acc, double q, long k, double& /*scratch*/) {
  if (q != 0.0) acc += std::ldexp(q, static_cast<int>(std::clamp<long>(k, -100000, 100000)));
}
inline void add_pow2(BigFloat& acc, double q, long k, BigFloat& scratch) {
  if (q == 0.0) return;
  mpfr_set_d(scratch.get(), q, MPFR_RNDN);
  mpfr_mul_2si(scratch.get(), scratch.get(), k, MPFR_RNDN);
  mpfr_add(acc.get(), acc.get(), scratch.get(), MPFR_RNDN);
}

inline void set_zero(double& x) { x = 0.0; }
inline void set_zero(BigFloat& x) { mpfr_set_zero(x.get(), 1); }

template <WorkingReal Real>
void apply_channel(State<Real>& st, const AffineChannel& ch) {
  const std::size_t n = st.n;
  // tmp = Phi W
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      Real& acc = st.tmp[i * n + k];
      set_zero(acc);
      for (std::size_t j = 0; j < n; ++j) {
        const double p = ch.phi(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        if (p != 0.0) add_scaled(acc, st.w[j * n + k], p, st.scratch);
      }
    }
  }
  // next = tmp Phi^T + Q 2^-s, upper triangle mirrored
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t l = i; l < n; ++l) {
      Real& acc = st.next[i * n + l];
      set_zero(acc);
      for (std::size_t k = 0; k < n; ++k) {
        const double p = ch.phi(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(k));
        if (p != 0.0) add_scaled(acc, st.tmp[i * n + k], p, st.scratch);
      }
      add_pow2(acc, ch.q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l)), -st.s, st.scratch);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t l = i; l < n; ++l) {
      st.w[i * n + l] = st.next[i * n + l];
      if (l != i) st.w[l * n + i] = st.next[i * n + l];
    }
  }
  std::vector<double> mu(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += ch.phi(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * st.mu[j];
    const double fi = ch.f(static_cast<Eigen::Index>(i));
    if (fi != 0.0) acc += std::ldexp(fi, static_cast<int>(std::clamp<long>(-st.e, -100000, 100000)));
    mu[i] = acc;
  }
  st.mu = std::move(mu);
}

// Dormand-Prince 5(4) over [t0, t1] on the scaled moment equations.
template <WorkingReal Real>
void dopri_advance(State<Real>& st, const LinearModel& model, double t0, double t1, const IntegratorConfig& cfg,
                   Trajectory& traj, double& h_state) {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                          e6 = 22.0 / 525, e7 = -1.0 / 40;

  const std::size_t n = st.n;
  const std::size_t nw = n * n;
  const double span = t1 - t0;
  double h_max = span;
  if (model.time_dependent()) h_max = std::min(h_max, model.oscillation_period() / cfg.oversample);

  // y = (w entries, mu entries); mu is carried in Real for uniformity.
  auto deriv = [&](double t, const std::vector<Real>& y, std::vector<Real>& dy) {
    const Eigen::MatrixXd m = model.drift(t);
    const Eigen::VectorXd lam = model.coherent(t);
    const Eigen::MatrixXd& d = model.diffusion();
    Real scratch = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < n; ++k) {
        Real acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          const double p = m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
          if (p != 0.0) add_scaled(acc, y[j * n + k], p, scratch);
          const double q = m(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j));
          if (q != 0.0) add_scaled(acc, y[i * n + j], q, scratch);
        }
        add_pow2(acc, d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)), -st.s, scratch);
        dy[i * n + k] = acc;
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      Real acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double p = m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        if (p != 0.0) add_scaled(acc, y[nw + j], p, scratch);
      }
      add_pow2(acc, lam(static_cast<Eigen::Index>(i)), -st.e, scratch);
      dy[nw + i] = acc;
    }
  };

  std::vector<Real> y(nw + n);
  for (std::size_t i = 0; i < nw; ++i) y[i] = st.w[i];
  for (std::size_t i = 0; i < n; ++i) y[nw + i] = Real(st.mu[i]);

  std::vector<std::vector<Real>> k(7, std::vector<Real>(nw + n));
  std::vector<Real> ytmp(nw + n);
  std::vector<Real> ynew(nw + n);
  Real scratch = 0.0;

  auto combo = [&](const std::vector<Real>& base, double h, std::initializer_list<std::pair<int, double>> terms,
                   std::vector<Real>& out) {
    for (std::size_t i = 0; i < base.size(); ++i) {
      Real acc = base[i];
      for (const auto& [idx, coef] : terms) {
        if (coef != 0.0) add_scaled(acc, k[static_cast<std::size_t>(idx)][i], h * coef, scratch);
      }
      out[i] = acc;
    }
  };

  double t = t0;
  double h = std::min(h_state > 0.0 ? h_state : h_max, h_max);
  deriv(t, y, k[0]);
  while (t1 - t > 1e-14 * span) {
    const double h_full = h;
    h = std::min(h, t1 - t);
    const bool last = h < h_full;
    combo(y, h, {{0, a21}}, ytmp);
    deriv(t + c2 * h, ytmp, k[1]);
    combo(y, h, {{0, a31}, {1, a32}}, ytmp);
    deriv(t + c3 * h, ytmp, k[2]);
    combo(y, h, {{0, a41}, {1, a42}, {2, a43}}, ytmp);
    deriv(t + c4 * h, ytmp, k[3]);
    combo(y, h, {{0, a51}, {1, a52}, {2, a53}, {3, a54}}, ytmp);
    deriv(t + c5 * h, ytmp, k[4]);
    combo(y, h, {{0, a61}, {1, a62}, {2, a63}, {3, a64}, {4, a65}}, ytmp);
    deriv(t + h, ytmp, k[5]);
    combo(y, h, {{0, b1}, {2, b3}, {3, b4}, {4, b5}, {5, b6}}, ynew);
    deriv(t + h, ynew, k[6]);

    // Error estimate in double, relative to the largest entry of each block.
    double w_scale = 0.0;
    double m_scale = 0.0;
    for (std::size_t i = 0; i < nw; ++i) w_scale = std::max(w_scale, std::fabs(to_double(ynew[i])));
    for (std::size_t i = 0; i < n; ++i) m_scale = std::max(m_scale, std::fabs(to_double(ynew[nw + i])));
    const double w_abs = std::ldexp(cfg.abs_tol, static_cast<int>(std::clamp<long>(-st.s, -100000, 100000)));
    const double m_abs = std::ldexp(cfg.abs_tol, static_cast<int>(std::clamp<long>(-st.e, -100000, 100000)));
    double err = 0.0;
    for (std::size_t i = 0; i < nw + n; ++i) {
      double ei = 0.0;
      ei += h * e1 * to_double(k[0][i]);
      ei += h * e3 * to_double(k[2][i]);
      ei += h * e4 * to_double(k[3][i]);
      ei += h * e5 * to_double(k[4][i]);
      ei += h * e6 * to_double(k[5][i]);
      ei += h * e7 * to_double(k[6][i]);
      const double sc = i < nw ? w_abs + cfg.rel_tol * w_scale : m_abs + cfg.rel_tol * m_scale;
      err = std::max(err, std::fabs(ei) / sc);
    }
    const bool accepted = err <= 1.0 && std::isfinite(err);
    if (accepted) {
      t += h;
      std::swap(y, ynew);
      std::swap(k[0], k[6]);
      ++traj.steps;
    } else {
      ++traj.rejected_steps;
    }
    const double factor = std::isfinite(err) ? (err > 0.0 ? 0.9 * std::pow(err, -0.2) : 5.0) : 0.2;
    const double proposal = std::min(h_max, h * std::clamp(factor, 0.2, 5.0));
    h = accepted && last ? std::max(h_full, proposal) : proposal;
    if (!accepted && h < cfg.min_step * span) {
      std::ostringstream msg;
      msg << "step size underflow at t = " << t << " (h = " << h << ")";
      throw StepSizeUnderflow(msg.str(), traj);
    }
  }
  h_state = h;
  // Mirror to keep V exactly symmetric.
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) st.w[i * n + j] = i <= j ? y[i * n + j] : y[j * n + i];
  }
  for (std::size_t i = 0; i < n; ++i) st.mu[i] = to_double(y[nw + i]);
}

template <WorkingReal Real>
Trajectory run(const LinearModel& model, const std::pair<MeanVector, CovarianceMatrix<double>>& init, double t_end,
               const IntegratorConfig& cfg) {
  const PrecisionPolicy& policy = cfg.precision;
  const std::size_t n = model.dim();
  if (init.second.dim() != n || init.first.quadratures.size() != n) {
    throw ConfigError("initial state dimension does not match the model");
  }

  long bits = 53;
  if constexpr (std::same_as<Real, BigFloat>) {
    bits = policy.mode == PrecisionMode::Adaptive ? policy.base_bits : policy.bits;
  }
  PrecisionScope scope(std::max<long>(bits, 53));

  State<Real> st;
  st.n = n;
  st.s = init.second.scale_exponent();
  for (double x : init.second.entries()) st.w.push_back(Real(x));
  st.mu = init.first.quadratures;
  st.e = init.first.scale_exponent;
  st.tmp.assign(n * n, Real(0.0));
  st.next.assign(n * n, Real(0.0));
  st.scratch = Real(0.0);

  Trajectory traj;
  traj.method = to_string(cfg.method);
  traj.precision = policy.to_string();
  traj.stride = effective_stride(model, cfg);
  traj.max_precision_bits = bits;
  traj.min_margin_bits = INFINITY;

  double last_log2_eta = -1.0;
  auto range_bits = [&](double log2_eta) {
    long top = 0;
    bool any = false;
    for (const auto& x : st.w) {
      if (x == 0.0) continue;
      const long ex = binary_exponent(x);
      if (!any || ex > top) top = ex;
      any = true;
    }
    const double log2_max = any ? static_cast<double>(top + st.s) : 0.0;
    return std::max(0.0, log2_max - std::min(-1.0, log2_eta));
  };
  auto escalate = [&](double range, double t) {
    if constexpr (std::same_as<Real, BigFloat>) {
      if (policy.mode != PrecisionMode::Adaptive) return;
      const long need = policy.required_bits(range);
      if (need <= bits) return;
      if (need > policy.max_bits) {
        std::ostringstream msg;
        msg << "adaptive precision needs " << need << " bits at t = " << t << ", above the cap of "
            << policy.max_bits;
        traj.status = "precision_exhausted";
        traj.diagnostic = msg.str();
        throw PrecisionExhausted(msg.str(), traj);
      }
      long target = need + std::max<long>(64, need / 8);
      target = std::min(policy.max_bits, (target + 63) / 64 * 64);
      bits = target;
      PrecisionScope::raise_to(bits);
      st.set_bits(bits);
      traj.max_precision_bits = std::max(traj.max_precision_bits, bits);
    } else {
      (void)range;
      (void)t;
    }
  };

  auto record = [&](double t) {
    escalate(range_bits(last_log2_eta), t);
    TrajectorySample sample;
    sample.t = t;
    sample.mean.quadratures = st.mu;
    sample.mean.scale_exponent = st.e;
    sample.mean.displacements = model.displacements(t);
    const CovarianceMatrix<Real> v = st.covariance();
    try {
      sample.measures = measures::evaluate(t, sample.mean, v);
    } catch (const NonPhysicalCM& ex) {
      std::ostringstream msg;
      msg << "non-physical covariance matrix at t = " << t << ": " << ex.what();
      traj.status = "non_physical";
      traj.diagnostic = msg.str();
      throw IntegrationError(msg.str(), traj);
    }
    last_log2_eta = static_cast<double>(std::log2(sample.measures.eta_minus));
    if (!std::isfinite(last_log2_eta)) last_log2_eta = -1e6;
    const double range = range_bits(last_log2_eta);
    sample.precision_bits = bits;
    sample.margin_bits = static_cast<double>(bits) - range;
    traj.min_margin_bits = std::min(traj.min_margin_bits, sample.margin_bits);
    sample.covariance = v.template convert<double>();
    sample.covariance.normalize();
    traj.samples.push_back(std::move(sample));
    escalate(range, t);
  };

  record(0.0);
  if (!(t_end > 0.0)) return traj;

  const double h = traj.stride;
  const auto full = static_cast<long>(std::floor(t_end / h + 1e-9));
  const bool periodic = is_periodic(model);
  const long phases = periodic ? std::lround(model.oscillation_period() / h) : 1;
  std::map<long, AffineChannel> cache;
  double dopri_h = 0.0;

  auto channel_for = [&](double t0, double t1, long index) -> AffineChannel {
    const bool cacheable = (periodic || !model.time_dependent()) && index >= 0;
    const long key = periodic ? index % phases : 0;
    if (cacheable) {
      auto it = cache.find(key);
      if (it != cache.end()) return it->second;
    }
    ChannelStats cs;
    double base = model.time_dependent() ? t0 : 0.0;
    if (periodic && index >= 0) base = static_cast<double>(key) * h;
    AffineChannel ch;
    try {
      ch = build_channel(model, base, base + (t1 - t0), cfg, &cs);
    } catch (const StepSizeUnderflow& ex) {
      traj.status = "step_size_underflow";
      traj.diagnostic = ex.what();
      throw StepSizeUnderflow(ex.what(), traj);
    }
    traj.steps += cs.steps;
    traj.rejected_steps += cs.rejected;
    ++traj.channels_built;
    if (cacheable) cache.emplace(key, ch);
    return ch;
  };

  auto advance = [&](double t0, double t1, long index) {
    if (cfg.method == Method::Magnus4) {
      apply_channel(st, channel_for(t0, t1, index));
    } else {
      dopri_advance(st, model, t0, t1, cfg, traj, dopri_h);
    }
    st.rebase(cfg.rebase_exponent);
  };

  for (long k = 0; k < full; ++k) {
    const double t0 = static_cast<double>(k) * h;
    const double t1 = static_cast<double>(k + 1) * h;
    advance(t0, t1, k);
    record(t1);
  }
  const double done = static_cast<double>(full) * h;
  if (t_end - done > 1e-9 * h) {
    advance(done, t_end, -1);
    record(t_end);
  }
  if (traj.min_margin_bits < cfg.healthy_margin_bits && traj.diagnostic.empty()) {
    std::ostringstream msg;
    msg << "precision margin dropped to " << traj.min_margin_bits << " bits";
    traj.diagnostic = msg.str();
  }
  return traj;
}

}  // namespace

Trajectory integrate(const LinearModel& model, const std::pair<MeanVector, CovarianceMatrix<double>>& init,
                     double t_end, const IntegratorConfig& cfg) {
  cfg.validate();
  if (!(t_end > 0.0)) throw ConfigError("t_end must be positive");
  if (cfg.precision.mode == PrecisionMode::FixedDouble) return run<double>(model, init, t_end, cfg);
  return run<BigFloat>(model, init, t_end, cfg);
}

}  // namespace optoent::dynamics
