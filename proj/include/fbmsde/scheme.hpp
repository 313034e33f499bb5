#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fbmsde/errors.hpp"
#include "fbmsde/fbm_kernels.hpp"
#include "fbmsde/grid.hpp"
#include "fbmsde/hurst.hpp"
#include "fbmsde/lamperti.hpp"
#include "fbmsde/prediction.hpp"
#include "fbmsde/rng.hpp"

namespace fbmsde::scheme {

using DriftFn = std::function<double(double)>;

struct SchemeConfig {
  double h = 0.1;             // method parameter, in (0, 1)
  double sigma_const = 1.0;   // noise scale; 0 runs the scheme noise-free
  double y_threshold = 10.0;  // stop when |Y| reaches this level
  double horizon = 1e6;       // deterministic time cap S
  long max_steps = 100000;
  double overflow_cap = 1e300;
  std::uint64_t seed = 0;
  double alpha = 1.2;          // tail-bracket parameter, > 1
  long max_history = 100000;   // prediction history hard cap

  void validate(double y0) const {
    if (!(h > 0.0 && h < 1.0))
      throw config_error("scheme.SchemeConfig: h must lie in (0, 1), got " + std::to_string(h));
    if (!(sigma_const >= 0.0))
      throw config_error("scheme.SchemeConfig: sigma_const must be >= 0");
    if (!(y_threshold > std::abs(y0)))
      throw config_error("scheme.SchemeConfig: y_threshold must exceed |y(0)| = " +
                         std::to_string(std::abs(y0)));
    if (!(horizon > 0.0)) throw config_error("scheme.SchemeConfig: horizon must be > 0");
    if (max_steps < 1) throw config_error("scheme.SchemeConfig: max_steps must be >= 1");
    if (!(overflow_cap > y_threshold))
      throw config_error("scheme.SchemeConfig: overflow_cap must exceed y_threshold");
    if (!(alpha > 1.0)) throw config_error("scheme.SchemeConfig: alpha must be > 1");
    if (max_history < 2) throw config_error("scheme.SchemeConfig: max_history must be >= 2");
  }
};

enum class StopReason { ThresholdHit, HorizonReached, StepCap, Overflow };

inline const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::ThresholdHit: return "ThresholdHit";
    case StopReason::HorizonReached: return "HorizonReached";
    case StopReason::StepCap: return "StepCap";
    case StopReason::Overflow: return "Overflow";
  }
  return "?";
}

/// Full record of one adaptive run. times has one more entry than tau.
struct AdaptiveTrajectory {
  double h = 0.0;                        // scheme parameter the run used
  std::vector<double> times;             // t_k
  std::vector<double> tau;               // tau_k
  std::vector<double> y_values;          // Y^h(t_k)
  std::vector<double> noise_increments;  // B(t_{k+1}) - B(t_k)
  std::vector<double> x_values;          // filled by map_to_x
  std::optional<std::size_t> x_truncated_at;
  StopReason stop_reason = StopReason::StepCap;

  std::size_t steps() const { return tau.size(); }
};

/// Source of driving-noise increments over the scheme's random steps.
struct NoiseSource {
  virtual ~NoiseSource() = default;
  virtual double increment(double t_from, double t_to) = 0;
};

/// Production noise: each increment is drawn from the conditional law given
/// the discrete history sampled so far (prediction formula).
class PredictionNoise final : public NoiseSource {
 public:
  PredictionNoise(const HurstParam& H, RandomStream rng, long max_history = 100000)
      : h_(H), rng_(std::move(rng)), max_history_(max_history),
        history_(SampledPath::at_origin()) {}

  double increment(double t_from, double t_to) override {
    if (!(t_from >= history_.last_time() - kMinTimeSeparation))
      throw numerical_error("scheme.adaptive_step: noise requested out of sequence (from=" +
                            std::to_string(t_from) + ", history end=" +
                            std::to_string(history_.last_time()) + ")");
    // steps below the grid resolution carry sub-roundoff variance
    // (tau^2H); the increment is numerically zero and the history freezes
    if (t_to - history_.last_time() < kMinTimeSeparation) return 0.0;
    if (static_cast<long>(history_.size()) >= max_history_)
      throw resource_error("scheme.adaptive_step: prediction history cap (" +
                           std::to_string(max_history_) + " points) exceeded");
    prediction::PredictionQuery q(history_, t_to);
    const double inc = prediction::sample_increment(q, h_, rng_);
    history_.append(t_to, history_.last_value() + inc);
    return inc;
  }

  const SampledPath& history() const { return history_; }

 private:
  HurstParam h_;
  RandomStream rng_;
  long max_history_;
  SampledPath history_;
};

/// Shared-path noise for convergence studies: all consumers read one lazily
/// grown exact fBm path, so different step sizes see the same driving path.
class SharedPathNoise final : public NoiseSource {
 public:
  explicit SharedPathNoise(fbm::ExactSampler& shared) : shared_(shared) {}

  double increment(double t_from, double t_to) override {
    return shared_.value_at(t_to) - shared_.value_at(t_from);
  }

 private:
  fbm::ExactSampler& shared_;
};

/// Scripted increments for unit tests.
class FixedNoise final : public NoiseSource {
 public:
  explicit FixedNoise(std::vector<double> increments) : incs_(std::move(increments)) {}

  double increment(double, double) override {
    if (next_ >= incs_.size())
      throw numerical_error("scheme.FixedNoise: scripted increments exhausted");
    return incs_[next_++];
  }

 private:
  std::vector<double> incs_;
  std::size_t next_ = 0;
};

/// One adaptive step, exposed for tests: tau_k = h / g(Y_k) so the drift
/// contributes exactly h, then Y advances by h + sigma * dB.
struct StepResult {
  double tau;
  double t_next;
  double db;
  double y_next;
};

inline StepResult adaptive_step(double t, double y, std::size_t k, const DriftFn& g,
                                const SchemeConfig& cfg, NoiseSource& noise) {
  const double gv = g(y);
  if (!std::isfinite(gv) || !(gv > 0.0))
    throw numerical_error("scheme.adaptive_step: drift nonpositive or nonfinite (g(" +
                          std::to_string(y) + ") = " + std::to_string(gv) + " at step " +
                          std::to_string(k) + ")");
  StepResult r;
  r.tau = cfg.h / gv;
  r.t_next = t + r.tau;
  r.db = cfg.sigma_const > 0.0 ? noise.increment(t, r.t_next) : 0.0;
  r.y_next = y + cfg.h + cfg.sigma_const * r.db;
  return r;
}

/// Iterate the scheme until a threshold hit, the horizon, the step cap, or
/// overflow. Deterministic given the noise source.
inline AdaptiveTrajectory run_adaptive(const DriftFn& g, double y0, const SchemeConfig& cfg,
                                       NoiseSource& noise) {
  cfg.validate(y0);
  AdaptiveTrajectory traj;
  traj.h = cfg.h;
  traj.times.push_back(0.0);
  traj.y_values.push_back(y0);
  double t = 0.0, y = y0;
  for (std::size_t k = 0;; ++k) {
    const StepResult s = adaptive_step(t, y, k, g, cfg, noise);
    traj.tau.push_back(s.tau);
    traj.noise_increments.push_back(s.db);
    traj.times.push_back(s.t_next);
    traj.y_values.push_back(s.y_next);
    t = s.t_next;
    y = s.y_next;
    if (!std::isfinite(y) || std::abs(y) > cfg.overflow_cap) {
      traj.stop_reason = StopReason::Overflow;
      break;
    }
    if (std::abs(y) >= cfg.y_threshold) {
      traj.stop_reason = StopReason::ThresholdHit;
      break;
    }
    if (t >= cfg.horizon) {
      traj.stop_reason = StopReason::HorizonReached;
      break;
    }
    if (static_cast<long>(k) + 1 >= cfg.max_steps) {
      traj.stop_reason = StopReason::StepCap;
      break;
    }
  }
  return traj;
}

/// Convenience production run: Lamperti model drift with prediction noise.
inline AdaptiveTrajectory run_adaptive(const lamperti::LampertiModel& model,
                                       const SchemeConfig& cfg, const HurstParam& H,
                                       RandomStream rng) {
  PredictionNoise noise(H, std::move(rng), cfg.max_history);
  DriftFn g = [&model](double y) { return model.drift(y); };
  return run_adaptive(g, model.y0(), cfg, noise);
}

/// First time the recorded path reaches |Y| >= level. Within a step only the
/// drift ramp (which gains exactly h over the step) is interpolated; the
/// endpoint values carry the noise jumps.
inline std::optional<double> hitting_time(const AdaptiveTrajectory& traj, double level) {
  if (!(level > 0.0))
    throw std::domain_error("scheme.hitting_time: level must be > 0");
  for (std::size_t k = 0; k < traj.y_values.size(); ++k) {
    const double yk = traj.y_values[k];
    if (std::abs(yk) >= level) return traj.times[k];
    if (k < traj.tau.size() && traj.h > 0.0) {
      const double ramp_end = yk + traj.h;
      if (yk < level && level <= ramp_end)
        return traj.times[k] + (level - yk) * traj.tau[k] / traj.h;
    }
  }
  return std::nullopt;
}

struct TailBracket {
  double t_last = 0.0;
  double tail_lower = 0.0;
  double tail_upper = 0.0;
};

/// Numerically summed tail sum_{j>=k} h / g(scale * h * j), truncated when
/// terms fall below 1e-16 of the partial sum. Drifts of exponential type
/// converge within a handful of terms; for slowly decaying polynomial tails
/// the remainder after 1e5 direct terms is completed with the integral
/// comparison (Euler-Maclaurin, f decreasing), whose improper integral runs
/// over doubling intervals with geometric extrapolation. A tail whose
/// doubling contributions fail to decay does not converge at all.
inline double tail_sum(const DriftFn& g, double h, std::size_t k_start, double scale) {
  auto term_at = [&](double x) {
    const double gv = g(scale * h * x);
    if (!std::isfinite(gv) || !(gv > 0.0))
      throw numerical_error("scheme.explosion_time_estimate: drift nonpositive in tail at j=" +
                            std::to_string(static_cast<long long>(x)));
    return h / gv;
  };

  double sum = 0.0;
  const std::size_t direct_cap = 100000;
  std::size_t j = k_start;
  for (std::size_t n = 0; n < direct_cap; ++n, ++j) {
    const double term = term_at(static_cast<double>(j));
    sum += term;
    if (n > 0 && term < 1e-16 * sum) return sum;
  }

  // integral-comparison completion from x = j on
  const double x0 = static_cast<double>(j);
  double integral = 0.0;
  double prev_contrib = -1.0;
  for (int k = 0; k < 60; ++k) {
    const double lo = x0 * std::pow(2.0, k);
    const double hi = 2.0 * lo;
    const double c = quad::gl_with_fallback(term_at, lo, hi, 1e-10).value;
    integral += c;
    if (prev_contrib > 0.0 && c < 1e-16 * integral) {
      return sum + integral + 0.5 * term_at(x0);
    }
    if (k == 59) {
      const double ratio = prev_contrib > 0.0 ? c / prev_contrib : 1.0;
      if (ratio <= 0.999) {
        integral += c * ratio / (1.0 - ratio);
        return sum + integral + 0.5 * term_at(x0);
      }
    }
    prev_contrib = c;
  }
  throw numerical_error(
      "scheme.explosion_time_estimate: tail series did not converge within 1e7 terms "
      "(drift grows too slowly; Osgood criterion violated?)");
}

/// Interval estimate [t_last + tail_lower, t_last + tail_upper] for the
/// scheme's explosion time, valid on threshold-stopped trajectories.
inline TailBracket explosion_time_estimate(const AdaptiveTrajectory& traj, const DriftFn& g,
                                           double h, double alpha = 1.2) {
  if (traj.stop_reason != StopReason::ThresholdHit)
    throw std::domain_error(
        "scheme.explosion_time_estimate: requires a ThresholdHit-stopped trajectory");
  if (!(alpha > 1.0))
    throw std::domain_error("scheme.explosion_time_estimate: alpha must be > 1");
  TailBracket b;
  b.t_last = traj.times.back();
  const std::size_t k = traj.steps();
  b.tail_lower = tail_sum(g, h, k, alpha);
  b.tail_upper = tail_sum(g, h, k, 1.0 / alpha);
  return b;
}

/// Y^h(t_k) / (h k) for k = 1..K; converges to 1 on exploding paths.
inline std::vector<double> ratio_diagnostic(const AdaptiveTrajectory& traj, double h) {
  std::vector<double> r;
  r.reserve(traj.steps());
  for (std::size_t k = 1; k < traj.y_values.size(); ++k)
    r.push_back(traj.y_values[k] / (h * static_cast<double>(k)));
  return r;
}

/// Back-transform X^h = Theta^-1(Y^h). A range error truncates x_values at
/// the offending point and records the index.
inline void map_to_x(AdaptiveTrajectory& traj, const lamperti::LampertiModel& model) {
  traj.x_values.clear();
  traj.x_truncated_at.reset();
  traj.x_values.reserve(traj.y_values.size());
  for (std::size_t k = 0; k < traj.y_values.size(); ++k) {
    try {
      traj.x_values.push_back(k == 0 ? model.base.x0 : model.theta_inverse(traj.y_values[k]));
    } catch (const std::range_error&) {
      traj.x_truncated_at = k;
      break;
    }
  }
}

/// Clamp the drift outside [-2M, 2M]; preserves monotonicity, bounds g.
inline DriftFn truncate_drift(const DriftFn& g, double m) {
  if (!(m > 0.0)) throw std::domain_error("scheme.truncate_drift: M must be > 0");
  const double upper = g(2.0 * m);
  const double lower = g(-2.0 * m);
  return [g, m, upper, lower](double y) {
    if (y >= 2.0 * m) return upper;
    if (y <= -2.0 * m) return lower;
    return g(y);
  };
}

}  // namespace fbmsde::scheme
