#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "fbmsde/errors.hpp"
#include "fbmsde/fbm_kernels.hpp"
#include "fbmsde/grid.hpp"
#include "fbmsde/hurst.hpp"
#include "fbmsde/quadrature.hpp"
#include "fbmsde/rng.hpp"

namespace fbmsde::prediction {

/// A future-value query against an observed history on [0, u]. The history
/// must be anchored at the origin (B(0) = 0) and u is its last grid time.
struct PredictionQuery {
  const SampledPath& history;
  double u;
  double target;

  PredictionQuery(const SampledPath& hist, double target_time)
      : history(hist), u(hist.empty() ? 0.0 : hist.last_time()), target(target_time) {
    if (hist.empty() || hist.time(0) != 0.0 || hist.value(0) != 0.0)
      throw std::domain_error(
          "prediction.PredictionQuery: history must start at time 0 with value 0");
    if (!(target > u))
      throw std::domain_error("prediction.PredictionQuery: target must exceed the last "
                              "observed time u=" + std::to_string(u));
  }
};

namespace detail {

// number of variance clampings observed (round-off diagnostics)
inline std::atomic<std::uint64_t>& clamp_counter() {
  static std::atomic<std::uint64_t> n{0};
  return n;
}

}  // namespace detail

inline std::uint64_t clamp_count() { return detail::clamp_counter().load(); }

/// Weight of the past increment dB(s) in the conditional mean of B(t) given
/// the path up to u. Strictly negative for H > 1/2 and identically 0 at
/// H = 1/2.
inline double psi_kernel(double t, double s, double u, const HurstParam& H,
                         double rel_tol = 1e-8) {
  if (H.is_brownian()) return 0.0;
  if (!(s > 0.0) || !(s < u))
    throw std::domain_error("prediction.psi_kernel: s must lie strictly inside (0, u)");
  if (!(u < t)) throw std::domain_error("prediction.psi_kernel: requires u < t");
  const double a = H.value() - 0.5;
  const double pi = 3.14159265358979323846;
  const double pre = -(std::sin(pi * a) / pi) * std::pow(s, -a) * std::pow(u - s, -a);

  // int_u^t z^(H-1/2) (z-u)^(H-1/2) / (z-s) dz with the quartic grading.
  // The denominator is formed as (u-s) + len*xi^4, never as z - s: for the
  // scheme's late micro-steps both terms can sit ten orders of magnitude
  // below u and the direct difference loses all relative accuracy.
  const double len = t - u;
  const double gap = u - s;
  const double front = 4.0 * std::pow(len, a + 1.0);
  const fbm::detail::GradedNodePair& nodes = fbm::detail::graded_nodes(H.value());
  auto quadrature_sum = [&](const fbm::detail::GradedNodes& nd) {
    double acc = 0.0;
    for (std::size_t i = 0; i < nd.w.size(); ++i) {
      const double off = len * nd.xi4[i];
      acc += nd.w[i] * std::pow(u + off, a) * nd.xi_pow[i] / (gap + off);
    }
    return front * acc;
  };
  const double i64 = quadrature_sum(nodes.n64);
  const double i32 = quadrature_sum(nodes.n32);
  double integral = i64;
  const double scale = std::max(std::abs(i64), std::numeric_limits<double>::min());
  if (std::abs(i64 - i32) > rel_tol * scale) {
    auto f = [&](double xi) {
      const double xi2 = xi * xi;
      const double off = len * xi2 * xi2;
      return front * std::pow(u + off, a) * std::pow(xi, 4.0 * H.value() + 1.0) / (gap + off);
    };
    integral = quad::gl_with_fallback(f, 0.0, 1.0, rel_tol).value;
  }
  return pre * integral;
}

/// Conditional mean of B(target) given the history: B(u) minus the midpoint
/// Riemann sum of Psi against the observed increments. Evaluating Psi at
/// interval midpoints keeps clear of the integrable singularities at s = 0
/// and s = u.
inline double predict_mean(const PredictionQuery& q, const HurstParam& H) {
  const double bu = q.history.last_value();
  if (H.is_brownian() || q.history.size() < 2) return bu;

  const double t = q.target;
  const double u = q.u;
  const double a = H.value() - 0.5;
  const double pi = 3.14159265358979323846;
  const double sin_factor = -(std::sin(pi * a) / pi);
  const double len = t - u;
  const double front = 4.0 * std::pow(len, a + 1.0);

  // z-nodes are shared by every midpoint; only the 1/(z-s) factor varies.
  // Denominators are formed as (u-m) + node offset to stay accurate when
  // the step is many orders of magnitude shorter than u.
  const fbm::detail::GradedNodePair& nodes = fbm::detail::graded_nodes(H.value());
  const std::size_t n64 = nodes.n64.w.size();
  const std::size_t n32 = nodes.n32.w.size();
  std::vector<double> off64(n64), w64(n64), off32(n32), w32(n32);
  for (std::size_t i = 0; i < n64; ++i) {
    off64[i] = len * nodes.n64.xi4[i];
    w64[i] = front * nodes.n64.w[i] * std::pow(u + off64[i], a) * nodes.n64.xi_pow[i];
  }
  for (std::size_t i = 0; i < n32; ++i) {
    off32[i] = len * nodes.n32.xi4[i];
    w32[i] = front * nodes.n32.w[i] * std::pow(u + off32[i], a) * nodes.n32.xi_pow[i];
  }

  double acc = 0.0;
  for (std::size_t j = 0; j + 1 < q.history.size(); ++j) {
    const double db = q.history.value(j + 1) - q.history.value(j);
    if (db == 0.0) continue;
    const double m = 0.5 * (q.history.time(j) + q.history.time(j + 1));
    const double gap = u - m;
    double i64 = 0.0, i32 = 0.0;
    for (std::size_t i = 0; i < n64; ++i) i64 += w64[i] / (gap + off64[i]);
    for (std::size_t i = 0; i < n32; ++i) i32 += w32[i] / (gap + off32[i]);
    double integral = i64;
    const double scale = std::max(std::abs(i64), std::numeric_limits<double>::min());
    if (std::abs(i64 - i32) > 1e-8 * scale) {
      auto f = [&](double xi) {
        const double xi2 = xi * xi;
        const double off = len * xi2 * xi2;
        return front * std::pow(u + off, a) * std::pow(xi, 4.0 * H.value() + 1.0) / (gap + off);
      };
      integral = quad::gl_with_fallback(f, 0.0, 1.0, 1e-8).value;
    }
    const double psi = sin_factor * std::pow(m, -a) * std::pow(gap, -a) * integral;
    acc += psi * db;
  }
  return bu - acc;
}

/// Conditional covariance r(t1, t2 | u) = R(t1, t2) - int_0^u K(t1,v) K(t2,v) dv.
/// For t1 = t2 small negative round-off (above -1e-6) is clamped to zero and
/// counted; anything more negative indicates a quadrature inconsistency.
inline double predict_variance(double t1, double t2, double u, const HurstParam& H) {
  if (!(u >= 0.0) || !(t1 >= u) || !(t2 >= u))
    throw std::domain_error("prediction.predict_variance: requires 0 <= u <= t1, t2");
  const double r = fbm::covariance(t1, t2, H);
  if (u == 0.0) return r;
  const double result = r - fbm::kk_integral(t1, t2, u, H);
  if (t1 == t2) {
    if (result < -1e-6)
      throw numerical_error("prediction.predict_variance: conditional variance " +
                            std::to_string(result) + " below -1e-6 (quadrature inconsistency)");
    if (result < 0.0) {
      detail::clamp_counter().fetch_add(1);
      return 0.0;
    }
  }
  return result;
}

/// Draw the increment B(target) - B(u) from its conditional Gaussian law.
/// Exactly one Gaussian is consumed per call regardless of the variance.
inline double sample_increment(const PredictionQuery& q, const HurstParam& H,
                               RandomStream& rng) {
  const double mu = predict_mean(q, H) - q.history.last_value();
  const double var = predict_variance(q.target, q.target, q.u, H);
  if (!std::isfinite(mu) || !std::isfinite(var))
    throw numerical_error("prediction.sample_increment: nonfinite conditional law at u=" +
                          std::to_string(q.u) + " target=" + std::to_string(q.target));
  return mu + std::sqrt(var) * rng.next_gaussian();
}

}  // namespace fbmsde::prediction
