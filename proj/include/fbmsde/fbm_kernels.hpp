#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fbmsde/errors.hpp"
#include "fbmsde/grid.hpp"
#include "fbmsde/hurst.hpp"
#include "fbmsde/quadrature.hpp"
#include "fbmsde/rng.hpp"

namespace fbmsde::fbm {

/// fBm covariance R_H(t, s) = (t^2H + s^2H - |t-s|^2H) / 2.
inline double covariance(double t, double s, const HurstParam& H) {
  if (!(t >= 0.0) || !(s >= 0.0))
    throw std::domain_error("fbm_kernels.fbm_covariance: arguments must be >= 0");
  const double th = H.two_h();
  return 0.5 * (std::pow(t, th) + std::pow(s, th) - std::pow(std::abs(t - s), th));
}

namespace detail {

// Gauss-Legendre nodes premapped to [0, 1] together with the powers the
// kernel integrands need after the graded substitution z = lo + (hi-lo)*xi^4.
// The quartic grading absorbs the (z-lo)^(H-1/2) endpoint factor: the
// transformed integrand behaves like xi^(4H+1), which fixed order-64
// Gauss-Legendre resolves below 1e-10 relative for all H in [1/2, 1).
struct GradedNodes {
  std::vector<double> xi4;     // xi^4
  std::vector<double> xi_pow;  // xi^(4H+1)
  std::vector<double> w;       // weight * (node scale 1/2)
};

struct GradedNodePair {
  GradedNodes n32, n64;
};

inline GradedNodes make_graded(int order, double h_value) {
  const quad::GaussLegendre& g = quad::gauss_legendre(order);
  GradedNodes out;
  out.xi4.resize(order);
  out.xi_pow.resize(order);
  out.w.resize(order);
  for (int i = 0; i < order; ++i) {
    const double xi = 0.5 + 0.5 * g.nodes[i];
    out.xi4[i] = xi * xi * xi * xi;
    out.xi_pow[i] = std::pow(xi, 4.0 * h_value + 1.0);
    out.w[i] = 0.5 * g.weights[i];
  }
  return out;
}

inline const GradedNodePair& graded_nodes(double h_value) {
  thread_local std::vector<std::pair<double, GradedNodePair>> cache;
  for (const auto& entry : cache)
    if (entry.first == h_value) return entry.second;
  cache.push_back({h_value, {make_graded(32, h_value), make_graded(64, h_value)}});
  return cache.back().second;
}

// int_{lo}^{hi} z^(H-3/2) (z-s)^(H-1/2) dz with lo = s: the quartic grading
// absorbs the (z-s) factor. Accurate while hi/lo stays O(1).
inline double volterra_inner_graded(double t_piece, double s, const HurstParam& H,
                                    double rel_tol) {
  const double a = H.value() - 0.5;
  const double len = t_piece - s;
  const double front = 4.0 * std::pow(len, a + 1.0);
  const double ex = H.value() - 1.5;
  const GradedNodePair& nodes = graded_nodes(H.value());

  auto quadrature_sum = [&](const GradedNodes& nd) {
    double acc = 0.0;
    for (std::size_t i = 0; i < nd.w.size(); ++i) {
      const double z = s + len * nd.xi4[i];
      acc += nd.w[i] * std::pow(z, ex) * nd.xi_pow[i];
    }
    return front * acc;
  };

  const double i64 = quadrature_sum(nodes.n64);
  const double i32 = quadrature_sum(nodes.n32);
  const double scale = std::max(std::abs(i64), std::numeric_limits<double>::min());
  if (std::abs(i64 - i32) <= rel_tol * scale) return i64;

  // escalation: adaptive bisection on the graded variable
  auto f = [&](double xi) {
    const double xi2 = xi * xi;
    const double z = s + len * xi2 * xi2;
    return front * std::pow(z, ex) * std::pow(xi, 4.0 * H.value() + 1.0);
  };
  return quad::gl_with_fallback(f, 0.0, 1.0, rel_tol).value;
}

// inner integral of the Volterra kernel: int_s^t z^(H-3/2) (z-s)^(H-1/2) dz.
// When t >> s the integrand spans many decades of z, so the tail [2s, t] is
// covered by geometric panels with a log substitution (the transformed
// integrand is a mild exponential, which fixed-order Gauss-Legendre nails).
inline double volterra_inner(double t, double s, const HurstParam& H, double rel_tol) {
  if (t <= 2.0 * s) return volterra_inner_graded(t, s, H, rel_tol);
  double total = volterra_inner_graded(2.0 * s, s, H, rel_tol);

  const double a = H.value() - 0.5;
  const double ex = H.value() - 1.5;
  const double log_ratio = std::log(t / (2.0 * s));
  const int n_panels = std::max(1, static_cast<int>(std::ceil(log_ratio / 20.0)));
  for (int p = 0; p < n_panels; ++p) {
    const double za = 2.0 * s * std::exp(log_ratio * p / n_panels);
    const double zb = 2.0 * s * std::exp(log_ratio * (p + 1) / n_panels);
    const double lr = std::log(zb / za);
    // z = za e^(lr w), dz = z lr dw
    auto f = [&](double w) {
      const double z = za * std::exp(lr * w);
      return std::pow(z, ex) * std::pow(z - s, a) * z * lr;
    };
    const double i64 = quad::gl_fixed(f, 0.0, 1.0, 64);
    const double i32 = quad::gl_fixed(f, 0.0, 1.0, 32);
    const double scale = std::max(std::abs(i64), std::numeric_limits<double>::min());
    total += (std::abs(i64 - i32) <= rel_tol * scale)
                 ? i64
                 : quad::gl_with_fallback(f, 0.0, 1.0, rel_tol).value;
  }
  return total;
}

// kernel without the d_H prefactor
inline double volterra_bracket(double t, double s, const HurstParam& H, double rel_tol) {
  const double a = H.value() - 0.5;
  const double term1 = std::pow(t / s, a) * std::pow(t - s, a);
  const double term2 = a * std::pow(s, -a) * volterra_inner(t, s, H, rel_tol);
  return term1 - term2;
}

}  // namespace detail

/// Normalization constant d_H, pinned by the calibration identity
/// int_0^t K(t,v)^2 dv = t^2H (evaluated at t = 1 with tanh-sinh
/// quadrature; self-similarity extends it to every t). Memoized per H.
inline double kernel_constant(const HurstParam& H) {
  if (H.is_brownian()) return 1.0;
  static std::mutex mu;
  static std::vector<std::pair<double, double>> cache;
  {
    std::lock_guard<std::mutex> lock(mu);
    for (const auto& [h, d] : cache)
      if (h == H.value()) return d;
  }
  auto sq = [&](double v) {
    const double b = detail::volterra_bracket(1.0, v, H, 1e-10);
    return b * b;
  };
  const double j = quad::tanh_sinh(sq, 0.0, 1.0, 1e-12, 12).value;
  if (!(j > 0.0) || !std::isfinite(j))
    throw numerical_error("fbm_kernels.kernel_constant: calibration integral failed for H=" +
                          std::to_string(H.value()));
  const double d = 1.0 / std::sqrt(j);
  std::lock_guard<std::mutex> lock(mu);
  cache.emplace_back(H.value(), d);
  return d;
}

/// Volterra kernel K(t, s) of fBm; zero on s >= t, singular at s = 0.
inline double volterra_kernel(double t, double s, const HurstParam& H, double rel_tol = 1e-8) {
  if (!(s > 0.0))
    throw std::domain_error("fbm_kernels.volterra_kernel: s must be > 0 (kernel singular at 0)");
  if (s >= t) return 0.0;
  if (H.is_brownian()) return 1.0;
  return kernel_constant(H) * detail::volterra_bracket(t, s, H, rel_tol);
}

/// int_0^u K(t1, v) K(t2, v) dv by tanh-sinh quadrature (the integrand has
/// an integrable v^(1-2H) singularity at v = 0).
inline double kk_integral(double t1, double t2, double u, const HurstParam& H,
                          double rel_tol = 1e-9, double inner_tol = 1e-8) {
  if (!(u > 0.0)) return 0.0;
  if (!(u <= t1 + 1e-15) || !(u <= t2 + 1e-15))
    throw std::domain_error("fbm_kernels.kk_integral: u must not exceed min(t1, t2)");
  if (H.is_brownian()) {
    return quad::tanh_sinh([](double) { return 1.0; }, 0.0, u, rel_tol).value;
  }
  const double d = kernel_constant(H);
  const double d2 = d * d;
  if (t1 == t2) {
    auto f = [&](double v) {
      const double b = detail::volterra_bracket(t1, v, H, inner_tol);
      return d2 * b * b;
    };
    return quad::tanh_sinh(f, 0.0, u, rel_tol).value;
  }
  auto f = [&](double v) {
    return d2 * detail::volterra_bracket(t1, v, H, inner_tol) *
           detail::volterra_bracket(t2, v, H, inner_tol);
  };
  return quad::tanh_sinh(f, 0.0, u, rel_tol).value;
}

/// Relative defect of the representation identity against R_H(t, s).
inline double kernel_consistency_defect(double t, double s, const HurstParam& H) {
  const double r = covariance(t, s, H);
  const double i = kk_integral(t, s, std::min(t, s), H);
  return std::abs(i - r) / std::abs(r);
}

/// Dense covariance matrix over a grid, row-major.
inline std::vector<double> joint_covariance_matrix(const TimeGrid& grid, const HurstParam& H) {
  if (grid.empty())
    throw std::domain_error("fbm_kernels.joint_covariance_matrix: grid must be nonempty");
  const std::size_t n = grid.size();
  std::vector<double> c(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      const double v = covariance(grid[i], grid[j], H);
      c[i * n + j] = v;
      c[j * n + i] = v;
    }
  return c;
}

/// Packed lower-triangular Cholesky factor with incremental row appends.
/// On a nonpositive pivot the diagonal is jittered once by 1e-12 times the
/// largest diagonal entry; a second failure raises with the pivot index.
class CholeskyFactor {
 public:
  CholeskyFactor() = default;

  static CholeskyFactor from_covariance(const std::vector<double>& cov, std::size_t n) {
    CholeskyFactor f;
    f.max_diag_ = 0.0;
    for (std::size_t i = 0; i < n; ++i) f.max_diag_ = std::max(f.max_diag_, cov[i * n + i]);
    if (!f.try_factor(cov, n, 0.0)) {
      const double jitter = 1e-12 * f.max_diag_;
      if (!f.try_factor(cov, n, jitter))
        throw numerical_error(
            "fbm_kernels.cholesky: non-positive pivot at index " + std::to_string(f.fail_index_) +
            " after jitter (near-degenerate grid)");
    }
    return f;
  }

  std::size_t size() const { return n_; }

  /// Solve L w = rhs (forward substitution).
  std::vector<double> forward_solve(const std::vector<double>& rhs) const {
    std::vector<double> w(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      double acc = rhs[i];
      const double* row = &l_[i * (i + 1) / 2];
      for (std::size_t j = 0; j < i; ++j) acc -= row[j] * w[j];
      w[i] = acc / row[i];
    }
    return w;
  }

  /// Append one variable with cross-covariances c and self-covariance r.
  /// Returns the solved row w (length n before append) and the new pivot d;
  /// the conditional law given values v = L^-1 x is N(w.v, r - w.w).
  std::pair<std::vector<double>, double> append(const std::vector<double>& c, double r) {
    std::vector<double> w = forward_solve(c);
    double d2 = r;
    for (double x : w) d2 -= x * x;
    max_diag_ = std::max(max_diag_, r);
    if (!(d2 > 0.0)) {
      d2 += 1e-12 * max_diag_;
      if (!(d2 > 0.0))
        throw numerical_error("fbm_kernels.cholesky: non-positive pivot at index " +
                              std::to_string(n_) + " on append");
    }
    const double d = std::sqrt(d2);
    for (double x : w) l_.push_back(x);
    l_.push_back(d);
    ++n_;
    return {std::move(w), d};
  }

  double diag(std::size_t i) const { return l_[i * (i + 1) / 2 + i]; }

  /// y = L z for a standard normal vector z.
  std::vector<double> lower_times(const std::vector<double>& z) const {
    std::vector<double> y(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      const double* row = &l_[i * (i + 1) / 2];
      double acc = 0.0;
      for (std::size_t j = 0; j <= i; ++j) acc += row[j] * z[j];
      y[i] = acc;
    }
    return y;
  }

 private:
  bool try_factor(const std::vector<double>& cov, std::size_t n, double jitter) {
    l_.assign(n * (n + 1) / 2, 0.0);
    n_ = n;
    for (std::size_t i = 0; i < n; ++i) {
      double* row_i = &l_[i * (i + 1) / 2];
      for (std::size_t j = 0; j <= i; ++j) {
        double acc = cov[i * n + j];
        if (i == j) acc += jitter;
        const double* row_j = &l_[j * (j + 1) / 2];
        for (std::size_t k = 0; k < j; ++k) acc -= row_i[k] * row_j[k];
        if (i == j) {
          if (!(acc > 0.0)) {
            fail_index_ = i;
            return false;
          }
          row_i[j] = std::sqrt(acc);
        } else {
          row_i[j] = acc / row_j[j];
        }
      }
    }
    return true;
  }

  std::vector<double> l_;  // packed rows
  std::size_t n_ = 0;
  double max_diag_ = 0.0;
  std::size_t fail_index_ = 0;
};

/// Exact joint Gaussian sample of fBm over a strictly positive grid, via
/// Cholesky factorization of the joint covariance. Deterministic given the
/// stream state.
inline SampledPath sample_path_exact(const TimeGrid& grid, const HurstParam& H,
                                     RandomStream& rng) {
  if (grid.empty())
    throw std::domain_error("fbm_kernels.sample_path_exact: grid must be nonempty");
  if (!(grid.front() > 0.0))
    throw std::domain_error("fbm_kernels.sample_path_exact: grid times must be strictly positive");
  const std::size_t n = grid.size();
  const std::vector<double> cov = joint_covariance_matrix(grid, H);
  const CholeskyFactor f = CholeskyFactor::from_covariance(cov, n);
  std::vector<double> z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = rng.next_gaussian();
  return SampledPath(grid, f.lower_times(z));
}

struct ConditionalLaw {
  double mean = 0.0;
  double variance = 0.0;
};

/// Exact conditional law of B(new_time) given a sampled path, by Schur
/// complement conditioning on the observed block. Times at 0 carry no
/// information and are ignored. This is the brute-force oracle the
/// prediction module is validated against.
inline ConditionalLaw extend_exact(const SampledPath& path, double new_time,
                                   const HurstParam& H) {
  if (!(new_time > 0.0))
    throw std::domain_error("fbm_kernels.extend_exact: new_time must be > 0");
  std::vector<double> times, values;
  times.reserve(path.size());
  values.reserve(path.size());
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (path.time(i) <= 0.0) continue;
    if (std::abs(path.time(i) - new_time) < kMinTimeSeparation)
      throw std::invalid_argument(
          "fbm_kernels.extend_exact: new_time coincides with an observed time");
    times.push_back(path.time(i));
    values.push_back(path.value(i));
  }
  const double r = covariance(new_time, new_time, H);
  if (times.empty()) return {0.0, r};

  const std::size_t n = times.size();
  std::vector<double> cov(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j)
      cov[i * n + j] = cov[j * n + i] = covariance(times[i], times[j], H);
  const CholeskyFactor f = CholeskyFactor::from_covariance(cov, n);

  std::vector<double> c(n);
  for (std::size_t i = 0; i < n; ++i) c[i] = covariance(times[i], new_time, H);
  const std::vector<double> w = f.forward_solve(c);
  const std::vector<double> v = f.forward_solve(values);
  double mean = 0.0, wsq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mean += w[i] * v[i];
    wsq += w[i] * w[i];
  }
  return {mean, std::max(0.0, r - wsq)};
}

/// Lazily grown exact fBm path: every requested time is sampled from the
/// exact conditional law given all previously sampled points, so any set of
/// consumers sharing one instance sees a single consistent driving path.
/// Conditioning cost is O(n^2) per new time via an incrementally grown
/// Cholesky factor.
class ExactSampler {
 public:
  ExactSampler(const HurstParam& H, RandomStream rng) : h_(H), rng_(std::move(rng)) {}

  /// B(t); samples and caches the value if t is new. Times within 1e-10 of
  /// a cached one are treated as the same point.
  double value_at(double t) {
    if (!(t >= 0.0) || !std::isfinite(t))
      throw std::domain_error("fbm_kernels.ExactSampler: time must be finite and >= 0");
    if (t < kMinTimeSeparation) return 0.0;
    if (const auto* hit = find(t)) return hit->second;

    const double r = covariance(t, t, h_);
    std::vector<double> c(times_.size());
    for (std::size_t i = 0; i < times_.size(); ++i) c[i] = covariance(times_[i], t, h_);
    double mean = 0.0, var = r;
    if (!times_.empty()) {
      const std::vector<double> w = factor_.forward_solve(c);
      double wsq = 0.0;
      for (std::size_t i = 0; i < w.size(); ++i) {
        mean += w[i] * v_[i];
        wsq += w[i] * w[i];
      }
      var = std::max(0.0, r - wsq);
    }
    const double value = mean + std::sqrt(var) * rng_.next_gaussian();

    const auto [row, d] = factor_.append(c, r);
    (void)row;
    v_.push_back((value - mean) / d);
    times_.push_back(t);
    values_.push_back(value);
    sorted_.insert(std::upper_bound(sorted_.begin(), sorted_.end(), std::make_pair(t, value)),
                   {t, value});
    return value;
  }

  std::size_t size() const { return times_.size(); }

  /// Cached points in time order (for diagnostics and tests).
  const std::vector<std::pair<double, double>>& sorted_points() const { return sorted_; }

 private:
  const std::pair<double, double>* find(double t) const {
    auto it = std::lower_bound(sorted_.begin(), sorted_.end(), t,
                               [](const auto& p, double x) { return p.first < x; });
    if (it != sorted_.end() && std::abs(it->first - t) < kMinTimeSeparation) return &*it;
    if (it != sorted_.begin() && std::abs(std::prev(it)->first - t) < kMinTimeSeparation)
      return &*std::prev(it);
    return nullptr;
  }

  HurstParam h_;
  RandomStream rng_;
  CholeskyFactor factor_;
  std::vector<double> times_;   // insertion order
  std::vector<double> values_;  // insertion order
  std::vector<double> v_;       // L^-1 values, maintained incrementally
  std::vector<std::pair<double, double>> sorted_;
};

}  // namespace fbmsde::fbm
