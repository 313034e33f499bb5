#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <mutex>
#include <utility>
#include <vector>

#include "fbmsde/errors.hpp"

namespace fbmsde::quad {

struct GaussLegendre {
  std::vector<double> nodes;    // on (-1, 1), ascending
  std::vector<double> weights;
};

namespace detail {

inline GaussLegendre make_gauss_legendre(int n) {
  GaussLegendre g;
  g.nodes.resize(n);
  g.weights.resize(n);
  const double pi = 3.14159265358979323846;
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    // Newton iteration on P_n from the Chebyshev-like initial guess.
    double x = std::cos(pi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
      }
      pp = n * (x * p0 - p1) / (x * x - 1.0);
      const double dx = p0 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    g.nodes[i] = -x;
    g.nodes[n - 1 - i] = x;
    const double w = 2.0 / ((1.0 - x * x) * pp * pp);
    g.weights[i] = w;
    g.weights[n - 1 - i] = w;
  }
  return g;
}

}  // namespace detail

/// Cached nodes/weights on [-1, 1]; thread-safe first-use initialization.
/// Entries are heap-allocated so returned references stay valid as the
/// cache grows.
inline const GaussLegendre& gauss_legendre(int n) {
  static std::mutex mu;
  static std::vector<std::pair<int, std::unique_ptr<GaussLegendre>>> cache;
  std::lock_guard<std::mutex> lock(mu);
  for (const auto& entry : cache)
    if (entry.first == n) return *entry.second;
  cache.emplace_back(n, std::make_unique<GaussLegendre>(detail::make_gauss_legendre(n)));
  return *cache.back().second;
}

/// Fixed-order Gauss-Legendre after the affine map onto [a, b].
template <typename F>
double gl_fixed(F&& f, double a, double b, int n) {
  const GaussLegendre& g = gauss_legendre(n);
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += g.weights[i] * f(mid + half * g.nodes[i]);
  return half * sum;
}

struct GlResult {
  double value = 0.0;
  double err_est = 0.0;
  bool escalated = false;  // the order-32/order-64 estimate disagreed somewhere
};

namespace detail {

template <typename F>
void gl_adaptive_rec(F& f, double a, double b, double abs_tol, int depth, GlResult& out) {
  const double i64 = gl_fixed(f, a, b, 64);
  const double i32 = gl_fixed(f, a, b, 32);
  const double err = std::abs(i64 - i32);
  // the machine-relative floor keeps the recursion from chasing tolerances
  // below round-off when the initial whole-interval estimate was poor
  if (err <= abs_tol || err <= 5e-16 * std::abs(i64) || depth >= 48 || !(b - a > 0.0)) {
    out.value += i64;
    out.err_est += err;
    return;
  }
  const double m = 0.5 * (a + b);
  gl_adaptive_rec(f, a, m, 0.5 * abs_tol, depth + 1, out);
  gl_adaptive_rec(f, m, b, 0.5 * abs_tol, depth + 1, out);
}

}  // namespace detail

/// Order-64 Gauss-Legendre with an embedded order-32 error estimate.
/// Panels whose estimate exceeds the tolerance are bisected recursively.
template <typename F>
GlResult gl_with_fallback(F&& f, double a, double b, double rel_tol) {
  GlResult res;
  if (!(b > a)) return res;
  const double i64 = gl_fixed(f, a, b, 64);
  const double i32 = gl_fixed(f, a, b, 32);
  const double scale = std::max(std::abs(i64), std::numeric_limits<double>::min());
  if (std::abs(i64 - i32) <= rel_tol * scale) {
    res.value = i64;
    res.err_est = std::abs(i64 - i32);
    return res;
  }
  res.escalated = true;
  detail::gl_adaptive_rec(f, a, b, rel_tol * scale, 0, res);
  return res;
}

struct TanhSinhResult {
  double value = 0.0;
  double err_est = 0.0;
  int levels = 0;
};

/// Double-exponential (tanh-sinh) quadrature on [a, b]. Node offsets from
/// the endpoints are formed directly from exp terms, so integrable endpoint
/// singularities (v^c with c > -1) are sampled accurately.
template <typename F>
TanhSinhResult tanh_sinh(F&& f, double a, double b, double rel_tol, int max_level = 11) {
  TanhSinhResult res;
  if (!(b > a)) return res;
  const double pi_half = 1.57079632679489661923;
  const double r = 0.5 * (b - a);
  const double t_max = 4.0;

  // weighted sample at parameter t; false when the node underflows onto an
  // endpoint
  auto eval = [&](double t, double& contrib) -> bool {
    const double u = pi_half * std::sinh(std::abs(t));
    const double e2u = std::exp(-2.0 * u);
    const double delta = r * 2.0 * e2u / (1.0 + e2u);  // distance from the near endpoint
    if (delta <= 0.0) return false;
    const double x = (t < 0.0) ? a + delta : b - delta;
    if (x <= a || x >= b) return false;
    const double sech = 2.0 * std::exp(-u) / (1.0 + e2u);  // sech(u) for u >= 0
    const double w = r * pi_half * std::cosh(t) * sech * sech;
    const double fx = f(x);
    if (!std::isfinite(fx)) return false;
    contrib = w * fx;
    return true;
  };

  double h = 1.0;
  double sum = 0.0;
  {
    double c;
    if (eval(0.0, c)) sum += c;
    for (int k = 1; k * h <= t_max; ++k) {
      if (eval(k * h, c)) sum += c;
      if (eval(-k * h, c)) sum += c;
    }
  }
  double prev = h * sum;
  for (int level = 1; level <= max_level; ++level) {
    h *= 0.5;
    double c;
    for (int k = 1; k * h <= t_max; k += 2) {  // odd multiples only
      if (eval(k * h, c)) sum += c;
      if (eval(-k * h, c)) sum += c;
    }
    const double cur = h * sum;
    const double err = std::abs(cur - prev);
    res.value = cur;
    res.err_est = err;
    res.levels = level;
    const double scale = std::max(std::abs(cur), std::numeric_limits<double>::min());
    if (level >= 3 && err <= rel_tol * scale) return res;
    prev = cur;
  }
  return res;
}

}  // namespace fbmsde::quad
