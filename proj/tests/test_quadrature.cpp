#include <catch.hpp>

#include <cmath>

#include "fbmsde/quadrature.hpp"
#include "oracles.hpp"

using namespace fbmsde;

TEST_CASE("Gauss-Legendre nodes integrate polynomials exactly", "[quadrature]") {
  // order n is exact through degree 2n-1
  auto poly = [](double x) { return 5.0 * x * x * x * x - x * x + 3.0; };
  const double exact = 2.0 * (1.0 - 1.0 / 3.0 + 3.0);
  CHECK(quad::gl_fixed(poly, -1.0, 1.0, 32) == Approx(exact).epsilon(1e-14));
  CHECK(quad::gl_fixed(poly, -1.0, 1.0, 64) == Approx(exact).epsilon(1e-14));

  const auto& g = quad::gauss_legendre(64);
  double wsum = 0.0;
  for (double w : g.weights) wsum += w;
  CHECK(wsum == Approx(2.0).epsilon(1e-14));
}

TEST_CASE("gl_with_fallback resolves smooth and kinked integrands", "[quadrature]") {
  auto smooth = [](double x) { return std::exp(-x) * std::sin(3.0 * x); };
  const double oracle = oracles::adaptive_simpson(smooth, 0.0, 4.0, 1e-13);
  const auto r = quad::gl_with_fallback(smooth, 0.0, 4.0, 1e-10);
  CHECK(r.value == Approx(oracle).epsilon(1e-10));
  CHECK_FALSE(r.escalated);

  // endpoint derivative singularity forces the bisection fallback
  auto kinked = [](double x) { return std::sqrt(x); };
  const auto k = quad::gl_with_fallback(kinked, 0.0, 1.0, 1e-10);
  CHECK(k.value == Approx(2.0 / 3.0).epsilon(1e-9));
  CHECK(k.escalated);
}

TEST_CASE("tanh-sinh handles integrable endpoint singularities", "[quadrature]") {
  // int_0^1 x^(-1/2) dx = 2
  auto f = [](double x) { return 1.0 / std::sqrt(x); };
  const auto r = quad::tanh_sinh(f, 0.0, 1.0, 1e-12);
  CHECK(r.value == Approx(2.0).epsilon(1e-11));

  // int_0^1 x^(1-2H) dx = 1/(2-2H), the kernel's singularity class
  for (double h : {0.55, 0.65, 0.75}) {
    auto g = [h](double x) { return std::pow(x, 1.0 - 2.0 * h); };
    const auto s = quad::tanh_sinh(g, 0.0, 1.0, 1e-12);
    CHECK(s.value == Approx(1.0 / (2.0 - 2.0 * h)).epsilon(1e-10));
  }

  // constants integrate to the interval length at machine precision
  const auto c = quad::tanh_sinh([](double) { return 1.0; }, 0.0, 0.7, 1e-12);
  CHECK(c.value == Approx(0.7).epsilon(1e-14));
}

TEST_CASE("tanh-sinh matches adaptive Simpson on a generic integrand", "[quadrature]") {
  auto f = [](double x) { return std::cos(5.0 * x) / (1.0 + x); };
  const double oracle = oracles::adaptive_simpson(f, 0.0, 2.0, 1e-13);
  CHECK(quad::tanh_sinh(f, 0.0, 2.0, 1e-11).value == Approx(oracle).epsilon(1e-10));
}
