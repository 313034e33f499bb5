#include <catch.hpp>

#include <cmath>
#include <vector>

#include "fbmsde/fbm_kernels.hpp"
#include "oracles.hpp"

using namespace fbmsde;

TEST_CASE("fbm covariance closed form", "[fbm_kernels]") {
  CHECK(fbm::covariance(1.0, 1.0, HurstParam(0.65)) == Approx(1.0).epsilon(1e-15));
  CHECK(fbm::covariance(2.0, 3.0, HurstParam(0.5)) == Approx(2.0).epsilon(1e-15));
  // 0.5 * (4^1.5 + 1 - 3^1.5)
  CHECK(fbm::covariance(4.0, 1.0, HurstParam(0.75)) ==
        Approx(1.9019237886466838).epsilon(1e-14));
  CHECK_THROWS_AS(fbm::covariance(-1.0, 1.0, HurstParam(0.65)), std::domain_error);
}

TEST_CASE("fbm covariance symmetry and self-similarity", "[fbm_kernels]") {
  const HurstParam H(0.7);
  RandomStream rng(11);
  for (int i = 0; i < 50; ++i) {
    const double t = 5.0 * rng.next_uniform();
    const double s = 5.0 * rng.next_uniform();
    CHECK(fbm::covariance(t, s, H) == Approx(fbm::covariance(s, t, H)).margin(1e-14));
    for (double a : {0.5, 2.0}) {
      const double lhs = fbm::covariance(a * t, a * s, H);
      const double rhs = std::pow(a, H.two_h()) * fbm::covariance(t, s, H);
      CHECK(lhs == Approx(rhs).margin(1e-12));
    }
  }
}

TEST_CASE("kernel constant pinned by the calibration identity", "[fbm_kernels]") {
  CHECK(fbm::kernel_constant(HurstParam(0.5)) == 1.0);

  // frozen calibration values, cross-checked against the Beta-function form
  struct Row { double h, d; };
  const Row rows[] = {{0.55, 1.0443324776100442},
                      {0.65, 1.0927518760142747},
                      {0.75, 1.0696446350319901}};
  for (const auto& r : rows) {
    const double d = fbm::kernel_constant(HurstParam(r.h));
    CHECK(d == Approx(r.d).epsilon(1e-12));
    CHECK(d == Approx(oracles::kernel_constant_beta(r.h)).epsilon(1e-12));
    // defect of int_0^t K(t,v)^2 dv = t^2H at t = 1 and, via self-similarity,
    // at t = 2
    const HurstParam H(r.h);
    CHECK(fbm::kk_integral(1.0, 1.0, 1.0, H, 1e-11, 1e-10) == Approx(1.0).epsilon(1e-9));
    CHECK(fbm::kk_integral(2.0, 2.0, 2.0, H, 1e-11, 1e-10) ==
          Approx(std::pow(2.0, H.two_h())).epsilon(1e-9));
  }
}

TEST_CASE("volterra kernel values and conventions", "[fbm_kernels]") {
  CHECK(fbm::volterra_kernel(2.0, 1.0, HurstParam(0.5)) == 1.0);
  CHECK(fbm::volterra_kernel(1.0, 1.0, HurstParam(0.65)) == 0.0);  // s >= t
  CHECK(fbm::volterra_kernel(1.0, 2.0, HurstParam(0.65)) == 0.0);
  CHECK_THROWS_AS(fbm::volterra_kernel(1.0, 0.0, HurstParam(0.65)), std::domain_error);
  CHECK_THROWS_AS(fbm::volterra_kernel(1.0, -0.5, HurstParam(0.65)), std::domain_error);

  // Brownian reduction is exact on a grid of (t, s) pairs
  for (double t : {0.3, 1.0, 2.0})
    for (double s : {0.1, 0.25, 0.9}) {
      if (s >= t) continue;
      CHECK(fbm::volterra_kernel(t, s, HurstParam(0.5)) == 1.0);
    }

  // frozen value pinned by the consistency identity (H = 0.65)
  CHECK(fbm::volterra_kernel(1.0, 0.5, HurstParam(0.65)) ==
        Approx(1.0009510798477266).epsilon(1e-10));
}

TEST_CASE("kernel consistency identity against the covariance", "[fbm_kernels]") {
  // spot pairs here; the full 5x5 grid for three H values runs in acceptance
  for (double h : {0.55, 0.75}) {
    const HurstParam H(h);
    for (auto [t, s] : {std::pair{1.0, 0.5}, std::pair{2.0, 0.2}, std::pair{0.8, 0.8}}) {
      CHECK(fbm::kernel_consistency_defect(t, s, H) < 1e-3);
    }
  }
}

TEST_CASE("joint covariance matrix assembly", "[fbm_kernels]") {
  CHECK(fbm::joint_covariance_matrix(TimeGrid({1.0}), HurstParam(0.65)) ==
        std::vector<double>{1.0});
  const auto c = fbm::joint_covariance_matrix(TimeGrid({1.0, 2.0}), HurstParam(0.5));
  CHECK(c == std::vector<double>{1.0, 1.0, 1.0, 2.0});

  // positive definiteness via Cholesky
  const TimeGrid grid({0.5, 1.0, 1.5});
  const auto m = fbm::joint_covariance_matrix(grid, HurstParam(0.75));
  CHECK_NOTHROW(fbm::CholeskyFactor::from_covariance(m, 3));
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(m[i * 3 + i] == Approx(std::pow(grid[i], 1.5)).epsilon(1e-14));
}

TEST_CASE("exact sampler reproduces the marginal law", "[fbm_kernels]") {
  const HurstParam H(0.65);
  RandomStream rng(101);
  std::vector<double> draws;
  for (int i = 0; i < 10000; ++i)
    draws.push_back(fbm::sample_path_exact(TimeGrid({1.0}), H, rng).value(0));
  CHECK(oracles::variance(draws) == Approx(1.0).epsilon(0.05));
}

TEST_CASE("exact sampler gives independent Brownian increments", "[fbm_kernels]") {
  const HurstParam H(0.5);
  RandomStream rng(202);
  std::vector<double> b1, inc;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const auto p = fbm::sample_path_exact(TimeGrid({1.0, 2.0}), H, rng);
    b1.push_back(p.value(0));
    inc.push_back(p.value(1) - p.value(0));
  }
  double cov = 0.0;
  const double m1 = oracles::mean(b1), m2 = oracles::mean(inc);
  for (int i = 0; i < n; ++i) cov += (b1[i] - m1) * (inc[i] - m2);
  cov /= n - 1;
  // Var[B(1) (B(2)-B(1))] = Var[B1] Var[inc] for independent Gaussians
  const double se = std::sqrt(1.0 * 1.0 / n);
  CHECK(std::abs(cov) < 3.0 * se);
}

TEST_CASE("exact sampler is deterministic given the stream", "[fbm_kernels]") {
  const TimeGrid grid({0.25, 0.5, 0.75, 1.0});
  const HurstParam H(0.7);
  RandomStream a = RandomStream::for_path(7, 3);
  RandomStream b = RandomStream::for_path(7, 3);
  const auto pa = fbm::sample_path_exact(grid, H, a);
  const auto pb = fbm::sample_path_exact(grid, H, b);
  CHECK(pa.values() == pb.values());
}

TEST_CASE("extend_exact conditional law", "[fbm_kernels]") {
  const HurstParam H(0.65);

  SECTION("empty path gives the unconditional marginal") {
    const auto law = fbm::extend_exact(SampledPath(), 1.3, H);
    CHECK(law.mean == 0.0);
    CHECK(law.variance == Approx(std::pow(1.3, 1.3)).epsilon(1e-14));
  }

  SECTION("origin-only path carries no information") {
    const auto law = fbm::extend_exact(SampledPath::at_origin(), 0.8, H);
    CHECK(law.mean == 0.0);
    CHECK(law.variance == Approx(std::pow(0.8, 1.3)).epsilon(1e-14));
  }

  SECTION("Markov property at H = 1/2") {
    const HurstParam Hb(0.5);
    RandomStream rng(33);
    std::vector<double> times;
    for (int i = 1; i <= 20; ++i) times.push_back(i * 0.05);
    const auto path = fbm::sample_path_exact(TimeGrid(times), Hb, rng);
    const auto law = fbm::extend_exact(path, 1.7, Hb);
    CHECK(law.mean == Approx(path.last_value()).margin(1e-10));
    CHECK(law.variance == Approx(1.7 - 1.0).epsilon(1e-10));
  }

  SECTION("conditional variance never exceeds the marginal and stays nonnegative") {
    RandomStream rng(44);
    std::vector<double> times;
    for (int i = 1; i <= 30; ++i) times.push_back(i / 30.0);
    const auto path = fbm::sample_path_exact(TimeGrid(times), H, rng);
    for (double t : {1.05, 1.3, 2.0, 4.0}) {
      const auto law = fbm::extend_exact(path, t, H);
      CHECK(law.variance >= 0.0);
      CHECK(law.variance <= fbm::covariance(t, t, H) + 1e-12);
    }
  }

  SECTION("coincident time is rejected") {
    RandomStream rng(55);
    const auto path = fbm::sample_path_exact(TimeGrid({0.5, 1.0}), H, rng);
    CHECK_THROWS_AS(fbm::extend_exact(path, 1.0, H), std::invalid_argument);
  }
}

TEST_CASE("cholesky jitter policy", "[fbm_kernels]") {
  // grids below the separation floor are rejected before factorization
  CHECK_THROWS_AS(TimeGrid({1.0, 1.0 + 1e-12}), std::domain_error);

  // rank-one round-off degeneracy is rescued by the one-shot jitter
  std::vector<double> rank_one = {1.0, 1.0, 1.0, 1.0};
  CHECK_NOTHROW(fbm::CholeskyFactor::from_covariance(rank_one, 2));

  // an indefinite block fails even after the jitter, naming the pivot
  std::vector<double> indefinite = {1.0, 2.0, 2.0, 1.0};
  try {
    fbm::CholeskyFactor::from_covariance(indefinite, 2);
    FAIL("expected numerical_error");
  } catch (const numerical_error& e) {
    CHECK(std::string(e.what()).find("pivot at index 1") != std::string::npos);
  }
}

TEST_CASE("lazy shared sampler equals its own conditional law", "[fbm_kernels]") {
  const HurstParam H(0.65);
  fbm::ExactSampler sampler(H, RandomStream::for_path(9, 0));
  CHECK(sampler.value_at(0.0) == 0.0);
  const double b_half = sampler.value_at(0.5);
  const double b_one = sampler.value_at(1.0);
  // out-of-order request conditions on both cached points
  const double b_quarter = sampler.value_at(0.25);
  CHECK(sampler.value_at(0.5) == b_half);   // cached
  CHECK(sampler.value_at(1.0) == b_one);
  CHECK(sampler.value_at(0.25) == b_quarter);
  CHECK(sampler.size() == 3);
  // within-resolution lookups resolve to the cached point
  CHECK(sampler.value_at(0.5 + 1e-11) == b_half);
}
