// Acceptance suite: one case per criterion, each printing a pass/fail line.
// Run all via `ctest` or a single one via `./acceptance_tests "[criterion5]"`.

#include <catch.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fbmsde/config.hpp"
#include "fbmsde/experiments.hpp"
#include "fbmsde/fbm_kernels.hpp"
#include "fbmsde/lamperti.hpp"
#include "fbmsde/prediction.hpp"
#include "fbmsde/scheme.hpp"
#include "oracles.hpp"

using namespace fbmsde;
namespace fs = std::filesystem;

namespace {

void report(int criterion, const char* label, bool pass) {
  std::printf("criterion %2d (%s): %s\n", criterion, label, pass ? "PASS" : "FAIL");
  std::fflush(stdout);
}

std::string configs_dir() { return std::string(FBMSDE_SOURCE_DIR) + "/configs"; }

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "fbmsde_acceptance" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

SampledPath anchored(const SampledPath& sampled) {
  std::vector<double> ts = {0.0}, vs = {0.0};
  for (std::size_t i = 0; i < sampled.size(); ++i) {
    ts.push_back(sampled.time(i));
    vs.push_back(sampled.value(i));
  }
  return SampledPath(TimeGrid(ts), vs);
}

}  // namespace

TEST_CASE("kernel consistency identity", "[criterion1]") {
  double max_defect = 0.0;
  for (double h : {0.55, 0.65, 0.75}) {
    const HurstParam H(h);
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) {
        const double t = 0.2 + 1.8 * i / 4.0;
        const double s = 0.2 + 1.8 * j / 4.0;
        max_defect = std::max(max_defect, fbm::kernel_consistency_defect(t, s, H));
      }
  }
  const bool pass = max_defect <= 1e-3;
  report(1, "kernel consistency <= 1e-3", pass);
  CHECK(max_defect <= 1e-3);
}

TEST_CASE("Brownian reduction", "[criterion2]") {
  const HurstParam Hb(0.5);
  bool psi_zero = true, k_one = true, var_linear = true;
  for (double u : {0.4, 1.0, 2.5})
    for (double frac : {0.1, 0.5, 0.9}) {
      const double s = frac * u;
      const double t = u + 0.7;
      psi_zero = psi_zero && prediction::psi_kernel(t, s, u, Hb) == 0.0;
      k_one = k_one && fbm::volterra_kernel(t, s, Hb) == 1.0;
      var_linear =
          var_linear && std::abs(prediction::predict_variance(t, t, u, Hb) - (t - u)) <= 1e-10;
    }
  const bool pass = psi_zero && k_one && var_linear;
  report(2, "Brownian reduction exact", pass);
  CHECK(psi_zero);
  CHECK(k_one);
  CHECK(var_linear);
}

TEST_CASE("prediction vs brute-force conditioning", "[criterion3]") {
  const HurstParam H(0.65);
  const int n_pts = 200, n_hist = 20;
  bool pass = true;
  for (double target : {1.05, 1.2, 1.5}) {
    std::vector<double> mean_err, var_err;
    for (int s = 0; s < n_hist; ++s) {
      std::vector<double> ts(n_pts);
      for (int i = 0; i < n_pts; ++i) ts[i] = (i + 1) / static_cast<double>(n_pts);
      RandomStream rng = RandomStream::for_path(1234, s);
      const SampledPath observed = fbm::sample_path_exact(TimeGrid(ts), H, rng);
      const SampledPath hist = anchored(observed);
      prediction::PredictionQuery q(hist, target);
      const double mu_p = prediction::predict_mean(q, H);
      const double var_p = prediction::predict_variance(target, target, 1.0, H);
      const auto law = fbm::extend_exact(observed, target, H);
      mean_err.push_back(std::abs(mu_p - law.mean) / std::sqrt(law.variance));
      var_err.push_back(std::abs(var_p / law.variance - 1.0));
    }
    const double med_mean = oracles::median(mean_err);
    const double med_var = oracles::median(var_err);
    INFO("target " << target << ": median mean err " << med_mean << ", median var err "
                   << med_var);
    pass = pass && med_mean <= 0.05 && med_var <= 0.05;
    CHECK(med_mean <= 0.05);
    CHECK(med_var <= 0.05);
  }
  report(3, "prediction matches Schur conditioning", pass);
}

TEST_CASE("noiseless blow-up oracle", "[criterion4]") {
  const lamperti::LampertiModel model(lamperti::ModelSpec::polynomial_multiplicative(4.0, 1.0));
  const scheme::DriftFn g = [&](double y) { return model.drift(y); };  // e^{3y}
  scheme::SchemeConfig sc;
  sc.h = 1e-3;
  sc.sigma_const = 0.0;
  sc.y_threshold = 40.0;
  sc.horizon = 1e6;
  sc.max_steps = 100000;
  scheme::FixedNoise no_noise({});
  const auto traj = scheme::run_adaptive(g, 0.0, sc, no_noise);
  REQUIRE(traj.stop_reason == scheme::StopReason::ThresholdHit);
  const auto bracket = scheme::explosion_time_estimate(traj, g, sc.h, 1.2);
  const double estimate = bracket.t_last + 0.5 * (bracket.tail_lower + bracket.tail_upper);
  const double rel = std::abs(estimate - 1.0 / 3.0) / (1.0 / 3.0);
  const bool pass = rel < 0.01;
  report(4, "noiseless blow-up time within 1% of 1/3", pass);
  CHECK(rel < 0.01);
}

TEST_CASE("explosion reproduction", "[criterion5]") {
  auto cfg = harness::load_config(configs_dir() + "/example1.json");
  REQUIRE(cfg.n_paths == 100);
  REQUIRE(cfg.scheme.threshold_is_x);
  REQUIRE(cfg.scheme.threshold == 1e5);
  cfg.outputs.csv_dir = fresh_dir("criterion5").string();
  cfg.outputs.emit_svg = false;
  harness::RunOptions opt;
  opt.quiet = true;
  const auto summary = harness::mc_explosion_study(cfg, opt);
  std::size_t hits = 0, caps = 0;
  for (const auto& r : summary.paths) {
    if (r.stop_reason == scheme::StopReason::ThresholdHit) ++hits;
    if (r.stop_reason == scheme::StopReason::StepCap ||
        r.stop_reason == scheme::StopReason::Overflow)
      ++caps;
  }
  const bool pass = hits == 100 && caps == 0;
  report(5, "100/100 paths stop at the X-threshold", pass);
  CHECK(hits == 100);
  CHECK(caps == 0);
}

TEST_CASE("ratio diagnostic", "[criterion6]") {
  // Example-1 family, Y-threshold tuned so K is about 1e3 steps
  const lamperti::LampertiModel model(lamperti::ModelSpec::polynomial_multiplicative(4.0, 10.0));
  const HurstParam H(0.65);
  scheme::SchemeConfig sc;
  sc.h = 0.1;
  sc.sigma_const = 1.0;
  sc.y_threshold = 100.0;
  sc.horizon = 1e6;
  sc.max_steps = 100000;
  sc.seed = 606;
  int in_band = 0;
  const int n_paths = 50;
  for (int p = 0; p < n_paths; ++p) {
    const auto traj =
        scheme::run_adaptive(model, sc, H, RandomStream::for_path(sc.seed, p));
    REQUIRE(traj.stop_reason == scheme::StopReason::ThresholdHit);
    const auto ratios = scheme::ratio_diagnostic(traj, sc.h);
    REQUIRE(traj.steps() >= 900);  // K is in the intended regime
    if (std::abs(ratios.back() - 1.0) <= 0.1) ++in_band;
  }

  // noiseless control with a binary step: the ratio is exactly 1 + y0/(hk)
  scheme::FixedNoise no_noise({});
  scheme::SchemeConfig nc;
  nc.h = 0.125;
  nc.sigma_const = 0.0;
  nc.y_threshold = 50.0;
  nc.horizon = 1e6;
  nc.max_steps = 100000;
  const scheme::DriftFn g = [&](double y) { return model.drift(y); };
  const auto control = scheme::run_adaptive(g, 0.0, nc, no_noise);
  bool control_exact = true;
  const auto control_ratios = scheme::ratio_diagnostic(control, nc.h);
  for (std::size_t k = 1; k <= control_ratios.size(); ++k)
    control_exact = control_exact && control_ratios[k - 1] == 1.0;

  const bool pass = in_band >= 45 && control_exact;
  report(6, "final ratio in [0.9, 1.1] for >= 90% of paths", pass);
  CHECK(in_band >= 45);
  CHECK(control_exact);
}

TEST_CASE("tail bracket", "[criterion7]") {
  const lamperti::LampertiModel model(lamperti::ModelSpec::polynomial_multiplicative(4.0, 10.0));
  const HurstParam H(0.65);
  const scheme::DriftFn g = [&](double y) { return model.drift(y); };  // 1000 e^{3y}
  const double alpha = 1.2, h = 0.1;

  // closed geometric form vs the numeric summation
  bool closed_ok = true;
  for (std::size_t k : {10ul, 60ul, 90ul}) {
    const double numeric = scheme::tail_sum(g, h, k, alpha);
    const double closed =
        (h / 1000.0) * std::exp(-3.0 * alpha * h * k) / (1.0 - std::exp(-3.0 * alpha * h));
    closed_ok = closed_ok && std::abs(numeric - closed) <= 1e-12 * closed;
  }

  // on 20 exploding paths an empirical k0 exists: the bracket contains the
  // remaining time to the last step for every recorded k in [k0, K)
  scheme::SchemeConfig sc;
  sc.h = h;
  sc.sigma_const = 1.0;
  sc.y_threshold = std::log(1e4);
  sc.horizon = 1e6;
  sc.max_steps = 100000;
  sc.seed = 4242;
  bool bracket_ok = true;
  int worst_k0 = 0;
  for (int p = 0; p < 20; ++p) {
    const auto traj = scheme::run_adaptive(model, sc, H, RandomStream::for_path(sc.seed, p));
    REQUIRE(traj.stop_reason == scheme::StopReason::ThresholdHit);
    const std::size_t K = traj.steps();
    const double t_k_last = traj.times.back();
    int last_violation = -1;
    for (std::size_t k = 0; k < K; ++k) {
      const double lo = scheme::tail_sum(g, h, k, alpha);
      const double hi = scheme::tail_sum(g, h, k, 1.0 / alpha);
      const double remaining = t_k_last - traj.times[k];
      if (!(lo <= remaining && remaining <= hi)) last_violation = static_cast<int>(k);
    }
    const int k0 = last_violation + 1;
    worst_k0 = std::max(worst_k0, k0);
    bracket_ok = bracket_ok && k0 < static_cast<int>(K);
  }
  INFO("worst empirical k0 = " << worst_k0);
  const bool pass = closed_ok && bracket_ok;
  report(7, "tail bracket with alpha = 1.2", pass);
  CHECK(closed_ok);
  CHECK(bracket_ok);
}

TEST_CASE("shared-path convergence", "[criterion8]") {
  auto cfg = harness::load_config(configs_dir() + "/convergence.json");
  REQUIRE(cfg.n_paths == 20);
  cfg.outputs.csv_dir = fresh_dir("criterion8").string();
  harness::RunOptions opt;
  opt.quiet = true;
  opt.h_list = {0.2, 0.1, 0.05, 0.025};
  opt.truncate_m = 5.0;
  const auto rows = harness::convergence_study(cfg, opt);
  REQUIRE(rows.size() == 4);
  bool decreasing = true;
  for (std::size_t i = 1; i < rows.size(); ++i)
    decreasing = decreasing && rows[i].median_sup_error < rows[i - 1].median_sup_error;
  report(8, "median sup-error strictly decreasing in h", decreasing);
  for (std::size_t i = 1; i < rows.size(); ++i)
    CHECK(rows[i].median_sup_error < rows[i - 1].median_sup_error);
}

TEST_CASE("Osgood classification", "[criterion9]") {
  const auto quartic = lamperti::osgood_criterion([](double s) { return s * s * s * s; }, 1.0);
  const bool quartic_ok =
      quartic.finite && std::abs(quartic.value - 1.0 / 3.0) <= 1e-6;

  const auto ex2 =
      lamperti::osgood_criterion([](double s) { return std::pow(s + 0.1, 1.1); }, 10.0);
  const double ex2_expect = 10.0 * std::pow(10.1, -0.1);
  const bool ex2_ok = ex2.finite && std::abs(ex2.value - ex2_expect) <= 1e-4 * ex2_expect;

  const auto linear = lamperti::osgood_criterion([](double s) { return s; }, 1.0);
  const bool linear_ok = !linear.finite;

  const bool pass = quartic_ok && ex2_ok && linear_ok;
  report(9, "Osgood: s^4 finite (1/3), example-2 finite, s infinite", pass);
  CHECK(quartic_ok);
  CHECK(ex2_ok);
  CHECK(linear_ok);
}

TEST_CASE("end-to-end determinism", "[criterion10]") {
  harness::RunOptions opt;
  opt.quiet = true;
  bool pass = true;

  {  // mc with plots, rerun byte-identical
    auto cfg = harness::load_config(configs_dir() + "/smoke_mc.json");
    const auto dir_a = fresh_dir("det_a");
    const auto dir_b = fresh_dir("det_b");
    cfg.outputs.csv_dir = dir_a.string();
    harness::mc_explosion_study(cfg, opt);
    cfg.outputs.csv_dir = dir_b.string();
    harness::mc_explosion_study(cfg, opt);
    for (const auto& entry : fs::directory_iterator(dir_a)) {
      const auto name = entry.path().filename();
      const bool same = read_file(entry.path()) == read_file(dir_b / name);
      pass = pass && same;
      CHECK(same);
    }
  }
  {  // convergence table rerun
    auto cfg = harness::load_config(configs_dir() + "/convergence.json");
    cfg.n_paths = 3;
    opt.h_list = {0.1, 0.05};
    const auto dir_a = fresh_dir("det_conv_a");
    const auto dir_b = fresh_dir("det_conv_b");
    cfg.outputs.csv_dir = dir_a.string();
    harness::convergence_study(cfg, opt);
    cfg.outputs.csv_dir = dir_b.string();
    harness::convergence_study(cfg, opt);
    const bool same =
        read_file(dir_a / "convergence.csv") == read_file(dir_b / "convergence.csv");
    pass = pass && same;
    CHECK(same);
  }
  report(10, "byte-identical reruns", pass);
}
