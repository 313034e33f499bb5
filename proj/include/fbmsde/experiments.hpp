#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "fbmsde/config.hpp"
#include "fbmsde/errors.hpp"
#include "fbmsde/fbm_kernels.hpp"
#include "fbmsde/lamperti.hpp"
#include "fbmsde/output.hpp"
#include "fbmsde/prediction.hpp"
#include "fbmsde/scheme.hpp"

namespace fbmsde::harness {

struct RunOptions {
  int threads = 0;            // 0: hardware concurrency
  bool quiet = false;
  bool skip_validation = false;
  double alpha = 1.2;         // tail-bracket parameter
  std::vector<double> h_list = {0.2, 0.1, 0.05, 0.025};  // convergence experiment
  double truncate_m = 5.0;                               // convergence experiment
};

namespace detail {

inline int resolve_threads(int requested, long n_jobs) {
  int n = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
  if (n < 1) n = 1;
  return static_cast<int>(std::min<long>(n, std::max<long>(1, n_jobs)));
}

/// Run fn(i) for i in [0, n) on a small worker pool; deterministic results
/// are stored by index, the first error (lowest index) wins.
template <typename Fn>
inline void parallel_for(long n, int threads, Fn&& fn) {
  if (n <= 0) return;
  std::atomic<long> next{0};
  std::vector<std::pair<long, std::string>> errors;  // index, message
  std::vector<int> error_kind;                       // 1 config, 2 numerical, 3 resource
  std::mutex err_mu;
  auto worker = [&] {
    for (;;) {
      const long i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (const resource_error& e) {
        std::lock_guard<std::mutex> lk(err_mu);
        errors.push_back({i, e.what()});
        error_kind.push_back(3);
      } catch (const config_error& e) {
        std::lock_guard<std::mutex> lk(err_mu);
        errors.push_back({i, e.what()});
        error_kind.push_back(1);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lk(err_mu);
        errors.push_back({i, e.what()});
        error_kind.push_back(2);
      }
    }
  };
  std::vector<std::thread> pool;
  const int nt = resolve_threads(threads, n);
  pool.reserve(nt);
  for (int t = 0; t < nt; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (!errors.empty()) {
    std::size_t first = 0;
    for (std::size_t i = 1; i < errors.size(); ++i)
      if (errors[i].first < errors[first].first) first = i;
    const std::string msg = errors[first].second;
    switch (error_kind[first]) {
      case 1: throw config_error(msg);
      case 3: throw resource_error(msg);
      default: throw numerical_error(msg);
    }
  }
}

inline std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

/// Rethrow a per-path failure with the path index and derived seed attached,
/// preserving the error category.
[[noreturn]] inline void throw_with_path_context(const std::exception& e, long path_index,
                                                 std::uint64_t path_seed) {
  const std::string msg = "path " + std::to_string(path_index) + " (seed " +
                          std::to_string(path_seed) + "): " + e.what();
  if (dynamic_cast<const resource_error*>(&e)) throw resource_error(msg);
  if (dynamic_cast<const config_error*>(&e)) throw config_error(msg);
  throw numerical_error(msg);
}

}  // namespace detail

/// Resolve the configured threshold to a Y-level (an X-threshold is mapped
/// once through Theta).
inline double resolve_y_threshold(const RunConfig& cfg, const lamperti::LampertiModel& model) {
  if (!cfg.scheme.threshold_is_x) return cfg.scheme.threshold;
  if (!(cfg.scheme.threshold > model.base.x0))
    throw config_error("harness.config: 'scheme.x_threshold' must exceed model.x0");
  return model.theta(cfg.scheme.threshold);
}

inline scheme::SchemeConfig to_scheme_config(const RunConfig& cfg,
                                             const lamperti::LampertiModel& model,
                                             const RunOptions& opt) {
  scheme::SchemeConfig sc;
  sc.h = cfg.scheme.h;
  sc.sigma_const = cfg.scheme.sigma_const;
  sc.y_threshold = resolve_y_threshold(cfg, model);
  sc.horizon = cfg.scheme.horizon;
  sc.max_steps = cfg.scheme.max_steps;
  sc.seed = cfg.scheme.seed;
  sc.alpha = opt.alpha;
  return sc;
}

/// Assumption gate for scheme experiments: checks the region a trajectory
/// traverses, [x0, x_stop].
inline void run_validation_gate(const RunConfig& cfg, const lamperti::LampertiModel& model,
                                const RunOptions& opt) {
  if (opt.skip_validation) return;
  const double x_hi = cfg.scheme.threshold_is_x
                          ? cfg.scheme.threshold
                          : model.theta_inverse(resolve_y_threshold(cfg, model));
  const auto rep = lamperti::validate_assumptions(model.base, model.base.x0, x_hi, 256);
  if (!rep.all_pass()) {
    std::string failed;
    for (const auto& it : rep.items)
      if (!it.pass) failed += (failed.empty() ? "" : ", ") + it.check;
    throw config_error("harness.mc: model fails assumption checks on [x0, x_stop]: " + failed +
                       " (pass --skip-validation to override)");
  }
}

struct ExplosionSummary {
  std::vector<PathRecord> paths;
  std::size_t n_threshold_hit = 0;
  // quantile levels 0.1/0.25/0.5/0.75/0.9 of the bracket midpoints
  std::vector<std::pair<double, double>> midpoint_quantiles;
};

namespace detail {

inline void emit_trajectory_plots(const std::string& dir, const std::string& prefix,
                                  const std::vector<scheme::AdaptiveTrajectory>& trajs,
                                  double h) {
  if (trajs.empty()) throw config_error("harness.emit_plots: nothing to plot");
  const std::size_t shown = std::min<std::size_t>(trajs.size(), 10);

  std::vector<Series> y_series, x_series, ratio_series, time_series;
  for (std::size_t p = 0; p < shown; ++p) {
    const auto& t = trajs[p];
    Series sy{"path " + std::to_string(p), {}};
    for (std::size_t k = 0; k < t.times.size(); ++k) sy.points.push_back({t.times[k], t.y_values[k]});
    y_series.push_back(std::move(sy));
    if (!t.x_values.empty()) {
      Series sx{"path " + std::to_string(p), {}};
      for (std::size_t k = 0; k < t.x_values.size(); ++k)
        sx.points.push_back({t.times[k], t.x_values[k]});
      x_series.push_back(std::move(sx));
    }
    Series sr{"path " + std::to_string(p), {}};
    const auto ratios = scheme::ratio_diagnostic(t, h);
    for (std::size_t k = 0; k < ratios.size(); ++k)
      sr.points.push_back({static_cast<double>(k + 1), ratios[k]});
    ratio_series.push_back(std::move(sr));
    Series st{"path " + std::to_string(p), {}};
    for (std::size_t k = 0; k < t.times.size(); ++k)
      st.points.push_back({static_cast<double>(k), t.times[k]});
    time_series.push_back(std::move(st));
  }

  write_svg(detail::join_path(dir, prefix + "_y_paths.svg"), y_series,
            {"Y^h sample paths", "t", "Y", false});
  if (!x_series.empty())
    write_svg(detail::join_path(dir, prefix + "_x_paths.svg"), x_series,
              {"X^h sample paths", "t", "X", true});
  write_svg(detail::join_path(dir, prefix + "_ratio.svg"), ratio_series,
            {"ratio diagnostic Y^h(t_k)/(hk)", "k", "Y/(hk)", false});
  write_svg(detail::join_path(dir, prefix + "_times.svg"), time_series,
            {"random times t_k", "k", "t_k", false});
}

}  // namespace detail

/// Monte Carlo explosion study: n_paths independent trajectories with
/// per-path CSVs, a summary CSV, and optional plots. Reproducible from
/// (seed, n_paths); any path error aborts with the path index and seed.
inline ExplosionSummary mc_explosion_study(const RunConfig& cfg, const RunOptions& opt) {
  const lamperti::LampertiModel model(cfg.build_model());
  const HurstParam H(cfg.hurst);
  run_validation_gate(cfg, model, opt);
  const scheme::SchemeConfig sc = to_scheme_config(cfg, model, opt);
  sc.validate(model.y0());
  std::filesystem::create_directories(cfg.outputs.csv_dir);

  std::vector<scheme::AdaptiveTrajectory> trajs(cfg.n_paths);
  std::vector<PathRecord> records(cfg.n_paths);
  const scheme::DriftFn g = [&model](double y) { return model.drift(y); };

  detail::parallel_for(cfg.n_paths, opt.threads, [&](long i) {
    const std::uint64_t path_seed = RandomStream::derive_seed(sc.seed, i);
    try {
      auto traj = scheme::run_adaptive(model, sc, H, RandomStream::for_path(sc.seed, i));
      scheme::map_to_x(traj, model);
      PathRecord rec;
      rec.path_index = static_cast<std::size_t>(i);
      rec.seed = path_seed;
      rec.stop_reason = traj.stop_reason;
      rec.steps = traj.steps();
      rec.t_last = traj.times.back();
      const auto ratios = scheme::ratio_diagnostic(traj, sc.h);
      rec.final_ratio = ratios.empty() ? 0.0 : ratios.back();
      if (traj.stop_reason == scheme::StopReason::ThresholdHit) {
        const auto bracket = scheme::explosion_time_estimate(traj, g, sc.h, sc.alpha);
        rec.has_bracket = true;
        rec.tail_lower = bracket.tail_lower;
        rec.tail_upper = bracket.tail_upper;
      }
      char name[32];
      std::snprintf(name, sizeof(name), "path_%04ld.csv", i);
      write_trajectory_csv(detail::join_path(cfg.outputs.csv_dir, name), traj);
      records[i] = rec;
      trajs[i] = std::move(traj);
    } catch (const std::exception& e) {
      detail::throw_with_path_context(e, i, path_seed);
    }
  });

  ExplosionSummary summary;
  summary.paths = std::move(records);
  std::vector<double> midpoints;
  for (const auto& r : summary.paths)
    if (r.stop_reason == scheme::StopReason::ThresholdHit) {
      ++summary.n_threshold_hit;
      if (r.has_bracket) midpoints.push_back(r.bracket_midpoint());
    }
  for (double p : {0.1, 0.25, 0.5, 0.75, 0.9})
    summary.midpoint_quantiles.push_back({p, quantile(midpoints, p)});

  write_summary_csv(detail::join_path(cfg.outputs.csv_dir, "summary.csv"), summary.paths);
  if (cfg.outputs.emit_svg) detail::emit_trajectory_plots(cfg.outputs.csv_dir, "mc", trajs, sc.h);

  if (!opt.quiet) {
    std::printf("mc: %ld paths, %zu threshold hits\n", cfg.n_paths, summary.n_threshold_hit);
    for (auto [p, q] : summary.midpoint_quantiles)
      std::printf("  explosion-time midpoint q%02d = %s\n", static_cast<int>(p * 100),
                  g17(q).c_str());
  }
  return summary;
}

/// Single-trajectory run with the same outputs as one mc path.
inline scheme::AdaptiveTrajectory simulate_one(const RunConfig& cfg, const RunOptions& opt) {
  const lamperti::LampertiModel model(cfg.build_model());
  const HurstParam H(cfg.hurst);
  run_validation_gate(cfg, model, opt);
  const scheme::SchemeConfig sc = to_scheme_config(cfg, model, opt);
  sc.validate(model.y0());
  std::filesystem::create_directories(cfg.outputs.csv_dir);

  auto traj = scheme::run_adaptive(model, sc, H, RandomStream::for_path(sc.seed, 0));
  scheme::map_to_x(traj, model);
  write_trajectory_csv(detail::join_path(cfg.outputs.csv_dir, "trajectory.csv"), traj);
  if (cfg.outputs.emit_svg)
    detail::emit_trajectory_plots(cfg.outputs.csv_dir, "simulate", {traj}, sc.h);
  if (!opt.quiet)
    std::printf("simulate: stop_reason=%s steps=%zu t_last=%s\n",
                scheme::to_string(traj.stop_reason), traj.steps(),
                g17(traj.times.back()).c_str());
  return traj;
}

struct ConvergenceRow {
  double h = 0.0;
  double median_sup_error = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
};

namespace detail {

/// Trajectory value at an arbitrary time via the scheme's continuous
/// interpolation; B values are read from the shared exact path.
inline double interp_value(const scheme::AdaptiveTrajectory& traj, const scheme::DriftFn& g,
                           double sigma, fbm::ExactSampler& shared, double t) {
  auto it = std::upper_bound(traj.times.begin(), traj.times.end(), t);
  std::size_t k = it == traj.times.begin() ? 0 : (it - traj.times.begin() - 1);
  if (k >= traj.times.size() - 1 && traj.times.size() > 1) k = traj.times.size() - 2;
  const double tk = traj.times[k];
  const double yk = traj.y_values[k];
  if (t == tk) return yk;
  const double noise = sigma > 0.0 ? sigma * (shared.value_at(t) - shared.value_at(tk)) : 0.0;
  return yk + g(yk) * (t - tk) + noise;
}

}  // namespace detail

/// Shared-driving-path convergence study with truncated drift: sup-distance
/// of each Y^h to the h_ref = min(h_list)/16 reference, per path, reported
/// as quartiles over paths.
inline std::vector<ConvergenceRow> convergence_study(const RunConfig& cfg,
                                                     const RunOptions& opt) {
  if (opt.h_list.empty())
    throw config_error("harness.convergence_study: h_list must be nonempty");
  for (std::size_t i = 1; i < opt.h_list.size(); ++i)
    if (!(opt.h_list[i] < opt.h_list[i - 1]))
      throw config_error("harness.convergence_study: h_list must be strictly decreasing");
  for (double h : opt.h_list)
    if (!(h > 0.0 && h < 1.0))
      throw config_error("harness.convergence_study: every h must lie in (0, 1)");

  const lamperti::LampertiModel model(cfg.build_model());
  const HurstParam H(cfg.hurst);
  const double h_ref = opt.h_list.back() / 16.0;
  const double S = cfg.scheme.horizon;
  std::filesystem::create_directories(cfg.outputs.csv_dir);

  const scheme::DriftFn g_raw = [&model](double y) { return model.drift(y); };
  const scheme::DriftFn g_bar = scheme::truncate_drift(g_raw, opt.truncate_m);

  const std::size_t n_h = opt.h_list.size();
  std::vector<std::vector<double>> sup_errors(n_h);  // [h index][path]
  for (auto& v : sup_errors) v.resize(cfg.n_paths);

  detail::parallel_for(cfg.n_paths, opt.threads, [&](long p) {
    const std::uint64_t path_seed = RandomStream::derive_seed(cfg.scheme.seed, p);
    try {
      fbm::ExactSampler shared(H, RandomStream::for_path(cfg.scheme.seed, p));
      auto run_with_h = [&](double h) {
        scheme::SchemeConfig sc;
        sc.h = h;
        sc.sigma_const = cfg.scheme.sigma_const;
        sc.y_threshold = resolve_y_threshold(cfg, model);
        sc.horizon = S;
        sc.max_steps = cfg.scheme.max_steps;
        sc.seed = cfg.scheme.seed;
        sc.validate(model.y0());
        scheme::SharedPathNoise noise(shared);
        return scheme::run_adaptive(g_bar, model.y0(), sc, noise);
      };
      // fixed execution order keeps the shared-path draws deterministic
      std::vector<scheme::AdaptiveTrajectory> runs;
      runs.reserve(n_h);
      for (double h : opt.h_list) runs.push_back(run_with_h(h));
      const scheme::AdaptiveTrajectory ref = run_with_h(h_ref);

      for (std::size_t ih = 0; ih < n_h; ++ih) {
        const auto& traj = runs[ih];
        const double t_end = std::min({S, traj.times.back(), ref.times.back()});
        double sup = 0.0;
        auto scan = [&](const std::vector<double>& ts) {
          for (double t : ts) {
            if (t > t_end) break;
            const double a =
                detail::interp_value(traj, g_bar, cfg.scheme.sigma_const, shared, t);
            const double b =
                detail::interp_value(ref, g_bar, cfg.scheme.sigma_const, shared, t);
            sup = std::max(sup, std::abs(a - b));
          }
        };
        scan(traj.times);
        scan(ref.times);
        sup_errors[ih][p] = sup;
      }
    } catch (const std::exception& e) {
      detail::throw_with_path_context(e, p, path_seed);
    }
  });

  std::vector<ConvergenceRow> rows;
  for (std::size_t ih = 0; ih < n_h; ++ih) {
    ConvergenceRow r;
    r.h = opt.h_list[ih];
    if (cfg.n_paths > 0) {
      r.median_sup_error = quantile(sup_errors[ih], 0.5);
      r.q25 = quantile(sup_errors[ih], 0.25);
      r.q75 = quantile(sup_errors[ih], 0.75);
    }
    rows.push_back(r);
  }
  if (cfg.n_paths == 0) rows.clear();  // degenerate config: empty table

  std::ofstream out(detail::join_path(cfg.outputs.csv_dir, "convergence.csv"), std::ios::binary);
  if (!out)
    throw resource_error("harness.convergence_study: cannot open output csv");
  out << "h,median_sup_error,q25,q75\n";
  for (const auto& r : rows)
    out << g17(r.h) << ',' << g17(r.median_sup_error) << ',' << g17(r.q25) << ',' << g17(r.q75)
        << '\n';
  if (!opt.quiet)
    for (const auto& r : rows)
      std::printf("convergence: h=%s median=%s q25=%s q75=%s\n", g17(r.h).c_str(),
                  g17(r.median_sup_error).c_str(), g17(r.q25).c_str(), g17(r.q75).c_str());
  return rows;
}

/// Osgood classification of the configured model's drift from a = x0.
inline lamperti::OsgoodResult osgood_cmd(const RunConfig& cfg, const RunOptions& opt) {
  const lamperti::ModelSpec model = cfg.build_model();
  const auto res = lamperti::osgood_criterion(model.drift_b, model.x0);
  if (!opt.quiet) {
    if (res.finite)
      std::printf("finite=true value=%s doublings=%d\n", g17(res.value).c_str(), res.doublings);
    else
      std::printf("finite=false doublings=%d\n", res.doublings);
  }
  return res;
}

/// Assumption report over a user-supplied domain.
inline lamperti::ValidationReport validate_cmd(const RunConfig& cfg, double lo, double hi,
                                               int grid_size, const RunOptions& opt) {
  const lamperti::ModelSpec model = cfg.build_model();
  const auto rep = lamperti::validate_assumptions(model, lo, hi, grid_size);
  if (!opt.quiet) {
    for (const auto& it : rep.items)
      std::printf("check=%s pass=%s witness_x=%s detail=\"%s\"\n", it.check.c_str(),
                  it.pass ? "true" : "false", g17(it.witness_x).c_str(), it.detail.c_str());
    std::printf("l2_bound=%s lg_bound=%s all_pass=%s\n", g17(rep.l2_bound).c_str(),
                g17(rep.lg_bound).c_str(), rep.all_pass() ? "true" : "false");
  }
  return rep;
}

struct KernelCheckResult {
  double max_defect = 0.0;
  bool pass = false;
};

/// Defect of the representation identity over a 5x5 grid in [0.2, 2] for the
/// configured H, plus the d_H calibration table (golden file format).
inline KernelCheckResult kernel_check(const RunConfig& cfg, const RunOptions& opt) {
  std::filesystem::create_directories(cfg.outputs.csv_dir);
  const HurstParam H(cfg.hurst);

  KernelCheckResult res;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) {
      const double t = 0.2 + 1.8 * i / 4.0;
      const double s = 0.2 + 1.8 * j / 4.0;
      res.max_defect = std::max(res.max_defect, fbm::kernel_consistency_defect(t, s, H));
    }
  res.pass = res.max_defect <= 1e-3;

  std::vector<double> hs = {0.55, 0.65, 0.75};
  if (std::find(hs.begin(), hs.end(), cfg.hurst) == hs.end()) hs.push_back(cfg.hurst);
  std::sort(hs.begin(), hs.end());
  std::ofstream out(detail::join_path(cfg.outputs.csv_dir, "d_h_calibration.csv"),
                    std::ios::binary);
  if (!out) throw resource_error("harness.kernel_check: cannot open d_h_calibration.csv");
  out << "H,d_H,defect\n";
  for (double h : hs) {
    const HurstParam hp(h);
    const double d = fbm::kernel_constant(hp);
    const double defect = std::abs(fbm::kk_integral(1.0, 1.0, 1.0, hp, 1e-11, 1e-10) - 1.0);
    out << g17(h) << ',' << g17(d) << ',' << g17(defect) << '\n';
  }

  if (!opt.quiet)
    std::printf("kernel-check: H=%s max_defect=%s pass=%s\n", g17(cfg.hurst).c_str(),
                g17(res.max_defect).c_str(), res.pass ? "true" : "false");
  return res;
}

}  // namespace fbmsde::harness
