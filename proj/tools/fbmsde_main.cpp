// fbmsde command-line harness: simulation and analysis of scalar SDEs driven
// by fractional Brownian motion (H > 1/2) with finite-time explosion.

#include <cstdio>
#include <exception>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fbmsde/config.hpp"
#include "fbmsde/errors.hpp"
#include "fbmsde/experiments.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitNumerical = 2;
constexpr int kExitResource = 3;

struct CliArgs {
  std::string config_path;
  std::string out_override;
  std::uint64_t seed_override = 0;
  bool has_seed_override = false;
  fbmsde::harness::RunOptions opt;
  std::string domain = "";      // validate: "lo:hi"
  int grid_size = 256;          // validate
  std::string h_list_raw = "";  // convergence
};

std::vector<double> parse_h_list(const std::string& raw) {
  std::vector<double> hs;
  std::stringstream ss(raw);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      hs.push_back(std::stod(item));
    } catch (...) {
      throw fbmsde::config_error("harness.cli: bad --h-list entry '" + item + "'");
    }
  }
  if (hs.empty()) throw fbmsde::config_error("harness.cli: --h-list parsed to nothing");
  return hs;
}

std::pair<double, double> parse_domain(const std::string& raw) {
  const auto colon = raw.find(':');
  if (colon == std::string::npos)
    throw fbmsde::config_error("harness.cli: --domain expects 'lo:hi'");
  try {
    return {std::stod(raw.substr(0, colon)), std::stod(raw.substr(colon + 1))};
  } catch (...) {
    throw fbmsde::config_error("harness.cli: bad --domain '" + raw + "'");
  }
}

fbmsde::harness::RunConfig load_and_check(const CliArgs& args,
                                          fbmsde::harness::Experiment expected) {
  if (args.config_path.empty())
    throw fbmsde::config_error("harness.cli: --config <path> is required");
  fbmsde::harness::RunConfig cfg = fbmsde::harness::load_config(args.config_path);
  if (cfg.experiment != expected)
    throw fbmsde::config_error(std::string("harness.cli: config 'experiment' is '") +
                               fbmsde::harness::to_string(cfg.experiment) +
                               "' but the subcommand expects '" +
                               fbmsde::harness::to_string(expected) + "'");
  if (args.has_seed_override) cfg.scheme.seed = args.seed_override;
  if (!args.out_override.empty()) cfg.outputs.csv_dir = args.out_override;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  using fbmsde::harness::Experiment;
  CliArgs args;

  CLI::App app{"fbmsde: adaptive simulation of exploding SDEs driven by fractional "
               "Brownian motion"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--config", args.config_path, "JSON run configuration");
  app.add_option("--seed", args.seed_override, "override scheme.seed")
      ->each([&](const std::string&) { args.has_seed_override = true; });
  app.add_option("--out", args.out_override, "override outputs.csv_dir");
  app.add_flag("--quiet", args.opt.quiet, "suppress progress output");
  app.add_option("--threads", args.opt.threads, "worker threads (0 = hardware)");

  CLI::App* c_sim = app.add_subcommand("simulate", "run one adaptive trajectory");
  CLI::App* c_mc = app.add_subcommand("mc", "Monte Carlo explosion study");
  for (CLI::App* c : {c_sim, c_mc}) {
    c->add_flag("--skip-validation", args.opt.skip_validation,
                "run even if assumption checks fail");
    c->add_option("--alpha", args.opt.alpha, "tail bracket parameter (> 1)");
  }
  CLI::App* c_osgood = app.add_subcommand("osgood", "classify the explosion integral of b");
  CLI::App* c_validate = app.add_subcommand("validate", "grid checks of model assumptions");
  args.domain = "";
  c_validate->add_option("--domain", args.domain, "check domain lo:hi (default [x0, 10*x0])");
  c_validate->add_option("--grid-size", args.grid_size, "grid points (default 256)");
  CLI::App* c_kernel = app.add_subcommand("kernel-check", "Volterra kernel consistency check");
  CLI::App* c_conv = app.add_subcommand("convergence", "step-size convergence study");
  c_conv->add_option("--h-list", args.h_list_raw,
                     "comma-separated decreasing step sizes (default 0.2,0.1,0.05,0.025)");
  c_conv->add_option("--truncate-m", args.opt.truncate_m, "drift truncation level M (default 5)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help("", CLI::AppFormatMode::All);
    return kExitConfig;
  }

  try {
    if (app.got_subcommand(c_sim)) {
      fbmsde::harness::simulate_one(load_and_check(args, Experiment::Simulate), args.opt);
    } else if (app.got_subcommand(c_mc)) {
      fbmsde::harness::mc_explosion_study(load_and_check(args, Experiment::MonteCarlo), args.opt);
    } else if (app.got_subcommand(c_osgood)) {
      fbmsde::harness::osgood_cmd(load_and_check(args, Experiment::Osgood), args.opt);
    } else if (app.got_subcommand(c_validate)) {
      const auto cfg = load_and_check(args, Experiment::Validate);
      double lo = cfg.model_x0, hi = 10.0 * cfg.model_x0;
      if (!args.domain.empty()) std::tie(lo, hi) = parse_domain(args.domain);
      fbmsde::harness::validate_cmd(cfg, lo, hi, args.grid_size, args.opt);
    } else if (app.got_subcommand(c_kernel)) {
      const auto res =
          fbmsde::harness::kernel_check(load_and_check(args, Experiment::KernelCheck), args.opt);
      return res.pass ? kExitOk : kExitNumerical;
    } else if (app.got_subcommand(c_conv)) {
      if (!args.h_list_raw.empty()) args.opt.h_list = parse_h_list(args.h_list_raw);
      fbmsde::harness::convergence_study(load_and_check(args, Experiment::Convergence), args.opt);
    }
  } catch (const fbmsde::config_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const fbmsde::resource_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitResource;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitOk;
}
