#pragma once

#include <cstdint>
#include <fstream>
#include <set>
#include <string>

#include <json.hpp>

#include "fbmsde/errors.hpp"
#include "fbmsde/lamperti.hpp"

namespace fbmsde::harness {

enum class Experiment { Simulate, MonteCarlo, Osgood, Validate, KernelCheck, Convergence };

inline const char* to_string(Experiment e) {
  switch (e) {
    case Experiment::Simulate: return "simulate";
    case Experiment::MonteCarlo: return "mc";
    case Experiment::Osgood: return "osgood";
    case Experiment::Validate: return "validate";
    case Experiment::KernelCheck: return "kernel-check";
    case Experiment::Convergence: return "convergence";
  }
  return "?";
}

struct OutputConfig {
  std::string csv_dir;
  bool emit_svg = false;
};

struct SchemeFields {
  double h = 0.1;
  double sigma_const = 1.0;
  bool threshold_is_x = false;
  double threshold = 0.0;
  double horizon = 0.0;
  long max_steps = 0;
  std::uint64_t seed = 0;
};

struct RunConfig {
  Experiment experiment = Experiment::Simulate;
  lamperti::Family family = lamperti::Family::Custom;
  double model_x0 = 1.0;
  double poly_n = 0.0;
  double power_p = 0.0, power_q = 0.0;
  double sigma_c = 1.0;
  std::string model_name;
  double hurst = 0.65;
  SchemeFields scheme;
  long n_paths = 1;
  OutputConfig outputs;

  lamperti::ModelSpec build_model() const {
    using lamperti::Family;
    switch (family) {
      case Family::PolynomialMultiplicative:
        return lamperti::ModelSpec::polynomial_multiplicative(poly_n, model_x0);
      case Family::ShiftedPower:
        return lamperti::ModelSpec::shifted_power(power_p, power_q, model_x0);
      case Family::ConstantSigma:
        return lamperti::ModelSpec::constant_sigma(sigma_c, model_name, model_x0);
      case Family::Custom:
        return lamperti::ModelSpec::custom(model_name, model_x0);
    }
    throw config_error("harness.RunConfig: unknown model family");
  }
};

namespace detail {

using nlohmann::json;

inline void reject_unknown_keys(const json& j, const std::set<std::string>& allowed,
                                const std::string& where) {
  if (!j.is_object()) throw config_error("harness.config: '" + where + "' must be an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key()))
      throw config_error("harness.config: unknown key '" + it.key() + "' in " + where);
}

inline const json& require(const json& j, const std::string& key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end())
    throw config_error("harness.config: missing key '" + key + "' in " + where);
  return *it;
}

inline double require_number(const json& j, const std::string& key, const std::string& where) {
  const json& v = require(j, key, where);
  if (!v.is_number())
    throw config_error("harness.config: '" + where + "." + key + "' must be a number");
  return v.get<double>();
}

inline std::string require_string(const json& j, const std::string& key,
                                  const std::string& where) {
  const json& v = require(j, key, where);
  if (!v.is_string())
    throw config_error("harness.config: '" + where + "." + key + "' must be a string");
  return v.get<std::string>();
}

inline Experiment parse_experiment(const std::string& s) {
  if (s == "simulate") return Experiment::Simulate;
  if (s == "mc") return Experiment::MonteCarlo;
  if (s == "osgood") return Experiment::Osgood;
  if (s == "validate") return Experiment::Validate;
  if (s == "kernel-check") return Experiment::KernelCheck;
  if (s == "convergence") return Experiment::Convergence;
  throw config_error("harness.config: unknown experiment '" + s + "'");
}

inline lamperti::Family parse_family(const std::string& s) {
  using lamperti::Family;
  if (s == "polynomial_multiplicative") return Family::PolynomialMultiplicative;
  if (s == "shifted_power") return Family::ShiftedPower;
  if (s == "constant_sigma") return Family::ConstantSigma;
  if (s == "custom") return Family::Custom;
  throw config_error("harness.config: unknown model family '" + s + "'");
}

}  // namespace detail

inline RunConfig parse_config(const nlohmann::json& j) {
  using detail::reject_unknown_keys;
  using detail::require;
  using detail::require_number;
  using detail::require_string;

  reject_unknown_keys(j, {"experiment", "model", "hurst", "scheme", "n_paths", "outputs"},
                      "config");
  RunConfig cfg;
  cfg.experiment = detail::parse_experiment(require_string(j, "experiment", "config"));

  const auto& jm = require(j, "model", "config");
  reject_unknown_keys(jm, {"family", "params", "x0"}, "model");
  cfg.family = detail::parse_family(require_string(jm, "family", "model"));
  cfg.model_x0 = require_number(jm, "x0", "model");
  if (!(cfg.model_x0 > 0.0)) throw config_error("harness.config: 'model.x0' must be > 0");

  const auto& jp = require(jm, "params", "model");
  using lamperti::Family;
  switch (cfg.family) {
    case Family::PolynomialMultiplicative:
      reject_unknown_keys(jp, {"N"}, "model.params");
      cfg.poly_n = require_number(jp, "N", "model.params");
      if (!(cfg.poly_n >= 2.0))
        throw config_error("harness.config: 'model.params.N' must be >= 2");
      break;
    case Family::ShiftedPower:
      reject_unknown_keys(jp, {"p", "q"}, "model.params");
      cfg.power_p = require_number(jp, "p", "model.params");
      cfg.power_q = require_number(jp, "q", "model.params");
      if (!(cfg.power_p > 1.0))
        throw config_error("harness.config: 'model.params.p' must be > 1");
      if (!(cfg.power_q > 0.0 && cfg.power_q < 1.0))
        throw config_error("harness.config: 'model.params.q' must lie in (0, 1)");
      break;
    case Family::ConstantSigma:
      reject_unknown_keys(jp, {"c", "drift"}, "model.params");
      cfg.sigma_c = require_number(jp, "c", "model.params");
      cfg.model_name = require_string(jp, "drift", "model.params");
      if (!(cfg.sigma_c > 0.0))
        throw config_error("harness.config: 'model.params.c' must be > 0");
      break;
    case Family::Custom:
      reject_unknown_keys(jp, {"name"}, "model.params");
      cfg.model_name = require_string(jp, "name", "model.params");
      break;
  }

  cfg.hurst = require_number(j, "hurst", "config");
  if (!(cfg.hurst >= 0.5 && cfg.hurst < 1.0))
    throw config_error("harness.config: 'hurst' must lie in [0.5, 1)");

  const auto& js = require(j, "scheme", "config");
  reject_unknown_keys(
      js, {"h", "sigma_const", "y_threshold", "x_threshold", "horizon", "max_steps", "seed"},
      "scheme");
  cfg.scheme.h = require_number(js, "h", "scheme");
  if (!(cfg.scheme.h > 0.0 && cfg.scheme.h < 1.0))
    throw config_error("harness.config: 'scheme.h' must lie in (0, 1)");
  cfg.scheme.sigma_const = require_number(js, "sigma_const", "scheme");
  if (!(cfg.scheme.sigma_const >= 0.0))
    throw config_error("harness.config: 'scheme.sigma_const' must be >= 0");
  const bool has_y = js.contains("y_threshold");
  const bool has_x = js.contains("x_threshold");
  if (has_y == has_x)
    throw config_error(
        "harness.config: exactly one of 'scheme.y_threshold' or 'scheme.x_threshold' is required");
  cfg.scheme.threshold_is_x = has_x;
  cfg.scheme.threshold = require_number(js, has_x ? "x_threshold" : "y_threshold", "scheme");
  cfg.scheme.horizon = require_number(js, "horizon", "scheme");
  if (!(cfg.scheme.horizon > 0.0))
    throw config_error("harness.config: 'scheme.horizon' must be > 0");
  {
    const auto& v = require(js, "max_steps", "scheme");
    if (!v.is_number_integer() || v.get<long>() < 1)
      throw config_error("harness.config: 'scheme.max_steps' must be an integer >= 1");
    cfg.scheme.max_steps = v.get<long>();
  }
  {
    const auto& v = require(js, "seed", "scheme");
    if (!v.is_number_unsigned() && !v.is_number_integer())
      throw config_error("harness.config: 'scheme.seed' must be an integer");
    cfg.scheme.seed = v.get<std::uint64_t>();
  }

  {
    const auto& v = require(j, "n_paths", "config");
    if (!v.is_number_integer() || v.get<long>() < 0)
      throw config_error("harness.config: 'n_paths' must be an integer >= 0");
    cfg.n_paths = v.get<long>();
    if (cfg.n_paths < 1 && cfg.experiment != Experiment::Convergence)
      throw config_error("harness.config: 'n_paths' must be >= 1 for this experiment");
  }

  const auto& jo = require(j, "outputs", "config");
  reject_unknown_keys(jo, {"csv_dir", "emit_svg"}, "outputs");
  cfg.outputs.csv_dir = require_string(jo, "csv_dir", "outputs");
  {
    const auto& v = require(jo, "emit_svg", "outputs");
    if (!v.is_boolean())
      throw config_error("harness.config: 'outputs.emit_svg' must be a boolean");
    cfg.outputs.emit_svg = v.get<bool>();
  }

  // the adaptive pipeline needs genuinely persistent noise
  const bool needs_scheme = cfg.experiment == Experiment::Simulate ||
                            cfg.experiment == Experiment::MonteCarlo ||
                            cfg.experiment == Experiment::Convergence;
  if (needs_scheme && !(cfg.hurst > 0.5))
    throw config_error("harness.config: 'hurst' must be > 0.5 for scheme experiments");

  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("harness.config: cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw config_error("harness.config: invalid JSON in '" + path + "': " + e.what());
  }
  return parse_config(j);
}

}  // namespace fbmsde::harness
