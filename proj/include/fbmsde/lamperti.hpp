#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fbmsde/errors.hpp"
#include "fbmsde/quadrature.hpp"

namespace fbmsde::lamperti {

using ScalarFn = std::function<double(double)>;

enum class Family { PolynomialMultiplicative, ShiftedPower, ConstantSigma, Custom };

/// Compiled-in coefficient registry entry for Custom models. There is no
/// runtime expression parsing; custom coefficients are named functions.
struct CustomModelDef {
  ScalarFn drift_b;
  ScalarFn diffusion_sigma;
  double domain_lo;
  double domain_hi;
  std::string note;
};

/// Named drifts usable with the ConstantSigma family.
inline const std::map<std::string, ScalarFn>& drift_registry() {
  static const std::map<std::string, ScalarFn> reg = {
      {"one", [](double) { return 1.0; }},
      {"linear", [](double x) { return x; }},
      {"quartic", [](double x) { return x * x * x * x; }},
      {"exp3", [](double x) { return std::exp(3.0 * x); }},
  };
  return reg;
}

inline const std::map<std::string, CustomModelDef>& custom_registry() {
  static const std::map<std::string, CustomModelDef> reg = {
      {"arctan_theta",
       {[](double x) { return (1.0 + x * x) * (1.0 + x * x); },
        [](double x) { return 1.0 + x * x; },
        -std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
        "sigma = 1 + x^2, so Theta has bounded range (arctan shape)"}},
  };
  return reg;
}

/// Coefficient pair (b, sigma) plus initial condition and family tag.
struct ModelSpec {
  Family family = Family::Custom;
  double x0 = 1.0;
  double poly_n = 0.0;     // PolynomialMultiplicative exponent N
  double power_p = 0.0;    // ShiftedPower exponents
  double power_q = 0.0;
  double sigma_c = 1.0;    // ConstantSigma level
  std::string name;        // registry name (Custom) or drift name (ConstantSigma)
  ScalarFn drift_b;
  ScalarFn diffusion_sigma;
  double domain_lo = -std::numeric_limits<double>::infinity();
  double domain_hi = std::numeric_limits<double>::infinity();

  /// b(x) = x^N, sigma(x) = x on (0, inf); explodes for N >= 2.
  static ModelSpec polynomial_multiplicative(double n, double x0) {
    require_x0(x0);
    if (!(n >= 2.0))
      throw config_error("lamperti.ModelSpec: polynomial_multiplicative requires N >= 2");
    ModelSpec m;
    m.family = Family::PolynomialMultiplicative;
    m.x0 = x0;
    m.poly_n = n;
    m.drift_b = [n](double x) { return std::pow(x, n); };
    m.diffusion_sigma = [](double x) { return x; };
    m.domain_lo = 0.0;
    return m;
  }

  /// b(x) = (|x|+0.1)^p, sigma(x) = (|x|+0.1)^q with p > 1, 0 < q < 1.
  static ModelSpec shifted_power(double p, double q, double x0) {
    require_x0(x0);
    if (!(p > 1.0)) throw config_error("lamperti.ModelSpec: shifted_power requires p > 1");
    if (!(q > 0.0 && q < 1.0))
      throw config_error("lamperti.ModelSpec: shifted_power requires 0 < q < 1");
    ModelSpec m;
    m.family = Family::ShiftedPower;
    m.x0 = x0;
    m.power_p = p;
    m.power_q = q;
    m.drift_b = [p](double x) { return std::pow(std::abs(x) + 0.1, p); };
    m.diffusion_sigma = [q](double x) { return std::pow(std::abs(x) + 0.1, q); };
    return m;
  }

  static ModelSpec constant_sigma(double c, const std::string& drift_name, double x0) {
    require_x0(x0);
    if (!(c > 0.0)) throw config_error("lamperti.ModelSpec: constant_sigma requires c > 0");
    const auto& reg = drift_registry();
    auto it = reg.find(drift_name);
    if (it == reg.end())
      throw config_error("lamperti.ModelSpec: unknown drift '" + drift_name + "' in registry");
    ModelSpec m;
    m.family = Family::ConstantSigma;
    m.x0 = x0;
    m.sigma_c = c;
    m.name = drift_name;
    m.drift_b = it->second;
    m.diffusion_sigma = [c](double) { return c; };
    return m;
  }

  static ModelSpec custom(const std::string& name, double x0) {
    require_x0(x0);
    const auto& reg = custom_registry();
    auto it = reg.find(name);
    if (it == reg.end())
      throw config_error("lamperti.ModelSpec: unknown custom model '" + name + "'");
    ModelSpec m;
    m.family = Family::Custom;
    m.x0 = x0;
    m.name = name;
    m.drift_b = it->second.drift_b;
    m.diffusion_sigma = it->second.diffusion_sigma;
    m.domain_lo = it->second.domain_lo;
    m.domain_hi = it->second.domain_hi;
    return m;
  }

 private:
  static void require_x0(double x0) {
    if (!(x0 > 0.0) || !std::isfinite(x0))
      throw config_error("lamperti.ModelSpec: x0 must be finite and > 0");
  }
};

enum class ThetaKind { ClosedForm, Numeric };

inline ThetaKind default_theta_kind(const ModelSpec& m) {
  return m.family == Family::Custom ? ThetaKind::Numeric : ThetaKind::ClosedForm;
}

namespace detail {

inline void check_domain(const ModelSpec& m, double x, const char* op) {
  if (!(x > m.domain_lo) || !(x < m.domain_hi))
    throw model_error(std::string("lamperti.") + op + ": x=" + std::to_string(x) +
                      " outside the model domain");
}

inline double theta_numeric(const ModelSpec& m, double x) {
  check_domain(m, x, "theta");
  if (x == m.x0) return 0.0;
  // sigma overflowing to +inf contributes 0 to the integral; only a
  // nonpositive (or NaN) sigma is a model violation
  auto integrand = [&m](double s) {
    const double sig = m.diffusion_sigma(s);
    if (!(sig > 0.0))
      throw model_error("lamperti.theta: sigma nonpositive at witness x=" + std::to_string(s));
    return 1.0 / sig;
  };
  const double lo = std::min(m.x0, x);
  const double hi = std::max(m.x0, x);
  const double val = quad::gl_with_fallback(integrand, lo, hi, 1e-10).value;
  return x > m.x0 ? val : -val;
}

inline double theta_closed(const ModelSpec& m, double x) {
  switch (m.family) {
    case Family::PolynomialMultiplicative:
      if (!(x > 0.0))
        throw model_error("lamperti.theta: sigma nonpositive at witness x=" + std::to_string(x));
      return std::log(x / m.x0);
    case Family::ShiftedPower: {
      const double q = m.power_q;
      const double c = 1.0 / (1.0 - q);
      const double base0 = std::pow(m.x0 + 0.1, 1.0 - q);
      if (x >= 0.0) return c * (std::pow(x + 0.1, 1.0 - q) - base0);
      return c * (2.0 * std::pow(0.1, 1.0 - q) - std::pow(0.1 - x, 1.0 - q) - base0);
    }
    case Family::ConstantSigma:
      return (x - m.x0) / m.sigma_c;
    case Family::Custom:
      return theta_numeric(m, x);
  }
  throw std::logic_error("lamperti.theta: unreachable");
}

}  // namespace detail

/// Lamperti transform Theta(x) = int_{x0}^{x} ds / sigma(s); Theta(x0) = 0.
inline double theta(const ModelSpec& m, double x, ThetaKind kind) {
  return kind == ThetaKind::Numeric ? detail::theta_numeric(m, x) : detail::theta_closed(m, x);
}

inline double theta(const ModelSpec& m, double x) { return theta(m, x, default_theta_kind(m)); }

namespace detail {

inline double theta_inverse_numeric(const ModelSpec& m, double y, ThetaKind kind) {
  if (y == 0.0) return m.x0;
  const int max_doublings = 1000;
  double lo, hi;
  if (y > 0.0) {
    lo = m.x0;
    if (std::isfinite(m.domain_hi)) {
      double gap = m.domain_hi - m.x0;
      hi = m.x0 + 0.5 * gap;
      int k = 0;
      while (theta(m, hi, kind) < y) {
        gap *= 0.5;
        hi = m.domain_hi - 0.5 * gap;
        if (++k > max_doublings)
          throw std::range_error("lamperti.theta_inverse: y=" + std::to_string(y) +
                                 " beyond the range of Theta");
      }
    } else {
      double step = std::max(1.0, std::abs(m.x0));
      hi = m.x0 + step;
      int k = 0;
      while (theta(m, hi, kind) < y) {
        step *= 2.0;
        hi += step;
        if (++k > max_doublings || !std::isfinite(hi))
          throw std::range_error("lamperti.theta_inverse: y=" + std::to_string(y) +
                                 " beyond the range of Theta");
      }
    }
  } else {
    hi = m.x0;
    if (std::isfinite(m.domain_lo)) {
      double gap = m.x0 - m.domain_lo;
      lo = m.domain_lo + 0.5 * gap;
      int k = 0;
      while (theta(m, lo, kind) > y) {
        gap *= 0.5;
        lo = m.domain_lo + 0.5 * gap;
        if (++k > max_doublings)
          throw std::range_error("lamperti.theta_inverse: y=" + std::to_string(y) +
                                 " beyond the range of Theta");
      }
    } else {
      double step = std::max(1.0, std::abs(m.x0));
      lo = m.x0 - step;
      int k = 0;
      while (theta(m, lo, kind) > y) {
        step *= 2.0;
        lo -= step;
        if (++k > max_doublings || !std::isfinite(lo))
          throw std::range_error("lamperti.theta_inverse: y=" + std::to_string(y) +
                                 " beyond the range of Theta");
      }
    }
  }

  // safeguarded bisection with secant acceleration on the monotone Theta
  double flo = theta(m, lo, kind) - y;
  double fhi = theta(m, hi, kind) - y;
  for (int it = 0; it < 200; ++it) {
    double mid;
    if (fhi != flo) {
      mid = lo - flo * (hi - lo) / (fhi - flo);  // secant proposal
      if (!(mid > lo) || !(mid < hi)) mid = 0.5 * (lo + hi);
    } else {
      mid = 0.5 * (lo + hi);
    }
    const double fm = theta(m, mid, kind) - y;
    if (fm == 0.0) return mid;
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
      fhi = fm;
    }
    if (hi - lo <= 1e-12 * std::max(1.0, std::abs(mid))) return 0.5 * (lo + hi);
  }
  return 0.5 * (lo + hi);
}

inline double theta_inverse_closed(const ModelSpec& m, double y) {
  switch (m.family) {
    case Family::PolynomialMultiplicative:
      return m.x0 * std::exp(y);
    case Family::ShiftedPower: {
      const double q = m.power_q;
      const double base0 = std::pow(m.x0 + 0.1, 1.0 - q);
      const double y_split = (std::pow(0.1, 1.0 - q) - base0) / (1.0 - q);  // Theta(0)
      if (y >= y_split) return std::pow((1.0 - q) * y + base0, 1.0 / (1.0 - q)) - 0.1;
      return 0.1 -
             std::pow(2.0 * std::pow(0.1, 1.0 - q) - base0 - (1.0 - q) * y, 1.0 / (1.0 - q));
    }
    case Family::ConstantSigma:
      return m.x0 + m.sigma_c * y;
    case Family::Custom:
      return theta_inverse_numeric(m, y, ThetaKind::Numeric);
  }
  throw std::logic_error("lamperti.theta_inverse: unreachable");
}

}  // namespace detail

/// Inverse transform; theta_inverse(0) = x0 exactly.
inline double theta_inverse(const ModelSpec& m, double y, ThetaKind kind) {
  if (y == 0.0) return m.x0;
  return kind == ThetaKind::Numeric ? detail::theta_inverse_numeric(m, y, kind)
                                    : detail::theta_inverse_closed(m, y);
}

inline double theta_inverse(const ModelSpec& m, double y) {
  return theta_inverse(m, y, default_theta_kind(m));
}

/// Drift of the transformed equation: g(y) = b(Theta^-1(y)) / sigma(Theta^-1(y)).
inline double lamperti_drift(const ModelSpec& m, double y, ThetaKind kind) {
  const double x = theta_inverse(m, y, kind);
  return m.drift_b(x) / m.diffusion_sigma(x);
}

inline double lamperti_drift(const ModelSpec& m, double y) {
  return lamperti_drift(m, y, default_theta_kind(m));
}

/// Model bundle with a fixed transform route; y starts at Theta(x0) = 0.
struct LampertiModel {
  ModelSpec base;
  ThetaKind kind;

  explicit LampertiModel(ModelSpec spec) : base(std::move(spec)), kind(default_theta_kind(base)) {}
  LampertiModel(ModelSpec spec, ThetaKind k) : base(std::move(spec)), kind(k) {}

  double y0() const { return 0.0; }
  double theta(double x) const { return lamperti::theta(base, x, kind); }
  double theta_inverse(double y) const { return lamperti::theta_inverse(base, y, kind); }
  double drift(double y) const { return lamperti_drift(base, y, kind); }
};

struct OsgoodResult {
  bool finite = false;
  double value = std::numeric_limits<double>::infinity();
  int doublings = 0;
  double tail_ratio = 0.0;  // contribution ratio observed at the stop
};

/// Classify convergence of int_a^inf ds / b(s) by integrating over doubling
/// intervals [a 2^k, a 2^(k+1)]. Finite when the contributions either fall
/// below tol or decay geometrically (ratio bounded below 1), in which case
/// the remaining tail is added by geometric extrapolation. Exact for
/// power-law and exponential tails.
inline OsgoodResult osgood_criterion(const ScalarFn& b, double a, double tol = 1e-12,
                                     int max_doublings = 60) {
  if (!(a > 0.0))
    throw std::domain_error("lamperti.osgood_criterion: requires a > 0");
  auto inv_b = [&b](double s) {
    const double v = b(s);
    if (!(v > 0.0) || !std::isfinite(v))
      throw model_error("lamperti.osgood_criterion: b nonpositive at witness s=" +
                        std::to_string(s));
    return 1.0 / v;
  };

  OsgoodResult res;
  double total = 0.0;
  double prev_contrib = -1.0;
  std::vector<double> contribs;
  for (int k = 0; k < max_doublings; ++k) {
    const double lo = a * std::pow(2.0, k);
    const double hi = 2.0 * lo;
    const double c = quad::gl_with_fallback(inv_b, lo, hi, 1e-10).value;
    contribs.push_back(c);
    total += c;
    res.doublings = k + 1;
    if (c < tol * std::max(1.0, total)) {
      res.finite = true;
      if (prev_contrib > 0.0 && c < prev_contrib) {
        const double r = c / prev_contrib;
        total += c * r / (1.0 - r);
      }
      res.value = total;
      res.tail_ratio = prev_contrib > 0.0 ? c / prev_contrib : 0.0;
      return res;
    }
    prev_contrib = c;
  }

  // ran out of doublings: decide by the observed decay rate
  const int window = std::min<int>(10, static_cast<int>(contribs.size()) - 1);
  const double c_last = contribs.back();
  const double c_ref = contribs[contribs.size() - 1 - window];
  const double ratio = std::pow(c_last / c_ref, 1.0 / window);
  res.tail_ratio = ratio;
  if (ratio <= 0.999 && c_last > 0.0) {
    res.finite = true;
    res.value = total + c_last * ratio / (1.0 - ratio);
  } else {
    res.finite = false;
    res.value = std::numeric_limits<double>::infinity();
  }
  return res;
}

struct ValidationItem {
  std::string check;
  bool pass = false;
  double witness_x = 0.0;
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationItem> items;
  double l2_bound = 0.0;  // largest L2 with L2 <= sigma on the grid
  double lg_bound = 0.0;  // min of g over the Theta-image of the domain

  bool all_pass() const {
    for (const auto& it : items)
      if (!it.pass) return false;
    return true;
  }
};

/// Grid checks of the computable standing assumptions: sigma positivity,
/// the ordering L2 <= sigma <= b, unbounded Theta range toward both domain
/// ends, and a positive lower bound for the transformed drift g.
inline ValidationReport validate_assumptions(const ModelSpec& m, double lo, double hi,
                                             int grid_size) {
  if (!(grid_size >= 2))
    throw std::domain_error("lamperti.validate_assumptions: grid_size must be >= 2");
  if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi))
    throw std::domain_error("lamperti.validate_assumptions: domain must be finite with lo < hi");

  // families with a restricted natural domain are clipped to it
  bool clipped = false;
  if (lo <= m.domain_lo) {
    lo = m.domain_lo + 1e-9 * (hi - m.domain_lo);
    clipped = true;
  }
  if (hi >= m.domain_hi) {
    hi = m.domain_hi - 1e-9 * (m.domain_hi - lo);
    clipped = true;
  }

  ValidationReport rep;
  std::vector<double> xs(grid_size);
  for (int i = 0; i < grid_size; ++i)
    xs[i] = lo + (hi - lo) * static_cast<double>(i) / (grid_size - 1);

  const ThetaKind kind = default_theta_kind(m);

  {  // (i) sigma strictly positive
    ValidationItem it{"sigma_positive", true, 0.0, ""};
    double min_sigma = std::numeric_limits<double>::infinity();
    for (double x : xs) {
      const double s = m.diffusion_sigma(x);
      if (s < min_sigma) {
        min_sigma = s;
        it.witness_x = x;
      }
      if (!(s > 0.0)) it.pass = false;
    }
    it.detail = "min sigma = " + std::to_string(min_sigma) +
                (clipped ? " (domain clipped to the model's natural domain)" : "");
    rep.items.push_back(it);
  }

  {  // (ii) ordering L2 <= sigma <= b
    ValidationItem it{"sigma_between_l2_and_b", true, 0.0, ""};
    double min_sigma = std::numeric_limits<double>::infinity();
    double worst_gap = 0.0;
    for (double x : xs) {
      const double s = m.diffusion_sigma(x);
      const double bb = m.drift_b(x);
      min_sigma = std::min(min_sigma, s);
      if (s > bb && s - bb > worst_gap) {
        worst_gap = s - bb;
        it.pass = false;
        it.witness_x = x;
        it.detail = "violation: b(x)=" + std::to_string(bb) + " < sigma(x)=" + std::to_string(s);
      }
    }
    rep.l2_bound = min_sigma;
    if (it.pass) it.detail = "largest admissible L2 = " + std::to_string(min_sigma);
    rep.items.push_back(it);
  }

  {  // (iii) Theta unbounded toward both domain ends
    ValidationItem it{"theta_unbounded", true, 0.0, ""};
    auto probe = [&](bool upward) -> bool {
      // walk geometrically toward the domain end; bounded range shows up as
      // geometrically decaying Theta increments
      std::vector<double> vals;
      const int n_probe = 24;
      for (int i = 0; i <= n_probe; ++i) {
        double x;
        if (upward) {
          if (std::isfinite(m.domain_hi))
            x = m.domain_hi - (m.domain_hi - hi) * std::pow(0.5, i);
          else
            x = std::max(std::abs(hi), 1.0) * std::pow(2.0, i);
        } else {
          if (std::isfinite(m.domain_lo))
            x = m.domain_lo + (lo - m.domain_lo) * std::pow(0.5, i);
          else
            x = -std::max(std::abs(lo), 1.0) * std::pow(2.0, i);
        }
        vals.push_back(theta(m, x, kind));
      }
      int decaying = 0;
      for (std::size_t i = 2; i < vals.size(); ++i) {
        const double d1 = std::abs(vals[i] - vals[i - 1]);
        const double d0 = std::abs(vals[i - 1] - vals[i - 2]);
        if (d0 > 0.0 && d1 < 0.9 * d0) ++decaying;
      }
      // geometric decay for most probe steps means Theta saturates
      return decaying < static_cast<int>(vals.size()) - 2 - 4;
    };
    const bool up_ok = probe(true);
    const bool down_ok = probe(false);
    it.pass = up_ok && down_ok;
    it.detail = std::string("theta unbounded upward: ") + (up_ok ? "yes" : "no") +
                ", downward: " + (down_ok ? "yes" : "no");
    rep.items.push_back(it);
  }

  {  // (iv) lower bound for g on the Theta-image of the domain
    ValidationItem it{"drift_lower_bound", true, 0.0, ""};
    double min_g = std::numeric_limits<double>::infinity();
    for (double x : xs) {
      const double g = lamperti_drift(m, theta(m, x, kind), kind);
      if (g < min_g) {
        min_g = g;
        it.witness_x = x;
      }
    }
    rep.lg_bound = min_g;
    it.pass = min_g > 0.0;
    it.detail = "l_g = " + std::to_string(min_g) + " at x = " + std::to_string(it.witness_x);
    if (m.family == Family::PolynomialMultiplicative)
      it.detail += "; no global positive lower bound exists (g -> 0 toward the left domain end)";
    rep.items.push_back(it);
  }

  return rep;
}

}  // namespace fbmsde::lamperti
