#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fbmsde/errors.hpp"

namespace fbmsde {

// Times closer than this are numerically indistinguishable for conditioning;
// covariance matrices over such grids are effectively singular.
inline constexpr double kMinTimeSeparation = 1e-10;

/// Strictly increasing, nonnegative time grid.
class TimeGrid {
 public:
  TimeGrid() = default;

  explicit TimeGrid(std::vector<double> times) : times_(std::move(times)) {
    for (std::size_t i = 0; i < times_.size(); ++i) {
      if (!(times_[i] >= 0.0) || !std::isfinite(times_[i]))
        throw std::domain_error("fbm_kernels.TimeGrid: times must be finite and >= 0");
      if (i > 0 && !(times_[i] - times_[i - 1] >= kMinTimeSeparation))
        throw std::domain_error(
            "fbm_kernels.TimeGrid: times must be strictly increasing with separation >= 1e-10 "
            "(offending index " + std::to_string(i) + ")");
    }
  }

  std::size_t size() const { return times_.size(); }
  bool empty() const { return times_.empty(); }
  double operator[](std::size_t i) const { return times_[i]; }
  double front() const { return times_.front(); }
  double back() const { return times_.back(); }
  const std::vector<double>& times() const { return times_; }

  void append(double t) {
    if (!(t >= 0.0) || !std::isfinite(t))
      throw std::domain_error("fbm_kernels.TimeGrid: appended time must be finite and >= 0");
    if (!times_.empty() && !(t - times_.back() >= kMinTimeSeparation))
      throw std::domain_error(
          "fbm_kernels.TimeGrid: appended time must exceed the last grid time by >= 1e-10");
    times_.push_back(t);
  }

 private:
  std::vector<double> times_;
};

/// Time grid paired with fBm levels, the growing history a simulation
/// conditions on. If the grid contains 0 the value there is exactly 0.
class SampledPath {
 public:
  SampledPath() = default;

  SampledPath(TimeGrid grid, std::vector<double> values)
      : grid_(std::move(grid)), values_(std::move(values)) {
    check();
  }

  /// History anchored at the origin: B(0) = 0.
  static SampledPath at_origin() {
    return SampledPath(TimeGrid({0.0}), {0.0});
  }

  std::size_t size() const { return grid_.size(); }
  bool empty() const { return grid_.empty(); }
  const TimeGrid& grid() const { return grid_; }
  const std::vector<double>& values() const { return values_; }
  double time(std::size_t i) const { return grid_[i]; }
  double value(std::size_t i) const { return values_[i]; }
  double last_time() const { return grid_.back(); }
  double last_value() const { return values_.back(); }

  void append(double t, double v) {
    grid_.append(t);
    values_.push_back(v);
  }

 private:
  void check() const {
    if (grid_.size() != values_.size())
      throw std::domain_error("fbm_kernels.SampledPath: grid and values must have equal length");
    for (std::size_t i = 0; i < grid_.size(); ++i)
      if (grid_[i] == 0.0 && values_[i] != 0.0)
        throw std::domain_error("fbm_kernels.SampledPath: the value at time 0 must be exactly 0");
  }

  TimeGrid grid_;
  std::vector<double> values_;
};

}  // namespace fbmsde
