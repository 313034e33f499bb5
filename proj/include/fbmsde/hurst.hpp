#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace fbmsde {

/// Validated Hurst exponent. The half-open range [1/2, 1) is accepted:
/// H = 1/2 reduces every kernel to the Brownian case and is kept for
/// reduction tests, while the adaptive pipeline itself requires H > 1/2.
class HurstParam {
 public:
  explicit HurstParam(double h) : h_(h) {
    if (!(h >= 0.5) || !(h < 1.0))
      throw std::domain_error("fbm_kernels.HurstParam: H must lie in [0.5, 1), got " +
                              std::to_string(h));
  }

  double value() const { return h_; }
  double two_h() const { return 2.0 * h_; }
  bool is_brownian() const { return h_ == 0.5; }

  bool operator==(const HurstParam& o) const { return h_ == o.h_; }

 private:
  double h_;
};

}  // namespace fbmsde
