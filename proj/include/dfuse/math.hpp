#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>

#include "dfuse/errors.hpp"

namespace dfuse {

inline constexpr double inv_sqrt_2pi =
    std::numbers::inv_sqrtpi / std::numbers::sqrt2;

/// Standard normal density.
inline double normal_pdf(double x) {
  return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

/// Complementary cdf Q(x) of a standard normal, via erfc. Strictly
/// decreasing; Q(x) + Q(-x) = 1; underflows toward 0 (never negative).
inline double gaussian_ccdf(double x) {
  return 0.5 * std::erfc(x / std::numbers::sqrt2);
}

/// Inverse of gaussian_ccdf on (0,1): safeguarded bisection plus a Newton
/// polish. gaussian_ccdf(result) recovers p to better than 1e-12 relative.
inline double gaussian_ccdf_inv(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw config_error("gaussian_ccdf_inv: argument must lie in (0,1)");
  }
  if (p == 0.5) return 0.0;
  const bool negate = p > 0.5;
  const double q = negate ? 1.0 - p : p;  // q <= 0.5, root >= 0

  double lo = 0.0;
  double hi = 40.0;  // Q(40) ~ 1e-350 underflows below any representable q
  for (int i = 0; i < 80; ++i) {
    const double mid = 0.5 * (lo + hi);
    (gaussian_ccdf(mid) > q ? lo : hi) = mid;
  }
  double x = 0.5 * (lo + hi);
  for (int i = 0; i < 3; ++i) {
    const double pdf = normal_pdf(x);
    if (pdf <= 0.0) break;
    const double step = (gaussian_ccdf(x) - q) / pdf;
    if (!std::isfinite(step)) break;
    x += step;
    if (x < lo) x = lo;
    if (x > hi) x = hi;
  }
  return negate ? -x : x;
}

/// Compensated (Neumaier) sum; keeps grid-mass normalization checks and
/// enumeration oracles at machine precision regardless of term count.
inline double neumaier_sum(std::span<const double> values) {
  double sum = 0.0;
  double comp = 0.0;
  for (double v : values) {
    const double t = sum + v;
    comp += (std::abs(sum) >= std::abs(v)) ? (sum - t) + v : (v - t) + sum;
    sum = t;
  }
  return sum + comp;
}

/// Streaming variant of neumaier_sum for oracle loops.
class NeumaierAccumulator {
 public:
  void add(double v) {
    const double t = sum_ + v;
    comp_ += (std::abs(sum_) >= std::abs(v)) ? (sum_ - t) + v : (v - t) + sum_;
    sum_ = t;
  }
  double total() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace dfuse
