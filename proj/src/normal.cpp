#include "wcmc/normal.hpp"

#include <algorithm>
#include <boost/math/special_functions/erf.hpp>
#include <cmath>
#include <limits>

namespace wcmc::normal {

namespace {

constexpr double kSqrt2 = 1.41421356237309504880;
constexpr double kTailSwitch = 6.0;
constexpr double kCdfClamp = 1e-15;

// Upper-tail Mills ratio (1 - Phi(t)) / phi(t) for t >= kTailSwitch, by the
// Laplace continued fraction 1 / (t + 1 / (t + 2 / (t + 3 / ...))).
double upper_mills_ratio(double t) {
  double f = t;
  for (int k = 60; k >= 1; --k) f = t + k / f;
  return 1.0 / f;
}

}  // namespace

double pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

double cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

double log_cdf(double x) {
  if (x < -kTailSwitch) {
    return -0.5 * x * x + std::log(kInvSqrt2Pi) + std::log(upper_mills_ratio(-x));
  }
  if (x > 0.0) return std::log1p(-0.5 * std::erfc(x / kSqrt2));
  return std::log(std::max(cdf(x), kCdfClamp));
}

double quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    return std::numeric_limits<double>::quiet_NaN();
  }
  return -kSqrt2 * boost::math::erfc_inv(2.0 * p);
}

double inverse_mills(double x) {
  if (x < -kTailSwitch) return 1.0 / upper_mills_ratio(-x);
  return pdf(x) / std::clamp(cdf(x), kCdfClamp, 1.0);
}

double sample_lower_truncated(double lower, Rng& rng) {
  if (lower <= 0.0) {
    // Acceptance is at least one half.
    for (;;) {
      const double z = rng.normal();
      if (z > lower) return z;
    }
  }
  // Exponential-proposal rejection with the optimal rate; acceptance stays
  // above 0.75 for every positive boundary.
  const double rate = 0.5 * (lower + std::sqrt(lower * lower + 4.0));
  for (;;) {
    const double z = lower - std::log(rng.uniform()) / rate;
    const double diff = z - rate;
    if (std::log(rng.uniform()) <= -0.5 * diff * diff) return z;
  }
}

double sample_truncated(double mean, Side side, Rng& rng) {
  if (side == Side::Positive) {
    for (;;) {
      const double kappa = mean + sample_lower_truncated(-mean, rng);
      if (kappa > 0.0) return kappa;
    }
  }
  return std::min(mean - sample_lower_truncated(mean, rng), 0.0);
}

}  // namespace wcmc::normal
