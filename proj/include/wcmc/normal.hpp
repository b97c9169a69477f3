#pragma once

// Standard normal helpers with tail-stable evaluation.

#include "wcmc/rng.hpp"

namespace wcmc::normal {

inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double pdf(double x);
double cdf(double x);
double log_cdf(double x);
double quantile(double p);

/// phi(x) / Phi(x), evaluated without forming Phi in the lower tail.
double inverse_mills(double x);

enum class Side { Positive, NonPositive };

/// One draw from N(mean, 1) restricted to (0, inf) or (-inf, 0].
double sample_truncated(double mean, Side side, Rng& rng);

/// Draw from N(0, 1) restricted to (lower, inf).
double sample_lower_truncated(double lower, Rng& rng);

}  // namespace wcmc::normal
