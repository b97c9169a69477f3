#pragma once

#include "wcmc/matops.hpp"

namespace wcmc {

struct SecondOrderError {
  double value = 0.0;
  /// Reference entries equal to zero, skipped to avoid dividing by zero.
  int excluded = 0;
};

/// Mean over (i, j) of |M_hat_ij - M_ij| / |M_ij| with M_hat the sample
/// second moment. Zero reference entries are excluded from the mean.
SecondOrderError second_order_error(const Samples& samples, const Matrix& reference_moment);

/// Same, with the reference moment estimated from reference samples.
SecondOrderError second_order_error_vs(const Samples& samples, const Samples& reference);

/// (1/S) sum_s Phi(theta_s^T u).
double ensemble_predict(const Samples& samples, const Vector& u);
/// One prediction per row of `covariates` (N_t x d).
Vector ensemble_predict_all(const Samples& samples, const Matrix& covariates);

double bernoulli_kl(double p, double q);

/// Mean Bernoulli KL between the ensemble predictions of `samples` and of
/// `reference` over the test covariates, probabilities clamped to [1e-12, 1-1e-12].
double kl_ensemble(const Samples& samples, const Samples& reference, const Matrix& covariates);

}  // namespace wcmc
