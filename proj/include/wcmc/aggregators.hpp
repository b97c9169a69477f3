#pragma once

// One-shot linear consensus rules applied at the server.

#include <string>
#include <vector>

#include "wcmc/matops.hpp"

namespace wcmc {

enum class AccessMode { Oma, Noma };

std::string to_string(AccessMode mode);

/// OMA: K matrices W_k (d x m_r). NOMA: a single W (d x m_r).
/// `offset` is added to every aggregated sample (zero unless recentred).
struct WeightSet {
  AccessMode mode = AccessMode::Oma;
  std::vector<Matrix> w;
  Vector offset;

  int dim() const { return w.empty() ? 0 : static_cast<int>(w.front().rows()); }
  void validate(const std::vector<Samples>& received) const;
};

/// theta^(s) = sum_k W_k y_k^(s) (+ offset), one column per block.
Samples apply_weights(const WeightSet& weights, const std::vector<Samples>& received);

/// Covariance ridge used when a matrix is numerically singular: lambda =
/// 1e-8 tr(C)/d, added only when the eigenvalue ratio falls below 1e-8.
Matrix regularize_covariance(const Matrix& c);

/// (sum_k C_k^{-1})^{-1} C_k^{-1}; d x d each, summing to the identity.
std::vector<Matrix> gcmc_weights_from_cov(const std::vector<Matrix>& covs);

/// GCMC from per-worker samples (d x S, S >= 2) using unbiased covariances.
std::vector<Matrix> gcmc_weights(const std::vector<Samples>& samples);

/// Square-case WGCMC weights for OMA from given covariances C_k:
/// (sum C^{-1})^{-1} C_k^{-1/2} (P_k C_k + N0 I)^{-1/2}.
std::vector<Matrix> wgcmc_oma_from_cov(const std::vector<Matrix>& covs,
                                       const std::vector<double>& powers, double n0);

/// Square-case WGCMC weight for NOMA from C_0:
/// (1/sqrt K) C_0^{1/2} (K minP C_0 + N0 I)^{-1/2}.
Matrix wgcmc_noma_from_cov(const Matrix& c0, int workers, double min_power, double n0);

/// (1/P) [cov(y) - N0 I]^+ from received (already repetition-averaged) signals.
Matrix noisy_covariance_estimate(const Samples& y, double power, double n0);

/// (1/l) (1_l kron I_d)^T: averages the l repeated copies of a received vector.
Matrix repetition_average(int d, int repetitions);

struct AggregationOptions {
  int repetitions = 1;
  /// Subtract each worker's empirical mean and restore the consensus mean
  /// (needed when subposteriors are not centred at zero).
  bool recenter = false;
};

/// GCMC applied to decoded signals E_k^+ y_k.
WeightSet fit_gcmc(const std::vector<Samples>& received, const std::vector<Matrix>& encodings,
                   const AggregationOptions& opts = {});

/// WGCMC for OMA. `n0` is the per-entry channel noise variance.
WeightSet fit_wgcmc_oma(const std::vector<Samples>& received, const std::vector<double>& powers,
                        double n0, const AggregationOptions& opts = {});

/// WGCMC for NOMA from the single superposed stream.
WeightSet fit_wgcmc_noma(const Samples& received, int workers, double min_power, double n0,
                         const AggregationOptions& opts = {});

}  // namespace wcmc
