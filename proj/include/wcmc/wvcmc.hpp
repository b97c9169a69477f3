#pragma once

// Variational weight optimisation: an upper bound on the free energy built
// from the entropy lower bounds below, minimised by plain SGD.

#include <cstddef>
#include <functional>
#include <vector>

#include "wcmc/aggregators.hpp"
#include "wcmc/posteriors.hpp"

namespace wcmc {

/// OMA: (d/2) log(2K sqrt(2 pi e N0))
///      + 1/(2K) sum_k [log|det W_k E_k| + H[p_k] + 1/2 log det(W_k W_k^T)].
double entropy_lb_oma(const std::vector<Matrix>& w, const std::vector<Matrix>& e, double n0,
                      const std::vector<double>& entropies);

/// NOMA: (d/2) log[(K+1) (2 pi e N0)^{1/(K+1)}]
///      + 1/(K+1) [K log|det W E| + 1/2 log det(W W^T) + sum_k H[p_k]].
double entropy_lb_noma(const Matrix& w, const Matrix& e, double n0, int workers,
                       const std::vector<double>& entropies);

/// Everything the optimiser needs besides the weights.
struct VcmcProblem {
  AccessMode mode = AccessMode::Oma;
  std::vector<Samples> received;  // OMA: K streams, NOMA: one
  std::vector<Matrix> encodings;  // OMA: E_k, NOMA: the shared E
  int workers = 1;
  double n0 = 0.0;
  std::vector<double> entropies;  // H[p_k]; only shifts reported values
  const LogJoint* joint = nullptr;
  bool entropy_term = true;

  void validate() const;
};

/// Bound on the free energy: -(1/S) sum_s log p(theta^(s), Z) - entropy bound.
double vcmc_objective(const VcmcProblem& problem, const WeightSet& weights, const Minibatch& batch);

/// Gradient of vcmc_objective with respect to each weight matrix.
std::vector<Matrix> vcmc_gradient(const VcmcProblem& problem, const WeightSet& weights,
                                  const Minibatch& batch);

/// Convenience wrappers mirroring the two access modes.
std::vector<Matrix> grad_oma(const VcmcProblem& problem, const WeightSet& weights,
                             const Minibatch& batch);
Matrix grad_noma(const VcmcProblem& problem, const WeightSet& weights, const Minibatch& batch);

struct WvcmcOptions {
  double eta = 1e-3;
  int iterations = 100;         // t_m
  std::size_t batch_size = 0;   // 0 or >= N: full batch
  bool record_objective = true;
  int max_halvings = 5;
};

struct WvcmcResult {
  WeightSet weights;
  std::vector<double> objective;  // one entry per accepted iterate, starting at the init
  Samples samples;                // aggregated samples under the final weights
  int halvings = 0;
  std::size_t computed_gradients = 0;
};

using WvcmcObserver = std::function<void(int iteration, const WeightSet& weights)>;

/// Algorithms for OMA and NOMA: W <- W - eta * gradient, fresh minibatch
/// each iteration. Throws on a non-finite objective or gradient.
WvcmcResult run_wvcmc(const VcmcProblem& problem, WeightSet init, const WvcmcOptions& opts,
                      Rng& rng, const WvcmcObserver& observer = {});

enum class ScenarioKind { Gaussian, Probit };

/// OMA: the GCMC weights (already composed with the decoder).
/// NOMA: (1/K) I for the Gaussian toy, (1/K) E^+ for probit.
WeightSet init_weights(AccessMode mode, ScenarioKind scenario, const Matrix& shared_encoding,
                       int workers, const WeightSet* gcmc);

/// True when W E is numerically singular (sigma_min <= 1e-10 sigma_max).
bool numerically_singular(const Matrix& a);

}  // namespace wcmc
