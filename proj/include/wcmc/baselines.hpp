#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "wcmc/posteriors.hpp"

namespace wcmc {

/// eta_t = alpha (beta + t)^{-gamma}.
struct SgldSchedule {
  double alpha = 0.01;
  double beta = 1.0;
  double gamma = 0.7;
  std::size_t burn_in = 10000;
  std::size_t iterations = 100000;  // total, burn-in included
  std::size_t batch_size = 500;

  void validate() const;
  double step(std::size_t t) const;
};

/// Called each iteration with the step size and the injected noise vector.
using SgldObserver = std::function<void(std::size_t t, double eta, const Vector& noise)>;

struct SgldResult {
  Samples samples;  // post burn-in iterates, one per column
  std::size_t computed_gradients = 0;
};

/// theta <- theta + eta/2 [ (N/N_b) sum_B grad log p(z|theta) + grad log p(theta) ] + N(0, eta I).
SgldResult sgld_run(const LogJoint& model, const SgldSchedule& schedule, Vector init, Rng& rng,
                    const SgldObserver& observer = {});

struct BestWorker {
  std::size_t index = 0;
  double score = 0.0;
  Samples samples;
};

/// Argmin of `metric` over the per-worker sample sets.
BestWorker best_single_worker(const std::vector<Samples>& per_worker,
                              const std::function<double(const Samples&)>& metric);

}  // namespace wcmc
