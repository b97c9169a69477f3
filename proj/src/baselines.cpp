#include "wcmc/baselines.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace wcmc {

void SgldSchedule::validate() const {
  if (!(gamma > 0.5 && gamma <= 1.0)) throw std::invalid_argument("sgld: gamma must lie in (0.5, 1]");
  if (!(beta > 0.0)) throw std::invalid_argument("sgld: beta must be positive");
  if (!(alpha > 0.0)) throw std::invalid_argument("sgld: alpha must be positive");
  if (batch_size == 0) throw std::invalid_argument("sgld: batch size must be positive");
  if (burn_in >= iterations) throw std::invalid_argument("sgld: burn-in consumes every iteration");
}

double SgldSchedule::step(std::size_t t) const {
  return alpha * std::pow(beta + static_cast<double>(t), -gamma);
}

SgldResult sgld_run(const LogJoint& model, const SgldSchedule& schedule, Vector theta, Rng& rng,
                    const SgldObserver& observer) {
  schedule.validate();
  if (theta.size() != model.dim()) throw DimensionError("sgld: init has the wrong dimension");
  const std::size_t n = model.num_data();
  const std::size_t nb = n == 0 ? 1 : std::min(schedule.batch_size, n);

  SgldResult res;
  res.samples.resize(theta.size(), static_cast<Eigen::Index>(schedule.iterations - schedule.burn_in));
  Vector noise(theta.size());
  for (std::size_t t = 0; t < schedule.iterations; ++t) {
    const double eta = schedule.step(t);
    const Minibatch batch = n == 0 ? Minibatch::full() : draw_minibatch(n, nb, rng);
    const Vector g = model.gradient(theta, batch);
    res.computed_gradients += nb;
    const double sd = std::sqrt(eta);
    for (Eigen::Index i = 0; i < noise.size(); ++i) noise(i) = sd * rng.normal();
    theta += 0.5 * eta * g + noise;
    if (!theta.allFinite()) {
      std::ostringstream os;
      os << "sgld: iterate diverged at step " << t << " (eta=" << eta << ")";
      throw std::runtime_error(os.str());
    }
    if (observer) observer(t, eta, noise);
    if (t >= schedule.burn_in) res.samples.col(static_cast<Eigen::Index>(t - schedule.burn_in)) = theta;
  }
  return res;
}

BestWorker best_single_worker(const std::vector<Samples>& per_worker,
                              const std::function<double(const Samples&)>& metric) {
  if (per_worker.empty()) throw std::invalid_argument("best_single_worker: no workers");
  BestWorker best;
  best.score = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < per_worker.size(); ++k) {
    const double m = metric(per_worker[k]);
    if (k == 0 || m < best.score) {
      best.index = k;
      best.score = m;
    }
  }
  best.samples = per_worker[best.index];
  return best;
}

}  // namespace wcmc
