#include "wcmc/wvcmc.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

namespace wcmc {

namespace {

constexpr double kTwoPiE = 2.0 * std::numbers::pi * std::numbers::e;

double log_abs_det(const Matrix& a) {
  if (a.rows() != a.cols()) throw DimensionError("log_abs_det: W E must be square, got " + shape_of(a));
  if (numerically_singular(a)) throw std::domain_error("entropy bound: W E is singular");
  Eigen::PartialPivLU<Matrix> lu(a);
  return lu.matrixLU().diagonal().cwiseAbs().array().log().sum();
}

double half_log_det_gram(const Matrix& w) { return 0.5 * log_det_spd(w * w.transpose()); }

double entropy_sum(const std::vector<double>& h) { return std::accumulate(h.begin(), h.end(), 0.0); }

// d/dW of log|det(W E)| and of 1/2 log det(W W^T).
Matrix logdet_grad(const Matrix& w, const Matrix& e) {
  return (w * e).inverse().transpose() * e.transpose();
}

Matrix gram_grad(const Matrix& w) { return pseudoinverse(w).transpose(); }

bool weights_ok(const VcmcProblem& p, const WeightSet& ws) {
  for (std::size_t k = 0; k < ws.w.size(); ++k) {
    if (!ws.w[k].allFinite()) return false;
    if (numerically_singular(ws.w[k] * p.encodings[k])) return false;
  }
  return true;
}

}  // namespace

bool numerically_singular(const Matrix& a) {
  Eigen::JacobiSVD<Matrix> svd(a);
  const Vector& s = svd.singularValues();
  if (s.size() == 0 || !(s(0) > 0.0)) return true;
  // relative test, with an absolute floor for tiny (e.g. 1x1) matrices
  return s(s.size() - 1) <= 1e-10 * std::max(s(0), 1.0);
}

double entropy_lb_oma(const std::vector<Matrix>& w, const std::vector<Matrix>& e, double n0,
                      const std::vector<double>& entropies) {
  const std::size_t k = w.size();
  if (k == 0 || e.size() != k || entropies.size() != k) {
    throw DimensionError("entropy_lb_oma: need K weights, encodings and entropies");
  }
  if (!(n0 > 0.0)) throw std::domain_error("entropy_lb_oma: bound needs N0 > 0");
  const double d = static_cast<double>(w[0].rows());
  const double kk = static_cast<double>(k);
  double acc = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    acc += log_abs_det(w[i] * e[i]) + entropies[i] + half_log_det_gram(w[i]);
  }
  return 0.5 * d * std::log(2.0 * kk * std::sqrt(kTwoPiE * n0)) + acc / (2.0 * kk);
}

double entropy_lb_noma(const Matrix& w, const Matrix& e, double n0, int workers,
                       const std::vector<double>& entropies) {
  if (workers < 1 || entropies.size() != static_cast<std::size_t>(workers)) {
    throw DimensionError("entropy_lb_noma: need K entropies");
  }
  if (!(n0 > 0.0)) throw std::domain_error("entropy_lb_noma: bound needs N0 > 0");
  const double d = static_cast<double>(w.rows());
  const double k1 = workers + 1.0;
  const double head = 0.5 * d * std::log(k1 * std::pow(kTwoPiE * n0, 1.0 / k1));
  return head + (workers * log_abs_det(w * e) + half_log_det_gram(w) + entropy_sum(entropies)) / k1;
}

void VcmcProblem::validate() const {
  if (joint == nullptr) throw std::invalid_argument("wvcmc: no log-joint model");
  if (workers < 1) throw std::invalid_argument("wvcmc: K must be positive");
  const std::size_t streams = mode == AccessMode::Oma ? static_cast<std::size_t>(workers) : 1;
  if (received.size() != streams || encodings.size() != streams) {
    throw DimensionError("wvcmc: expected " + std::to_string(streams) +
                         " received streams and encodings");
  }
  if (entropy_term && entropies.size() != static_cast<std::size_t>(workers)) {
    throw DimensionError("wvcmc: one subposterior entropy per worker");
  }
}

double vcmc_objective(const VcmcProblem& p, const WeightSet& ws, const Minibatch& batch) {
  p.validate();
  const Samples theta = apply_weights(ws, p.received);
  const double fit = -p.joint->values(theta, batch).mean();
  if (!p.entropy_term) return fit;
  const double h = p.mode == AccessMode::Oma
                       ? entropy_lb_oma(ws.w, p.encodings, p.n0, p.entropies)
                       : entropy_lb_noma(ws.w[0], p.encodings[0], p.n0, p.workers, p.entropies);
  return fit - h;
}

std::vector<Matrix> vcmc_gradient(const VcmcProblem& p, const WeightSet& ws,
                                  const Minibatch& batch) {
  p.validate();
  const Samples theta = apply_weights(ws, p.received);
  const Samples g = p.joint->gradients(theta, batch);
  const double inv_s = 1.0 / static_cast<double>(theta.cols());
  std::vector<Matrix> out;
  for (std::size_t k = 0; k < ws.w.size(); ++k) {
    Matrix grad = -inv_s * g * p.received[k].transpose();
    if (p.entropy_term) {
      const Matrix& w = ws.w[k];
      const Matrix& e = p.encodings[k];
      if (p.mode == AccessMode::Oma) {
        grad -= (logdet_grad(w, e) + gram_grad(w)) / (2.0 * p.workers);
      } else {
        grad -= (p.workers * logdet_grad(w, e) + gram_grad(w)) / (p.workers + 1.0);
      }
    }
    out.push_back(std::move(grad));
  }
  return out;
}

std::vector<Matrix> grad_oma(const VcmcProblem& p, const WeightSet& ws, const Minibatch& batch) {
  if (p.mode != AccessMode::Oma) throw std::invalid_argument("grad_oma: problem is NOMA");
  return vcmc_gradient(p, ws, batch);
}

Matrix grad_noma(const VcmcProblem& p, const WeightSet& ws, const Minibatch& batch) {
  if (p.mode != AccessMode::Noma) throw std::invalid_argument("grad_noma: problem is OMA");
  return vcmc_gradient(p, ws, batch).front();
}

WvcmcResult run_wvcmc(const VcmcProblem& p, WeightSet init, const WvcmcOptions& opts, Rng& rng,
                      const WvcmcObserver& observer) {
  p.validate();
  if (!(opts.eta >= 0.0)) throw std::invalid_argument("wvcmc: eta must be non-negative");
  if (opts.iterations < 0) throw std::invalid_argument("wvcmc: negative iteration count");
  if (init.mode != p.mode) throw std::invalid_argument("wvcmc: init weights have the wrong mode");
  init.validate(p.received);

  const std::size_t n = p.joint->num_data();
  const std::size_t nb = (opts.batch_size == 0 || n == 0) ? n : std::min(opts.batch_size, n);
  const std::size_t s = static_cast<std::size_t>(p.received.front().cols());

  WvcmcResult res;
  res.weights = std::move(init);
  auto check = [](double v, int t) {
    if (!std::isfinite(v)) {
      std::ostringstream os;
      os << "wvcmc: objective became non-finite at iteration " << t;
      throw std::runtime_error(os.str());
    }
  };
  if (opts.record_objective) {
    res.objective.push_back(vcmc_objective(p, res.weights, Minibatch::full()));
    check(res.objective.back(), 0);
  }

  for (int t = 1; t <= opts.iterations; ++t) {
    const Minibatch batch = n == 0 ? Minibatch::full() : draw_minibatch(n, nb, rng);
    const std::vector<Matrix> grad = vcmc_gradient(p, res.weights, batch);
    // Counted per data point per sample; the Gaussian toy counts one per sample.
    res.computed_gradients += std::max<std::size_t>(nb, 1) * s;
    for (const Matrix& g : grad) {
      if (!g.allFinite()) check(std::numeric_limits<double>::quiet_NaN(), t);
    }

    double eta = opts.eta;
    WeightSet next = res.weights;
    for (int h = 0;; ++h) {
      for (std::size_t k = 0; k < grad.size(); ++k) next.w[k] = res.weights.w[k] - eta * grad[k];
      if (!p.entropy_term || weights_ok(p, next)) break;
      if (h == opts.max_halvings) {
        next = res.weights;  // step rejected outright
        break;
      }
      eta *= 0.5;
      ++res.halvings;
    }
    res.weights = std::move(next);
    if (opts.record_objective) {
      res.objective.push_back(vcmc_objective(p, res.weights, batch));
      check(res.objective.back(), t);
    }
    if (observer) observer(t, res.weights);
  }
  res.samples = apply_weights(res.weights, p.received);
  if (!res.samples.allFinite()) check(std::numeric_limits<double>::quiet_NaN(), opts.iterations);
  return res;
}

WeightSet init_weights(AccessMode mode, ScenarioKind scenario, const Matrix& shared_encoding,
                       int workers, const WeightSet* gcmc) {
  if (mode == AccessMode::Oma) {
    if (gcmc == nullptr) throw std::invalid_argument("init_weights: OMA needs a GCMC fit");
    WeightSet out = *gcmc;
    out.offset = Vector();
    return out;
  }
  const double inv_k = 1.0 / static_cast<double>(workers);
  if (scenario == ScenarioKind::Gaussian) {
    return {AccessMode::Noma, {inv_k * Matrix::Identity(shared_encoding.cols(), shared_encoding.rows())},
            Vector()};
  }
  return {AccessMode::Noma, {inv_k * pseudoinverse(shared_encoding)}, Vector()};
}

}  // namespace wcmc
