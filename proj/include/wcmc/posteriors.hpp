#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

#include "wcmc/dataset.hpp"
#include "wcmc/matops.hpp"
#include "wcmc/rng.hpp"

namespace wcmc {

/// Covariates and labels of one worker, plus the prior variance used by its
/// (sub)posterior: K sigma^2 for a subposterior, sigma^2 for the global one.
struct ProbitShard {
  Matrix covariates;  // N_k x d
  std::vector<std::uint8_t> labels;
  double prior_variance = 1.0;

  static ProbitShard from(const LabeledDataset& data, double prior_variance);

  std::size_t size() const { return labels.size(); }
  int dim() const { return static_cast<int>(covariates.cols()); }
  void validate() const;
};

/// (sum_k C_k^{-1})^{-1}.
Matrix gaussian_global_covariance(const std::vector<Matrix>& covs);

double probit_loglik(const Vector& theta, const Vector& u, int v);
/// Gradient of log Phi(+-theta^T u), via the inverse Mills ratio.
Vector probit_loglik_grad(const Vector& theta, const Vector& u, int v);
/// d/dz log Phi(z) for v = 1, d/dz log(1 - Phi(z)) for v = 0.
double probit_score(double z, int v);

Vector prior_grad(const Vector& theta, double sigma2);

/// Row subset of the data used for one stochastic gradient. `all` covers
/// every row without materializing indices.
struct Minibatch {
  std::vector<std::size_t> rows;
  bool all = true;

  static Minibatch full() { return {}; }
  static Minibatch of(std::vector<std::size_t> rows);
  std::size_t size(std::size_t n) const { return all ? n : rows.size(); }
};

/// Uniform draw of `batch` rows out of n without replacement; full batch
/// (no RNG consumed) when batch >= n.
Minibatch draw_minibatch(std::size_t n, std::size_t batch, Rng& rng);

/// log p(theta) + (N / N_b) sum_B log p(z | theta) and its gradient.
class LogJoint {
 public:
  virtual ~LogJoint() = default;

  virtual int dim() const = 0;
  /// Number of data points (0 when the model has no explicit data).
  virtual std::size_t num_data() const = 0;

  virtual double value(const Vector& theta, const Minibatch& batch) const = 0;
  virtual Vector gradient(const Vector& theta, const Minibatch& batch) const = 0;

  /// Column-wise versions for a d x S block of parameters.
  virtual Vector values(const Samples& thetas, const Minibatch& batch) const;
  virtual Samples gradients(const Samples& thetas, const Minibatch& batch) const;
};

/// Zero-mean Gaussian posterior N(0, C). Minibatches are ignored.
class GaussianLogJoint final : public LogJoint {
 public:
  explicit GaussianLogJoint(const Matrix& cov);

  int dim() const override { return static_cast<int>(precision_.rows()); }
  std::size_t num_data() const override { return 0; }
  double value(const Vector& theta, const Minibatch& batch) const override;
  Vector gradient(const Vector& theta, const Minibatch& batch) const override;
  Vector values(const Samples& thetas, const Minibatch& batch) const override;
  Samples gradients(const Samples& thetas, const Minibatch& batch) const override;

  const Matrix& precision() const { return precision_; }
  /// Differential entropy of N(0, C).
  double entropy() const;

 private:
  Matrix precision_;
  double log_norm_;
};

class ProbitLogJoint final : public LogJoint {
 public:
  explicit ProbitLogJoint(ProbitShard shard);

  int dim() const override { return shard_.dim(); }
  std::size_t num_data() const override { return shard_.size(); }
  double value(const Vector& theta, const Minibatch& batch) const override;
  Vector gradient(const Vector& theta, const Minibatch& batch) const override;
  Vector values(const Samples& thetas, const Minibatch& batch) const override;
  Samples gradients(const Samples& thetas, const Minibatch& batch) const override;

  const ProbitShard& shard() const { return shard_; }

 private:
  ProbitShard shard_;
};

/// Probit log-likelihood gradient ascent; zero vector when it fails to
/// converge within the iteration cap (separable data).
Vector ml_estimate_probit(const ProbitShard& shard, int max_iter = 2000);

/// Data-augmentation Gibbs sampler for the probit (sub)posterior.
class ProbitGibbsSampler {
 public:
  explicit ProbitGibbsSampler(const ProbitShard& shard);

  /// burn_in + count sweeps from the MLE; the first burn_in are dropped.
  Samples run(std::size_t count, std::size_t burn_in, Rng& rng);

  /// Optional hook called after every sweep (testing the sign constraint).
  void set_observer(std::function<void(const Vector& theta, const Vector& kappa)> fn) {
    observer_ = std::move(fn);
  }

  const Matrix& theta_covariance() const { return cov_; }
  bool regularized() const { return regularized_; }

 private:
  const ProbitShard& shard_;
  Matrix cov_;
  Matrix factor_;
  bool regularized_ = false;
  std::function<void(const Vector&, const Vector&)> observer_;
};

Samples gibbs_probit_sampler(const ProbitShard& shard, std::size_t count, std::size_t burn_in,
                             Rng& rng);

/// Kozachenko-Leonenko nearest-neighbour differential entropy estimate (nats).
double knn_entropy(const Samples& x, int k = 1);

}  // namespace wcmc
