#include "wcmc/posteriors.hpp"

#include <algorithm>
#include <boost/math/special_functions/digamma.hpp>
#include <cmath>
#include <numbers>
#include <numeric>

#include "wcmc/normal.hpp"

namespace wcmc {

namespace {

constexpr double kGibbsConditionCap = 1e12;
constexpr double kGibbsRidge = 1e-10;

// Rows of the shard selected by a minibatch, and the N / N_b factor.
struct BatchView {
  const Matrix* u;
  const std::vector<std::uint8_t>* v;
  const Minibatch* batch;
  double scale;

  std::size_t size() const { return batch->all ? v->size() : batch->rows.size(); }
  std::size_t row(std::size_t i) const { return batch->all ? i : batch->rows[i]; }
};

BatchView view(const ProbitShard& shard, const Minibatch& batch) {
  const std::size_t n = shard.size();
  const std::size_t nb = batch.size(n);
  if (nb == 0) throw std::invalid_argument("log_joint: empty minibatch");
  for (std::size_t r : batch.rows) {
    if (r >= n) throw std::out_of_range("log_joint: minibatch row out of range");
  }
  return {&shard.covariates, &shard.labels, &batch,
          static_cast<double>(n) / static_cast<double>(nb)};
}

}  // namespace

ProbitShard ProbitShard::from(const LabeledDataset& data, double prior_variance) {
  ProbitShard s{data.covariates, data.labels, prior_variance};
  s.validate();
  return s;
}

void ProbitShard::validate() const {
  if (labels.empty()) throw std::invalid_argument("probit shard is empty");
  if (static_cast<std::size_t>(covariates.rows()) != labels.size()) {
    throw DimensionError("probit shard: " + std::to_string(covariates.rows()) +
                         " covariate rows but " + std::to_string(labels.size()) + " labels");
  }
  if (!(prior_variance > 0.0)) throw std::invalid_argument("probit shard: prior variance <= 0");
  for (auto v : labels) {
    if (v > 1) throw std::invalid_argument("probit shard: labels must be 0 or 1");
  }
}

Matrix gaussian_global_covariance(const std::vector<Matrix>& covs) {
  if (covs.empty()) throw std::invalid_argument("gaussian_global_covariance: no covariances");
  const auto d = covs.front().rows();
  Matrix info = Matrix::Zero(d, d);
  for (const Matrix& c : covs) {
    if (c.rows() != d || c.cols() != d) {
      throw DimensionError("gaussian_global_covariance: mixed dimensions");
    }
    Eigen::LLT<Matrix> llt(require_symmetric(c, "gaussian_global_covariance"));
    if (llt.info() != Eigen::Success || eigen_ratio(c) <= kEigenCutoff) {
      throw std::domain_error("gaussian_global_covariance: singular covariance");
    }
    info += llt.solve(Matrix::Identity(d, d));
  }
  Matrix out = Eigen::LLT<Matrix>(0.5 * (info + info.transpose())).solve(Matrix::Identity(d, d));
  return 0.5 * (out + out.transpose());
}

double probit_score(double z, int v) {
  // d/dz log Phi(z) = phi(z)/Phi(z); the v = 0 branch is its reflection.
  return v == 1 ? normal::inverse_mills(z) : -normal::inverse_mills(-z);
}

double probit_loglik(const Vector& theta, const Vector& u, int v) {
  const double z = theta.dot(u);
  return normal::log_cdf(v == 1 ? z : -z);
}

Vector probit_loglik_grad(const Vector& theta, const Vector& u, int v) {
  if (theta.size() != u.size()) throw DimensionError("probit_loglik_grad: size mismatch");
  return probit_score(theta.dot(u), v) * u;
}

Vector prior_grad(const Vector& theta, double sigma2) {
  if (!(sigma2 > 0.0)) throw std::invalid_argument("prior_grad: sigma2 must be positive");
  return -theta / sigma2;
}

Minibatch Minibatch::of(std::vector<std::size_t> rows) {
  if (rows.empty()) throw std::invalid_argument("Minibatch: empty row set");
  Minibatch b;
  b.rows = std::move(rows);
  b.all = false;
  return b;
}

Minibatch draw_minibatch(std::size_t n, std::size_t batch, Rng& rng) {
  if (batch == 0) throw std::invalid_argument("draw_minibatch: batch size must be positive");
  if (batch >= n) return Minibatch::full();
  // Partial Fisher-Yates: the first `batch` slots end up uniformly chosen.
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < batch; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.next() % (n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(batch);
  std::sort(idx.begin(), idx.end());
  return Minibatch::of(std::move(idx));
}

Vector LogJoint::values(const Samples& thetas, const Minibatch& batch) const {
  Vector out(thetas.cols());
  for (Eigen::Index s = 0; s < thetas.cols(); ++s) out(s) = value(thetas.col(s), batch);
  return out;
}

Samples LogJoint::gradients(const Samples& thetas, const Minibatch& batch) const {
  Samples out(thetas.rows(), thetas.cols());
  for (Eigen::Index s = 0; s < thetas.cols(); ++s) out.col(s) = gradient(thetas.col(s), batch);
  return out;
}

// --- Gaussian ---------------------------------------------------------------

GaussianLogJoint::GaussianLogJoint(const Matrix& cov) {
  const Matrix c = require_symmetric(cov, "GaussianLogJoint");
  if (eigen_ratio(c) <= kEigenCutoff) {
    throw std::domain_error("GaussianLogJoint: covariance is not positive definite");
  }
  precision_ = Eigen::LLT<Matrix>(c).solve(Matrix::Identity(c.rows(), c.cols()));
  precision_ = 0.5 * (precision_ + precision_.transpose());
  log_norm_ = -0.5 * (c.rows() * std::log(2.0 * std::numbers::pi) + log_det_spd(c));
}

double GaussianLogJoint::value(const Vector& theta, const Minibatch&) const {
  return log_norm_ - 0.5 * theta.dot(precision_ * theta);
}

Vector GaussianLogJoint::gradient(const Vector& theta, const Minibatch&) const {
  return -precision_ * theta;
}

Vector GaussianLogJoint::values(const Samples& thetas, const Minibatch&) const {
  const Matrix pt = precision_ * thetas;
  return (log_norm_ - 0.5 * (thetas.array() * pt.array()).colwise().sum()).transpose();
}

Samples GaussianLogJoint::gradients(const Samples& thetas, const Minibatch&) const {
  return -precision_ * thetas;
}

double GaussianLogJoint::entropy() const {
  // -E[log p] = -log_norm + d/2
  return -log_norm_ + 0.5 * static_cast<double>(precision_.rows());
}

// --- Probit -----------------------------------------------------------------

ProbitLogJoint::ProbitLogJoint(ProbitShard shard) : shard_(std::move(shard)) {
  shard_.validate();
}

double ProbitLogJoint::value(const Vector& theta, const Minibatch& batch) const {
  const BatchView b = view(shard_, batch);
  double acc = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    const std::size_t r = b.row(i);
    const double z = shard_.covariates.row(r).dot(theta);
    acc += normal::log_cdf(shard_.labels[r] ? z : -z);
  }
  return -0.5 * theta.squaredNorm() / shard_.prior_variance + b.scale * acc;
}

Vector ProbitLogJoint::gradient(const Vector& theta, const Minibatch& batch) const {
  const BatchView b = view(shard_, batch);
  Vector g = Vector::Zero(theta.size());
  for (std::size_t i = 0; i < b.size(); ++i) {
    const std::size_t r = b.row(i);
    const double z = shard_.covariates.row(r).dot(theta);
    g += probit_score(z, shard_.labels[r]) * shard_.covariates.row(r).transpose();
  }
  return prior_grad(theta, shard_.prior_variance) + b.scale * g;
}

Vector ProbitLogJoint::values(const Samples& thetas, const Minibatch& batch) const {
  const BatchView b = view(shard_, batch);
  Vector out = -0.5 * thetas.colwise().squaredNorm().transpose() / shard_.prior_variance;
  Vector acc = Vector::Zero(thetas.cols());
  for (std::size_t i = 0; i < b.size(); ++i) {
    const std::size_t r = b.row(i);
    const Eigen::RowVectorXd z = shard_.covariates.row(r) * thetas;
    const bool pos = shard_.labels[r] != 0;
    for (Eigen::Index s = 0; s < z.size(); ++s) acc(s) += normal::log_cdf(pos ? z(s) : -z(s));
  }
  return out + b.scale * acc;
}

Samples ProbitLogJoint::gradients(const Samples& thetas, const Minibatch& batch) const {
  const BatchView b = view(shard_, batch);
  const Eigen::Index nb = static_cast<Eigen::Index>(b.size());
  Matrix ub(nb, thetas.rows());
  for (Eigen::Index i = 0; i < nb; ++i) ub.row(i) = shard_.covariates.row(b.row(i));
  Matrix scores = ub * thetas;  // N_b x S
  for (Eigen::Index i = 0; i < nb; ++i) {
    const int v = shard_.labels[b.row(i)];
    for (Eigen::Index s = 0; s < scores.cols(); ++s) scores(i, s) = probit_score(scores(i, s), v);
  }
  return -thetas / shard_.prior_variance + b.scale * (ub.transpose() * scores);
}

Vector ml_estimate_probit(const ProbitShard& shard, int max_iter) {
  shard.validate();
  const int d = shard.dim();
  const double n = static_cast<double>(shard.size());
  auto loglik = [&](const Vector& th) {
    double acc = 0.0;
    const Vector z = shard.covariates * th;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      acc += normal::log_cdf(shard.labels[i] ? z(i) : -z(i));
    }
    return acc;
  };

  // Newton with backtracking; the probit log-likelihood is concave, with
  // Hessian -U^T diag(lambda (lambda + z)) U for score lambda.
  Vector theta = Vector::Zero(d);
  double f = loglik(theta);
  for (int it = 0; it < max_iter; ++it) {
    const Vector z = shard.covariates * theta;
    Vector score(z.size()), curv(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      score(i) = probit_score(z(i), shard.labels[i]);
      curv(i) = score(i) * (score(i) + z(i));
    }
    const Vector g = shard.covariates.transpose() * score;
    if (g.norm() <= 1e-10 * n) return theta;
    Matrix h = shard.covariates.transpose() * curv.asDiagonal() * shard.covariates;
    h.diagonal().array() += 1e-10 * n;  // separable or degenerate shards
    Vector dir = h.ldlt().solve(g);
    if (!dir.allFinite() || dir.dot(g) <= 0.0) dir = g / n;
    double step = 1.0;
    bool moved = false;
    while (step > 1e-12) {
      const Vector cand = theta + step * dir;
      const double fc = loglik(cand);
      if (std::isfinite(fc) && fc >= f + 1e-4 * step * dir.dot(g)) {
        theta = cand;
        f = fc;
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
    // unbounded likelihood (perfect separation): no finite MLE
    if (!theta.allFinite() || theta.norm() > 1e6) return Vector::Zero(d);
  }
  return theta.allFinite() && theta.norm() <= 1e6 ? theta : Vector::Zero(d);
}

// --- Gibbs ------------------------------------------------------------------

ProbitGibbsSampler::ProbitGibbsSampler(const ProbitShard& shard) : shard_(shard) {
  shard_.validate();
  const int d = shard.dim();
  Matrix prec = shard.covariates.transpose() * shard.covariates;
  prec.diagonal().array() += 1.0 / shard.prior_variance;
  prec = 0.5 * (prec + prec.transpose());
  const double ratio = eigen_ratio(prec);
  if (!(ratio > 1.0 / kGibbsConditionCap)) {
    prec.diagonal().array() += kGibbsRidge * prec.trace() / d;
    regularized_ = true;
  }
  cov_ = Eigen::LLT<Matrix>(prec).solve(Matrix::Identity(d, d));
  cov_ = 0.5 * (cov_ + cov_.transpose());
  factor_ = gaussian_factor(cov_);
}

Samples ProbitGibbsSampler::run(std::size_t count, std::size_t burn_in, Rng& rng) {
  const Matrix& u = shard_.covariates;
  const Eigen::Index n = u.rows();
  const Matrix proj = cov_ * u.transpose();  // d x N
  Vector theta = ml_estimate_probit(shard_);
  Vector kappa(n);
  Vector z(theta.size());
  Samples out(theta.size(), static_cast<Eigen::Index>(count));

  for (std::size_t sweep = 0; sweep < burn_in + count; ++sweep) {
    const Vector mean = u * theta;
    for (Eigen::Index i = 0; i < n; ++i) {
      kappa(i) = normal::sample_truncated(
          mean(i), shard_.labels[i] ? normal::Side::Positive : normal::Side::NonPositive, rng);
    }
    for (Eigen::Index j = 0; j < z.size(); ++j) z(j) = rng.normal();
    theta = proj * kappa + factor_ * z;
    if (observer_) observer_(theta, kappa);
    if (sweep >= burn_in) out.col(static_cast<Eigen::Index>(sweep - burn_in)) = theta;
  }
  return out;
}

Samples gibbs_probit_sampler(const ProbitShard& shard, std::size_t count, std::size_t burn_in,
                             Rng& rng) {
  return ProbitGibbsSampler(shard).run(count, burn_in, rng);
}

double knn_entropy(const Samples& x, int k) {
  const Eigen::Index s = x.cols();
  const Eigen::Index d = x.rows();
  if (k < 1 || s <= k) throw std::invalid_argument("knn_entropy: need more samples than k");
  std::vector<double> dist(static_cast<std::size_t>(s));
  double acc = 0.0;
  for (Eigen::Index i = 0; i < s; ++i) {
    for (Eigen::Index j = 0; j < s; ++j) dist[j] = (x.col(i) - x.col(j)).squaredNorm();
    dist[i] = std::numeric_limits<double>::infinity();
    std::nth_element(dist.begin(), dist.begin() + (k - 1), dist.end());
    // Ties at zero distance would give log 0; floor at a tiny radius.
    acc += 0.5 * std::log(std::max(dist[k - 1], 1e-300));
  }
  const double half_d = 0.5 * static_cast<double>(d);
  const double log_ball = half_d * std::log(std::numbers::pi) - std::lgamma(half_d + 1.0);
  return boost::math::digamma(static_cast<double>(s)) - boost::math::digamma(static_cast<double>(k)) +
         log_ball + static_cast<double>(d) * acc / static_cast<double>(s);
}

}  // namespace wcmc
