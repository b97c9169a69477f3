#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "support.hpp"
#include "wcmc/normal.hpp"
#include "wcmc/posteriors.hpp"

using namespace wcmc;
using namespace wcmc::testing;

namespace {

ProbitShard small_shard(std::size_t n, int d, std::uint64_t seed, double prior_variance = 1.0) {
  Rng rng(seed);
  Vector theta = random_vector(d, rng);
  LabeledDataset data = gen_probit_data(n, theta, rng);
  return ProbitShard::from(data, prior_variance);
}

double relerr(double a, double b) { return std::abs(a - b) / std::max(1e-8, std::abs(b)); }

}  // namespace

TEST_SUITE("posteriors") {

TEST_CASE("normal cdf and tails") {
  for (double x : {-30.0, -8.0, -6.5, -6.0, -2.0, 0.0, 1.5, 7.0}) {
    CHECK(normal::cdf(x) == doctest::Approx(0.5 * std::erfc(-x / std::numbers::sqrt2)).epsilon(1e-12));
  }
  // log_cdf is continuous across the switch to the continued fraction
  CHECK(normal::log_cdf(-6.0 - 1e-9) == doctest::Approx(normal::log_cdf(-6.0 + 1e-9)).epsilon(1e-8));
  // asymptotic series: log phi(x) - log(-x) + log(1 - 1/x^2 + 3/x^4 - 15/x^6)
  const double x40 = -40.0, x2 = x40 * x40;
  const double series = -0.5 * x2 - 0.5 * std::log(2 * std::numbers::pi) - std::log(-x40) +
                        std::log(1 - 1 / x2 + 3 / (x2 * x2) - 15 / (x2 * x2 * x2));
  CHECK(normal::log_cdf(x40) == doctest::Approx(series).epsilon(1e-9));
  CHECK(std::isfinite(normal::log_cdf(-1e3)));
  for (double p : {1e-10, 0.01, 0.3, 0.5, 0.9}) {
    CHECK(normal::cdf(normal::quantile(p)) == doctest::Approx(p).epsilon(1e-10));
  }
  CHECK(normal::inverse_mills(0.0) == doctest::Approx(0.7979).epsilon(1e-4));
  // phi/Phi ~ -x for very negative x
  CHECK(normal::inverse_mills(-50.0) == doctest::Approx(50.02).epsilon(1e-3));
}

TEST_CASE("truncated normal: half-normal mean at the boundary") {
  Rng rng(31);
  double sum = 0.0;
  bool positive = true;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double x = normal::sample_truncated(0.0, normal::Side::Positive, rng);
    positive = positive && x > 0.0;
    sum += x;
  }
  CHECK(positive);
  CHECK(std::abs(sum / n - 0.7979) < 0.01);
}

TEST_CASE("truncated normal matches closed-form moments across the mean range") {
  // N(mu, 1) on (0, inf): mean mu + lambda, variance 1 - lambda (lambda + mu),
  // lambda = phi(mu) / Phi(mu).
  Rng rng(32);
  for (double mu : {-3.0, -1.0, -0.2, 0.5, 2.0, 5.0}) {
    const double lambda = normal::pdf(mu) / normal::cdf(mu);
    const double mean = mu + lambda;
    const double var = 1.0 - lambda * (lambda + mu);
    const int n = 100000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double x = normal::sample_truncated(mu, normal::Side::Positive, rng);
      s += x;
      s2 += x * x;
    }
    const double m = s / n;
    CAPTURE(mu);
    CHECK(std::abs(m - mean) < 5.0 * std::sqrt(var / n) + 1e-3);
    CHECK(std::abs(s2 / n - m * m - var) < 0.03 * var + 1e-3);
  }
}

TEST_CASE("truncated normal: far from and deep behind the boundary") {
  Rng rng(33);
  double sum = 0.0;
  for (int i = 0; i < 20000; ++i) sum += normal::sample_truncated(5.0, normal::Side::Positive, rng);
  CHECK(std::abs(sum / 20000 - 5.0) < 0.03);

  double tail = 0.0;
  for (int i = 0; i < 20000; ++i) {
    const double x = normal::sample_truncated(-8.0, normal::Side::Positive, rng);
    REQUIRE(std::isfinite(x));
    REQUIRE(x > 0.0);
    tail += x;
  }
  // mean of the excess over the boundary: lambda(8) - 8
  const double expect = -8.0 + normal::inverse_mills(-8.0);
  CHECK(std::abs(tail / 20000 - expect) < 0.01);

  for (int i = 0; i < 1000; ++i) {
    CHECK(normal::sample_truncated(1.0, normal::Side::NonPositive, rng) <= 0.0);
  }
}

TEST_CASE("global covariance of Gaussian subposteriors") {
  Rng rng(34);
  const Matrix a = random_spd(3, rng);
  CHECK(max_abs(gaussian_global_covariance({a}) - a) < 1e-12);
  const Matrix i2 = Matrix::Identity(2, 2);
  CHECK(max_abs(gaussian_global_covariance({i2, i2}) - 0.5 * i2) < 1e-14);

  std::vector<Matrix> covs;
  Matrix info = Matrix::Zero(5, 5);
  for (int k = 1; k <= 10; ++k) {
    covs.push_back(toeplitz_covariance((k - 1) / 10.0, 5));
    info += covs.back().inverse();
  }
  const Matrix global = gaussian_global_covariance(covs);
  CHECK(max_abs(global - info.inverse()) < 1e-10);
  // below every input in the PSD order
  for (const Matrix& c : covs) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(c - global);
    CHECK(eig.eigenvalues().minCoeff() > -1e-12);
  }
}

TEST_CASE("probit log-likelihood gradient") {
  Vector u(3);
  u << 0.3, -1.2, 2.0;
  Vector zero = Vector::Zero(3);
  CHECK(max_abs(probit_loglik_grad(zero, u, 1) - 0.7979 * u) < 1e-4);
  // reflection: grad(theta, u, 1) = -grad(-theta, u, 0) when theta^T u = 0
  Vector theta(3);
  theta << 2.0, 0.5, 0.0;
  REQUIRE(std::abs(theta.dot(u)) < 1e-15);
  CHECK(max_abs(probit_loglik_grad(theta, u, 1) + probit_loglik_grad(-theta, u, 0)) < 1e-12);

  Rng rng(35);
  const double h = 1e-5;
  for (int trial = 0; trial < 100; ++trial) {
    const Vector th = random_vector(4, rng);
    const Vector uu = random_vector(4, rng);
    const int v = trial % 2;
    const Vector g = probit_loglik_grad(th, uu, v);
    for (int i = 0; i < 4; ++i) {
      Vector p = th, m = th;
      p(i) += h;
      m(i) -= h;
      const double fd = (probit_loglik(p, uu, v) - probit_loglik(m, uu, v)) / (2 * h);
      CHECK(relerr(g(i), fd) < 1e-5);
    }
  }
}

TEST_CASE("probit score stays finite and accurate in the tails") {
  const double h = 1e-6;
  for (double z : {-40.0, -7.0, -6.0, -5.9, 0.0, 6.0, 40.0}) {
    for (int v : {0, 1}) {
      const double s = probit_score(z, v);
      REQUIRE(std::isfinite(s));
      Vector t(1), u(1);
      u << 1.0;
      t << z + h;
      const double fp = probit_loglik(t, u, v);
      t << z - h;
      const double fm = probit_loglik(t, u, v);
      CAPTURE(z);
      CAPTURE(v);
      CHECK(relerr(s, (fp - fm) / (2 * h)) < 1e-4);
    }
  }
}

TEST_CASE("prior gradient") {
  CHECK(prior_grad(Vector::Zero(3), 1.0).isZero());
  Vector th(2);
  th << 1.0, 2.0;
  Vector expect(2);
  expect << -1.0, -2.0;
  CHECK(prior_grad(th, 1.0) == expect);
  Rng rng(36);
  const double h = 1e-5, s2 = 2.5;
  const Vector t = random_vector(3, rng);
  const Vector g = prior_grad(t, s2);
  for (int i = 0; i < 3; ++i) {
    Vector p = t, m = t;
    p(i) += h;
    m(i) -= h;
    const double fd = (-p.squaredNorm() + m.squaredNorm()) / (2 * s2) / (2 * h);
    CHECK(relerr(g(i), fd) < 1e-6);
  }
}

TEST_CASE("minibatches") {
  Rng rng(37);
  const Minibatch b = draw_minibatch(100, 10, rng);
  CHECK_FALSE(b.all);
  CHECK(b.rows.size() == 10);
  CHECK(std::is_sorted(b.rows.begin(), b.rows.end()));
  CHECK(std::adjacent_find(b.rows.begin(), b.rows.end()) == b.rows.end());
  CHECK(b.rows.back() < 100);
  Rng a(38), c(38);
  const Minibatch full = draw_minibatch(50, 50, a);
  CHECK(full.all);
  CHECK(a.next() == c.next());  // no draws consumed
}

TEST_CASE("log-joint gradients match finite differences") {
  const ProbitShard shard = small_shard(200, 3, 39, 2.0);
  const ProbitLogJoint joint(shard);
  Rng rng(40);
  const double h = 1e-5;
  for (int trial = 0; trial < 20; ++trial) {
    const Minibatch batch = trial % 2 ? Minibatch::full() : draw_minibatch(200, 25, rng);
    const Vector th = 0.5 * random_vector(3, rng);
    const Vector g = joint.gradient(th, batch);
    for (int i = 0; i < 3; ++i) {
      Vector p = th, m = th;
      p(i) += h;
      m(i) -= h;
      const double fd = (joint.value(p, batch) - joint.value(m, batch)) / (2 * h);
      CHECK(relerr(g(i), fd) < 1e-5);
    }
  }
}

TEST_CASE("full batch is the unscaled sum; batched versions agree with per-sample calls") {
  const ProbitShard shard = small_shard(40, 2, 41);
  const ProbitLogJoint joint(shard);
  Rng rng(42);
  const Vector th = random_vector(2, rng);
  Vector direct = prior_grad(th, shard.prior_variance);
  for (std::size_t n = 0; n < shard.size(); ++n) {
    direct += probit_loglik_grad(th, shard.covariates.row(n).transpose(), shard.labels[n]);
  }
  CHECK(max_abs(joint.gradient(th, Minibatch::full()) - direct) < 1e-10);

  std::vector<std::size_t> all(shard.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  CHECK(max_abs(joint.gradient(th, Minibatch::of(all)) - direct) < 1e-10);

  const Samples many = random_matrix(2, 6, rng);
  const Minibatch batch = draw_minibatch(40, 7, rng);
  const Samples gs = joint.gradients(many, batch);
  const Vector vs = joint.values(many, batch);
  for (Eigen::Index s = 0; s < many.cols(); ++s) {
    CHECK(max_abs(gs.col(s) - joint.gradient(many.col(s), batch)) < 1e-10);
    CHECK(vs(s) == doctest::Approx(joint.value(many.col(s), batch)));
  }
}

TEST_CASE("Gaussian log-joint") {
  GaussianLogJoint unit(Matrix::Identity(3, 3));
  Vector th(3);
  th << 1.0, -2.0, 0.5;
  CHECK(max_abs(unit.gradient(th, Minibatch::full()) + th) < 1e-15);
  CHECK(unit.entropy() == doctest::Approx(1.5 * std::log(2 * std::numbers::pi * std::numbers::e)));
  Rng rng(43);
  const Matrix c = random_spd(3, rng);
  GaussianLogJoint g(c);
  // normalized density: value at 0 is -1/2 log det(2 pi C)
  CHECK(g.value(Vector::Zero(3), Minibatch::full()) ==
        doctest::Approx(-0.5 * std::log((2 * std::numbers::pi * c).determinant())));
  CHECK(max_abs(g.gradient(th, Minibatch::full()) + c.inverse() * th) < 1e-10);
}

TEST_CASE("maximum-likelihood initializer") {
  Rng rng(44);
  const LabeledDataset big = gen_probit_data(50000, default_probit_theta(), rng);
  const Vector est = ml_estimate_probit(ProbitShard::from(big, 1.0));
  CHECK(max_abs(est - default_probit_theta()) < 0.1);

  // each point mirrored with the opposite label: the likelihood is even in theta
  LabeledDataset sym;
  sym.covariates.resize(200, 2);
  for (int i = 0; i < 100; ++i) {
    const Vector u = random_vector(2, rng);
    sym.covariates.row(2 * i) = u.transpose();
    sym.covariates.row(2 * i + 1) = -u.transpose();
    const std::uint8_t v = i % 2;
    sym.labels.push_back(v);
    sym.labels.push_back(v);
  }
  CHECK(ml_estimate_probit(ProbitShard::from(sym, 1.0)).norm() < 1e-3);

  LabeledDataset one;
  one.covariates = Matrix::Ones(1, 2);
  one.labels = {1};
  CHECK(ml_estimate_probit(ProbitShard::from(one, 1.0)).allFinite());
}

TEST_CASE("Gibbs sampler: latent signs follow the labels after every sweep") {
  const ProbitShard shard = small_shard(60, 3, 45);
  ProbitGibbsSampler sampler(shard);
  bool consistent = true;
  sampler.set_observer([&](const Vector&, const Vector& kappa) {
    for (Eigen::Index n = 0; n < kappa.size(); ++n) {
      consistent = consistent && ((kappa(n) > 0.0) == (shard.labels[n] == 1));
    }
  });
  Rng rng(46);
  const Samples s = sampler.run(200, 20, rng);
  CHECK(s.cols() == 200);
  CHECK(consistent);
}

TEST_CASE("Gibbs sampler determinism and K=1 equivalence") {
  Rng data_rng(47);
  const LabeledDataset data = gen_probit_data(80, default_probit_theta(), data_rng);
  Rng a(48), b(48);
  const Samples x = gibbs_probit_sampler(ProbitShard::from(data, 1.0), 50, 10, a);
  // a single worker's subposterior (prior variance K sigma^2 = sigma^2) is the global one
  const Samples y = gibbs_probit_sampler(ProbitShard::from(data, 1 * 1.0), 50, 10, b);
  CHECK(x == y);
}

TEST_CASE("Gibbs sampler: single positive observation under a flat prior") {
  LabeledDataset one;
  one.covariates = Matrix::Ones(1, 1);
  one.labels = {1};
  Rng rng(49);
  const Samples s = gibbs_probit_sampler(ProbitShard::from(one, 1e6), 10000, 100, rng);
  const double positive = (s.array() > 0.0).cast<double>().mean();
  CHECK(positive > 0.9);
}

TEST_CASE("Gibbs sampler matches 1-d quadrature") {
  const ProbitShard shard = small_shard(15, 1, 50);
  // posterior mean by trapezoid on [-8, 8]
  double z = 0.0, m = 0.0;
  const int nodes = 4001;
  for (int i = 0; i < nodes; ++i) {
    const double t = -8.0 + 16.0 * i / (nodes - 1);
    double lp = -0.5 * t * t / shard.prior_variance;
    for (std::size_t n = 0; n < shard.size(); ++n) {
      const double a = t * shard.covariates(static_cast<Eigen::Index>(n), 0);
      lp += shard.labels[n] ? normal::log_cdf(a) : normal::log_cdf(-a);
    }
    const double w = std::exp(lp) * ((i == 0 || i == nodes - 1) ? 0.5 : 1.0);
    z += w;
    m += w * t;
  }
  Rng rng(51);
  const Samples s = gibbs_probit_sampler(shard, 20000, 100, rng);
  CHECK(std::abs(s.row(0).mean() - m / z) < 0.03);
}

TEST_CASE("nearest-neighbour entropy of a Gaussian") {
  Rng rng(52);
  Matrix c(2, 2);
  c << 1.0, 0.4, 0.4, 0.5;
  const Samples x = MvnSampler(Vector::Zero(2), c).draw(rng, 5000);
  const double exact = GaussianLogJoint(c).entropy();
  CHECK(std::abs(knn_entropy(x) - exact) < 0.06);
}

TEST_CASE("shard validation") {
  ProbitShard bad;
  bad.covariates = Matrix::Zero(3, 2);
  bad.labels = {0, 1};
  CHECK_THROWS(bad.validate());
  bad.labels = {0, 1, 2};
  CHECK_THROWS(bad.validate());
  ProbitShard empty;
  empty.covariates = Matrix::Zero(0, 2);
  CHECK_THROWS(empty.validate());
}

}  // TEST_SUITE
