#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "wcmc/aggregators.hpp"
#include "wcmc/channel.hpp"

using namespace wcmc;
using namespace wcmc::testing;

TEST_SUITE("aggregators") {

TEST_CASE("apply_weights") {
  Rng rng(81);
  const int d = 3, K = 4, l = 2;
  // noiseless repeated copies of the same theta: averaging weights give theta back
  const Samples th = random_matrix(d, 5, rng);
  std::vector<Samples> y(K, repetition_encoding(d, l, 1.0) * th);
  Matrix avg(d, d * l);
  avg << Matrix::Identity(d, d), Matrix::Identity(d, d);
  WeightSet ws{AccessMode::Oma, std::vector<Matrix>(K, avg / (l * K)), Vector()};
  CHECK(max_abs(apply_weights(ws, y) - th) < 1e-14);

  WeightSet zero{AccessMode::Oma, std::vector<Matrix>(K, Matrix::Zero(d, d * l)), Vector()};
  CHECK(apply_weights(zero, y).isZero());

  // direct arithmetic oracle, with an offset
  std::vector<Samples> ry;
  WeightSet rw{AccessMode::Oma, {}, random_vector(d, rng)};
  Samples expect = Samples::Zero(d, 7);
  for (int k = 0; k < K; ++k) {
    ry.push_back(random_matrix(d * l, 7, rng));
    rw.w.push_back(random_matrix(d, d * l, rng));
  }
  for (Eigen::Index s = 0; s < 7; ++s) {
    Vector acc = rw.offset;
    for (int k = 0; k < K; ++k) acc += rw.w[k] * ry[k].col(s);
    expect.col(s) = acc;
  }
  CHECK(max_abs(apply_weights(rw, ry) - expect) < 1e-12);

  WeightSet bad{AccessMode::Oma, {Matrix::Zero(d, d)}, Vector()};
  CHECK_THROWS(apply_weights(bad, ry));
}

TEST_CASE("GCMC weights from covariances") {
  Rng rng(82);
  const Matrix a = random_spd(3, rng);
  CHECK(max_abs(gcmc_weights_from_cov({a})[0] - Matrix::Identity(3, 3)) < 1e-12);
  const auto two = gcmc_weights_from_cov({a, a});
  CHECK(max_abs(two[0] - 0.5 * Matrix::Identity(3, 3)) < 1e-12);
  CHECK(max_abs(two[1] - 0.5 * Matrix::Identity(3, 3)) < 1e-12);

  // diag(1,2), diag(2,1), diag(1,1): inverse sum diag(2.5, 2.5)
  std::vector<Matrix> covs(3, Matrix::Zero(2, 2));
  covs[0].diagonal() << 1, 2;
  covs[1].diagonal() << 2, 1;
  covs[2].diagonal() << 1, 1;
  const auto w = gcmc_weights_from_cov(covs);
  Matrix w0 = Matrix::Zero(2, 2), w1 = Matrix::Zero(2, 2), w2 = Matrix::Zero(2, 2);
  w0.diagonal() << 1.0 / 2.5, 0.5 / 2.5;
  w1.diagonal() << 0.5 / 2.5, 1.0 / 2.5;
  w2.diagonal() << 1.0 / 2.5, 1.0 / 2.5;
  CHECK(max_abs(w[0] - w0) < 1e-14);
  CHECK(max_abs(w[1] - w1) < 1e-14);
  CHECK(max_abs(w[2] - w2) < 1e-14);
}

TEST_CASE("GCMC weights sum to the identity") {
  Rng rng(83);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Samples> samples;
    for (int k = 0; k < 5; ++k) samples.push_back(random_matrix(4, 30, rng));
    Matrix sum = Matrix::Zero(4, 4);
    for (const Matrix& w : gcmc_weights(samples)) sum += w;
    CHECK(max_abs(sum - Matrix::Identity(4, 4)) < 1e-9);
  }
  CHECK_THROWS(gcmc_weights({Samples::Zero(2, 1)}));
}

TEST_CASE("WGCMC-OMA with exact covariances") {
  // K=1, C=I, P=1, N0=1 gives I / sqrt 2
  const auto one = wgcmc_oma_from_cov({Matrix::Identity(3, 3)}, {1.0}, 1.0);
  CHECK(max_abs(one[0] - Matrix::Identity(3, 3) / std::sqrt(2.0)) < 1e-12);

  // noiseless, unit power: GCMC
  Rng rng(84);
  std::vector<Matrix> covs{random_spd(3, rng), random_spd(3, rng), random_spd(3, rng)};
  const auto a = wgcmc_oma_from_cov(covs, {1.0, 1.0, 1.0}, 0.0);
  const auto b = gcmc_weights_from_cov(covs);
  for (int k = 0; k < 3; ++k) CHECK(max_abs(a[k] - b[k]) < 1e-9);
}

TEST_CASE("WGCMC-NOMA with exact covariances") {
  CHECK(max_abs(wgcmc_noma_from_cov(Matrix::Identity(2, 2), 1, 1.0, 0.0) - Matrix::Identity(2, 2)) < 1e-12);
  Rng rng(85);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix c0 = random_spd(4, rng);
    const int K = 2 + trial % 4;
    const double p = 0.5 + rng.uniform(), n0 = 0.1 + rng.uniform();
    const Matrix w = wgcmc_noma_from_cov(c0, K, p, n0);
    const Matrix lhs = w * (K * p * c0 + n0 * Matrix::Identity(4, 4)) * w.transpose();
    CHECK(max_abs(lhs - c0 / K) < 1e-8);
  }
}

TEST_CASE("noisy covariance estimate removes the noise floor") {
  Rng rng(86);
  const Matrix c = toeplitz_covariance(0.4, 3);
  const double p = 2.0, n0 = 0.5;
  const Samples th = MvnSampler(Vector::Zero(3), c).draw(rng, 40000);
  const Transmission t = transmit_oma({th}, ChannelModel::identity(3), {repetition_encoding(3, 1, p)}, n0, rng);
  const Matrix est = noisy_covariance_estimate(t.received[0], p, n0);
  CHECK(max_abs(est - c) < 0.05);
  // PSD even when the noise swamps the signal
  const Matrix tiny = noisy_covariance_estimate(random_matrix(3, 10, rng), 1.0, 5.0);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(tiny);
  CHECK(eig.eigenvalues().minCoeff() >= -1e-12);
}

TEST_CASE("repetition average") {
  const Matrix r = repetition_average(2, 3);
  CHECK(max_abs(r * repetition_encoding(2, 3, 1.0) - Matrix::Identity(2, 2)) < 1e-15);
}

TEST_CASE("regularize_covariance only touches singular input") {
  Rng rng(87);
  const Matrix a = random_spd(3, rng);
  CHECK(regularize_covariance(a) == a);
  Matrix s = Matrix::Zero(3, 3);
  s(0, 0) = 1.0;
  const Matrix r = regularize_covariance(s);
  CHECK(eigen_ratio(r) > 0.0);
  CHECK(r(1, 1) == doctest::Approx(1e-8 / 3.0));
}

TEST_CASE("WGCMC-NOMA on simulated homogeneous signals") {
  Rng rng(88);
  const int d = 3, K = 4, S = 20000;
  const Matrix c0 = toeplitz_covariance(0.5, d);
  const double n0 = 0.3, p = 1.2;
  std::vector<Samples> th;
  for (int k = 0; k < K; ++k) th.push_back(MvnSampler(Vector::Zero(d), c0).draw(rng, S));
  const Transmission t = transmit_noma(th, ChannelModel::identity(d), repetition_encoding(d, 1, p), n0, rng);
  const WeightSet ws = fit_wgcmc_noma(t.received[0], K, p, n0);
  const Matrix out = sample_covariance(apply_weights(ws, t.received));
  CHECK((out - c0 / K).norm() / (c0 / K).norm() < 0.05);
}

TEST_CASE("fitted OMA rules recover the global posterior in the low-noise limit") {
  Rng rng(89);
  const int d = 2, K = 3, S = 20000, l = 2;
  std::vector<Matrix> covs{toeplitz_covariance(0.0, d), toeplitz_covariance(0.5, d), toeplitz_covariance(-0.3, d)};
  Matrix info = Matrix::Zero(d, d);
  for (const Matrix& c : covs) info += c.inverse();
  const Matrix global = info.inverse();
  std::vector<Samples> th;
  std::vector<Matrix> enc;
  std::vector<double> powers;
  for (int k = 0; k < K; ++k) {
    th.push_back(MvnSampler(Vector::Zero(d), covs[k]).draw(rng, S));
    powers.push_back(1.0 + k);
    enc.push_back(repetition_encoding(d, l, powers.back()));
  }
  const double n0 = 1e-6;
  const Transmission t = transmit_oma(th, ChannelModel::identity(d * l), enc, n0, rng);
  const AggregationOptions opts{l, false};
  const Samples g = apply_weights(fit_gcmc(t.received, enc, opts), t.received);
  const Samples w = apply_weights(fit_wgcmc_oma(t.received, powers, n0, opts), t.received);
  CHECK((sample_covariance(g) - global).norm() / global.norm() < 0.05);
  CHECK((sample_covariance(w) - global).norm() / global.norm() < 0.05);
}

TEST_CASE("recentring restores the consensus mean") {
  Rng rng(90);
  const int d = 2, K = 3, S = 5000;
  Vector mu(d);
  mu << 1.5, -0.7;
  std::vector<Samples> th;
  std::vector<Matrix> enc;
  std::vector<double> powers;
  for (int k = 0; k < K; ++k) {
    th.push_back(MvnSampler(mu, 0.1 * Matrix::Identity(d, d)).draw(rng, S));
    powers.push_back(2.0);
    enc.push_back(repetition_encoding(d, 1, 2.0));
  }
  const Transmission t = transmit_oma(th, ChannelModel::identity(d), enc, 0.01, rng);
  const AggregationOptions opts{1, true};
  const Samples w = apply_weights(fit_wgcmc_oma(t.received, powers, 0.01, opts), t.received);
  CHECK(max_abs(sample_mean(w) - mu) < 0.02);
  const Samples g = apply_weights(fit_gcmc(t.received, enc, opts), t.received);
  CHECK(max_abs(sample_mean(g) - mu) < 0.02);
}

}  // TEST_SUITE
