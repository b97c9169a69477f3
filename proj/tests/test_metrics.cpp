#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "support.hpp"
#include "wcmc/metrics.hpp"
#include "wcmc/normal.hpp"

using namespace wcmc;
using namespace wcmc::testing;

TEST_SUITE("metrics") {

TEST_CASE("second-order error: direct cases") {
  Rng rng(141);
  const Samples x = random_matrix(3, 50, rng);
  CHECK(second_order_error_vs(x, x).value == 0.0);
  CHECK(second_order_error(x, second_moment(x)).value == doctest::Approx(0.0).epsilon(1e-14));

  Samples two(1, 2);
  two << std::sqrt(2.0), -std::sqrt(2.0);
  CHECK(second_order_error(two, Matrix::Ones(1, 1)).value == doctest::Approx(1.0));
}

TEST_CASE("second-order error: zero reference entries are skipped and counted") {
  Samples x(2, 2);
  x << 1, 1, 1, -1;
  Matrix ref = Matrix::Identity(2, 2);
  ref(0, 0) = 2.0;
  const SecondOrderError e = second_order_error(x, ref);
  CHECK(e.excluded == 2);
  // only the diagonal terms: |1-2|/2 and |1-1|/1
  CHECK(e.value == doctest::Approx(0.25));
}

TEST_CASE("second-order error: permutation invariance and Monte Carlo rate") {
  Rng rng(142);
  const Matrix c = toeplitz_covariance(0.5, 5);
  Samples x = MvnSampler(Vector::Zero(5), c).draw(rng, 100000);
  const double e = second_order_error(x, c).value;
  CHECK(e < 0.02);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(x.cols()));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng.engine());
  Samples y(x.rows(), x.cols());
  for (Eigen::Index s = 0; s < x.cols(); ++s) y.col(s) = x.col(order[static_cast<std::size_t>(s)]);
  CHECK(second_order_error(y, c).value == doctest::Approx(e).epsilon(1e-12));
}

TEST_CASE("ensemble prediction") {
  Vector u(2);
  u << 1.0, 1.0;
  Samples s(2, 1);
  s << 1.0, -1.0;
  CHECK(ensemble_predict(s, u) == doctest::Approx(0.5));
  Samples same(2, 4);
  same.colwise() = Vector::Constant(2, 0.3);
  CHECK(ensemble_predict(same, u) == doctest::Approx(normal::cdf(0.6)));

  Rng rng(143);
  const Samples r = random_matrix(2, 30, rng);
  const Matrix cov = random_matrix(10, 2, rng);
  const Vector all = ensemble_predict_all(r, cov);
  for (Eigen::Index i = 0; i < cov.rows(); ++i) {
    double p = 0.0;
    for (Eigen::Index k = 0; k < r.cols(); ++k) p += normal::cdf(r.col(k).dot(cov.row(i)));
    CHECK(all(i) == doctest::Approx(p / 30));
    CHECK(all(i) > 0.0);
    CHECK(all(i) < 1.0);
  }
}

TEST_CASE("Bernoulli KL") {
  CHECK(bernoulli_kl(0.5, 0.5) == 0.0);
  CHECK(bernoulli_kl(0.9, 0.5) == doctest::Approx(0.9 * std::log(1.8) + 0.1 * std::log(0.2)));
  CHECK(bernoulli_kl(0.9, 0.5) == doctest::Approx(0.3681).epsilon(1e-4));
  CHECK(std::isfinite(bernoulli_kl(1.0, 0.0)));
  CHECK(std::isfinite(bernoulli_kl(0.0, 1.0)));
  Rng rng(144);
  for (int i = 0; i < 200; ++i) CHECK(bernoulli_kl(rng.uniform(), rng.uniform()) >= 0.0);
}

TEST_CASE("KL between ensembles") {
  Rng rng(145);
  const Samples a = random_matrix(3, 40, rng);
  const Matrix cov = random_matrix(25, 3, rng);
  CHECK(kl_ensemble(a, a, cov) == 0.0);
  const Samples zero = Samples::Zero(3, 5);
  CHECK(kl_ensemble(zero, zero * 2.0, cov) == 0.0);
  CHECK(kl_ensemble(a, random_matrix(3, 40, rng), cov) > 0.0);
}

}  // TEST_SUITE
