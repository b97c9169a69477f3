#include "wcmc/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "wcmc/normal.hpp"

namespace wcmc {

namespace {
constexpr double kProbClamp = 1e-12;
}

SecondOrderError second_order_error(const Samples& samples, const Matrix& reference_moment) {
  const auto d = samples.rows();
  if (d < 1 || samples.cols() < 1) throw DimensionError("second_order_error: empty sample set");
  if (reference_moment.rows() != d || reference_moment.cols() != d) {
    throw DimensionError("second_order_error: reference is " + shape_of(reference_moment));
  }
  const Matrix m = second_moment(samples);
  SecondOrderError out;
  double acc = 0.0;
  int used = 0;
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index i = 0; i < d; ++i) {
      const double ref = reference_moment(i, j);
      if (ref == 0.0) {
        ++out.excluded;
        continue;
      }
      acc += std::abs(m(i, j) - ref) / std::abs(ref);
      ++used;
    }
  }
  out.value = used > 0 ? acc / used : 0.0;
  return out;
}

SecondOrderError second_order_error_vs(const Samples& samples, const Samples& reference) {
  return second_order_error(samples, second_moment(reference));
}

double ensemble_predict(const Samples& samples, const Vector& u) {
  if (samples.cols() == 0) throw DimensionError("ensemble_predict: no samples");
  if (u.size() != samples.rows()) throw DimensionError("ensemble_predict: covariate size mismatch");
  const Eigen::RowVectorXd z = u.transpose() * samples;
  double acc = 0.0;
  for (Eigen::Index s = 0; s < z.size(); ++s) acc += normal::cdf(z(s));
  return acc / static_cast<double>(z.size());
}

Vector ensemble_predict_all(const Samples& samples, const Matrix& covariates) {
  if (samples.cols() == 0) throw DimensionError("ensemble_predict: no samples");
  if (covariates.cols() != samples.rows()) throw DimensionError("ensemble_predict: covariate size mismatch");
  const Matrix z = covariates * samples;
  Vector out(z.rows());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    double acc = 0.0;
    for (Eigen::Index s = 0; s < z.cols(); ++s) acc += normal::cdf(z(i, s));
    out(i) = acc / static_cast<double>(z.cols());
  }
  return out;
}

double bernoulli_kl(double p, double q) {
  p = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
  q = std::clamp(q, kProbClamp, 1.0 - kProbClamp);
  return p * std::log(p / q) + (1.0 - p) * std::log((1.0 - p) / (1.0 - q));
}

double kl_ensemble(const Samples& samples, const Samples& reference, const Matrix& covariates) {
  if (covariates.rows() < 1) throw DimensionError("kl_ensemble: no test points");
  const Vector p = ensemble_predict_all(samples, covariates);
  const Vector q = ensemble_predict_all(reference, covariates);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) acc += std::max(bernoulli_kl(p(i), q(i)), 0.0);
  return acc / static_cast<double>(p.size());
}

}  // namespace wcmc
