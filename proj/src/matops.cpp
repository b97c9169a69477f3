#include "wcmc/matops.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace wcmc {

namespace {

template <typename F>
Matrix spectral_map(const Matrix& a, const char* what, F&& f) {
  const Matrix sym = require_symmetric(a, what);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  if (eig.info() != Eigen::Success) {
    throw std::runtime_error(std::string(what) + ": eigendecomposition failed");
  }
  const Vector& lambda = eig.eigenvalues();
  const double scale = lambda.cwiseAbs().maxCoeff();
  if (lambda.minCoeff() < -kEigenCutoff * scale) {
    throw std::domain_error(std::string(what) + ": matrix is not positive semidefinite");
  }
  const double cutoff = kEigenCutoff * std::max(lambda.maxCoeff(), 0.0);
  Vector mapped(lambda.size());
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    mapped(i) = (lambda(i) > cutoff && lambda(i) > 0.0) ? f(lambda(i)) : 0.0;
  }
  const Matrix& u = eig.eigenvectors();
  Matrix out = u * mapped.asDiagonal() * u.transpose();
  return 0.5 * (out + out.transpose());
}

}  // namespace

std::string shape_of(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

bool is_symmetric(const Matrix& a, double rel_tol) {
  if (a.rows() != a.cols()) return false;
  if (a.size() == 0) return true;
  const double scale = a.cwiseAbs().maxCoeff();
  const double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
  return asym <= rel_tol * scale;
}

Matrix require_symmetric(const Matrix& a, const char* what) {
  if (a.rows() != a.cols()) {
    throw DimensionError(std::string(what) + ": expected a square matrix, got " + shape_of(a));
  }
  if (!is_symmetric(a)) {
    throw NotSymmetricError(std::string(what) + ": matrix is not symmetric");
  }
  return 0.5 * (a + a.transpose());
}

Matrix zf_pseudoinverse(const Matrix& h) {
  if (h.cols() < h.rows()) {
    throw DimensionError("zf_pseudoinverse: need m_t >= m_r, got " + shape_of(h));
  }
  const Matrix gram = h * h.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
  const double lmax = eig.eigenvalues().maxCoeff();
  const double lmin = eig.eigenvalues().minCoeff();
  // Singular values are square roots of the Gram eigenvalues.
  if (!(lmax > 0.0) || !(lmin > 0.0) || std::sqrt(lmin / lmax) <= 1e-10) {
    throw RankDeficientError("zf_pseudoinverse: channel matrix is rank deficient");
  }
  Eigen::LLT<Matrix> llt(gram);
  if (llt.info() != Eigen::Success) {
    throw RankDeficientError("zf_pseudoinverse: H H^T is not positive definite");
  }
  return h.transpose() * llt.solve(Matrix::Identity(h.rows(), h.rows()));
}

Matrix pseudoinverse(const Matrix& a) {
  if (a.rows() <= a.cols()) {
    // a^+ = a^T (a a^T)^+
    return a.transpose() * psd_inverse(a * a.transpose());
  }
  return psd_inverse(a.transpose() * a) * a.transpose();
}

Matrix psd_inv_sqrt(const Matrix& a) {
  return spectral_map(a, "psd_inv_sqrt", [](double l) { return 1.0 / std::sqrt(l); });
}

Matrix psd_sqrt(const Matrix& a) {
  return spectral_map(a, "psd_sqrt", [](double l) { return std::sqrt(l); });
}

Matrix psd_inverse(const Matrix& a) {
  return spectral_map(a, "psd_inverse", [](double l) { return 1.0 / l; });
}

Matrix positive_part(const Matrix& a) {
  const Matrix sym = require_symmetric(a, "positive_part");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  const Vector clamped = eig.eigenvalues().cwiseMax(0.0);
  const Matrix& u = eig.eigenvectors();
  Matrix out = u * clamped.asDiagonal() * u.transpose();
  return 0.5 * (out + out.transpose());
}

Matrix toeplitz_covariance(double rho, int dim) {
  if (dim <= 0) throw DimensionError("toeplitz_covariance: dim must be positive");
  if (!(std::abs(rho) <= 1.0)) {
    throw std::invalid_argument("toeplitz_covariance: |rho| must be <= 1");
  }
  Matrix out(dim, dim);
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j < dim; ++j) {
      out(i, j) = std::pow(rho, std::abs(i - j));
    }
  }
  return out;
}

double log_det_spd(const Matrix& a) {
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) {
    throw std::domain_error("log_det_spd: matrix is not positive definite");
  }
  const Matrix& l = llt.matrixLLT();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < l.rows(); ++i) acc += std::log(l(i, i));
  return 2.0 * acc;
}

double eigen_ratio(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (a + a.transpose()), Eigen::EigenvaluesOnly);
  const double lmax = eig.eigenvalues().maxCoeff();
  if (!(lmax > 0.0)) return 0.0;
  return eig.eigenvalues().minCoeff() / lmax;
}

Matrix gaussian_factor(const Matrix& cov) {
  const Matrix sym = require_symmetric(cov, "gaussian_factor");
  if (sym.size() > 0 && (sym.diagonal().array() > 0.0).all()) {
    Eigen::LLT<Matrix> llt(sym);
    if (llt.info() == Eigen::Success) return llt.matrixL();
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  const Vector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal();
}

MvnSampler::MvnSampler(Vector mean, const Matrix& cov)
    : mean_(std::move(mean)), factor_(gaussian_factor(cov)) {
  if (factor_.rows() != mean_.size()) {
    throw DimensionError("MvnSampler: mean has length " + std::to_string(mean_.size()) +
                         " but covariance is " + shape_of(cov));
  }
}

Vector MvnSampler::draw(Rng& rng) const {
  Vector z(mean_.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
  return mean_ + factor_ * z;
}

Samples MvnSampler::draw(Rng& rng, Eigen::Index count) const {
  Samples out(mean_.size(), count);
  for (Eigen::Index s = 0; s < count; ++s) out.col(s) = draw(rng);
  return out;
}

Vector sample_mvn(const Vector& mean, const Matrix& cov, Rng& rng) {
  return MvnSampler(mean, cov).draw(rng);
}

Vector sample_mean(const Samples& x) {
  if (x.cols() == 0) throw DimensionError("sample_mean: empty sample set");
  return x.rowwise().mean();
}

Matrix sample_covariance(const Samples& x) {
  if (x.cols() < 2) throw DimensionError("sample_covariance: need at least two samples");
  const Vector mu = sample_mean(x);
  const Matrix centered = x.colwise() - mu;
  Matrix cov = centered * centered.transpose() / static_cast<double>(x.cols() - 1);
  return 0.5 * (cov + cov.transpose());
}

Matrix second_moment(const Samples& x) {
  if (x.cols() == 0) throw DimensionError("second_moment: empty sample set");
  Matrix m = x * x.transpose() / static_cast<double>(x.cols());
  return 0.5 * (m + m.transpose());
}

}  // namespace wcmc
