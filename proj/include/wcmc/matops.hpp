#pragma once

// Dense symmetric / rectangular matrix primitives shared by every
// aggregation scheme. All spectral work goes through a symmetric
// eigendecomposition of (A + A^T) / 2.

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

#include "wcmc/rng.hpp"

namespace wcmc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// A set of Monte Carlo draws stored one draw per column (d x S).
using Samples = Eigen::MatrixXd;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NotSymmetricError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class RankDeficientError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Relative eigenvalue cutoff below which a direction is treated as null.
inline constexpr double kEigenCutoff = 1e-10;
/// Relative asymmetry accepted by the symmetric routines.
inline constexpr double kSymmetryTol = 1e-12;

bool is_symmetric(const Matrix& a, double rel_tol = kSymmetryTol);

/// Throws NotSymmetricError (or DimensionError if not square) and returns
/// the exactly symmetrized copy (A + A^T) / 2.
Matrix require_symmetric(const Matrix& a, const char* what);

/// H^T (H H^T)^{-1} for a wide, full-row-rank H.
Matrix zf_pseudoinverse(const Matrix& h);

/// Moore-Penrose pseudoinverse of an arbitrary rectangular matrix, built from
/// the eigendecomposition of the smaller Gram matrix with kEigenCutoff
/// truncation.
Matrix pseudoinverse(const Matrix& a);

/// U f(Lambda) U^T on the eigenvalues above kEigenCutoff * lambda_max; the
/// remaining directions map to 0.
Matrix psd_inv_sqrt(const Matrix& a);
Matrix psd_sqrt(const Matrix& a);
Matrix psd_inverse(const Matrix& a);

/// [A]^+ : clamps negative eigenvalues to zero.
Matrix positive_part(const Matrix& a);

/// Symmetric Toeplitz matrix with entries rho^{|i-j|}.
Matrix toeplitz_covariance(double rho, int dim);

/// log det of a symmetric positive-definite matrix (Cholesky).
double log_det_spd(const Matrix& a);

/// Smallest / largest eigenvalue ratio of a symmetric matrix (0 if the
/// largest eigenvalue is not positive).
double eigen_ratio(const Matrix& a);

/// A factor L with L L^T = cov. Cholesky when positive definite,
/// eigendecomposition otherwise.
Matrix gaussian_factor(const Matrix& cov);

/// Multivariate normal sampler with a pre-factored covariance.
class MvnSampler {
 public:
  MvnSampler(Vector mean, const Matrix& cov);

  Vector draw(Rng& rng) const;
  /// Draws `count` samples, one per column.
  Samples draw(Rng& rng, Eigen::Index count) const;

  const Vector& mean() const { return mean_; }
  const Matrix& factor() const { return factor_; }

 private:
  Vector mean_;
  Matrix factor_;
};

Vector sample_mvn(const Vector& mean, const Matrix& cov, Rng& rng);

/// Column mean of a sample set.
Vector sample_mean(const Samples& x);

/// Unbiased (1 / (S - 1)) covariance of a sample set; requires S >= 2.
Matrix sample_covariance(const Samples& x);

/// (1 / S) sum_s x_s x_s^T.
Matrix second_moment(const Samples& x);

std::string shape_of(const Matrix& m);

}  // namespace wcmc
