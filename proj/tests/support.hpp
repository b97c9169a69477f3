#pragma once

#include <doctest.h>

#include "wcmc/matops.hpp"

namespace wcmc::testing {

inline Matrix random_matrix(int rows, int cols, Rng& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng.normal();
  }
  return m;
}

inline Vector random_vector(int n, Rng& rng) { return random_matrix(n, 1, rng).col(0); }

// Well-conditioned SPD: A A^T / d + shift I.
inline Matrix random_spd(int d, Rng& rng, double shift = 0.2) {
  const Matrix a = random_matrix(d, d, rng);
  return a * a.transpose() / d + shift * Matrix::Identity(d, d);
}

inline double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace wcmc::testing
