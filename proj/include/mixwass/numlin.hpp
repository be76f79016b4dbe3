#pragma once

// Dense symmetric linear algebra: eigendecomposition, Moore-Penrose inverse,
// PSD square roots. Sizes here are small (K topics), so everything is dense.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "mixwass/error.hpp"

namespace mixwass {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

namespace numlin {

struct SymMatrixResult {
  int dim = 0;
  Vector eigenvalues;   // descending
  Matrix eigenvectors;  // columns match eigenvalues
  int rank = 0;
  double rank_tolerance = 0.0;  // relative to max(lambda_1, 0)

  /// Absolute cut-off below which an eigenvalue counts as zero.
  double threshold() const {
    return dim == 0 ? 0.0 : rank_tolerance * std::max(eigenvalues(0), 0.0);
  }
};

inline double default_rank_tolerance(int dim) { return dim * 1e-12; }

inline void check_finite(const Matrix& m) {
  require(m.rows() == m.cols(), ErrorCode::InvalidMatrix, "matrix is not square");
  require(m.allFinite(), ErrorCode::InvalidMatrix, "matrix has non-finite entries");
}

/// Eigendecomposition of (M + M^T)/2, eigenvalues sorted descending.
inline SymMatrixResult sym_eig(const Matrix& m, double rank_tolerance = -1.0) {
  check_finite(m);
  const int k = static_cast<int>(m.rows());
  SymMatrixResult out;
  out.dim = k;
  out.rank_tolerance = rank_tolerance >= 0.0 ? rank_tolerance : default_rank_tolerance(k);
  if (k == 0) return out;

  const Matrix sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
  require(solver.info() == Eigen::Success, ErrorCode::InvalidMatrix, "eigensolver failed");

  // Eigen returns ascending order.
  out.eigenvalues = solver.eigenvalues().reverse();
  out.eigenvectors = solver.eigenvectors().rowwise().reverse();

  const double cut = out.threshold();
  out.rank = static_cast<int>(std::count_if(out.eigenvalues.begin(), out.eigenvalues.end(),
                                            [cut](double v) { return v > cut; }));
  return out;
}

/// U f(Lambda) U^T, with f applied to eigenvalues above the rank threshold and 0 elsewhere.
template <class Fn>
Matrix spectral_apply(const SymMatrixResult& eig, Fn&& fn) {
  const int k = eig.dim;
  Matrix out = Matrix::Zero(k, k);
  const double cut = eig.threshold();
  for (int i = 0; i < k; ++i) {
    const double lambda = eig.eigenvalues(i);
    if (!(lambda > cut)) continue;
    const auto u = eig.eigenvectors.col(i);
    out.noalias() += fn(lambda) * (u * u.transpose());
  }
  return 0.5 * (out + out.transpose());
}

inline Matrix pinv(const Matrix& m) {
  return spectral_apply(sym_eig(m), [](double l) { return 1.0 / l; });
}

/// Square root of the pseudo-inverse of a PSD matrix. Negative roundoff
/// eigenvalues are clipped to zero first.
inline Matrix psd_sqrt_pinv(const Matrix& m) {
  return spectral_apply(sym_eig(m), [](double l) { return 1.0 / std::sqrt(l); });
}

/// PSD square root of the clipped matrix; used to draw N(0, M) samples when M is rank deficient.
inline Matrix psd_sqrt(const Matrix& m) {
  return spectral_apply(sym_eig(m), [](double l) { return std::sqrt(l); });
}

/// Projection onto the PSD cone by zeroing negative eigenvalues.
inline Matrix clip_psd(const Matrix& m) {
  const SymMatrixResult eig = sym_eig(m, 0.0);
  Matrix out = Matrix::Zero(eig.dim, eig.dim);
  for (int i = 0; i < eig.dim; ++i) {
    const double lambda = eig.eigenvalues(i);
    if (lambda <= 0.0) continue;
    const auto u = eig.eigenvectors.col(i);
    out.noalias() += lambda * (u * u.transpose());
  }
  return 0.5 * (out + out.transpose());
}

}  // namespace numlin
}  // namespace mixwass
