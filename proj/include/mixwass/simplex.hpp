#pragma once

// Dense primal simplex for small LPs of the form
//
//     maximize c^T x   subject to   G x <= h,   x free,
//
// with h >= 0 so that x = 0 is a feasible starting vertex. Free variables are
// split as x = x+ - x-. The tableau is stored row-major and rebuilt per call;
// problems here have at most a few hundred rows.

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "mixwass/error.hpp"
#include "mixwass/numlin.hpp"

namespace mixwass::lp {

enum class Status { Optimal, Unbounded, IterationLimit };

struct Solution {
  Status status = Status::Optimal;
  double value = 0.0;       // c^T x
  double dual_value = 0.0;  // h^T y from the final tableau
  Vector x;
  Vector dual;  // y >= 0 with G^T y = c at optimality
  int iterations = 0;

  double gap() const { return std::abs(dual_value - value); }
};

/// Constraint system shared across many objectives (e.g. Monte Carlo draws).
class FreeLp {
 public:
  FreeLp() = default;
  FreeLp(Matrix g, Vector h) : g_(std::move(g)), h_(std::move(h)) {
    require(g_.rows() == h_.size(), ErrorCode::DimError, "constraint matrix/rhs size mismatch");
    for (Eigen::Index i = 0; i < h_.size(); ++i) {
      require(std::isfinite(h_(i)) && h_(i) >= -kFeasTol, ErrorCode::Infeasible,
              "origin must be feasible (h >= 0)");
      if (h_(i) < 0.0) h_(i) = 0.0;
    }
  }

  int rows() const { return static_cast<int>(g_.rows()); }
  int cols() const { return static_cast<int>(g_.cols()); }
  const Matrix& constraints() const { return g_; }
  const Vector& rhs() const { return h_; }

  Solution maximize(const Vector& c, int max_iter = 50000) const;

  static constexpr double kFeasTol = 1e-9;

 private:
  Matrix g_;
  Vector h_;
};

inline Solution FreeLp::maximize(const Vector& c, int max_iter) const {
  require(c.size() == cols(), ErrorCode::DimError, "objective size mismatch");
  const int m = rows();
  const int n = cols();
  Solution sol;
  sol.x = Vector::Zero(n);
  sol.dual = Vector::Zero(m);
  if (n == 0 || m == 0) {
    if (n > 0 && c.cwiseAbs().maxCoeff() > 0.0) sol.status = Status::Unbounded;
    return sol;
  }

  // Columns: [x+ (n) | x- (n) | slack (m) | rhs]
  const int width = 2 * n + m + 1;
  const int rhs = width - 1;
  std::vector<double> t(static_cast<std::size_t>(m + 1) * width, 0.0);
  auto at = [&](int r, int col) -> double& { return t[static_cast<std::size_t>(r) * width + col]; };

  for (int r = 0; r < m; ++r) {
    for (int j = 0; j < n; ++j) {
      at(r, j) = g_(r, j);
      at(r, n + j) = -g_(r, j);
    }
    at(r, 2 * n + r) = 1.0;
    at(r, rhs) = h_(r);
  }
  // Objective row holds reduced costs z_j - c_j; optimal when all >= 0.
  for (int j = 0; j < n; ++j) {
    at(m, j) = -c(j);
    at(m, n + j) = c(j);
  }

  std::vector<int> basis(m);
  for (int r = 0; r < m; ++r) basis[r] = 2 * n + r;

  const double scale = std::max(1.0, c.cwiseAbs().maxCoeff());
  const double opt_tol = 1e-11 * scale;
  constexpr double pivot_tol = 1e-11;

  int degenerate_streak = 0;
  bool bland = false;
  int it = 0;
  for (; it < max_iter; ++it) {
    // Entering column.
    int enter = -1;
    double best = -opt_tol;
    for (int j = 0; j < rhs; ++j) {
      const double rc = at(m, j);
      if (bland) {
        if (rc < -opt_tol) {
          enter = j;
          break;
        }
      } else if (rc < best) {
        best = rc;
        enter = j;
      }
    }
    if (enter < 0) break;

    // Ratio test; ties broken by smallest basic index.
    int leave = -1;
    double ratio = std::numeric_limits<double>::infinity();
    for (int r = 0; r < m; ++r) {
      const double a = at(r, enter);
      if (a <= pivot_tol) continue;
      const double q = at(r, rhs) / a;
      if (q < ratio - 1e-14 || (q <= ratio + 1e-14 && leave >= 0 && basis[r] < basis[leave])) {
        ratio = q;
        leave = r;
      }
    }
    if (leave < 0) {
      sol.status = Status::Unbounded;
      sol.iterations = it;
      return sol;
    }
    if (ratio <= 1e-14) {
      if (++degenerate_streak > 2 * (m + n)) bland = true;
    } else {
      degenerate_streak = 0;
    }

    const double piv = at(leave, enter);
    for (int j = 0; j < width; ++j) at(leave, j) /= piv;
    for (int r = 0; r <= m; ++r) {
      if (r == leave) continue;
      const double f = at(r, enter);
      if (f == 0.0) continue;
      double* row = &at(r, 0);
      const double* prow = &at(leave, 0);
      for (int j = 0; j < width; ++j) row[j] -= f * prow[j];
    }
    basis[leave] = enter;
  }
  sol.iterations = it;
  if (it == max_iter) {
    sol.status = Status::IterationLimit;
    return sol;
  }

  for (int r = 0; r < m; ++r) {
    const int b = basis[r];
    const double v = std::max(0.0, at(r, rhs));
    if (b < n) sol.x(b) += v;
    else if (b < 2 * n) sol.x(b - n) -= v;
  }
  for (int r = 0; r < m; ++r) sol.dual(r) = std::max(0.0, at(m, 2 * n + r));
  sol.value = c.dot(sol.x);
  sol.dual_value = h_.dot(sol.dual);
  return sol;
}

}  // namespace mixwass::lp
