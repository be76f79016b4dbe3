#pragma once

// Metrics on the probability simplex, cost matrices between mixture
// components, the exact Wasserstein distance between K-atom mixing measures,
// and support functions of the Kantorovich-Rubinstein dual polytope.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include "mixwass/error.hpp"
#include "mixwass/numlin.hpp"
#include "mixwass/simplex.hpp"

namespace mixwass {

inline constexpr double kSimplexTol = 1e-8;

/// A point of a probability simplex.
class ProbVec {
 public:
  ProbVec() = default;
  explicit ProbVec(Vector values) : values_(std::move(values)) {
    require(values_.size() > 0, ErrorCode::InvalidSimplex, "empty probability vector");
    require(values_.allFinite(), ErrorCode::InvalidSimplex, "non-finite probability entry");
    require(values_.minCoeff() >= 0.0, ErrorCode::InvalidSimplex, "negative probability entry");
    const double s = values_.sum();
    require(std::abs(s - 1.0) <= kSimplexTol, ErrorCode::InvalidSimplex,
            "entries sum to " + std::to_string(s));
  }
  ProbVec(std::initializer_list<double> v)
      : ProbVec(Vector(Eigen::Map<const Vector>(v.begin(), static_cast<Eigen::Index>(v.size())))) {}

  /// Normalizes a non-negative vector with positive mass.
  static ProbVec normalized(const Vector& weights) {
    require(weights.size() > 0 && weights.minCoeff() >= 0.0 && weights.sum() > 0.0,
            ErrorCode::InvalidSimplex, "cannot normalize vector");
    return ProbVec(weights / weights.sum());
  }

  static ProbVec unit(int dim, int k) {
    Vector v = Vector::Zero(dim);
    v(k) = 1.0;
    return ProbVec(std::move(v));
  }

  int dim() const { return static_cast<int>(values_.size()); }
  const Vector& values() const { return values_; }
  double operator[](int i) const { return values_(i); }

 private:
  Vector values_;
};

/// p x K matrix whose columns are the mixture components.
class TopicMatrix {
 public:
  TopicMatrix() = default;
  explicit TopicMatrix(Matrix columns) : a_(std::move(columns)) {
    require(a_.rows() > 0 && a_.cols() > 0, ErrorCode::InvalidSimplex, "empty topic matrix");
    require(a_.allFinite() && a_.minCoeff() >= 0.0, ErrorCode::InvalidSimplex,
            "topic matrix entries must be finite and non-negative");
    for (Eigen::Index k = 0; k < a_.cols(); ++k) {
      const double s = a_.col(k).sum();
      require(std::abs(s - 1.0) <= kSimplexTol, ErrorCode::InvalidSimplex,
              "column " + std::to_string(k) + " sums to " + std::to_string(s));
    }
  }

  int p() const { return static_cast<int>(a_.rows()); }
  int K() const { return static_cast<int>(a_.cols()); }
  const Matrix& matrix() const { return a_; }
  Vector column(int k) const { return a_.col(k); }

  /// r = A alpha for any alpha in R^K.
  Vector mix(const Vector& alpha) const {
    require(alpha.size() == K(), ErrorCode::DimError, "weight dimension does not match K");
    return a_ * alpha;
  }

 private:
  Matrix a_;
};

enum class Metric { TotalVariation, L2, Table };

inline const char* to_string(Metric m) {
  switch (m) {
    case Metric::TotalVariation: return "tv";
    case Metric::L2: return "l2";
    case Metric::Table: return "table";
  }
  return "?";
}

inline Metric parse_metric(const std::string& s) {
  if (s == "tv" || s == "TV") return Metric::TotalVariation;
  if (s == "l2" || s == "L2") return Metric::L2;
  if (s == "table") return Metric::Table;
  fail(ErrorCode::InvalidParam, "unknown metric '" + s + "'");
}

/// K x K symmetric, zero-diagonal, non-negative costs between components.
class CostMatrix {
 public:
  CostMatrix() = default;

  /// Validates a user-supplied pairwise table.
  explicit CostMatrix(Matrix entries) : c_(std::move(entries)) {
    require(c_.rows() == c_.cols() && c_.rows() > 0, ErrorCode::InvalidCost, "cost table must be square");
    require(c_.allFinite(), ErrorCode::InvalidCost, "cost table has non-finite entries");
    const double scale = std::max(1.0, c_.cwiseAbs().maxCoeff());
    for (Eigen::Index k = 0; k < c_.rows(); ++k) {
      require(c_(k, k) == 0.0, ErrorCode::InvalidCost, "cost diagonal must be zero");
      for (Eigen::Index l = 0; l < c_.cols(); ++l) {
        require(c_(k, l) >= 0.0, ErrorCode::InvalidCost, "cost entries must be non-negative");
        require(std::abs(c_(k, l) - c_(l, k)) <= 1e-12 * scale, ErrorCode::InvalidCost,
                "cost table must be symmetric");
      }
    }
    c_ = 0.5 * (c_ + c_.transpose());
  }

  int K() const { return static_cast<int>(c_.rows()); }
  double operator()(int k, int l) const { return c_(k, l); }
  const Matrix& entries() const { return c_; }
  double max_entry() const { return c_.size() ? c_.maxCoeff() : 0.0; }

  /// Largest violation of the triangle inequality (0 for a metric).
  double triangle_violation() const {
    double worst = 0.0;
    for (int i = 0; i < K(); ++i)
      for (int j = 0; j < K(); ++j)
        for (int k = 0; k < K(); ++k) worst = std::max(worst, c_(i, k) - c_(i, j) - c_(j, k));
    return worst;
  }

 private:
  Matrix c_;
};

inline void check_same_dim(const Vector& u, const Vector& v) {
  require(u.size() == v.size(), ErrorCode::DimError,
          "dimension mismatch: " + std::to_string(u.size()) + " vs " + std::to_string(v.size()));
}

inline double tv_distance(const Vector& u, const Vector& v) {
  check_same_dim(u, v);
  return 0.5 * (u - v).lpNorm<1>();
}
inline double tv_distance(const ProbVec& u, const ProbVec& v) { return tv_distance(u.values(), v.values()); }

inline double l2_distance(const Vector& u, const Vector& v) {
  check_same_dim(u, v);
  return (u - v).norm();
}

/// Pairwise distances d(A_k, A_l). Compute once per topic matrix and share.
inline CostMatrix cost_matrix(const TopicMatrix& a, Metric metric = Metric::TotalVariation) {
  require(metric != Metric::Table, ErrorCode::InvalidParam, "table metric needs an explicit cost table");
  const int k = a.K();
  Matrix c = Matrix::Zero(k, k);
  for (int i = 0; i < k; ++i) {
    for (int j = i + 1; j < k; ++j) {
      const double d = metric == Metric::TotalVariation ? tv_distance(a.column(i), a.column(j))
                                                        : l2_distance(a.column(i), a.column(j));
      c(i, j) = c(j, i) = d;
    }
  }
  return CostMatrix(std::move(c));
}

// ---------------------------------------------------------------------------
// Primal: transportation simplex (north-west corner start, MODI potentials).

struct TransportPlan {
  double value = 0.0;
  Matrix plan;  // plan(k, l) = mass moved from atom k of alpha to atom l of beta
  int iterations = 0;
};

namespace detail {

/// Minimum-cost transportation between supply and demand with equal mass.
inline TransportPlan transport_simplex(const Vector& supply, const Vector& demand, const Matrix& cost) {
  const int ns = static_cast<int>(supply.size());
  const int nd = static_cast<int>(demand.size());
  TransportPlan out;
  out.plan = Matrix::Zero(ns, nd);
  if (ns == 0 || nd == 0) return out;

  struct Cell {
    int row, col;
  };
  std::vector<Cell> basis;
  basis.reserve(ns + nd - 1);
  Matrix& x = out.plan;
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> is_basic =
      Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(ns, nd, false);

  {
    Vector s = supply, d = demand;
    int i = 0, j = 0;
    while (true) {
      const double q = std::max(0.0, std::min(s(i), d(j)));
      x(i, j) = q;
      is_basic(i, j) = true;
      basis.push_back({i, j});
      s(i) -= q;
      d(j) -= q;
      if (i == ns - 1 && j == nd - 1) break;
      if (j == nd - 1) ++i;
      else if (i == ns - 1) ++j;
      else if (s(i) <= d(j)) ++i;
      else ++j;
    }
  }

  const double tol = 1e-12 * std::max(1.0, cost.cwiseAbs().maxCoeff());
  const int nodes = ns + nd;  // rows 0..ns-1, columns ns..ns+nd-1
  std::vector<std::vector<int>> adj(nodes);
  std::vector<double> pot(nodes);
  std::vector<int> parent_edge(nodes);
  std::vector<char> seen(nodes);
  std::queue<int> q;

  auto rebuild_adjacency = [&] {
    for (auto& a : adj) a.clear();
    for (int e = 0; e < static_cast<int>(basis.size()); ++e) {
      adj[basis[e].row].push_back(e);
      adj[ns + basis[e].col].push_back(e);
    }
  };
  auto other_end = [&](int e, int node) {
    return node < ns ? ns + basis[e].col : basis[e].row;
  };
  // BFS over the basis tree from `root`, filling parent_edge and (optionally) potentials.
  auto traverse = [&](int root, bool potentials) {
    std::fill(seen.begin(), seen.end(), 0);
    std::fill(parent_edge.begin(), parent_edge.end(), -1);
    seen[root] = 1;
    if (potentials) pot[root] = 0.0;
    q.push(root);
    while (!q.empty()) {
      const int node = q.front();
      q.pop();
      for (int e : adj[node]) {
        const int nb = other_end(e, node);
        if (seen[nb]) continue;
        seen[nb] = 1;
        parent_edge[nb] = e;
        // u_i + v_j = c_ij on basic cells
        if (potentials) pot[nb] = cost(basis[e].row, basis[e].col) - pot[node];
        q.push(nb);
      }
    }
  };

  const int max_iter = 50 * (ns + nd) * (ns + nd) + 1000;
  int degenerate_streak = 0;
  int it = 0;
  for (; it < max_iter; ++it) {
    rebuild_adjacency();
    traverse(0, true);

    int ei = -1, ej = -1;
    double best = -tol;
    const bool bland = degenerate_streak > ns + nd;
    for (int i = 0; i < ns && !(bland && ei >= 0); ++i) {
      for (int j = 0; j < nd; ++j) {
        if (is_basic(i, j)) continue;
        const double rc = cost(i, j) - pot[i] - pot[ns + j];
        if (rc < best) {
          best = rc;
          ei = i;
          ej = j;
          if (bland) break;
        }
      }
    }
    if (ei < 0) break;

    // Tree path from column node back to row node ei; cells alternate -,+,-,...
    traverse(ei, false);
    std::vector<int> path;
    for (int node = ns + ej; node != ei;) {
      const int e = parent_edge[node];
      path.push_back(e);
      node = other_end(e, node);
    }
    double theta = std::numeric_limits<double>::infinity();
    int leave = -1;
    for (std::size_t k = 0; k < path.size(); k += 2) {
      const Cell& c = basis[path[k]];
      if (x(c.row, c.col) < theta) {
        theta = x(c.row, c.col);
        leave = static_cast<int>(k);
      }
    }
    theta = std::max(0.0, theta);
    degenerate_streak = theta == 0.0 ? degenerate_streak + 1 : 0;
    for (std::size_t k = 0; k < path.size(); ++k) {
      const Cell& c = basis[path[k]];
      x(c.row, c.col) += (k % 2 == 0 ? -theta : theta);
    }
    x(ei, ej) = theta;
    const int leaving_edge = path[leave];
    const Cell old = basis[leaving_edge];
    x(old.row, old.col) = 0.0;
    is_basic(old.row, old.col) = false;
    is_basic(ei, ej) = true;
    basis[leaving_edge] = {ei, ej};
  }
  require(it < max_iter, ErrorCode::IterationLimit, "transportation simplex did not terminate");

  x = x.cwiseMax(0.0);
  out.value = (x.array() * cost.array()).sum();
  out.iterations = it;
  return out;
}

}  // namespace detail

/// Exact W(alpha, beta; d) over couplings, with an optimal plan.
inline TransportPlan wasserstein_primal(const ProbVec& alpha, const ProbVec& beta, const CostMatrix& cost) {
  require(alpha.dim() == cost.K() && beta.dim() == cost.K(), ErrorCode::DimError,
          "weights and cost matrix dimensions differ");
  return detail::transport_simplex(alpha.values(), beta.values(), cost.entries());
}

// ---------------------------------------------------------------------------
// Dual: F = { f : f_k - f_l <= c_kl, f_1 = 0 }, optionally intersected with
// the slab |f^T u0 - W| <= delta.

struct FacetConstraint {
  Vector direction;  // u0
  double target = 0.0;  // W
  double slack = 0.0;   // delta
};

struct DualValue {
  double value = 0.0;
  Vector argmax;
  double gap = 0.0;  // |primal - dual| of the LP certificate
};

class DualPolytope {
 public:
  DualPolytope() = default;

  explicit DualPolytope(CostMatrix cost) : cost_(std::move(cost)) {
    anchor_ = Vector::Zero(cost_.K());
    lp_ = lp::FreeLp(lipschitz_rows(), lipschitz_rhs(anchor_));
  }

  DualPolytope(CostMatrix cost, FacetConstraint facet) : DualPolytope(std::move(cost)) {
    require(facet.direction.size() == cost_.K(), ErrorCode::DimError, "facet direction dimension");
    require(facet.slack >= 0.0 && !std::isnan(facet.slack), ErrorCode::InvalidParam, "facet slack must be >= 0");
    require(std::isfinite(facet.target), ErrorCode::InvalidParam, "facet target must be finite");
    if (!std::isfinite(facet.slack)) return;  // inactive

    // A feasible anchor on the segment between the minimizer and maximizer
    // of f^T u0 over F; shifting to it keeps the origin feasible.
    const DualValue hi = support(facet.direction);
    const DualValue lo = support(-facet.direction);
    const double vmax = hi.value, vmin = -lo.value;
    const double tol = 1e-12 * std::max({1.0, std::abs(vmax), std::abs(vmin), std::abs(facet.target)});
    double a = std::max(vmin, facet.target - facet.slack);
    double b = std::min(vmax, facet.target + facet.slack);
    require(a <= b + tol, ErrorCode::Infeasible, "facet constraint does not meet the dual polytope");
    if (a > b) a = b = 0.5 * (a + b);
    const double v = std::clamp(facet.target, a, b);
    const double span = vmax - vmin;
    const double lambda = span > 0.0 ? std::clamp((v - vmin) / span, 0.0, 1.0) : 1.0;
    anchor_ = lambda * hi.argmax + (1.0 - lambda) * lo.argmax;

    const int n = cost_.K() - 1;
    Matrix g = lipschitz_rows();
    Vector h = lipschitz_rhs(anchor_);
    const Eigen::Index base = g.rows();
    g.conservativeResize(base + 2, n);
    h.conservativeResize(base + 2);
    const double at_anchor = facet.direction.dot(anchor_);
    g.row(base) = facet.direction.tail(n).transpose();
    g.row(base + 1) = -facet.direction.tail(n).transpose();
    h(base) = std::max(0.0, facet.target + facet.slack - at_anchor);
    h(base + 1) = std::max(0.0, at_anchor - (facet.target - facet.slack));
    lp_ = lp::FreeLp(std::move(g), std::move(h));
    facet_ = std::move(facet);
  }

  int K() const { return cost_.K(); }
  const CostMatrix& cost() const { return cost_; }
  const std::optional<FacetConstraint>& facet() const { return facet_; }

  bool contains(const Vector& f, double tol = 1e-9) const {
    if (f.size() != K() || std::abs(f(0)) > tol) return false;
    for (int k = 0; k < K(); ++k)
      for (int l = 0; l < K(); ++l)
        if (k != l && f(k) - f(l) > cost_(k, l) + tol) return false;
    if (facet_) return std::abs(f.dot(facet_->direction) - facet_->target) <= facet_->slack + tol;
    return true;
  }

  /// sup_{f in polytope} f^T u.
  DualValue support(const Vector& u) const {
    require(u.size() == K(), ErrorCode::DimError, "direction dimension does not match K");
    DualValue out;
    if (K() <= 1) {
      out.argmax = Vector::Zero(K());
      return out;
    }
    const int n = K() - 1;
    const lp::Solution sol = lp_.maximize(u.tail(n));
    require(sol.status != lp::Status::Unbounded, ErrorCode::Unbounded, "dual LP is unbounded");
    require(sol.status == lp::Status::Optimal, ErrorCode::IterationLimit, "dual LP hit iteration limit");
    out.argmax = anchor_;
    out.argmax.tail(n) += sol.x;
    out.value = u.dot(out.argmax);
    out.gap = sol.gap();
    return out;
  }

 private:
  Matrix lipschitz_rows() const {
    const int k = K();
    const int n = std::max(0, k - 1);
    Matrix g = Matrix::Zero(k * (k - 1), n);
    int r = 0;
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) {
        if (i == j) continue;
        if (i > 0) g(r, i - 1) += 1.0;
        if (j > 0) g(r, j - 1) -= 1.0;
        ++r;
      }
    }
    return g;
  }

  Vector lipschitz_rhs(const Vector& anchor) const {
    const int k = K();
    Vector h(k * (k - 1));
    int r = 0;
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j)
        if (i != j) h(r++) = std::max(0.0, cost_(i, j) - (anchor(i) - anchor(j)));
    return h;
  }

  CostMatrix cost_;
  std::optional<FacetConstraint> facet_;
  Vector anchor_;
  lp::FreeLp lp_;
};

inline DualValue kr_dual_value(const Vector& u, const DualPolytope& polytope) { return polytope.support(u); }

/// F-hat intersected with the slab around the estimated optimal facet.
/// An infinite delta yields the unrestricted polytope.
inline DualPolytope restricted_polytope(const CostMatrix& cost, const Vector& alpha_hat, const Vector& beta_hat,
                                        double w_hat, double delta) {
  require(!(delta < 0.0) && !std::isnan(delta), ErrorCode::InvalidParam, "delta must be >= 0");
  check_same_dim(alpha_hat, beta_hat);
  if (std::isinf(delta)) return DualPolytope(cost);
  return DualPolytope(cost, FacetConstraint{alpha_hat - beta_hat, w_hat, delta});
}

inline DualPolytope restricted_polytope(const CostMatrix& cost, const ProbVec& alpha_hat, const ProbVec& beta_hat,
                                        double w_hat, double delta) {
  return restricted_polytope(cost, alpha_hat.values(), beta_hat.values(), w_hat, delta);
}

}  // namespace mixwass
