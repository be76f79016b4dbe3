#pragma once

// Mixture-weight estimators for a single document given a topic matrix:
// the simplex-constrained MLE, its one-step debiased correction, weighted
// least squares, and plug-in asymptotic covariances for each.

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "mixwass/error.hpp"
#include "mixwass/numlin.hpp"
#include "mixwass/transport.hpp"

namespace mixwass {

/// Word counts of one document.
class CountVector {
 public:
  CountVector() = default;
  explicit CountVector(std::vector<std::int64_t> counts) : counts_(std::move(counts)) {
    for (std::size_t j = 0; j < counts_.size(); ++j) {
      require(counts_[j] >= 0, ErrorCode::InvalidParam, "negative count at index " + std::to_string(j));
      total_ += counts_[j];
    }
    require(total_ >= 1, ErrorCode::InvalidParam, "document has no words");
  }

  int p() const { return static_cast<int>(counts_.size()); }
  std::int64_t N() const { return total_; }
  const std::vector<std::int64_t>& counts() const { return counts_; }
  std::int64_t operator[](int j) const { return counts_[j]; }

  ProbVec frequencies() const {
    Vector x(p());
    for (int j = 0; j < p(); ++j) x(j) = static_cast<double>(counts_[j]) / static_cast<double>(total_);
    return ProbVec::normalized(x);
  }

 private:
  std::vector<std::int64_t> counts_;
  std::int64_t total_ = 0;
};

enum class WeightMethod { MLE, Debiased, WLS };

inline const char* to_string(WeightMethod m) {
  switch (m) {
    case WeightMethod::MLE: return "mle";
    case WeightMethod::Debiased: return "debiased";
    case WeightMethod::WLS: return "wls";
  }
  return "?";
}

struct WeightEstimate {
  Vector alpha;
  WeightMethod method = WeightMethod::MLE;
  std::vector<int> support;  // word indices used
  int iterations = 0;
  bool converged = true;
};

enum class CovMethod { PluginMle, PluginWls };

struct CovEstimate {
  Matrix sigma;
  CovMethod method = CovMethod::PluginMle;
  int rank = 0;
};

struct MleOptions {
  double tol = 1e-10;
  int max_iter = 10000;
  /// SQUAREM extrapolation, accepted only when it beats the plain EM step.
  bool accelerate = true;
  /// If set, receives the log-likelihood after every accepted iterate.
  std::vector<double>* objective_trace = nullptr;
};

inline constexpr double kSupportZeta = 1e-12;  // threshold on A_j^T alpha for J-hat
inline constexpr double kActiveTau = 1e-8;     // alpha_k counted as active above this
inline constexpr double kKktTol = 1e-6;

namespace detail {

inline std::vector<int> positive_support(const Vector& x, double threshold = 0.0) {
  std::vector<int> idx;
  for (Eigen::Index j = 0; j < x.size(); ++j)
    if (x(j) > threshold) idx.push_back(static_cast<int>(j));
  return idx;
}

inline Matrix select_rows(const Matrix& a, const std::vector<int>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), a.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = a.row(rows[i]);
  return out;
}

inline Vector select(const Vector& v, const std::vector<int>& idx) {
  Vector out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out(static_cast<Eigen::Index>(i)) = v(idx[i]);
  return out;
}

/// Log-likelihood sum_j x_j log(A_j^T alpha) restricted to supp(x).
struct Likelihood {
  Matrix a;  // rows of A on supp(x)
  Vector x;

  double value(const Vector& alpha) const {
    const Vector r = a * alpha;
    double s = 0.0;
    for (Eigen::Index j = 0; j < r.size(); ++j) {
      if (!(r(j) > 0.0)) return -std::numeric_limits<double>::infinity();
      s += x(j) * std::log(r(j));
    }
    return s;
  }

  /// g_k = sum_j x_j A_jk / (A_j^T alpha); stationarity on the simplex reads g <= 1.
  Vector gradient(const Vector& alpha) const {
    const Vector r = a * alpha;
    return a.transpose() * x.cwiseQuotient(r);
  }

  Vector em_step(const Vector& alpha) const {
    Vector next = alpha.cwiseProduct(gradient(alpha));
    return next / next.sum();
  }
};

inline Vector clip_to_simplex(Vector v) {
  v = v.cwiseMax(0.0);
  const double s = v.sum();
  return s > 0.0 ? Vector(v / s) : v;
}

}  // namespace detail

/// Simplex-constrained maximum likelihood via multiplicative EM updates
/// started from the uniform vector.
inline WeightEstimate mle_weights(const ProbVec& x, const TopicMatrix& a, const MleOptions& opt = {}) {
  require(x.dim() == a.p(), ErrorCode::DimError, "frequency vector length does not match p");
  const std::vector<int> support = detail::positive_support(x.values());
  require(!support.empty(), ErrorCode::InvalidParam, "empty document");
  detail::Likelihood lik{detail::select_rows(a.matrix(), support), detail::select(x.values(), support)};
  for (std::size_t i = 0; i < support.size(); ++i)
    require(lik.a.row(static_cast<Eigen::Index>(i)).maxCoeff() > 0.0, ErrorCode::InfeasibleRow,
            "word " + std::to_string(support[i]) + " is observed but has zero probability under every topic");

  const int k = a.K();
  WeightEstimate out;
  out.method = WeightMethod::MLE;
  out.support = support;

  Vector alpha = Vector::Constant(k, 1.0 / k);
  double obj = lik.value(alpha);
  if (opt.objective_trace) opt.objective_trace->push_back(obj);

  int evals = 0;
  int reactivations = 0;
  bool converged = k == 1;
  while (!converged && evals < opt.max_iter) {
    Vector next;
    double next_obj;
    if (opt.accelerate && evals + 3 <= opt.max_iter) {
      const Vector a1 = lik.em_step(alpha);
      const Vector a2 = lik.em_step(a1);
      evals += 2;
      next = a2;
      next_obj = lik.value(a2);
      const Vector r = a1 - alpha;
      const Vector v = a2 - a1 - r;
      const double vn = v.norm();
      if (vn > 0.0) {
        const double step = std::min(-r.norm() / vn, -1.0);
        Vector cand = detail::clip_to_simplex(alpha - 2.0 * step * r + step * step * v);
        if (cand.sum() > 0.0) {
          cand = lik.em_step(cand);
          ++evals;
          const double cand_obj = lik.value(cand);
          if (std::isfinite(cand_obj) && cand_obj >= next_obj) {
            next = std::move(cand);
            next_obj = cand_obj;
          }
        }
      }
    } else {
      next = lik.em_step(alpha);
      next_obj = lik.value(next);
      ++evals;
    }
    const double change = (next - alpha).lpNorm<1>();
    alpha = std::move(next);
    obj = next_obj;
    if (opt.objective_trace) opt.objective_trace->push_back(obj);

    if (change <= opt.tol) {
      // Coordinates zeroed by extrapolation cannot regrow under EM; revive
      // any that violate the KKT conditions.
      const Vector g = lik.gradient(alpha);
      int revive = -1;
      double worst = 1.0 + kKktTol;
      for (int j = 0; j < k; ++j)
        if (alpha(j) == 0.0 && g(j) > worst) {
          worst = g(j);
          revive = j;
        }
      if (revive < 0 || reactivations >= 4 * k) {
        converged = true;
        break;
      }
      ++reactivations;
      for (double eps = 1e-3; eps > 1e-12; eps *= 0.5) {
        Vector trial = (1.0 - eps) * alpha;
        trial(revive) += eps;
        const double tobj = lik.value(trial);
        if (tobj > obj) {
          alpha = std::move(trial);
          obj = tobj;
          if (opt.objective_trace) opt.objective_trace->push_back(obj);
          break;
        }
      }
    }
  }
  out.alpha = alpha;
  out.iterations = evals;
  out.converged = converged;
  return out;
}

inline WeightEstimate mle_weights(const ProbVec& x, const TopicMatrix& a, double tol, int max_iter) {
  MleOptions opt;
  opt.tol = tol;
  opt.max_iter = max_iter;
  return mle_weights(x, a, opt);
}

/// Largest KKT violation of a simplex MLE: max_k (g_k - 1) over all k, and
/// |g_k - 1| over active k.
inline double mle_kkt_violation(const Vector& alpha, const ProbVec& x, const TopicMatrix& a) {
  const std::vector<int> support = detail::positive_support(x.values());
  detail::Likelihood lik{detail::select_rows(a.matrix(), support), detail::select(x.values(), support)};
  const Vector g = lik.gradient(alpha);
  double worst = 0.0;
  for (Eigen::Index k = 0; k < g.size(); ++k) {
    worst = std::max(worst, g(k) - 1.0);
    if (alpha(k) > kActiveTau) worst = std::max(worst, std::abs(g(k) - 1.0));
  }
  return worst;
}

namespace detail {

/// sum_{j in J} A_j A_j^T / r_j
inline Matrix weighted_gram(const Matrix& rows, const Vector& r) {
  const Vector w = r.cwiseInverse().cwiseSqrt();
  const Matrix scaled = w.asDiagonal() * rows;
  return scaled.transpose() * scaled;
}

}  // namespace detail

/// One-step correction alpha + V^+ Psi(alpha) of a simplex MLE.
inline WeightEstimate debias(const WeightEstimate& mle, const ProbVec& x, const TopicMatrix& a) {
  require(mle.method == WeightMethod::MLE, ErrorCode::InvalidParam, "debias expects an MLE estimate");
  require(mle.alpha.size() == a.K() && x.dim() == a.p(), ErrorCode::DimError, "debias dimensions");
  const Vector r = a.matrix() * mle.alpha;
  const std::vector<int> jhat = detail::positive_support(r, kSupportZeta);
  require(!jhat.empty(), ErrorCode::DegenerateSupport, "no word has positive fitted probability");

  const Matrix rows = detail::select_rows(a.matrix(), jhat);
  const Vector rj = detail::select(r, jhat);
  const Vector xj = detail::select(x.values(), jhat);
  const Vector psi = rows.transpose() * (xj - rj).cwiseQuotient(rj);
  const Matrix v = detail::weighted_gram(rows, rj);

  WeightEstimate out;
  out.method = WeightMethod::Debiased;
  out.alpha = mle.alpha + numlin::pinv(v) * psi;
  out.support = jhat;
  out.iterations = mle.iterations;
  out.converged = mle.converged;
  return out;
}

/// (sum_{j in J} A_j A_j^T / r_j)^{-1} - alpha alpha^T with r = A alpha.
inline CovEstimate sigma_hat(const Vector& alpha, const TopicMatrix& a) {
  require(alpha.size() == a.K(), ErrorCode::DimError, "weight dimension does not match K");
  const Vector r = a.matrix() * alpha;
  const std::vector<int> jhat = detail::positive_support(r, kSupportZeta);
  require(!jhat.empty(), ErrorCode::SingularInformation, "empty support for covariance");
  const Matrix info = detail::weighted_gram(detail::select_rows(a.matrix(), jhat), detail::select(r, jhat));
  const numlin::SymMatrixResult eig = numlin::sym_eig(info);
  require(eig.rank == a.K(), ErrorCode::SingularInformation,
          "information matrix has rank " + std::to_string(eig.rank) + " < K");
  const Matrix inv = numlin::spectral_apply(eig, [](double l) { return 1.0 / l; });
  CovEstimate out;
  out.method = CovMethod::PluginMle;
  out.sigma = inv - alpha * alpha.transpose();
  out.sigma = 0.5 * (out.sigma + out.sigma.transpose());
  out.rank = numlin::sym_eig(out.sigma).rank;
  return out;
}

inline CovEstimate sigma_hat(const WeightEstimate& est, const TopicMatrix& a) { return sigma_hat(est.alpha, a); }

namespace detail {

/// Rows of A with positive mass, their row sums, and M = A^T D^{-1} A.
struct WlsDesign {
  std::vector<int> rows;
  Matrix a;
  Vector d;
  Matrix m;
  Matrix a_plus;  // M^{-1} A^T D^{-1}, K x |rows|
};

inline WlsDesign wls_design(const TopicMatrix& a) {
  WlsDesign des;
  const Vector rowsum = a.matrix().rowwise().sum();
  des.rows = positive_support(rowsum);
  des.a = select_rows(a.matrix(), des.rows);
  des.d = select(rowsum, des.rows);
  des.m = weighted_gram(des.a, des.d);
  const numlin::SymMatrixResult eig = numlin::sym_eig(des.m);
  require(eig.rank == a.K(), ErrorCode::SingularDesign,
          "A^T D^{-1} A has rank " + std::to_string(eig.rank) + " < K");
  const Matrix m_inv = numlin::spectral_apply(eig, [](double l) { return 1.0 / l; });
  des.a_plus = m_inv * des.a.transpose() * des.d.cwiseInverse().asDiagonal();
  return des;
}

}  // namespace detail

/// Weighted least squares (A^T D^{-1} A)^{-1} A^T D^{-1} X; unconstrained, sums to one.
inline WeightEstimate wls_weights(const ProbVec& x, const TopicMatrix& a) {
  require(x.dim() == a.p(), ErrorCode::DimError, "frequency vector length does not match p");
  const detail::WlsDesign des = detail::wls_design(a);
  WeightEstimate out;
  out.method = WeightMethod::WLS;
  out.alpha = des.a_plus * detail::select(x.values(), des.rows);
  out.support = des.rows;
  return out;
}

/// A^+ diag(r) A^{+T} - alpha alpha^T, with r supplied by the caller (X or a fitted r).
inline CovEstimate sigma_ls(const Vector& alpha, const ProbVec& r, const TopicMatrix& a) {
  require(alpha.size() == a.K() && r.dim() == a.p(), ErrorCode::DimError, "sigma_ls dimensions");
  const detail::WlsDesign des = detail::wls_design(a);
  const Vector rr = detail::select(r.values(), des.rows);
  CovEstimate out;
  out.method = CovMethod::PluginWls;
  out.sigma = des.a_plus * rr.asDiagonal() * des.a_plus.transpose() - alpha * alpha.transpose();
  out.sigma = 0.5 * (out.sigma + out.sigma.transpose());
  out.rank = numlin::sym_eig(out.sigma).rank;
  return out;
}

inline CovEstimate sigma_ls(const WeightEstimate& est, const ProbVec& r, const TopicMatrix& a) {
  return sigma_ls(est.alpha, r, a);
}

}  // namespace mixwass
