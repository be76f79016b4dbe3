#pragma once

// Distance estimation between two documents' mixing measures and its
// inference: Monte Carlo plug-in sampling of the limiting law, confidence
// intervals, two bootstrap baselines, and Kolmogorov-Smirnov statistics.
//
// Sample-size convention: every sampler returns draws approximating the law of
// s * (W_tilde - W) with s = sqrt(N_i N_j / (N_i + N_j)). For equal sizes this
// is the usual sqrt(N) law rescaled by 1/sqrt(2), and confidence_interval
// divides by the same s, so the interval is unchanged.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "mixwass/error.hpp"
#include "mixwass/estimators.hpp"
#include "mixwass/numlin.hpp"
#include "mixwass/parallel.hpp"
#include "mixwass/rng.hpp"
#include "mixwass/transport.hpp"

namespace mixwass {

/// Draws with sorted access for CDF/quantile queries.
struct SampleSet {
  std::vector<double> samples;
  std::vector<double> sorted;
  double delta = 0.0;
  std::uint64_t seed = 0;
  int redraws = 0;  // bootstrap resamples discarded and redrawn

  SampleSet() = default;
  SampleSet(std::vector<double> draws, double delta_, std::uint64_t seed_)
      : samples(std::move(draws)), sorted(samples), delta(delta_), seed(seed_) {
    std::sort(sorted.begin(), sorted.end());
  }

  int M() const { return static_cast<int>(samples.size()); }

  /// Order statistic at 1-based index ceil(M * gamma), clamped to [1, M].
  double quantile(double gamma) const {
    require(!sorted.empty(), ErrorCode::InvalidParam, "quantile of an empty sample set");
    const double m = static_cast<double>(sorted.size());
    long idx = static_cast<long>(std::ceil(m * gamma - 1e-12));
    idx = std::clamp<long>(idx, 1, static_cast<long>(sorted.size()));
    return sorted[static_cast<std::size_t>(idx - 1)];
  }

  double cdf(double t) const {
    return static_cast<double>(std::upper_bound(sorted.begin(), sorted.end(), t) - sorted.begin()) /
           static_cast<double>(sorted.size());
  }
};

using LimitSampleSet = SampleSet;

struct ConfidenceInterval {
  double lower = 0.0;
  double upper = 0.0;
  double level = 0.05;
  double point = 0.0;
  double scale = 1.0;

  double width() const { return upper - lower; }
  bool covers(double w) const { return lower <= w && w <= upper; }
};

inline double pair_scale(std::int64_t n_i, std::int64_t n_j) {
  require(n_i >= 1 && n_j >= 1, ErrorCode::InvalidParam, "sample sizes must be positive");
  const double a = static_cast<double>(n_i), b = static_cast<double>(n_j);
  return std::sqrt(a * b / (a + b));
}

/// Covariance weights (N_j, N_i) / (N_i + N_j) of the two-sample limit.
inline std::pair<double, double> pair_cov_weights(std::int64_t n_i, std::int64_t n_j) {
  const double a = static_cast<double>(n_i), b = static_cast<double>(n_j);
  return {b / (a + b), a / (a + b)};
}

// ---------------------------------------------------------------------------

inline double distance_estimate(const Vector& alpha_i, const Vector& alpha_j, const DualPolytope& f_hat) {
  check_same_dim(alpha_i, alpha_j);
  return kr_dual_value(alpha_i - alpha_j, f_hat).value;
}

/// sup over F-hat of f^T (alpha_i - alpha_j); inputs may have negative entries.
inline double distance_estimate(const WeightEstimate& alpha_i, const WeightEstimate& alpha_j, const CostMatrix& cost) {
  return distance_estimate(alpha_i.alpha, alpha_j.alpha, DualPolytope(cost));
}

/// 0 when f = 0 lies in the polytope (support values are then >= 0 and LP
/// roundoff is clamped), otherwise -infinity. A facet slab that excludes the
/// origin makes negative support values legitimate.
inline double support_floor(const DualPolytope& polytope) {
  return polytope.contains(Vector::Zero(polytope.K()), 0.0) ? 0.0 : -std::numeric_limits<double>::infinity();
}

/// Support-function draws sup_{f in polytope} f^T Z_b, Z_b = root * xi_b.
inline std::vector<double> support_draws(const DualPolytope& polytope, const Matrix& root, int m,
                                         std::uint64_t seed, int workers, std::uint64_t tag = 1) {
  require(m >= 1, ErrorCode::InvalidParam, "number of draws must be >= 1");
  std::vector<double> out(static_cast<std::size_t>(m));
  const int k = polytope.K();
  const double floor = support_floor(polytope);
  parallel_for(m, workers, [&](int b) {
    rng::Engine eng = rng::stream(seed, tag, static_cast<std::uint64_t>(b));
    const Vector z = root * rng::standard_normal(eng, k);
    out[static_cast<std::size_t>(b)] = std::max(floor, kr_dual_value(z, polytope).value);
  });
  return out;
}

struct LimitSamplerOptions {
  double delta = 0.0;  // +infinity disables the facet restriction
  int M = 1000;
  std::uint64_t seed = 0;
  int workers = 1;
  double weight_i = 1.0;  // covariance = weight_i * Sigma_i + weight_j * Sigma_j
  double weight_j = 1.0;
};

/// F-hat'_delta built from the simplex estimates.
inline DualPolytope plugin_polytope(const Vector& mle_i, const Vector& mle_j, const CostMatrix& cost, double delta) {
  if (std::isinf(delta)) return DualPolytope(cost);
  const DualPolytope f_hat(cost);
  const double w_hat = kr_dual_value(mle_i - mle_j, f_hat).value;
  return restricted_polytope(cost, mle_i, mle_j, w_hat, delta);
}

/// Monte Carlo draws of sup_{f in F-hat'_delta} f^T Z with Z ~ N(0, w_i Sigma_i + w_j Sigma_j),
/// the covariances being plug-in estimates at the simplex MLEs.
inline LimitSampleSet limit_sampler(const WeightEstimate& mle_i, const WeightEstimate& mle_j, const TopicMatrix& a_hat,
                                    const CostMatrix& cost, const LimitSamplerOptions& opt) {
  require(opt.M >= 1, ErrorCode::InvalidParam, "M must be >= 1");
  require(!(opt.delta < 0.0), ErrorCode::InvalidParam, "delta must be >= 0");
  const Matrix cov = opt.weight_i * sigma_hat(mle_i, a_hat).sigma + opt.weight_j * sigma_hat(mle_j, a_hat).sigma;
  const Matrix root = numlin::psd_sqrt(cov);
  const DualPolytope polytope = plugin_polytope(mle_i.alpha, mle_j.alpha, cost, opt.delta);
  return LimitSampleSet(support_draws(polytope, root, opt.M, opt.seed, opt.workers), opt.delta, opt.seed);
}

/// [W - q_{1-t/2} / s, W - q_{t/2} / s] with s = sqrt(N_i N_j / (N_i + N_j)).
inline ConfidenceInterval confidence_interval(double w_tilde, const SampleSet& limits, double level, std::int64_t n_i,
                                              std::int64_t n_j) {
  require(level > 0.0 && level < 1.0, ErrorCode::InvalidParam, "level must lie in (0, 1)");
  require(limits.M() >= 1, ErrorCode::InvalidParam, "empty sample set");
  require(static_cast<double>(limits.M()) * level >= 20.0 - 1e-9, ErrorCode::InvalidParam,
          "need at least 20/level draws to estimate the quantiles");
  ConfidenceInterval ci;
  ci.level = level;
  ci.point = w_tilde;
  ci.scale = pair_scale(n_i, n_j);
  ci.lower = w_tilde - limits.quantile(1.0 - level / 2.0) / ci.scale;
  ci.upper = w_tilde - limits.quantile(level / 2.0) / ci.scale;
  return ci;
}

// ---------------------------------------------------------------------------
// Bootstraps

/// A document with its simplex MLE and debiased estimate against A-hat.
struct DocumentFit {
  CountVector counts;
  ProbVec x;
  WeightEstimate mle;
  WeightEstimate debiased;
};

inline DocumentFit fit_document(const CountVector& counts, const TopicMatrix& a_hat, const MleOptions& opt = {}) {
  DocumentFit fit{counts, counts.frequencies(), {}, {}};
  fit.mle = mle_weights(fit.x, a_hat, opt);
  fit.debiased = debias(fit.mle, fit.x, a_hat);
  return fit;
}

struct BootstrapOptions {
  int B = 1000;
  double gamma = 0.5;  // m = ceil(N^gamma); 0.3 is the other commonly used choice
  double delta = 0.0;
  std::uint64_t seed = 0;
  int workers = 1;
  int max_redraws = 20;  // per replicate
  MleOptions mle;
};

namespace detail {

inline constexpr std::uint64_t kTagMofN = 101;
inline constexpr std::uint64_t kTagDeriv = 102;

/// Runs body(engine) for replicate b, redrawing with a fresh stream when an
/// estimator fails on a degenerate resample.
template <class Body>
double with_redraws(std::uint64_t seed, std::uint64_t tag, int b, int max_redraws, int& redraws, Body&& body) {
  for (int attempt = 0;; ++attempt) {
    rng::Engine eng = rng::stream(seed, tag, static_cast<std::uint64_t>(b) * 1024u + static_cast<std::uint64_t>(attempt));
    try {
      return body(eng);
    } catch (const Error&) {
      if (attempt >= max_redraws) throw;
      ++redraws;
    }
  }
}

inline DocumentFit resample_fit(rng::Engine& eng, const DocumentFit& doc, std::int64_t size, const TopicMatrix& a_hat,
                                const MleOptions& opt) {
  return fit_document(CountVector(rng::multinomial(eng, size, doc.x.values())), a_hat, opt);
}

}  // namespace detail

inline std::int64_t m_out_of_n_size(std::int64_t n, double gamma) {
  return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(std::pow(static_cast<double>(n), gamma) - 1e-9)));
}

/// Draws of s_m * (W_b - W_tilde) from Multinomial(m_l, X_l) resamples, m_l = ceil(N_l^gamma).
inline SampleSet m_out_of_n_bootstrap(const DocumentFit& doc_i, const DocumentFit& doc_j, const TopicMatrix& a_hat,
                                      const CostMatrix& cost, const BootstrapOptions& opt) {
  require(opt.gamma > 0.0 && opt.gamma < 1.0, ErrorCode::InvalidParam, "gamma must lie in (0, 1)");
  require(opt.B >= 1, ErrorCode::InvalidParam, "B must be >= 1");
  const DualPolytope f_hat(cost);
  const double w_tilde = distance_estimate(doc_i.debiased.alpha, doc_j.debiased.alpha, f_hat);
  const std::int64_t m_i = m_out_of_n_size(doc_i.counts.N(), opt.gamma);
  const std::int64_t m_j = m_out_of_n_size(doc_j.counts.N(), opt.gamma);
  const double s_m = pair_scale(m_i, m_j);

  std::vector<double> draws(static_cast<std::size_t>(opt.B));
  std::vector<int> redraws(static_cast<std::size_t>(opt.B), 0);
  parallel_for(opt.B, opt.workers, [&](int b) {
    draws[static_cast<std::size_t>(b)] =
        detail::with_redraws(opt.seed, detail::kTagMofN, b, opt.max_redraws, redraws[static_cast<std::size_t>(b)],
                             [&](rng::Engine& eng) {
                               const DocumentFit ri = detail::resample_fit(eng, doc_i, m_i, a_hat, opt.mle);
                               const DocumentFit rj = detail::resample_fit(eng, doc_j, m_j, a_hat, opt.mle);
                               const double wb = distance_estimate(ri.debiased.alpha, rj.debiased.alpha, f_hat);
                               return s_m * (wb - w_tilde);
                             });
  });
  SampleSet out(std::move(draws), opt.delta, opt.seed);
  out.redraws = std::accumulate(redraws.begin(), redraws.end(), 0);
  return out;
}

/// Draws of sup_{f in F-hat'_delta} f^T B_b, B_b = s (a_b^i - a_b^j - a^i + a^j) from full-size resamples.
inline SampleSet derivative_bootstrap(const DocumentFit& doc_i, const DocumentFit& doc_j, const TopicMatrix& a_hat,
                                      const CostMatrix& cost, const BootstrapOptions& opt) {
  require(opt.B >= 1, ErrorCode::InvalidParam, "B must be >= 1");
  require(!(opt.delta < 0.0), ErrorCode::InvalidParam, "delta must be >= 0");
  const DualPolytope polytope = plugin_polytope(doc_i.mle.alpha, doc_j.mle.alpha, cost, opt.delta);
  const double s = pair_scale(doc_i.counts.N(), doc_j.counts.N());
  const Vector center = doc_i.debiased.alpha - doc_j.debiased.alpha;
  const double floor = support_floor(polytope);

  std::vector<double> draws(static_cast<std::size_t>(opt.B));
  std::vector<int> redraws(static_cast<std::size_t>(opt.B), 0);
  parallel_for(opt.B, opt.workers, [&](int b) {
    draws[static_cast<std::size_t>(b)] =
        detail::with_redraws(opt.seed, detail::kTagDeriv, b, opt.max_redraws, redraws[static_cast<std::size_t>(b)],
                             [&](rng::Engine& eng) {
                               const DocumentFit ri = detail::resample_fit(eng, doc_i, doc_i.counts.N(), a_hat, opt.mle);
                               const DocumentFit rj = detail::resample_fit(eng, doc_j, doc_j.counts.N(), a_hat, opt.mle);
                               const Vector dir = s * (ri.debiased.alpha - rj.debiased.alpha - center);
                               return std::max(floor, kr_dual_value(dir, polytope).value);
                             });
  });
  SampleSet out(std::move(draws), opt.delta, opt.seed);
  out.redraws = std::accumulate(redraws.begin(), redraws.end(), 0);
  return out;
}

inline SampleSet m_out_of_n_bootstrap(const CountVector& x_i, const CountVector& x_j, const TopicMatrix& a_hat,
                                      const CostMatrix& cost, const BootstrapOptions& opt) {
  return m_out_of_n_bootstrap(fit_document(x_i, a_hat, opt.mle), fit_document(x_j, a_hat, opt.mle), a_hat, cost, opt);
}

inline SampleSet derivative_bootstrap(const CountVector& x_i, const CountVector& x_j, const TopicMatrix& a_hat,
                                      const CostMatrix& cost, const BootstrapOptions& opt) {
  return derivative_bootstrap(fit_document(x_i, a_hat, opt.mle), fit_document(x_j, a_hat, opt.mle), a_hat, cost, opt);
}

// ---------------------------------------------------------------------------
// Kolmogorov-Smirnov

/// P(K > lambda) for the Kolmogorov distribution.
inline double kolmogorov_survival(double lambda) {
  if (lambda <= 0.0) return 1.0;
  constexpr double pi = 3.14159265358979323846;
  if (lambda < 1.18) {
    // Jacobi theta form of the CDF converges fast for small lambda.
    const double c = std::sqrt(2.0 * pi) / lambda;
    const double e = -pi * pi / (8.0 * lambda * lambda);
    double cdf = 0.0;
    for (int k = 1; k <= 20; ++k) {
      const double odd = 2.0 * k - 1.0;
      cdf += std::exp(odd * odd * e);
    }
    return std::clamp(1.0 - c * cdf, 0.0, 1.0);
  }
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? term : -term);
    if (term < 1e-18) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

inline double ks_distance(std::vector<double> a, std::vector<double> b) {
  require(!a.empty() && !b.empty(), ErrorCode::InvalidParam, "KS distance needs non-empty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double t = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= t) ++i;
    while (j < b.size() && b[j] <= t) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

/// Asymptotic two-sample KS p-value.
inline double ks_two_sample_pvalue(const std::vector<double>& a, const std::vector<double>& b) {
  const double d = ks_distance(a, b);
  const double ne = static_cast<double>(a.size()) * static_cast<double>(b.size()) /
                    static_cast<double>(a.size() + b.size());
  const double sq = std::sqrt(ne);
  return kolmogorov_survival((sq + 0.12 + 0.11 / sq) * d);
}

inline double standard_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

struct KsResult {
  double distance = 0.0;
  double pvalue = 1.0;
};

/// One-sample KS test against N(0, 1).
inline KsResult ks_normal_test(std::vector<double> x) {
  require(!x.empty(), ErrorCode::InvalidParam, "KS test needs a non-empty sample");
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = standard_normal_cdf(x[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  const double sq = std::sqrt(n);
  return {d, kolmogorov_survival((sq + 0.12 + 0.11 / sq) * d)};
}

}  // namespace mixwass
