#pragma once

// Synthetic topic-model data and the experiment drivers behind the
// simulation tables: CI coverage under the null and the alternative, MLE
// versus WLS interval lengths, normality of the weight estimators, and speed
// of convergence of the distance estimator to its limit law.
//
// Every random quantity is drawn from a stream derived from (seed, tag,
// index), so a report is a pure function of its configuration.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mixwass/error.hpp"
#include "mixwass/estimators.hpp"
#include "mixwass/inference.hpp"
#include "mixwass/numlin.hpp"
#include "mixwass/parallel.hpp"
#include "mixwass/rng.hpp"
#include "mixwass/transport.hpp"

namespace mixwass::sim {

enum class Method { Plugin, DerivBs, MofNBs };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::Plugin: return "plugin";
    case Method::DerivBs: return "deriv-bs";
    case Method::MofNBs: return "m-of-n-bs";
  }
  return "?";
}

inline Method parse_method(const std::string& s) {
  if (s == "plugin") return Method::Plugin;
  if (s == "deriv-bs" || s == "deriv") return Method::DerivBs;
  if (s == "m-of-n-bs" || s == "mofn" || s == "m-of-n") return Method::MofNBs;
  fail(ErrorCode::InvalidParam, "unknown method '" + s + "'");
}

enum class Scenario { Null, Alternative };

struct SimConfig {
  int K = 5;
  int p = 500;
  std::int64_t N_i = 1000;
  std::int64_t N_j = 1000;
  int tau = 0;          // support size of generated weights; 0 = dense
  int n_outer = 1;      // independent (alpha_i, alpha_j) draws
  int n_reps = 200;     // documents per outer draw
  int M = 1000;         // limit-law Monte Carlo draws
  int B = 1000;         // bootstrap resamples
  int limit_draws = 10000;  // draws of a known limit law
  double gamma = 0.5;
  double delta = 0.0;   // +infinity: unrestricted F-hat
  double level = 0.05;
  Metric metric = Metric::TotalVariation;
  std::uint64_t seed = 1;
  std::vector<Method> methods{Method::Plugin};
  Scenario scenario = Scenario::Null;
  double a_noise = 0.0;  // relative perturbation of the topic matrix handed to the estimators
  int workers = 1;

  void validate() const {
    require(K >= 1 && p >= K, ErrorCode::InvalidParam, "need p >= K >= 1");
    require(tau == 0 || (tau >= 1 && tau <= K), ErrorCode::InvalidParam, "tau must be 0 or in [1, K]");
    require(N_i >= 1 && N_j >= 1, ErrorCode::InvalidParam, "document lengths must be >= 1");
    require(n_outer >= 1 && n_reps >= 1, ErrorCode::InvalidParam, "replicate counts must be >= 1");
    require(M >= 1 && B >= 1 && limit_draws >= 1, ErrorCode::InvalidParam, "draw counts must be >= 1");
    require(gamma > 0.0 && gamma < 1.0, ErrorCode::InvalidParam, "gamma must lie in (0, 1)");
    require(!(delta < 0.0) && !std::isnan(delta), ErrorCode::InvalidParam, "delta must be >= 0");
    require(level > 0.0 && level < 1.0, ErrorCode::InvalidParam, "level must lie in (0, 1)");
    require(a_noise >= 0.0 && a_noise < 1.0, ErrorCode::InvalidParam, "a_noise must lie in [0, 1)");
    require(metric != Metric::Table, ErrorCode::InvalidParam, "simulations derive costs from the topic matrix");
  }
};

// Stream tags.
inline constexpr std::uint64_t kTagTopics = 2;
inline constexpr std::uint64_t kTagWeights = 3;
inline constexpr std::uint64_t kTagNoise = 4;
inline constexpr std::uint64_t kTagDocs = 11;
inline constexpr std::uint64_t kTagLimit = 12;
inline constexpr std::uint64_t kTagBoot = 13;

// ---------------------------------------------------------------------------
// Generators

/// Entries i.i.d. Unif(0, 1), columns normalized.
inline TopicMatrix gen_topic_matrix(int p, int k, std::uint64_t seed) {
  require(p >= k && k >= 1, ErrorCode::InvalidParam, "need p >= K >= 1");
  rng::Engine eng = rng::stream(seed, kTagTopics);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix a(p, k);
  for (int c = 0; c < k; ++c) {
    for (int j = 0; j < p; ++j) a(j, c) = u(eng);
    a.col(c) /= a.col(c).sum();
  }
  return TopicMatrix(std::move(a));
}

/// Dense (tau = 0): uniform on the simplex. Sparse: a uniform support of size
/// tau with Unif(0, 1) entries, normalized.
inline ProbVec gen_weights(int k, int tau, std::uint64_t seed) {
  require(k >= 1 && (tau == 0 || (tau >= 1 && tau <= k)), ErrorCode::InvalidParam, "need tau = 0 or 1 <= tau <= K");
  rng::Engine eng = rng::stream(seed, kTagWeights);
  if (tau == 0) return ProbVec::normalized(rng::uniform_simplex(eng, k));
  std::vector<int> idx(static_cast<std::size_t>(k));
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < tau; ++i) {
    const int j = i + static_cast<int>(rng::uniform_index(eng, static_cast<std::uint64_t>(k - i)));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vector w = Vector::Zero(k);
  for (int i = 0; i < tau; ++i) {
    double v = 0.0;
    while (v <= 0.0) v = u(eng);
    w(idx[static_cast<std::size_t>(i)]) = v;
  }
  return ProbVec::normalized(w);
}

inline CountVector gen_document(const ProbVec& r, std::int64_t n, std::uint64_t seed) {
  require(n >= 1, ErrorCode::InvalidParam, "document length must be >= 1");
  rng::Engine eng = rng::stream(seed, kTagDocs);
  return CountVector(rng::multinomial(eng, n, r.values()));
}

inline CountVector gen_document(rng::Engine& eng, const ProbVec& r, std::int64_t n) {
  return CountVector(rng::multinomial(eng, n, r.values()));
}

/// Entrywise multiplicative noise (1 + eps U(-1, 1)), columns renormalized.
inline TopicMatrix perturb_topics(const TopicMatrix& a, double eps, std::uint64_t seed) {
  if (eps <= 0.0) return a;
  rng::Engine eng = rng::stream(seed, kTagNoise);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix m = a.matrix();
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    for (Eigen::Index j = 0; j < m.rows(); ++j) m(j, c) *= 1.0 + eps * u(eng);
    m.col(c) /= m.col(c).sum();
  }
  return TopicMatrix(std::move(m));
}

// ---------------------------------------------------------------------------
// Reports

struct MethodSummary {
  std::string method;
  int n = 0;  // successful replicates
  double coverage = 0.0;
  double mean_length = 0.0;
  double se_length = 0.0;
};

struct IntervalRecord {
  std::string method;
  double lower = 0.0;
  double upper = 0.0;
  bool covered = false;
};

struct ReplicateRecord {
  int outer = 0;
  int rep = 0;
  double w_true = 0.0;
  double w_tilde = 0.0;
  bool failed = false;
  std::string error;
  std::vector<IntervalRecord> intervals;
};

struct KsRecord {
  std::string label;
  int outer = 0;
  double distance = 0.0;
  double pvalue = 0.0;
};

/// Standardized draws of one estimator coordinate (or whitened component).
struct NormalSeries {
  std::string estimator;
  std::string kind;  // "coordinate" or "whitened"
  int index = 0;
  double truth = 0.0;
  std::vector<double> values;
  double ks_distance = 0.0;
  double ks_pvalue = 0.0;
};

struct ExperimentReport {
  std::string experiment;
  SimConfig config;
  std::string rng = rng::kEngineName;
  std::vector<MethodSummary> summaries;
  std::vector<ReplicateRecord> records;
  std::vector<KsRecord> ks;
  std::vector<NormalSeries> normality;
  std::vector<std::vector<double>> outer_weights_i;
  std::vector<std::vector<double>> outer_weights_j;
  int failures = 0;
  bool valid = true;

  const MethodSummary* summary(const std::string& method) const {
    for (const auto& s : summaries)
      if (s.method == method) return &s;
    return nullptr;
  }
  double mean_ks_distance() const {
    if (ks.empty()) return 0.0;
    double s = 0.0;
    for (const auto& k : ks) s += k.distance;
    return s / static_cast<double>(ks.size());
  }
  double mean_ks_pvalue() const {
    if (ks.empty()) return 0.0;
    double s = 0.0;
    for (const auto& k : ks) s += k.pvalue;
    return s / static_cast<double>(ks.size());
  }
  const NormalSeries* series(const std::string& estimator, const std::string& kind, int index) const {
    for (const auto& s : normality)
      if (s.estimator == estimator && s.kind == kind && s.index == index) return &s;
    return nullptr;
  }
};

namespace detail {

inline std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

inline void summarize(ExperimentReport& rep, const std::vector<std::string>& methods) {
  int total = 0;
  rep.failures = 0;
  rep.summaries.clear();
  for (const auto& r : rep.records) {
    ++total;
    if (r.failed) ++rep.failures;
  }
  // More than 1% failed replicates invalidates the report.
  rep.valid = 100 * rep.failures <= total;
  for (const auto& m : methods) {
    MethodSummary s;
    s.method = m;
    double sum = 0.0, sum2 = 0.0;
    int hits = 0;
    for (const auto& r : rep.records) {
      if (r.failed) continue;
      for (const auto& iv : r.intervals) {
        if (iv.method != m) continue;
        ++s.n;
        hits += iv.covered;
        const double len = iv.upper - iv.lower;
        sum += len;
        sum2 += len * len;
      }
    }
    if (s.n > 0) {
      const double n = static_cast<double>(s.n);
      s.coverage = hits / n;
      s.mean_length = sum / n;
      const double var = s.n > 1 ? std::max(0.0, (sum2 - n * s.mean_length * s.mean_length) / (n - 1.0)) : 0.0;
      s.se_length = std::sqrt(var / n);
    }
    rep.summaries.push_back(s);
  }
}

/// The true and (possibly perturbed) estimation-side topic matrices.
struct World {
  TopicMatrix a;
  TopicMatrix a_hat;
  CostMatrix cost;      // from a
  CostMatrix cost_hat;  // from a_hat
};

inline World make_world(const SimConfig& cfg) {
  World w;
  w.a = gen_topic_matrix(cfg.p, cfg.K, cfg.seed);
  w.a_hat = perturb_topics(w.a, cfg.a_noise, cfg.seed);
  w.cost = cost_matrix(w.a, cfg.metric);
  w.cost_hat = cost_matrix(w.a_hat, cfg.metric);
  return w;
}

inline std::uint64_t outer_seed(std::uint64_t seed, int outer, int side) {
  return rng::derive(seed, kTagWeights, static_cast<std::uint64_t>(2 * outer + side));
}

/// Draws of sup_F f^T Z with Z ~ N(0, cov), from a shared standard-normal stream.
inline std::vector<double> known_limit_draws(const DualPolytope& f, const Matrix& cov, int m, std::uint64_t seed,
                                             int workers) {
  return support_draws(f, numlin::psd_sqrt(cov), m, seed, workers, kTagLimit);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Drivers

/// Coverage and length of level-t intervals for W(alpha_i, alpha_j). Null
/// runs normally set delta = +infinity: at alpha_i = alpha_j the optimal face
/// is all of F and no facet needs estimating.
inline ExperimentReport run_ci_experiment(const SimConfig& cfg) {
  cfg.validate();
  require(!cfg.methods.empty(), ErrorCode::InvalidParam, "no inference method selected");
  require(static_cast<double>(cfg.M) * cfg.level >= 20.0 - 1e-9 &&
              static_cast<double>(cfg.B) * cfg.level >= 20.0 - 1e-9,
          ErrorCode::InvalidParam, "M and B must be at least 20 / level");
  ExperimentReport rep;
  rep.experiment = cfg.scenario == Scenario::Null ? "null-ci" : "alt-ci";
  rep.config = cfg;
  const detail::World world = detail::make_world(cfg);
  const DualPolytope f_hat(world.cost_hat);
  const auto [w_i, w_j] = pair_cov_weights(cfg.N_i, cfg.N_j);

  std::vector<ProbVec> alpha_i, alpha_j;
  std::vector<double> w_true;
  for (int o = 0; o < cfg.n_outer; ++o) {
    alpha_i.push_back(gen_weights(cfg.K, cfg.tau, detail::outer_seed(cfg.seed, o, 0)));
    alpha_j.push_back(cfg.scenario == Scenario::Null ? alpha_i.back()
                                                     : gen_weights(cfg.K, cfg.tau, detail::outer_seed(cfg.seed, o, 1)));
    w_true.push_back(wasserstein_primal(alpha_i.back(), alpha_j.back(), world.cost).value);
    rep.outer_weights_i.push_back(detail::to_std(alpha_i.back().values()));
    rep.outer_weights_j.push_back(detail::to_std(alpha_j.back().values()));
  }

  const int total = cfg.n_outer * cfg.n_reps;
  rep.records.resize(static_cast<std::size_t>(total));
  parallel_for(total, cfg.workers, [&](int idx) {
    ReplicateRecord& rec = rep.records[static_cast<std::size_t>(idx)];
    rec.outer = idx / cfg.n_reps;
    rec.rep = idx % cfg.n_reps;
    rec.w_true = w_true[static_cast<std::size_t>(rec.outer)];
    try {
      rng::Engine eng = rng::stream(cfg.seed, kTagDocs, static_cast<std::uint64_t>(idx));
      const ProbVec r_i(world.a.mix(alpha_i[static_cast<std::size_t>(rec.outer)].values()));
      const ProbVec r_j(world.a.mix(alpha_j[static_cast<std::size_t>(rec.outer)].values()));
      const DocumentFit fi = fit_document(gen_document(eng, r_i, cfg.N_i), world.a_hat);
      const DocumentFit fj = fit_document(gen_document(eng, r_j, cfg.N_j), world.a_hat);
      rec.w_tilde = distance_estimate(fi.debiased.alpha, fj.debiased.alpha, f_hat);

      for (Method m : cfg.methods) {
        const std::uint64_t sub = rng::derive(cfg.seed, kTagBoot, static_cast<std::uint64_t>(idx) * 8u +
                                                                       static_cast<std::uint64_t>(m));
        SampleSet draws;
        if (m == Method::Plugin) {
          LimitSamplerOptions opt;
          opt.delta = cfg.delta;
          opt.M = cfg.M;
          opt.seed = sub;
          opt.weight_i = w_i;
          opt.weight_j = w_j;
          draws = limit_sampler(fi.mle, fj.mle, world.a_hat, world.cost_hat, opt);
        } else {
          BootstrapOptions opt;
          opt.B = cfg.B;
          opt.gamma = cfg.gamma;
          opt.delta = cfg.delta;
          opt.seed = sub;
          draws = m == Method::DerivBs ? derivative_bootstrap(fi, fj, world.a_hat, world.cost_hat, opt)
                                       : m_out_of_n_bootstrap(fi, fj, world.a_hat, world.cost_hat, opt);
        }
        const ConfidenceInterval ci = confidence_interval(rec.w_tilde, draws, cfg.level, cfg.N_i, cfg.N_j);
        rec.intervals.push_back({to_string(m), ci.lower, ci.upper, ci.covers(rec.w_true)});
      }
    } catch (const Error& e) {
      rec.failed = true;
      rec.error = e.what();
      rec.intervals.clear();
    }
  });
  std::vector<std::string> names;
  for (Method m : cfg.methods) names.emplace_back(to_string(m));
  detail::summarize(rep, names);
  return rep;
}

/// Standardized draws of the debiased MLE, the simplex MLE and WLS against
/// their true asymptotic covariances, with one-sample KS tests vs N(0, 1).
inline ExperimentReport run_normality_experiment(const SimConfig& cfg) {
  cfg.validate();
  ExperimentReport rep;
  rep.experiment = "normality";
  rep.config = cfg;
  const detail::World world = detail::make_world(cfg);
  const ProbVec alpha = gen_weights(cfg.K, cfg.tau, detail::outer_seed(cfg.seed, 0, 0));
  rep.outer_weights_i.push_back(detail::to_std(alpha.values()));
  const ProbVec r(world.a.mix(alpha.values()));
  const int k = cfg.K;
  const double n = static_cast<double>(cfg.N_i);

  const Matrix sigma = sigma_hat(alpha.values(), world.a).sigma;
  const Matrix sigma_wls = sigma_ls(alpha.values(), r, world.a).sigma;

  // Rows: replicate; columns: coordinates, for each estimator.
  std::vector<Vector> mle(static_cast<std::size_t>(cfg.n_reps)), deb(mle.size()), wls(mle.size());
  std::vector<char> failed(mle.size(), 0);
  parallel_for(cfg.n_reps, cfg.workers, [&](int b) {
    try {
      rng::Engine eng = rng::stream(cfg.seed, kTagDocs, static_cast<std::uint64_t>(b));
      const CountVector y = gen_document(eng, r, cfg.N_i);
      const DocumentFit fit = fit_document(y, world.a_hat);
      mle[static_cast<std::size_t>(b)] = fit.mle.alpha;
      deb[static_cast<std::size_t>(b)] = fit.debiased.alpha;
      wls[static_cast<std::size_t>(b)] = wls_weights(fit.x, world.a_hat).alpha;
    } catch (const Error&) {
      failed[static_cast<std::size_t>(b)] = 1;
    }
  });
  for (int b = 0; b < cfg.n_reps; ++b) {
    ReplicateRecord rec;
    rec.rep = b;
    rec.failed = failed[static_cast<std::size_t>(b)] != 0;
    rep.records.push_back(rec);
  }

  auto add_series = [&](const std::string& name, const std::vector<Vector>& est, const Matrix& cov) {
    for (int c = 0; c < k; ++c) {
      NormalSeries s{name, "coordinate", c, alpha[c], {}, 0.0, 1.0};
      const double sd = std::sqrt(std::max(cov(c, c), 0.0));
      if (sd <= 0.0) continue;
      for (int b = 0; b < cfg.n_reps; ++b)
        if (!failed[static_cast<std::size_t>(b)])
          s.values.push_back(std::sqrt(n) * (est[static_cast<std::size_t>(b)](c) - alpha[c]) / sd);
      if (s.values.empty()) continue;
      const KsResult t = ks_normal_test(s.values);
      s.ks_distance = t.distance;
      s.ks_pvalue = t.pvalue;
      rep.normality.push_back(std::move(s));
    }
    // Eigen-coordinates of the range of cov: sqrt(N) lambda^{-1/2} v^T (est - alpha).
    const numlin::SymMatrixResult eig = numlin::sym_eig(cov);
    for (int c = 0; c < eig.rank; ++c) {
      NormalSeries s{name, "whitened", c, 0.0, {}, 0.0, 1.0};
      const Vector v = eig.eigenvectors.col(c) / std::sqrt(eig.eigenvalues(c));
      for (int b = 0; b < cfg.n_reps; ++b)
        if (!failed[static_cast<std::size_t>(b)])
          s.values.push_back(std::sqrt(n) * v.dot(est[static_cast<std::size_t>(b)] - alpha.values()));
      if (s.values.empty()) continue;
      const KsResult t = ks_normal_test(s.values);
      s.ks_distance = t.distance;
      s.ks_pvalue = t.pvalue;
      rep.normality.push_back(std::move(s));
    }
  };
  add_series("debiased", deb, sigma);
  add_series("mle", mle, sigma);
  add_series("wls", wls, sigma_wls);
  detail::summarize(rep, {});
  return rep;
}

/// Two-sample KS distance between sqrt(N) W-tilde under the null and draws
/// of its limit sup_F f^T Z, Z ~ N(0, 2 Sigma), with the true Sigma and F.
/// Uses N_i as the common document length.
inline ExperimentReport run_convergence_experiment(const SimConfig& cfg) {
  cfg.validate();
  ExperimentReport rep;
  rep.experiment = "ks-convergence";
  rep.config = cfg;
  const detail::World world = detail::make_world(cfg);
  const DualPolytope f(world.cost);
  const DualPolytope f_hat(world.cost_hat);
  const double root_n = std::sqrt(static_cast<double>(cfg.N_i));

  for (int o = 0; o < cfg.n_outer; ++o) {
    const ProbVec alpha = gen_weights(cfg.K, cfg.tau, detail::outer_seed(cfg.seed, o, 0));
    rep.outer_weights_i.push_back(detail::to_std(alpha.values()));
    const ProbVec r(world.a.mix(alpha.values()));
    const Matrix cov = 2.0 * sigma_hat(alpha.values(), world.a).sigma;
    const std::vector<double> limit = detail::known_limit_draws(
        f, cov, cfg.limit_draws, rng::derive(cfg.seed, kTagLimit, static_cast<std::uint64_t>(o)), cfg.workers);

    std::vector<double> est(static_cast<std::size_t>(cfg.n_reps), 0.0);
    std::vector<char> failed(est.size(), 0);
    parallel_for(cfg.n_reps, cfg.workers, [&](int b) {
      try {
        rng::Engine eng = rng::stream(cfg.seed, kTagDocs,
                                      static_cast<std::uint64_t>(o) * static_cast<std::uint64_t>(cfg.n_reps) +
                                          static_cast<std::uint64_t>(b));
        const DocumentFit fi = fit_document(gen_document(eng, r, cfg.N_i), world.a_hat);
        const DocumentFit fj = fit_document(gen_document(eng, r, cfg.N_i), world.a_hat);
        est[static_cast<std::size_t>(b)] = root_n * distance_estimate(fi.debiased.alpha, fj.debiased.alpha, f_hat);
      } catch (const Error&) {
        failed[static_cast<std::size_t>(b)] = 1;
      }
    });
    std::vector<double> ok;
    for (int b = 0; b < cfg.n_reps; ++b) {
      ReplicateRecord rec;
      rec.outer = o;
      rec.rep = b;
      rec.failed = failed[static_cast<std::size_t>(b)] != 0;
      rec.w_tilde = est[static_cast<std::size_t>(b)] / root_n;
      if (!rec.failed) ok.push_back(est[static_cast<std::size_t>(b)]);
      rep.records.push_back(rec);
    }
    if (!ok.empty())
      rep.ks.push_back({"sqrtN*W_tilde vs limit", o, ks_distance(ok, limit), ks_two_sample_pvalue(ok, limit)});
  }
  detail::summarize(rep, {});
  return rep;
}

/// Null-case intervals from the debiased MLE and from WLS, each using its
/// known limit law (true Sigma or Sigma_LS, true F) approximated by
/// limit_draws realizations. Both laws share one standard-normal stream.
inline ExperimentReport run_mle_vs_wls_experiment(const SimConfig& cfg) {
  cfg.validate();
  require(static_cast<double>(cfg.limit_draws) * cfg.level >= 20.0 - 1e-9, ErrorCode::InvalidParam,
          "limit_draws must be at least 20 / level");
  ExperimentReport rep;
  rep.experiment = "mle-vs-wls";
  rep.config = cfg;
  const detail::World world = detail::make_world(cfg);
  const DualPolytope f(world.cost);
  const double root_n = std::sqrt(static_cast<double>(cfg.N_i));

  for (int o = 0; o < cfg.n_outer; ++o) {
    const ProbVec alpha = gen_weights(cfg.K, cfg.tau, detail::outer_seed(cfg.seed, o, 0));
    rep.outer_weights_i.push_back(detail::to_std(alpha.values()));
    const ProbVec r(world.a.mix(alpha.values()));
    const std::uint64_t lseed = rng::derive(cfg.seed, kTagLimit, static_cast<std::uint64_t>(o));
    const SampleSet law_mle(
        detail::known_limit_draws(f, 2.0 * sigma_hat(alpha.values(), world.a).sigma, cfg.limit_draws, lseed,
                                  cfg.workers),
        std::numeric_limits<double>::infinity(), lseed);
    const SampleSet law_wls(
        detail::known_limit_draws(f, 2.0 * sigma_ls(alpha.values(), r, world.a).sigma, cfg.limit_draws, lseed,
                                  cfg.workers),
        std::numeric_limits<double>::infinity(), lseed);

    auto interval = [&](double w) {
      return std::pair<double, double>{w - law_mle.quantile(1.0 - cfg.level / 2.0) / root_n,
                                       w - law_mle.quantile(cfg.level / 2.0) / root_n};
    };
    auto interval_wls = [&](double w) {
      return std::pair<double, double>{w - law_wls.quantile(1.0 - cfg.level / 2.0) / root_n,
                                       w - law_wls.quantile(cfg.level / 2.0) / root_n};
    };

    std::vector<ReplicateRecord> recs(static_cast<std::size_t>(cfg.n_reps));
    parallel_for(cfg.n_reps, cfg.workers, [&](int b) {
      ReplicateRecord& rec = recs[static_cast<std::size_t>(b)];
      rec.outer = o;
      rec.rep = b;
      try {
        rng::Engine eng = rng::stream(cfg.seed, kTagDocs,
                                      static_cast<std::uint64_t>(o) * static_cast<std::uint64_t>(cfg.n_reps) +
                                          static_cast<std::uint64_t>(b));
        const DocumentFit fi = fit_document(gen_document(eng, r, cfg.N_i), world.a_hat);
        const DocumentFit fj = fit_document(gen_document(eng, r, cfg.N_i), world.a_hat);
        rec.w_tilde = distance_estimate(fi.debiased.alpha, fj.debiased.alpha, f);
        const double w_ls = distance_estimate(wls_weights(fi.x, world.a_hat).alpha,
                                              wls_weights(fj.x, world.a_hat).alpha, f);
        const auto [lo, hi] = interval(rec.w_tilde);
        const auto [llo, lhi] = interval_wls(w_ls);
        rec.intervals.push_back({"mle-debiased", lo, hi, lo <= 0.0 && 0.0 <= hi});
        rec.intervals.push_back({"wls", llo, lhi, llo <= 0.0 && 0.0 <= lhi});
      } catch (const Error& e) {
        rec.failed = true;
        rec.error = e.what();
      }
    });
    rep.records.insert(rep.records.end(), recs.begin(), recs.end());
  }
  detail::summarize(rep, {"mle-debiased", "wls"});
  return rep;
}

/// Mean and standard error of per-outer paired length differences
/// (second minus first method), the unit of independent variation.
struct PairedDifference {
  double mean = 0.0;
  double se = 0.0;
  int n = 0;
};

inline PairedDifference paired_length_difference(const ExperimentReport& rep, const std::string& first,
                                                 const std::string& second) {
  const int outer = rep.config.n_outer;
  std::vector<double> sum(static_cast<std::size_t>(outer), 0.0);
  std::vector<int> cnt(static_cast<std::size_t>(outer), 0);
  for (const auto& r : rep.records) {
    if (r.failed) continue;
    double a = std::numeric_limits<double>::quiet_NaN(), b = a;
    for (const auto& iv : r.intervals) {
      if (iv.method == first) a = iv.upper - iv.lower;
      if (iv.method == second) b = iv.upper - iv.lower;
    }
    if (std::isnan(a) || std::isnan(b)) continue;
    sum[static_cast<std::size_t>(r.outer)] += b - a;
    ++cnt[static_cast<std::size_t>(r.outer)];
  }
  std::vector<double> d;
  for (int o = 0; o < outer; ++o)
    if (cnt[static_cast<std::size_t>(o)] > 0) d.push_back(sum[static_cast<std::size_t>(o)] / cnt[static_cast<std::size_t>(o)]);
  PairedDifference out;
  out.n = static_cast<int>(d.size());
  if (d.empty()) return out;
  out.mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
  if (d.size() > 1) {
    double ss = 0.0;
    for (double v : d) ss += (v - out.mean) * (v - out.mean);
    out.se = std::sqrt(ss / static_cast<double>(d.size() - 1) / static_cast<double>(d.size()));
  }
  return out;
}

}  // namespace mixwass::sim
