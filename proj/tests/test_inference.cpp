#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "expect_error.hpp"
#include "mixwass/inference.hpp"
#include "test_helpers.hpp"

using namespace mixwass;
using fixtures::expect_error;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

WeightEstimate estimate(const Vector& alpha) {
  WeightEstimate e;
  e.alpha = alpha;
  for (int k = 0; k < alpha.size(); ++k)
    if (alpha(k) > kActiveTau) e.support.push_back(k);
  return e;
}

struct Pair {
  TopicMatrix a;
  CostMatrix cost;
  DocumentFit fi, fj;
};

Pair random_pair(std::uint64_t seed, int k, int p, std::int64_t n, bool same_weights) {
  std::mt19937_64 eng(seed);
  TopicMatrix a(fixtures::random_topics(eng, p, k));
  CostMatrix cost = cost_matrix(a);
  const Vector ai = fixtures::random_simplex(eng, k);
  const Vector aj = same_weights ? ai : fixtures::random_simplex(eng, k);
  rng::Engine r = rng::stream(seed, 1);
  DocumentFit fi = fit_document(CountVector(rng::multinomial(r, n, a.mix(ai))), a);
  DocumentFit fj = fit_document(CountVector(rng::multinomial(r, n, a.mix(aj))), a);
  return {std::move(a), std::move(cost), std::move(fi), std::move(fj)};
}

}  // namespace

// ---------------------------------------------------------------- estimator

TEST(DistanceEstimate, ZeroDirection) {
  std::mt19937_64 eng(1);
  const CostMatrix c = fixtures::random_metric_cost(eng, 5);
  const Vector a = fixtures::random_simplex(eng, 5);
  EXPECT_NEAR(distance_estimate(estimate(a), estimate(a), c), 0.0, 1e-14);
}

TEST(DistanceEstimate, MatchesPrimalOnSimplexInputs) {
  std::mt19937_64 eng(2);
  for (int t = 0; t < 50; ++t) {
    const int k = 2 + t % 8;
    const CostMatrix c = fixtures::random_metric_cost(eng, k);
    const Vector a = fixtures::random_simplex(eng, k), b = fixtures::random_simplex(eng, k);
    EXPECT_NEAR(distance_estimate(estimate(a), estimate(b), c),
                wasserstein_primal(ProbVec(a), ProbVec(b), c).value, 1e-9);
  }
}

TEST(DistanceEstimate, DiracPairsGiveCost) {
  std::mt19937_64 eng(3);
  const CostMatrix c = fixtures::random_metric_cost(eng, 4);
  for (int k = 0; k < 4; ++k)
    for (int l = 0; l < 4; ++l)
      EXPECT_NEAR(distance_estimate(estimate(ProbVec::unit(4, k).values()), estimate(ProbVec::unit(4, l).values()), c),
                  c(k, l), 1e-12);
}

TEST(DistanceEstimate, NegativeEntriesReturnLpValue) {
  Matrix m(2, 2);
  m << 0, 1, 1, 0;
  const CostMatrix c(m);
  Vector a(2), b(2);
  a << 1.2, -0.2;
  b << 0.5, 0.5;
  // sup over f = (0, f2), |f2| <= 1 of f2 * (-0.7)
  EXPECT_NEAR(distance_estimate(estimate(a), estimate(b), c), 0.7, 1e-12);
}

// ------------------------------------------------------------ limit sampler

TEST(LimitSampler, DegenerateCovarianceGivesZeros) {
  // K = 1: the information is 1, so Sigma-hat = 1 - 1 = 0.
  Matrix col(3, 1);
  col << 0.2, 0.3, 0.5;
  const TopicMatrix a(col);
  const CostMatrix c = cost_matrix(a);
  const WeightEstimate e = estimate(Vector::Ones(1));
  LimitSamplerOptions o;
  o.M = 50;
  for (double v : limit_sampler(e, e, a, c, o).samples) EXPECT_EQ(v, 0.0);
}

TEST(LimitSampler, SingularInformationPropagates) {
  const TopicMatrix a(Matrix::Identity(2, 2));
  const WeightEstimate e = estimate(ProbVec::unit(2, 0).values());
  LimitSamplerOptions o;
  expect_error([&] { limit_sampler(e, e, a, cost_matrix(a), o); }, ErrorCode::SingularInformation);
}

TEST(LimitSampler, KEqualsTwoMatchesScaledHalfNormal) {
  // Independent route: F = {(0, f2) : |f2| <= c} and Z1 + Z2 = 0, so sup f^T Z = c |Z2|
  // with Var(Z2) taken from the scalar Fisher information along the segment.
  std::mt19937_64 eng(4);
  const TopicMatrix a(fixtures::random_topics(eng, 6, 2));
  const CostMatrix cost = cost_matrix(a);
  Vector alpha(2);
  alpha << 0.35, 0.65;

  // Fisher information of one multinomial draw for the first weight on the segment.
  const Vector r = a.mix(alpha);
  const Vector d = a.column(0) - a.column(1);
  double info = 0.0;
  for (int j = 0; j < r.size(); ++j) info += d(j) * d(j) / r(j);
  // Var(Z2) = 2 / info: two independent documents, unit weights.
  const double sigma = std::sqrt(2.0 / info);
  const double c = cost(0, 1);

  LimitSamplerOptions o;
  o.M = 20000;
  o.seed = 8;
  const WeightEstimate e = estimate(alpha);
  const SampleSet s = limit_sampler(e, e, a, cost, o);

  std::normal_distribution<double> g(0.0, sigma);
  std::mt19937_64 oracle(99);
  std::vector<double> direct(20000);
  for (double& v : direct) v = c * std::abs(g(oracle));
  EXPECT_GT(ks_two_sample_pvalue(s.samples, direct), 0.01);

  double mean = 0.0;
  for (double v : s.samples) mean += v / o.M;
  const double expected = c * sigma * std::sqrt(2.0 / M_PI);
  const double se = c * sigma * std::sqrt(1.0 - 2.0 / M_PI) / std::sqrt(o.M);
  EXPECT_NEAR(mean, expected, 4.0 * se);
}

TEST(LimitSampler, InfiniteDeltaUsesEstimatedPolytope) {
  const Pair pr = random_pair(5, 5, 40, 400, false);
  LimitSamplerOptions o;
  o.M = 200;
  o.seed = 12;
  o.delta = kInf;
  const SampleSet s = limit_sampler(pr.fi.mle, pr.fj.mle, pr.a, pr.cost, o);
  const Matrix root = numlin::psd_sqrt(sigma_hat(pr.fi.mle, pr.a).sigma + sigma_hat(pr.fj.mle, pr.a).sigma);
  EXPECT_EQ(s.samples, support_draws(DualPolytope(pr.cost), root, o.M, o.seed, 1));
}

TEST(LimitSampler, SlabWiderThanTwiceMaxCostIsInactive) {
  const Pair pr = random_pair(6, 5, 40, 400, false);
  LimitSamplerOptions o;
  o.M = 200;
  o.seed = 3;
  o.delta = kInf;
  const SampleSet full = limit_sampler(pr.fi.mle, pr.fj.mle, pr.a, pr.cost, o);
  o.delta = 2.0 * pr.cost.max_entry();
  const SampleSet wide = limit_sampler(pr.fi.mle, pr.fj.mle, pr.a, pr.cost, o);
  for (int b = 0; b < o.M; ++b) EXPECT_NEAR(wide.samples[b], full.samples[b], 1e-9);
}

TEST(LimitSampler, RestrictionShrinksSamples) {
  const Pair pr = random_pair(7, 5, 40, 400, false);
  LimitSamplerOptions o;
  o.M = 300;
  o.seed = 3;
  o.delta = kInf;
  const SampleSet full = limit_sampler(pr.fi.mle, pr.fj.mle, pr.a, pr.cost, o);
  o.delta = 0.0;
  const SampleSet restricted = limit_sampler(pr.fi.mle, pr.fj.mle, pr.a, pr.cost, o);
  for (int b = 0; b < o.M; ++b) EXPECT_LE(restricted.samples[b], full.samples[b] + 1e-9);
}

TEST(LimitSampler, WorkerCountDoesNotChangeDraws) {
  const Pair pr = random_pair(8, 6, 50, 300, false);
  for (double delta : {0.0, kInf}) {
    LimitSamplerOptions o;
    o.M = 500;
    o.seed = 21;
    o.delta = delta;
    const SampleSet one = limit_sampler(pr.fi.mle, pr.fj.mle, pr.a, pr.cost, o);
    o.workers = 4;
    const SampleSet four = limit_sampler(pr.fi.mle, pr.fj.mle, pr.a, pr.cost, o);
    EXPECT_EQ(0, std::memcmp(one.samples.data(), four.samples.data(), sizeof(double) * one.samples.size()));
  }
}

TEST(LimitSampler, NonNegativeWhenOriginFeasible) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Pair pr = random_pair(seed, 5, 40, 500, true);
    LimitSamplerOptions o;
    o.M = 200;
    o.delta = kInf;
    for (double v : limit_sampler(pr.fi.mle, pr.fj.mle, pr.a, pr.cost, o).samples) EXPECT_GE(v, 0.0);
  }
}

TEST(LimitSampler, RejectsBadArguments) {
  const Pair pr = random_pair(9, 3, 10, 100, false);
  LimitSamplerOptions o;
  o.M = 0;
  expect_error([&] { limit_sampler(pr.fi.mle, pr.fj.mle, pr.a, pr.cost, o); }, ErrorCode::InvalidParam);
  o.M = 10;
  o.delta = -1.0;
  expect_error([&] { limit_sampler(pr.fi.mle, pr.fj.mle, pr.a, pr.cost, o); }, ErrorCode::InvalidParam);
}

// ------------------------------------------------------ confidence interval

TEST(ConfidenceInterval, ConstantSamplesGiveZeroWidth) {
  const SampleSet s(std::vector<double>(400, 0.25), 0.0, 0);
  const ConfidenceInterval ci = confidence_interval(0.5, s, 0.05, 800, 800);
  EXPECT_DOUBLE_EQ(ci.scale, 20.0);
  EXPECT_DOUBLE_EQ(ci.lower, 0.5 - 0.25 / 20.0);
  EXPECT_DOUBLE_EQ(ci.upper, 0.5 - 0.25 / 20.0);
  EXPECT_EQ(ci.width(), 0.0);
}

TEST(ConfidenceInterval, OrderStatisticConvention) {
  std::vector<double> x(400);
  for (int i = 0; i < 400; ++i) x[static_cast<std::size_t>(i)] = 399 - i;  // 0..399 after sorting
  const SampleSet s(x, 0.0, 0);
  EXPECT_EQ(s.quantile(0.025), 9.0);    // ceil(400 * 0.025) = 10th order statistic
  EXPECT_EQ(s.quantile(0.975), 389.0);  // 390th
  EXPECT_EQ(s.quantile(0.0), 0.0);
  EXPECT_EQ(s.quantile(1.0), 399.0);
  const ConfidenceInterval ci = confidence_interval(1.0, s, 0.05, 100, 300);
  const double scale = std::sqrt(100.0 * 300.0 / 400.0);
  EXPECT_DOUBLE_EQ(ci.lower, 1.0 - 389.0 / scale);
  EXPECT_DOUBLE_EQ(ci.upper, 1.0 - 9.0 / scale);
}

TEST(ConfidenceInterval, EqualSizesUseRootHalfN) { EXPECT_DOUBLE_EQ(pair_scale(1000, 1000), std::sqrt(500.0)); }

TEST(ConfidenceInterval, RejectsBadLevelsAndTooFewDraws) {
  const SampleSet s(std::vector<double>(400, 1.0), 0.0, 0);
  expect_error([&] { confidence_interval(0.0, s, 0.0, 10, 10); }, ErrorCode::InvalidParam);
  expect_error([&] { confidence_interval(0.0, s, 1.0, 10, 10); }, ErrorCode::InvalidParam);
  expect_error([&] { confidence_interval(0.0, s, -0.1, 10, 10); }, ErrorCode::InvalidParam);
  const SampleSet few(std::vector<double>(399, 1.0), 0.0, 0);
  expect_error([&] { confidence_interval(0.0, few, 0.05, 10, 10); }, ErrorCode::InvalidParam);
  EXPECT_NO_THROW(confidence_interval(0.0, s, 0.05, 10, 10));
}

TEST(ConfidenceInterval, NarrowLevelNestedInWideLevel) {
  const Pair pr = random_pair(10, 5, 40, 500, false);
  LimitSamplerOptions o;
  o.M = 1000;
  const SampleSet s = limit_sampler(pr.fi.mle, pr.fj.mle, pr.a, pr.cost, o);
  const double w = distance_estimate(pr.fi.debiased, pr.fj.debiased, pr.cost);
  const ConfidenceInterval wide = confidence_interval(w, s, 0.05, 500, 500);
  const ConfidenceInterval narrow = confidence_interval(w, s, 0.5, 500, 500);
  EXPECT_LE(wide.lower, narrow.lower);
  EXPECT_LE(narrow.upper, wide.upper);
  EXPECT_GE(narrow.width(), 0.0);
}

// --------------------------------------------------------------- bootstraps

TEST(Bootstrap, SingleReplicateDeterministic) {
  const Pair pr = random_pair(11, 4, 30, 300, false);
  BootstrapOptions o;
  o.B = 1;
  o.seed = 77;
  const SampleSet a = m_out_of_n_bootstrap(pr.fi, pr.fj, pr.a, pr.cost, o);
  const SampleSet b = m_out_of_n_bootstrap(pr.fi.counts, pr.fj.counts, pr.a, pr.cost, o);
  ASSERT_EQ(a.M(), 1);
  EXPECT_EQ(a.samples, b.samples);
  const SampleSet d1 = derivative_bootstrap(pr.fi, pr.fj, pr.a, pr.cost, o);
  const SampleSet d2 = derivative_bootstrap(pr.fi, pr.fj, pr.a, pr.cost, o);
  EXPECT_EQ(d1.samples, d2.samples);
}

TEST(Bootstrap, MOutOfNSizeRule) {
  EXPECT_EQ(m_out_of_n_size(100, 0.5), 10);
  EXPECT_EQ(m_out_of_n_size(1000, 0.5), 32);
  EXPECT_EQ(m_out_of_n_size(1, 0.5), 1);
}

TEST(Bootstrap, MOutOfNMatchesManualReplicate) {
  // Replays replicate 0 by hand from the documented stream layout.
  const Pair pr = random_pair(12, 3, 20, 400, false);
  BootstrapOptions o;
  o.B = 3;
  o.seed = 5;
  const SampleSet s = m_out_of_n_bootstrap(pr.fi, pr.fj, pr.a, pr.cost, o);
  rng::Engine eng = rng::stream(o.seed, detail::kTagMofN, 0);
  const std::int64_t m = m_out_of_n_size(400, 0.5);
  const DocumentFit ri = fit_document(CountVector(rng::multinomial(eng, m, pr.fi.x.values())), pr.a);
  const DocumentFit rj = fit_document(CountVector(rng::multinomial(eng, m, pr.fj.x.values())), pr.a);
  const double w = distance_estimate(pr.fi.debiased, pr.fj.debiased, pr.cost);
  const double wb = distance_estimate(ri.debiased, rj.debiased, pr.cost);
  EXPECT_NEAR(s.samples[0], std::sqrt(m / 2.0) * (wb - w), 1e-12);
}

TEST(Bootstrap, DerivativeWithWideSlabIsSupportOfCenteredDirection) {
  const Pair pr = random_pair(13, 4, 30, 500, false);
  BootstrapOptions o;
  o.B = 2;
  o.seed = 9;
  o.delta = kInf;
  const SampleSet s = derivative_bootstrap(pr.fi, pr.fj, pr.a, pr.cost, o);
  rng::Engine eng = rng::stream(o.seed, detail::kTagDeriv, 0);
  const DocumentFit ri = fit_document(CountVector(rng::multinomial(eng, 500, pr.fi.x.values())), pr.a);
  const DocumentFit rj = fit_document(CountVector(rng::multinomial(eng, 500, pr.fj.x.values())), pr.a);
  const Vector dir = std::sqrt(250.0) * (ri.debiased.alpha - rj.debiased.alpha - pr.fi.debiased.alpha +
                                         pr.fj.debiased.alpha);
  EXPECT_NEAR(s.samples[0], std::max(0.0, kr_dual_value(dir, DualPolytope(pr.cost)).value), 1e-12);
}

TEST(Bootstrap, WorkerCountDoesNotChangeDraws) {
  const Pair pr = random_pair(14, 4, 30, 200, false);
  BootstrapOptions o;
  o.B = 30;
  o.seed = 4;
  const SampleSet a = m_out_of_n_bootstrap(pr.fi, pr.fj, pr.a, pr.cost, o);
  const SampleSet d = derivative_bootstrap(pr.fi, pr.fj, pr.a, pr.cost, o);
  o.workers = 3;
  EXPECT_EQ(a.samples, m_out_of_n_bootstrap(pr.fi, pr.fj, pr.a, pr.cost, o).samples);
  EXPECT_EQ(d.samples, derivative_bootstrap(pr.fi, pr.fj, pr.a, pr.cost, o).samples);
}

TEST(Bootstrap, RejectsBadArguments) {
  const Pair pr = random_pair(15, 3, 10, 100, false);
  BootstrapOptions o;
  o.B = 0;
  expect_error([&] { m_out_of_n_bootstrap(pr.fi, pr.fj, pr.a, pr.cost, o); }, ErrorCode::InvalidParam);
  expect_error([&] { derivative_bootstrap(pr.fi, pr.fj, pr.a, pr.cost, o); }, ErrorCode::InvalidParam);
  o.B = 5;
  o.gamma = 1.0;
  expect_error([&] { m_out_of_n_bootstrap(pr.fi, pr.fj, pr.a, pr.cost, o); }, ErrorCode::InvalidParam);
}

// ------------------------------------------------------------------------ KS

TEST(Ks, IdenticalSamples) {
  const std::vector<double> x{0.1, 0.5, 0.2, 0.9};
  EXPECT_EQ(ks_distance(x, x), 0.0);
  EXPECT_EQ(ks_two_sample_pvalue(x, x), 1.0);
}

TEST(Ks, DisjointSupports) {
  EXPECT_EQ(ks_distance({1, 2, 3}, {4, 5}), 1.0);
  EXPECT_EQ(ks_distance({4, 5}, {1, 2, 3}), 1.0);
}

TEST(Ks, HandComputedDistance) {
  // ECDFs at 1,2,3,4: a = .5,.5,1,1 ; b = 0,.5,.5,1 -> max gap .5
  EXPECT_DOUBLE_EQ(ks_distance({1, 3}, {2, 4}), 0.5);
  // Ties across samples count together.
  EXPECT_DOUBLE_EQ(ks_distance({1, 2}, {2, 2}), 0.5);
}

TEST(Ks, NormalNullScale) {
  // Under the null sqrt(n/2) D is Kolmogorov distributed: 99% quantile 1.628.
  std::mt19937_64 eng(31);
  std::normal_distribution<double> n01;
  std::vector<double> a(10000), b(10000);
  for (auto& v : a) v = n01(eng);
  for (auto& v : b) v = n01(eng);
  const double d = ks_distance(a, b);
  EXPECT_LT(d, 1.628 / std::sqrt(5000.0));
  EXPECT_GT(d, 0.0);
}

TEST(Ks, KolmogorovSurvivalKnownValues) {
  EXPECT_NEAR(kolmogorov_survival(1.358), 0.05, 5e-4);
  EXPECT_NEAR(kolmogorov_survival(1.628), 0.01, 2e-4);
  EXPECT_NEAR(kolmogorov_survival(0.5), 0.9639, 1e-4);
  // Both series branches agree at the switch point.
  EXPECT_NEAR(kolmogorov_survival(1.18 - 1e-12), kolmogorov_survival(1.18), 1e-9);
}

TEST(Ks, NormalTestDetectsShift) {
  std::mt19937_64 eng(32);
  std::normal_distribution<double> n01;
  std::vector<double> x(2000);
  for (auto& v : x) v = n01(eng);
  EXPECT_GT(ks_normal_test(x).pvalue, 0.01);
  for (auto& v : x) v += 0.2;
  EXPECT_LT(ks_normal_test(x).pvalue, 0.01);
}

TEST(Ks, EmptyInputRejected) {
  expect_error([] { ks_distance({}, {1.0}); }, ErrorCode::InvalidParam);
  expect_error([] { ks_normal_test({}); }, ErrorCode::InvalidParam);
}
