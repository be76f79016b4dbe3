#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "expect_error.hpp"
#include "mixwass/io.hpp"
#include "mixwass/simulate.hpp"

using namespace mixwass;
using fixtures::expect_error;

namespace {

sim::SimConfig small_config() {
  sim::SimConfig c;
  c.K = 4;
  c.p = 40;
  c.N_i = c.N_j = 300;
  c.n_reps = 5;
  c.M = 400;
  c.B = 400;
  c.seed = 11;
  return c;
}

}  // namespace

// ---------------------------------------------------------------- generators

TEST(GenTopicMatrix, SingleColumn) {
  const TopicMatrix a = sim::gen_topic_matrix(7, 1, 3);
  EXPECT_EQ(a.K(), 1);
  EXPECT_NEAR(a.column(0).sum(), 1.0, 1e-12);
}

TEST(GenTopicMatrix, ColumnsOnSimplexAndDeterministic) {
  const TopicMatrix a = sim::gen_topic_matrix(300, 10, 9);
  for (int k = 0; k < 10; ++k) EXPECT_NEAR(a.column(k).sum(), 1.0, 1e-12);
  EXPECT_GE(a.matrix().minCoeff(), 0.0);
  EXPECT_EQ(a.matrix(), sim::gen_topic_matrix(300, 10, 9).matrix());
  EXPECT_NE(a.matrix(), sim::gen_topic_matrix(300, 10, 10).matrix());
}

TEST(GenWeights, SingleAtom) {
  const ProbVec w = sim::gen_weights(1, 1, 5);
  EXPECT_EQ(w.values()(0), 1.0);
}

TEST(GenWeights, SparseSupportSize) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Vector w = sim::gen_weights(5, 3, seed).values();
    EXPECT_EQ((w.array() > 0.0).count(), 3);
    EXPECT_NEAR(w.sum(), 1.0, 1e-12);
  }
}

TEST(GenWeights, SparseSupportIsUniform) {
  std::vector<int> hits(5, 0);
  const int n = 6000;
  for (int s = 0; s < n; ++s) {
    const Vector w = sim::gen_weights(5, 2, static_cast<std::uint64_t>(s)).values();
    for (int k = 0; k < 5; ++k) hits[static_cast<std::size_t>(k)] += w(k) > 0.0;
  }
  // Each atom is in the support with probability 2/5.
  const double mean = n * 0.4, sd = std::sqrt(n * 0.4 * 0.6);
  for (int h : hits) EXPECT_NEAR(h, mean, 4.0 * sd);
}

TEST(GenWeights, DenseTwoAtomMarginalIsUniform) {
  std::vector<double> first(10000);
  for (std::size_t s = 0; s < first.size(); ++s) first[s] = sim::gen_weights(2, 0, s).values()(0);
  // KS against Unif(0, 1) with the same asymptotic p-value as the library's one-sample test.
  std::sort(first.begin(), first.end());
  const double n = static_cast<double>(first.size());
  double d = 0.0;
  for (std::size_t i = 0; i < first.size(); ++i)
    d = std::max({d, (i + 1) / n - first[i], first[i] - i / n});
  const double sq = std::sqrt(n);
  EXPECT_GT(kolmogorov_survival((sq + 0.12 + 0.11 / sq) * d), 0.01);
}

TEST(GenDocument, PointMassAndOneHot) {
  const CountVector y = sim::gen_document(ProbVec::unit(4, 2), 50, 1);
  EXPECT_EQ(y.counts(), (std::vector<std::int64_t>{0, 0, 50, 0}));
  Vector r(3);
  r << 0.2, 0.3, 0.5;
  const CountVector one = sim::gen_document(ProbVec(r), 1, 2);
  EXPECT_EQ(one.N(), 1);
  EXPECT_EQ(*std::max_element(one.counts().begin(), one.counts().end()), 1);
}

TEST(GenDocument, BinomialMean) {
  Vector r(2);
  r << 0.3, 0.7;
  const int reps = 10000;
  double mean = 0.0;
  for (int s = 0; s < reps; ++s) {
    const CountVector y = sim::gen_document(ProbVec(r), 100, static_cast<std::uint64_t>(s));
    EXPECT_EQ(y.N(), 100);
    mean += static_cast<double>(y[0]) / reps;
  }
  EXPECT_NEAR(mean, 30.0, 4.0 * std::sqrt(100 * 0.3 * 0.7 / reps));
}

TEST(GenDocument, CoordinatewiseMeansWithinFourSigma) {
  const ProbVec r = sim::gen_weights(8, 0, 4);
  const int reps = 10000;
  const std::int64_t n = 40;
  Vector mean = Vector::Zero(8);
  rng::Engine eng = rng::stream(17);
  for (int s = 0; s < reps; ++s) {
    const CountVector y = sim::gen_document(eng, r, n);
    for (int j = 0; j < 8; ++j) mean(j) += static_cast<double>(y[j]) / reps;
  }
  for (int j = 0; j < 8; ++j) {
    const double sd = std::sqrt(n * r[j] * (1 - r[j]) / reps);
    EXPECT_NEAR(mean(j), n * r[j], 4.0 * sd + 1e-12);
  }
}

TEST(PerturbTopics, StaysOnSimplexAndZeroNoiseIsIdentity) {
  const TopicMatrix a = sim::gen_topic_matrix(30, 4, 1);
  EXPECT_EQ(sim::perturb_topics(a, 0.0, 2).matrix(), a.matrix());
  const TopicMatrix b = sim::perturb_topics(a, 0.2, 2);
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(b.column(k).sum(), 1.0, 1e-12);
  EXPECT_GT((b.matrix() - a.matrix()).cwiseAbs().maxCoeff(), 0.0);
}

// ----------------------------------------------------------------- drivers

TEST(SimConfig, Validation) {
  sim::SimConfig c;
  EXPECT_NO_THROW(c.validate());
  c.tau = 6;
  expect_error([&] { c.validate(); }, ErrorCode::InvalidParam);
  c = {};
  c.n_reps = 0;
  expect_error([&] { c.validate(); }, ErrorCode::InvalidParam);
  c = {};
  c.N_i = 0;
  expect_error([&] { c.validate(); }, ErrorCode::InvalidParam);
  c = {};
  c.delta = -1;
  expect_error([&] { c.validate(); }, ErrorCode::InvalidParam);
}

TEST(MethodNames, RoundTrip) {
  for (auto m : {sim::Method::Plugin, sim::Method::DerivBs, sim::Method::MofNBs})
    EXPECT_EQ(sim::parse_method(sim::to_string(m)), m);
  expect_error([] { sim::parse_method("naive"); }, ErrorCode::InvalidParam);
}

TEST(CiExperiment, SingleReplicate) {
  sim::SimConfig c = small_config();
  c.n_reps = 1;
  const sim::ExperimentReport r = sim::run_ci_experiment(c);
  ASSERT_EQ(r.records.size(), 1u);
  ASSERT_NE(r.summary("plugin"), nullptr);
  EXPECT_EQ(r.summary("plugin")->n, 1);
}

TEST(CiExperiment, RecordInvariants) {
  sim::SimConfig c = small_config();
  c.scenario = sim::Scenario::Alternative;
  c.n_outer = 2;
  c.methods = {sim::Method::Plugin, sim::Method::DerivBs, sim::Method::MofNBs};
  const sim::ExperimentReport r = sim::run_ci_experiment(c);
  EXPECT_EQ(r.records.size(), 10u);
  EXPECT_EQ(r.outer_weights_i.size(), 2u);
  for (const auto& s : r.summaries) {
    EXPECT_GE(s.coverage, 0.0);
    EXPECT_LE(s.coverage, 1.0);
    EXPECT_GE(s.mean_length, 0.0);
  }
  for (const auto& rec : r.records) {
    ASSERT_FALSE(rec.failed) << rec.error;
    EXPECT_EQ(rec.intervals.size(), 3u);
    for (const auto& iv : rec.intervals) {
      EXPECT_LE(iv.lower, iv.upper);
      EXPECT_EQ(iv.covered, iv.lower <= rec.w_true && rec.w_true <= iv.upper);
    }
  }
}

TEST(CiExperiment, NullHasZeroTruth) {
  const sim::ExperimentReport r = sim::run_ci_experiment(small_config());
  for (const auto& rec : r.records) EXPECT_EQ(rec.w_true, 0.0);
}

TEST(CiExperiment, ReportBytesDeterministic) {
  sim::SimConfig c = small_config();
  c.scenario = sim::Scenario::Alternative;
  c.methods = {sim::Method::Plugin, sim::Method::MofNBs};
  const std::string a = io::to_json(sim::run_ci_experiment(c)).dump();
  EXPECT_EQ(a, io::to_json(sim::run_ci_experiment(c)).dump());
  c.workers = 3;
  EXPECT_EQ(a, io::to_json(sim::run_ci_experiment(c)).dump());
  c.seed += 1;
  EXPECT_NE(a, io::to_json(sim::run_ci_experiment(c)).dump());
}

TEST(CiExperiment, LengthShrinksWithN) {
  double prev = std::numeric_limits<double>::infinity();
  for (int n : {100, 500, 1000, 3000}) {
    sim::SimConfig c;
    c.N_i = c.N_j = n;
    c.n_reps = 20;
    c.M = 400;
    c.delta = std::numeric_limits<double>::infinity();
    c.seed = 2;
    const double len = sim::run_ci_experiment(c).summary("plugin")->mean_length;
    EXPECT_LT(len, prev) << "N=" << n;
    prev = len;
  }
}

TEST(Summaries, ValidityFlagUsesOnePercentRule) {
  sim::ExperimentReport r;
  for (int i = 0; i < 200; ++i) {
    sim::ReplicateRecord rec;
    rec.failed = i < 2;
    if (!rec.failed) rec.intervals.push_back({"plugin", 0.0, 1.0, true});
    r.records.push_back(rec);
  }
  sim::detail::summarize(r, {"plugin"});
  EXPECT_TRUE(r.valid);
  EXPECT_EQ(r.failures, 2);
  r.records[2].failed = true;
  r.records[2].intervals.clear();
  sim::detail::summarize(r, {"plugin"});
  EXPECT_FALSE(r.valid);
}

TEST(NormalityExperiment, SeriesShapes) {
  sim::SimConfig c;
  c.K = 3;
  c.p = 50;
  c.N_i = c.N_j = 500;
  c.n_reps = 30;
  const sim::ExperimentReport r = sim::run_normality_experiment(c);
  for (const char* est : {"debiased", "mle", "wls"})
    for (int k = 0; k < 3; ++k) {
      const auto* s = r.series(est, "coordinate", k);
      ASSERT_NE(s, nullptr) << est << " " << k;
      EXPECT_EQ(s->values.size(), 30u);
      EXPECT_GE(s->ks_pvalue, 0.0);
      EXPECT_LE(s->ks_pvalue, 1.0);
    }
}

TEST(ConvergenceExperiment, ProducesOneKsRecordPerOuterDraw) {
  sim::SimConfig c;
  c.K = 4;
  c.p = 40;
  c.N_i = c.N_j = 300;
  c.n_outer = 2;
  c.n_reps = 50;
  c.limit_draws = 50;
  const sim::ExperimentReport r = sim::run_convergence_experiment(c);
  ASSERT_EQ(r.ks.size(), 2u);
  for (const auto& k : r.ks) {
    EXPECT_GE(k.distance, 0.0);
    EXPECT_LE(k.distance, 1.0);
  }
}

TEST(MleVsWls, SingleReplicatePaired) {
  sim::SimConfig c = small_config();
  c.n_reps = 1;
  c.limit_draws = 400;
  const sim::ExperimentReport r = sim::run_mle_vs_wls_experiment(c);
  ASSERT_EQ(r.records.size(), 1u);
  EXPECT_EQ(r.records[0].intervals.size(), 2u);
  const sim::PairedDifference d = sim::paired_length_difference(r, "wls", "mle-debiased");
  EXPECT_TRUE(std::isfinite(d.mean));
}
