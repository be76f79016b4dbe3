// Acceptance run: one PASS/FAIL line per criterion, tolerances fixed below.
// Exit status is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/QR>

#include "mixwass/mixwass.hpp"
#include "test_helpers.hpp"

using namespace mixwass;

namespace {

constexpr std::uint64_t kSeed = 20240601;
constexpr double kInf = std::numeric_limits<double>::infinity();

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

int workers() { return resolve_workers(0); }

// 1 ------------------------------------------------------------------------
Outcome duality_suite() {
  std::mt19937_64 eng(kSeed);
  double worst = 0.0;
  const auto t0 = std::chrono::steady_clock::now();
  for (int t = 0; t < 1000; ++t) {
    const int k = 2 + t % 9;
    const CostMatrix c = fixtures::random_metric_cost(eng, k);
    const Vector a = fixtures::random_simplex(eng, k), b = fixtures::random_simplex(eng, k);
    const double primal = wasserstein_primal(ProbVec(a), ProbVec(b), c).value;
    const double dual = kr_dual_value(a - b, DualPolytope(c)).value;
    worst = std::max(worst, std::abs(primal - dual) / std::max(1.0, primal));
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {worst <= 1e-8 && secs < 30.0,
          "max |primal - dual| / max(1, W) = " + fmt("%.2e", worst) + " (tol 1e-8), " + fmt("%.2f", secs) +
              " s (limit 30 s)"};
}

// 2 ------------------------------------------------------------------------
/// Minimum cost over all basic feasible solutions of a 3 x 3 transportation
/// problem: every 5-cell basis solved directly, infeasible ones discarded.
double vertex_enumeration(const Vector& a, const Vector& b, const Matrix& c) {
  Eigen::Matrix<double, 6, 9> cons = Eigen::Matrix<double, 6, 9>::Zero();
  Eigen::Matrix<double, 6, 1> rhs;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      cons(i, 3 * i + j) = 1.0;
      cons(3 + j, 3 * i + j) = 1.0;
    }
  rhs << a(0), a(1), a(2), b(0), b(1), b(2);
  double best = kInf;
  for (int mask = 0; mask < (1 << 9); ++mask) {
    if (__builtin_popcount(static_cast<unsigned>(mask)) != 5) continue;
    Eigen::Matrix<double, 6, 5> sub;
    int cols[5], n = 0;
    for (int cell = 0; cell < 9; ++cell)
      if (mask & (1 << cell)) {
        cols[n] = cell;
        sub.col(n++) = cons.col(cell);
      }
    const Eigen::ColPivHouseholderQR<Eigen::Matrix<double, 6, 5>> qr(sub);
    if (qr.rank() < 5) continue;
    const Eigen::Matrix<double, 5, 1> x = qr.solve(rhs);
    if ((sub * x - rhs).cwiseAbs().maxCoeff() > 1e-12 || x.minCoeff() < -1e-13) continue;
    double v = 0.0;
    for (int m = 0; m < 5; ++m) v += c(cols[m] / 3, cols[m] % 3) * x(m);
    best = std::min(best, v);
  }
  return best;
}

Outcome brute_force_oracle() {
  std::mt19937_64 eng(kSeed + 2);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const CostMatrix c = fixtures::random_metric_cost(eng, 3);
    const Vector a = fixtures::random_simplex(eng, 3), b = fixtures::random_simplex(eng, 3);
    worst = std::max(worst, std::abs(wasserstein_primal(ProbVec(a), ProbVec(b), c).value -
                                     vertex_enumeration(a, b, c.entries())));
  }
  return {worst <= 1e-9, "max |simplex - vertex enumeration| = " + fmt("%.2e", worst) + " over 100 K=3 (tol 1e-9)"};
}

// 3 ------------------------------------------------------------------------
Outcome classical_identity() {
  std::mt19937_64 eng(kSeed + 3);
  double mle_err = 0.0, debias_move = 0.0;
  for (int t = 0; t < 200; ++t) {
    const int k = 2 + t % 9;
    const TopicMatrix a(fixtures::random_topics(eng, 2 * k, k));
    const Vector alpha = 0.5 * fixtures::random_simplex(eng, k) + Vector::Constant(k, 0.5 / k);
    const ProbVec x(a.mix(alpha));  // the N -> infinity frequencies
    const WeightEstimate m = mle_weights(x, a);
    const WeightEstimate d = debias(m, x, a);
    mle_err = std::max(mle_err, (m.alpha - alpha).cwiseAbs().maxCoeff());
    debias_move = std::max(debias_move, (d.alpha - m.alpha).cwiseAbs().maxCoeff());
  }
  return {mle_err <= 1e-4 && debias_move <= 1e-6,
          "max |alpha_hat - alpha| = " + fmt("%.2e", mle_err) + " (tol 1e-4), max |alpha_tilde - alpha_hat| = " +
              fmt("%.2e", debias_move) + " (tol 1e-6)"};
}

// 4 ------------------------------------------------------------------------
Outcome covariance_null_space() {
  std::mt19937_64 eng(kSeed + 4);
  double ones = 0.0, ident = 0.0;
  for (int t = 0; t < 200; ++t) {
    const int k = 2 + t % 9;
    const TopicMatrix a(fixtures::random_topics(eng, 3 * k, k));  // dense rows: J-hat = [p]
    const Vector alpha = 0.5 * fixtures::random_simplex(eng, k) + Vector::Constant(k, 0.5 / k);
    ones = std::max(ones, (sigma_hat(alpha, a).sigma * Vector::Ones(k)).cwiseAbs().maxCoeff());
    const TopicMatrix id(Matrix::Identity(k, k));
    const Matrix expected = Matrix(alpha.asDiagonal()) - alpha * alpha.transpose();
    ident = std::max(ident, (sigma_hat(alpha, id).sigma - expected).cwiseAbs().maxCoeff());
  }
  return {ones <= 1e-8 && ident <= 1e-8,
          "max ||Sigma 1||_inf = " + fmt("%.2e", ones) + ", identity-A error " + fmt("%.2e", ident) + " (tol 1e-8)"};
}

// 5 ------------------------------------------------------------------------
Outcome normality() {
  sim::SimConfig c;
  c.K = 5;
  c.p = 1000;
  c.tau = 3;
  c.N_i = c.N_j = 500;
  c.n_reps = 500;
  c.seed = kSeed;
  c.workers = workers();
  const auto t0 = std::chrono::steady_clock::now();
  const sim::ExperimentReport r = sim::run_normality_experiment(c);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const std::vector<double>& alpha = r.outer_weights_i.at(0);
  double min_active = 1.0, max_boundary = 0.0;
  int active = 0, boundary = 0;
  for (int k = 0; k < c.K; ++k) {
    if (alpha[static_cast<std::size_t>(k)] > 0.0) {
      ++active;
      min_active = std::min(min_active, r.series("debiased", "coordinate", k)->ks_pvalue);
    } else {
      ++boundary;
      max_boundary = std::max(max_boundary, r.series("mle", "coordinate", k)->ks_pvalue);
    }
  }
  const bool pass = active == 3 && boundary == 2 && min_active > 0.01 && max_boundary < 0.01 && secs < 300.0 &&
                    r.valid;
  return {pass, "debiased active coords min KS p = " + fmt("%.3f", min_active) +
                    " (> 0.01), MLE boundary coords max KS p = " + fmt("%.1e", max_boundary) + " (< 0.01), " +
                    fmt("%.0f", secs) + " s (limit 300 s)"};
}

// 6 ------------------------------------------------------------------------
Outcome null_table() {
  sim::SimConfig c;
  c.N_i = c.N_j = 1000;
  c.M = 1000;
  c.n_reps = 200;
  c.delta = kInf;
  c.seed = kSeed;
  c.workers = workers();
  auto t0 = std::chrono::steady_clock::now();
  const sim::ExperimentReport full = sim::run_ci_experiment(c);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto* s = full.summary("plugin");
  const bool full_ok = full.valid && s->coverage >= 0.90 && s->coverage <= 0.985 &&
                       std::abs(s->mean_length - 0.063) <= 0.2 * 0.063 && secs < 900.0;

  c.n_reps = 100;
  c.M = 500;
  t0 = std::chrono::steady_clock::now();
  const sim::ExperimentReport quick = sim::run_ci_experiment(c);
  const double qsecs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto* q = quick.summary("plugin");
  const bool quick_ok = quick.valid && q->coverage >= 0.88 && q->coverage <= 0.99 && qsecs < 240.0;
  return {full_ok && quick_ok,
          "200 reps: coverage " + fmt("%.3f", s->coverage) + " in [0.90, 0.985], length " +
              fmt("%.4f", s->mean_length) + " in [0.0504, 0.0756], " + fmt("%.0f", secs) +
              " s; quick: coverage " + fmt("%.3f", q->coverage) + " in [0.88, 0.99], " + fmt("%.1f", qsecs) + " s"};
}

// 7 ------------------------------------------------------------------------
Outcome alternative_table() {
  sim::SimConfig c;
  c.N_i = c.N_j = 1000;
  c.scenario = sim::Scenario::Alternative;
  c.n_outer = 10;
  c.n_reps = 200;
  c.M = 1000;
  c.seed = kSeed;
  c.workers = workers();
  const sim::ExperimentReport plug = sim::run_ci_experiment(c);
  const auto* p = plug.summary("plugin");

  c.methods = {sim::Method::MofNBs};
  c.n_reps = 40;
  c.B = 500;
  const sim::ExperimentReport mofn = sim::run_ci_experiment(c);
  const auto* m = mofn.summary("m-of-n-bs");
  const bool pass = plug.valid && mofn.valid && p->coverage >= 0.90 && p->coverage <= 0.985 && m->coverage < 0.85;
  return {pass, "plug-in coverage " + fmt("%.3f", p->coverage) + " in [0.90, 0.985] (2000 reps), m-of-N coverage " +
                    fmt("%.3f", m->coverage) + " < 0.85 (400 reps, B = 500)"};
}

// 8 ------------------------------------------------------------------------
Outcome mle_vs_wls() {
  sim::SimConfig c;
  c.N_i = c.N_j = 500;
  c.n_outer = 10;
  c.n_reps = 100;
  c.limit_draws = 10000;
  c.seed = kSeed;
  c.workers = workers();
  const sim::ExperimentReport r = sim::run_mle_vs_wls_experiment(c);
  const sim::PairedDifference d = sim::paired_length_difference(r, "mle-debiased", "wls");
  const double lm = r.summary("mle-debiased")->mean_length, lw = r.summary("wls")->mean_length;
  const bool pass = r.valid && r.records.size() >= 1000 && lm <= lw && d.mean - 2.0 * d.se >= 0.0;
  return {pass, "lengths MLE " + fmt("%.4f", lm) + " vs WLS " + fmt("%.4f", lw) + ", paired WLS - MLE difference " +
                    fmt("%.5f", d.mean) + " - 2 x " + fmt("%.5f", d.se) + " >= 0 over " +
                    std::to_string(r.records.size()) + " replicates"};
}

// 9 ------------------------------------------------------------------------
Outcome ks_convergence() {
  sim::SimConfig c;
  c.K = 10;
  c.p = 300;
  c.N_i = c.N_j = 1000;
  c.n_outer = 5;
  c.n_reps = 2000;
  c.limit_draws = 2000;
  c.seed = kSeed;
  c.workers = workers();
  const auto t0 = std::chrono::steady_clock::now();
  const sim::ExperimentReport r = sim::run_convergence_experiment(c);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  double worst = 0.0;
  for (const auto& k : r.ks) worst = std::max(worst, k.distance);
  const bool pass = r.valid && r.mean_ks_distance() <= 0.04 && secs < 600.0;
  return {pass, "mean KS distance " + fmt("%.4f", r.mean_ks_distance()) + " (<= 0.04) over " +
                    std::to_string(r.ks.size()) + " weight draws, max " + fmt("%.4f", worst) + ", mean p " +
                    fmt("%.3f", r.mean_ks_pvalue()) + ", " + fmt("%.0f", secs) + " s (limit 600 s)"};
}

// 10 -----------------------------------------------------------------------
Outcome property_suite() {
  props::PropertyOptions o;
  o.workers = std::max(3, workers());
  const auto results = props::run_properties(o);
  int failed = 0;
  std::string names;
  for (const auto& r : results)
    if (!r.passed) {
      ++failed;
      names += "; " + r.module + ": " + r.name + " [" + r.detail + "]";
    }
  return {failed == 0, std::to_string(results.size() - failed) + "/" + std::to_string(results.size()) +
                           " properties pass" + names};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"duality suite", duality_suite},
      {"brute-force vertex oracle", brute_force_oracle},
      {"classical-regime identity", classical_identity},
      {"covariance null space", covariance_null_space},
      {"normality of the debiased estimator", normality},
      {"null coverage and length", null_table},
      {"alternative coverage ordering", alternative_table},
      {"MLE narrower than WLS", mle_vs_wls},
      {"KS convergence to the limit law", ks_convergence},
      {"property suite", property_suite},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("[%s] %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria pass\n", criteria.size() - static_cast<std::size_t>(failed), criteria.size());
  return failed;
}
