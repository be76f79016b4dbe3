#pragma once

// Randomized property suites over every module. Each property returns a
// pass flag and a short measurement; `selftest`, the unit tests and the
// acceptance run all draw from this one list.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mixwass/estimators.hpp"
#include "mixwass/inference.hpp"
#include "mixwass/io.hpp"
#include "mixwass/numlin.hpp"
#include "mixwass/rng.hpp"
#include "mixwass/simulate.hpp"
#include "mixwass/transport.hpp"

namespace mixwass::props {

struct PropertyResult {
  std::string module;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct PropertyOptions {
  std::uint64_t seed = 20240601;
  int workers = 3;           // compared against a single worker in determinism checks
  bool include_slow = true;  // coverage band and length trend (a few seconds each)
  std::string module;        // run one module only when non-empty
  std::string scratch_dir;   // for file round trips; temp dir when empty
};

/// Two-sided band [lo, hi] of Binomial(n, p) holding at least `mass` probability.
inline std::pair<int, int> binomial_band(int n, double p, double mass) {
  std::vector<double> pmf(static_cast<std::size_t>(n) + 1);
  for (int k = 0; k <= n; ++k)
    pmf[static_cast<std::size_t>(k)] = std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) +
                                                k * std::log(p) + (n - k) * std::log1p(-p));
  const double tail = (1.0 - mass) / 2.0;
  int lo = 0, hi = n;
  double acc = 0.0;
  while (lo < n && acc + pmf[static_cast<std::size_t>(lo)] <= tail) acc += pmf[static_cast<std::size_t>(lo++)];
  acc = 0.0;
  while (hi > 0 && acc + pmf[static_cast<std::size_t>(hi)] <= tail) acc += pmf[static_cast<std::size_t>(hi--)];
  return {lo, hi};
}

namespace detail {

using Check = std::function<std::string(rng::Engine&)>;  // empty string = pass, else failure detail

struct Property {
  std::string module;
  std::string name;
  bool slow;
  Check check;
};

inline std::string fmt(double v) {
  std::ostringstream s;
  s.precision(3);
  s << v;
  return s.str();
}

/// Accumulates the worst value of a residual and reports it.
struct Worst {
  double value = 0.0;
  void see(double v) { value = std::max(value, std::isnan(v) ? std::numeric_limits<double>::infinity() : v); }
  std::string check(double tol, const std::string& what) const {
    return value <= tol ? "" : what + " reached " + fmt(value) + " > " + fmt(tol);
  }
};

inline Vector simplex_point(rng::Engine& eng, int k) { return rng::uniform_simplex(eng, k); }

inline Matrix wishart(rng::Engine& eng, int k, int cols) {
  Matrix b(k, cols);
  std::normal_distribution<double> n01;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < cols; ++j) b(i, j) = n01(eng);
  return b * b.transpose();
}

inline CostMatrix planar_cost(rng::Engine& eng, int k, Matrix* points = nullptr) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix pts(k, 2);
  for (int i = 0; i < k; ++i) pts.row(i) << u(eng), u(eng);
  if (points) *points = pts;
  Matrix c(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) c(i, j) = (pts.row(i) - pts.row(j)).norm();
  return CostMatrix(c);
}

inline Matrix topic_columns(rng::Engine& eng, int p, int k) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix a(p, k);
  for (int c = 0; c < k; ++c) {
    for (int j = 0; j < p; ++j) a(j, c) = u(eng);
    a.col(c) /= a.col(c).sum();
  }
  return a;
}

inline double w_primal(const Vector& a, const Vector& b, const CostMatrix& c) {
  return wasserstein_primal(ProbVec::normalized(a), ProbVec::normalized(b), c).value;
}

inline std::vector<Property> all_properties(const PropertyOptions& opt) {
  std::vector<Property> ps;

  // ---------------------------------------------------------------- numlin
  ps.push_back({"numlin", "sym_eig reconstruction, orthonormality and rank", false, [](rng::Engine& eng) {
                  Worst rec, orth;
                  for (int t = 0; t < 200; ++t) {
                    const int k = 2 + t % 9;
                    const Matrix m = wishart(eng, k, 1 + t % k);
                    const auto r = numlin::sym_eig(m);
                    rec.see((m - r.eigenvectors * r.eigenvalues.asDiagonal() * r.eigenvectors.transpose()).norm() /
                            std::max(1.0, m.norm()));
                    orth.see((r.eigenvectors.transpose() * r.eigenvectors - Matrix::Identity(k, k)).norm());
                    int rank = 0;
                    for (int i = 0; i < k; ++i) rank += r.eigenvalues(i) > r.threshold();
                    if (rank != r.rank || r.rank != std::min(k, 1 + t % k)) return std::string("rank mismatch");
                  }
                  return rec.check(1e-9, "reconstruction") + orth.check(1e-10, "orthonormality");
                }});
  ps.push_back({"numlin", "pinv and psd_sqrt_pinv of PSD matrices", false, [](rng::Engine& eng) {
                  Worst psd, sq, pen;
                  for (int t = 0; t < 200; ++t) {
                    const int k = 2 + t % 9;
                    const Matrix m = wishart(eng, k, 1 + t % k);
                    const Matrix mp = numlin::pinv(m);
                    const Matrix s = numlin::psd_sqrt_pinv(m);
                    psd.see(-numlin::sym_eig(mp).eigenvalues.minCoeff() / std::max(1.0, mp.norm()));
                    sq.see((s * s - mp).norm() / std::max(1.0, mp.norm()));
                    pen.see((m * mp * m - m).norm() / std::max(1.0, m.norm()));
                  }
                  return psd.check(1e-10, "negative eigenvalue of pinv") + sq.check(1e-8, "S^2 - M^+") +
                         pen.check(1e-8, "M M^+ M - M");
                }});
  ps.push_back({"numlin", "sym_eig is bitwise deterministic", false, [](rng::Engine& eng) {
                  for (int t = 0; t < 50; ++t) {
                    const Matrix m = wishart(eng, 7, 4);
                    const auto a = numlin::sym_eig(m), b = numlin::sym_eig(m);
                    if (std::memcmp(a.eigenvalues.data(), b.eigenvalues.data(), sizeof(double) * 7) != 0 ||
                        std::memcmp(a.eigenvectors.data(), b.eigenvectors.data(), sizeof(double) * 49) != 0)
                      return std::string("outputs differ");
                  }
                  return std::string();
                }});

  // ------------------------------------------------------------- transport
  ps.push_back({"transport", "strong duality on 1000 instances", false, [](rng::Engine& eng) {
                  Worst gap;
                  for (int t = 0; t < 1000; ++t) {
                    const int k = 2 + t % 9;
                    const CostMatrix c = planar_cost(eng, k);
                    const Vector a = simplex_point(eng, k), b = simplex_point(eng, k);
                    const double primal = w_primal(a, b, c);
                    const double dual = kr_dual_value(a - b, DualPolytope(c)).value;
                    gap.see(std::abs(primal - dual) / std::max(1.0, primal));
                  }
                  return gap.check(1e-8, "relative duality gap");
                }});
  ps.push_back({"transport", "metric axioms of W", false, [](rng::Engine& eng) {
                  Worst sym, self, tri;
                  for (int t = 0; t < 300; ++t) {
                    const int k = 2 + t % 9;
                    const CostMatrix c = planar_cost(eng, k);
                    const Vector a = simplex_point(eng, k), b = simplex_point(eng, k), d = simplex_point(eng, k);
                    const double ab = w_primal(a, b, c), ba = w_primal(b, a, c);
                    sym.see(std::abs(ab - ba));
                    self.see(std::abs(w_primal(a, a, c)));
                    tri.see(ab - w_primal(a, d, c) - w_primal(d, b, c));
                  }
                  return sym.check(1e-10, "asymmetry") + self.check(1e-12, "W(a, a)") + tri.check(1e-8, "triangle excess");
                }});
  ps.push_back({"transport", "joint convexity of W", false, [](rng::Engine& eng) {
                  Worst excess;
                  std::uniform_real_distribution<double> u(0.0, 1.0);
                  for (int t = 0; t < 300; ++t) {
                    const int k = 2 + t % 9;
                    const CostMatrix c = planar_cost(eng, k);
                    const Vector a = simplex_point(eng, k), b = simplex_point(eng, k);
                    const Vector a2 = simplex_point(eng, k), b2 = simplex_point(eng, k);
                    const double lam = u(eng);
                    const double mixed = w_primal(lam * a + (1 - lam) * a2, lam * b + (1 - lam) * b2, c);
                    excess.see(mixed - lam * w_primal(a, b, c) - (1 - lam) * w_primal(a2, b2, c));
                  }
                  return excess.check(1e-8, "convexity excess");
                }});
  ps.push_back({"transport", "Dirac pairs recover the cost", false, [](rng::Engine& eng) {
                  Worst err;
                  for (int t = 0; t < 30; ++t) {
                    const int k = 2 + t % 9;
                    const CostMatrix c = planar_cost(eng, k);
                    const DualPolytope f(c);
                    for (int i = 0; i < k; ++i)
                      for (int j = 0; j < k; ++j) {
                        const Vector ei = ProbVec::unit(k, i).values(), ej = ProbVec::unit(k, j).values();
                        err.see(std::abs(w_primal(ei, ej, c) - c(i, j)));
                        err.see(std::abs(kr_dual_value(ei - ej, f).value - c(i, j)));
                      }
                  }
                  return err.check(1e-9, "|W(e_k, e_l) - c_kl|");
                }});
  ps.push_back({"transport", "W bounded by max cost times TV", false, [](rng::Engine& eng) {
                  Worst excess;
                  for (int t = 0; t < 300; ++t) {
                    const int k = 2 + t % 9;
                    const CostMatrix c = planar_cost(eng, k);
                    const Vector a = simplex_point(eng, k), b = simplex_point(eng, k);
                    excess.see(w_primal(a, b, c) - c.max_entry() * tv_distance(a, b));
                  }
                  return excess.check(1e-8, "bound excess");
                }});
  ps.push_back({"transport", "support function stable under cost perturbation", false, [](rng::Engine& eng) {
                  // Costs from a topic matrix and a perturbed copy; directions a - b scaled to ||u||_1 <= 1.
                  Worst excess;
                  std::uniform_real_distribution<double> u(-1.0, 1.0), scale(0.0, 1.0);
                  for (int t = 0; t < 200; ++t) {
                    const int k = 2 + t % 9;
                    const Matrix a = topic_columns(eng, 3 * k, k);
                    Matrix ah = a;
                    const double eps = 0.5 * scale(eng);
                    for (Eigen::Index i = 0; i < ah.size(); ++i) ah.data()[i] *= 1.0 + eps * u(eng);
                    for (int c = 0; c < k; ++c) ah.col(c) /= ah.col(c).sum();
                    const CostMatrix c = cost_matrix(TopicMatrix(a)), ch = cost_matrix(TopicMatrix(ah));
                    const double dh = (c.entries() - ch.entries()).cwiseAbs().maxCoeff();
                    Vector dir = simplex_point(eng, k) - simplex_point(eng, k);
                    if (dir.lpNorm<1>() > 0) dir *= scale(eng) / dir.lpNorm<1>();
                    excess.see(std::abs(kr_dual_value(dir, DualPolytope(c)).value -
                                        kr_dual_value(dir, DualPolytope(ch)).value) -
                               dh);
                  }
                  return excess.check(1e-8, "excess over max cost perturbation");
                }});

  // ------------------------------------------------------------ estimators
  ps.push_back({"estimators", "MLE objective monotone across EM iterations", false, [](rng::Engine& eng) {
                  Worst drop;
                  for (int t = 0; t < 40; ++t) {
                    const int k = 2 + t % 8;
                    const TopicMatrix a(topic_columns(eng, 10 * k, k));
                    Vector alpha = simplex_point(eng, k);
                    alpha(t % k) = 0.0;
                    if (alpha.sum() == 0.0) alpha(0) = 1.0;
                    const ProbVec x =
                        CountVector(rng::multinomial(eng, 50 + 20 * t, a.mix(alpha / alpha.sum()))).frequencies();
                    for (bool acc : {false, true}) {
                      std::vector<double> trace;
                      MleOptions o;
                      o.accelerate = acc;
                      o.objective_trace = &trace;
                      mle_weights(x, a, o);
                      for (std::size_t i = 1; i < trace.size(); ++i) drop.see(trace[i - 1] - trace[i]);
                    }
                  }
                  return drop.check(1e-12, "objective decrease");
                }});
  ps.push_back({"estimators", "debias fixes an interior MLE with full support", false, [](rng::Engine& eng) {
                  Worst move;
                  int checked = 0;
                  for (int t = 0; t < 60; ++t) {
                    const int k = 2 + t % 6;
                    const TopicMatrix a(topic_columns(eng, 5 * k, k));
                    const Vector alpha = 0.5 * simplex_point(eng, k) + Vector::Constant(k, 0.5 / k);
                    const ProbVec x = CountVector(rng::multinomial(eng, 5000, a.mix(alpha))).frequencies();
                    const WeightEstimate m = mle_weights(x, a);
                    if (m.alpha.minCoeff() <= kActiveTau) continue;
                    const WeightEstimate d = debias(m, x, a);
                    if (static_cast<int>(d.support.size()) != a.p()) continue;
                    ++checked;
                    move.see((d.alpha - m.alpha).cwiseAbs().maxCoeff());
                  }
                  if (checked < 20) return std::string("too few interior instances");
                  return move.check(1e-6, "|alpha_tilde - alpha_hat|");
                }});
  ps.push_back({"estimators", "sigma_hat annihilates the ones vector", false, [](rng::Engine& eng) {
                  Worst res;
                  for (int t = 0; t < 200; ++t) {
                    const int k = 2 + t % 9;
                    const TopicMatrix a(topic_columns(eng, 2 * k, k));
                    const Vector alpha = 0.5 * simplex_point(eng, k) + Vector::Constant(k, 0.5 / k);
                    res.see((sigma_hat(alpha, a).sigma * Vector::Ones(k)).cwiseAbs().maxCoeff());
                  }
                  return res.check(1e-8, "||Sigma 1||_inf");
                }});
  ps.push_back({"estimators", "estimates sum to one and are deterministic", false, [](rng::Engine& eng) {
                  Worst mass;
                  for (int t = 0; t < 60; ++t) {
                    const int k = 2 + t % 8;
                    const TopicMatrix a(topic_columns(eng, 8 * k, k));
                    Vector alpha = simplex_point(eng, k);
                    alpha(0) = 0.0;
                    if (alpha.sum() == 0.0) alpha(1) = 1.0;
                    const ProbVec x =
                        CountVector(rng::multinomial(eng, 100 + 10 * t, a.mix(alpha / alpha.sum()))).frequencies();
                    const WeightEstimate m1 = mle_weights(x, a), m2 = mle_weights(x, a);
                    const WeightEstimate d1 = debias(m1, x, a), d2 = debias(m2, x, a);
                    const WeightEstimate w1 = wls_weights(x, a), w2 = wls_weights(x, a);
                    if (std::memcmp(m1.alpha.data(), m2.alpha.data(), sizeof(double) * k) != 0 ||
                        std::memcmp(d1.alpha.data(), d2.alpha.data(), sizeof(double) * k) != 0 ||
                        std::memcmp(w1.alpha.data(), w2.alpha.data(), sizeof(double) * k) != 0)
                      return std::string("repeated estimates differ");
                    mass.see(std::abs(m1.alpha.sum() - 1.0));
                    mass.see(std::abs(d1.alpha.sum() - 1.0));
                    mass.see(std::abs(w1.alpha.sum() - 1.0));
                  }
                  return mass.check(1e-6, "|sum - 1|");
                }});

  // ------------------------------------------------------------- inference
  const int workers = opt.workers;
  ps.push_back({"inference", "limit sampler invariant to worker count", false, [workers](rng::Engine& eng) {
                  const TopicMatrix a(topic_columns(eng, 40, 5));
                  const CostMatrix c = cost_matrix(a);
                  const DocumentFit fi = fit_document(CountVector(rng::multinomial(eng, 300, a.mix(simplex_point(eng, 5)))), a);
                  const DocumentFit fj = fit_document(CountVector(rng::multinomial(eng, 300, a.mix(simplex_point(eng, 5)))), a);
                  for (double delta : {0.0, 0.05, std::numeric_limits<double>::infinity()}) {
                    LimitSamplerOptions o;
                    o.delta = delta;
                    o.M = 400;
                    o.seed = 99;
                    const SampleSet s1 = limit_sampler(fi.mle, fj.mle, a, c, o);
                    o.workers = workers;
                    const SampleSet s2 = limit_sampler(fi.mle, fj.mle, a, c, o);
                    if (std::memcmp(s1.samples.data(), s2.samples.data(), sizeof(double) * s1.samples.size()) != 0)
                      return std::string("samples differ across worker counts");
                  }
                  BootstrapOptions bo;
                  bo.B = 40;
                  bo.seed = 5;
                  const SampleSet b1 = m_out_of_n_bootstrap(fi, fj, a, c, bo);
                  const SampleSet d1 = derivative_bootstrap(fi, fj, a, c, bo);
                  bo.workers = workers;
                  const SampleSet b2 = m_out_of_n_bootstrap(fi, fj, a, c, bo);
                  const SampleSet d2 = derivative_bootstrap(fi, fj, a, c, bo);
                  if (b1.samples != b2.samples || d1.samples != d2.samples)
                    return std::string("bootstrap draws differ across worker counts");
                  return std::string();
                }});
  ps.push_back({"inference", "samples over F-hat are non-negative", false, [](rng::Engine& eng) {
                  double worst = 0.0;
                  for (int t = 0; t < 10; ++t) {
                    const int k = 2 + t % 6;
                    const TopicMatrix a(topic_columns(eng, 10 * k, k));
                    const CostMatrix c = cost_matrix(a);
                    const Vector alpha = simplex_point(eng, k);
                    const DocumentFit fi = fit_document(CountVector(rng::multinomial(eng, 400, a.mix(alpha))), a);
                    const DocumentFit fj = fit_document(CountVector(rng::multinomial(eng, 400, a.mix(alpha))), a);
                    LimitSamplerOptions o;
                    o.M = 200;
                    o.seed = static_cast<std::uint64_t>(t);
                    o.delta = std::numeric_limits<double>::infinity();
                    for (double v : limit_sampler(fi.mle, fj.mle, a, c, o).samples) worst = std::min(worst, v);
                    o.delta = 0.0;  // facet slab through the null direction still contains f = 0 when W_hat <= delta
                    const SampleSet s = limit_sampler(fi.mle, fj.mle, a, c, o);
                    if (support_floor(plugin_polytope(fi.mle.alpha, fj.mle.alpha, c, 0.0)) == 0.0)
                      for (double v : s.samples) worst = std::min(worst, v);
                  }
                  return worst >= 0.0 ? std::string() : "negative sample " + fmt(worst);
                }});
  ps.push_back({"inference", "infinite delta equals sampling over F-hat", false, [](rng::Engine& eng) {
                  const int k = 5;
                  const TopicMatrix a(topic_columns(eng, 50, k));
                  const CostMatrix c = cost_matrix(a);
                  const DocumentFit fi = fit_document(CountVector(rng::multinomial(eng, 500, a.mix(simplex_point(eng, k)))), a);
                  const DocumentFit fj = fit_document(CountVector(rng::multinomial(eng, 500, a.mix(simplex_point(eng, k)))), a);
                  LimitSamplerOptions o;
                  o.M = 300;
                  o.seed = 17;
                  o.delta = std::numeric_limits<double>::infinity();
                  const SampleSet s = limit_sampler(fi.mle, fj.mle, a, c, o);
                  const Matrix root =
                      numlin::psd_sqrt(sigma_hat(fi.mle, a).sigma + sigma_hat(fj.mle, a).sigma);
                  const std::vector<double> direct = support_draws(DualPolytope(c), root, o.M, o.seed, 1);
                  if (s.samples != direct) return std::string("draws differ from F-hat sampler");
                  // A slab of width twice the maximal cost is inactive as well.
                  o.delta = 2.0 * c.max_entry();
                  Worst diff;
                  const SampleSet wide = limit_sampler(fi.mle, fj.mle, a, c, o);
                  for (int b = 0; b < o.M; ++b) diff.see(std::abs(wide.samples[b] - direct[b]));
                  return diff.check(1e-9, "wide-slab difference");
                }});
  ps.push_back({"inference", "quantiles monotone and intervals nested", false, [](rng::Engine& eng) {
                  std::normal_distribution<double> n01;
                  for (int t = 0; t < 100; ++t) {
                    std::vector<double> x(400 + 37 * t);
                    for (double& v : x) v = std::abs(n01(eng));
                    const SampleSet s(x, 0.0, 0);
                    double prev = -std::numeric_limits<double>::infinity();
                    for (double g = 0.0; g <= 1.0; g += 0.01) {
                      const double q = s.quantile(g);
                      if (q < prev) return std::string("quantile decreased");
                      prev = q;
                    }
                    const ConfidenceInterval wide = confidence_interval(0.3, s, 0.05, 500, 700);
                    const ConfidenceInterval narrow = confidence_interval(0.3, s, 0.5, 500, 700);
                    if (wide.width() < 0.0 || narrow.width() < 0.0) return std::string("negative width");
                    if (narrow.lower < wide.lower - 1e-15 || narrow.upper > wide.upper + 1e-15)
                      return std::string("t=0.5 interval not inside t=0.05 interval");
                  }
                  return std::string();
                }});

  // -------------------------------------------------------------- simulate
  ps.push_back({"simulate", "reports identical across reruns and worker counts", false, [workers](rng::Engine&) {
                  sim::SimConfig c;
                  c.K = 4;
                  c.p = 60;
                  c.N_i = c.N_j = 200;
                  c.n_outer = 2;
                  c.n_reps = 6;
                  c.M = 400;
                  c.B = 400;
                  c.scenario = sim::Scenario::Alternative;
                  c.methods = {sim::Method::Plugin, sim::Method::DerivBs};
                  c.seed = 3;
                  const std::string a = io::to_json(sim::run_ci_experiment(c)).dump();
                  const std::string b = io::to_json(sim::run_ci_experiment(c)).dump();
                  c.workers = workers;
                  const std::string d = io::to_json(sim::run_ci_experiment(c)).dump();
                  if (a != b) return std::string("rerun differs");
                  if (a != d) return std::string("worker count changes the report");
                  return std::string();
                }});
  const std::uint64_t seed = opt.seed;
  ps.push_back({"simulate", "null plug-in coverage inside the binomial 99% band", true, [seed](rng::Engine&) {
                  sim::SimConfig c;
                  c.N_i = c.N_j = 1000;
                  c.n_reps = 200;
                  c.M = 500;
                  c.delta = std::numeric_limits<double>::infinity();
                  c.seed = seed;
                  const sim::ExperimentReport r = sim::run_ci_experiment(c);
                  const auto* s = r.summary("plugin");
                  const auto [lo, hi] = binomial_band(s->n, 0.95, 0.99);
                  const int hits = static_cast<int>(std::lround(s->coverage * s->n));
                  if (!r.valid) return std::string("report invalid");
                  return hits >= lo && hits <= hi ? std::string()
                                                  : "coverage " + fmt(s->coverage) + " outside [" + fmt(double(lo) / s->n) +
                                                        ", " + fmt(double(hi) / s->n) + "]";
                }});
  ps.push_back({"simulate", "plug-in length decreases with N", true, [seed](rng::Engine&) {
                  double prev = std::numeric_limits<double>::infinity();
                  std::string trace;
                  for (int n : {100, 500, 1000, 3000}) {
                    sim::SimConfig c;
                    c.N_i = c.N_j = n;
                    c.n_reps = 20;
                    c.M = 500;
                    c.delta = std::numeric_limits<double>::infinity();
                    c.seed = seed;
                    const double len = sim::run_ci_experiment(c).summary("plugin")->mean_length;
                    trace += (trace.empty() ? "" : " ") + fmt(len);
                    if (!(len < prev)) return "lengths not decreasing: " + trace;
                    prev = len;
                  }
                  return std::string();
                }});

  // ---------------------------------------------------------------- cli_io
  const std::string scratch = opt.scratch_dir;
  ps.push_back({"cli_io", "count files round-trip", false, [scratch](rng::Engine& eng) {
                  const std::filesystem::path dir =
                      scratch.empty() ? std::filesystem::temp_directory_path() : std::filesystem::path(scratch);
                  const std::string path = (dir / ("mixwass_roundtrip_" + std::to_string(eng()) + ".csv")).string();
                  std::vector<CountVector> docs;
                  for (int d = 0; d < 7; ++d) docs.emplace_back(rng::multinomial(eng, 20 + d, simplex_point(eng, 13)));
                  io::save_counts(docs, path);
                  const std::vector<CountVector> back = io::load_counts(path, io::CountsFormat::Auto, 13);
                  std::filesystem::remove(path);
                  if (back.size() != docs.size()) return std::string("document count changed");
                  for (std::size_t d = 0; d < docs.size(); ++d)
                    if (back[d].counts() != docs[d].counts()) return std::string("counts changed");
                  return std::string();
                }});
  ps.push_back({"cli_io", "manifest digests verify and detect tampering", false, [scratch](rng::Engine& eng) {
                  const std::filesystem::path dir =
                      scratch.empty() ? std::filesystem::temp_directory_path() : std::filesystem::path(scratch);
                  const std::string path = (dir / ("mixwass_digest_" + std::to_string(eng()) + ".txt")).string();
                  io::write_text(path, "payload\n");
                  io::RunManifest m;
                  m.set_config(io::json{{"seed", 1}});
                  m.add_output(path);
                  const bool clean = io::verify_manifest(m).empty();
                  io::write_text(path, "tampered\n");
                  const bool caught = !io::verify_manifest(m).empty();
                  std::filesystem::remove(path);
                  if (io::sha256_hex("abc") != "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad")
                    return std::string("sha256 test vector mismatch");
                  if (!clean) return std::string("fresh manifest fails verification");
                  if (!caught) return std::string("modified file not detected");
                  return std::string();
                }});
  return ps;
}

}  // namespace detail

inline std::vector<PropertyResult> run_properties(const PropertyOptions& opt = {}) {
  std::vector<PropertyResult> out;
  std::uint64_t index = 0;
  for (const auto& p : detail::all_properties(opt)) {
    ++index;
    if (!opt.module.empty() && p.module != opt.module) continue;
    if (p.slow && !opt.include_slow) continue;
    PropertyResult r{p.module, p.name, false, "", 0.0};
    const auto t0 = std::chrono::steady_clock::now();
    rng::Engine eng = rng::stream(opt.seed, 0x5e1f, index);
    try {
      r.detail = p.check(eng);
      r.passed = r.detail.empty();
    } catch (const std::exception& e) {
      r.detail = std::string("threw: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<std::string> property_modules() {
  return {"numlin", "transport", "estimators", "inference", "simulate", "cli_io"};
}

}  // namespace mixwass::props
