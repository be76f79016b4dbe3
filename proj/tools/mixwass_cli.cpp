// Command-line driver: estimate, distance, ci, simulate-table, selftest, verify.
// Exit status: 0 success, 1 usage, 2 validation error, 3 numerical failure.

#include <charconv>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mixwass/mixwass.hpp"

namespace fs = std::filesystem;
using namespace mixwass;
using io::json;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

// ---------------------------------------------------------------------------
// Shared option groups

struct Common {
  int threads = 0;  // 0: MIXWASS_THREADS, else hardware concurrency
  std::string out = ".";
  std::optional<std::uint64_t> seed;
};

struct DataOptions {
  std::vector<std::string> counts;
  std::string topics;
  std::string format = "auto";
  std::vector<int> pair;
  std::string metric = "tv";
  std::string cost;
  double tol = 1e-10;
  int max_iter = 10000;
};

struct CiOptions {
  double level = 0.05;
  std::vector<std::string> methods{"plugin"};
  int M = 1000;
  int B = 1000;
  double gamma = 0.5;
  std::string delta = "0";
};

struct TableOptions {
  std::string experiment;
  bool quick = false;
  bool brief = false;
  std::optional<int> K, p, tau, outer, reps, M, B, limit_draws;
  std::vector<std::int64_t> N;
  std::optional<double> gamma, level, a_noise;
  std::optional<std::string> delta;
  std::vector<std::string> methods;
};

struct SelftestOptions {
  std::string module;
  bool fast = false;
  bool list = false;
};

struct VerifyOptions {
  std::string manifest;
  bool rerun = false;
};

double parse_delta(const std::string& s) {
  if (s == "inf" || s == "+inf" || s == "infinity") return std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  require(ec == std::errc() && ptr == s.data() + s.size() && v >= 0.0, ErrorCode::InvalidParam,
          "delta must be a non-negative number or 'inf', got '" + s + "'");
  return v;
}

std::uint64_t resolve_seed(const Common& c) {
  if (c.seed) return *c.seed;
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

io::CountsFormat parse_format(const std::string& s) {
  if (s == "auto") return io::CountsFormat::Auto;
  if (s == "long") return io::CountsFormat::Long;
  if (s == "dense") return io::CountsFormat::Dense;
  fail(ErrorCode::InvalidParam, "unknown counts format '" + s + "'");
}

// ---------------------------------------------------------------------------
// Run context: output directory, manifest, stdout echo

class Run {
 public:
  Run(std::string command, std::vector<std::string> argv, const Common& common)
      : out_(common.out), t0_(std::chrono::system_clock::now()) {
    manifest_.command = std::move(command);
    manifest_.argv = std::move(argv);
    manifest_.started = io::utc_timestamp(t0_);
    workers_ = resolve_workers(common.threads);
  }

  int workers() const { return workers_; }
  void input(const std::string& path) { manifest_.add_input(path); }
  void config(json c, std::uint64_t seed) {
    manifest_.seed = seed;
    manifest_.set_config(std::move(c));
  }

  std::string path(const std::string& name) const { return (fs::path(out_) / name).string(); }

  void write_json(const std::string& name, const json& j) {
    ensure_dir();
    io::save_json(j, path(name));
    manifest_.add_output(path(name));
  }
  void write_samples(const std::string& name, const SampleSet& s) {
    ensure_dir();
    io::save_limit_samples(s, path(name));
    manifest_.add_output(path(name));
  }
  void write_text(const std::string& name, const std::string& text) {
    ensure_dir();
    io::write_text(path(name), text);
    manifest_.add_output(path(name));
  }

  void finish(const std::string& name) {
    const auto t1 = std::chrono::system_clock::now();
    manifest_.finished = io::utc_timestamp(t1);
    manifest_.wall_seconds = std::chrono::duration<double>(t1 - t0_).count();
    ensure_dir();
    io::save_manifest(manifest_, path(name + ".manifest.json"));
  }

 private:
  void ensure_dir() const { fs::create_directories(out_); }

  std::string out_;
  std::chrono::system_clock::time_point t0_;
  io::RunManifest manifest_;
  int workers_ = 1;
};

// ---------------------------------------------------------------------------
// Data loading

struct Loaded {
  TopicMatrix a;
  CostMatrix cost;
  std::vector<CountVector> docs;  // all documents, in file order
  std::vector<std::string> labels;
};

Loaded load_data(const DataOptions& d, Run& run, bool need_cost) {
  require(!d.counts.empty(), ErrorCode::InvalidParam, "--counts is required");
  require(!d.topics.empty(), ErrorCode::InvalidParam, "--topics is required");
  TopicMatrix a = io::load_topics(d.topics);
  run.input(d.topics);
  std::vector<CountVector> docs;
  std::vector<std::string> labels;
  for (const auto& path : d.counts) {
    const auto loaded = io::load_counts(path, parse_format(d.format), a.p());
    run.input(path);
    for (std::size_t i = 0; i < loaded.size(); ++i) {
      require(loaded[i].p() == a.p(), ErrorCode::DimError,
              "'" + path + "' has " + std::to_string(loaded[i].p()) + " words per document but topics have p = " +
                  std::to_string(a.p()));
      docs.push_back(loaded[i]);
      labels.push_back(path + "#" + std::to_string(i));
    }
  }
  CostMatrix cost(Matrix::Zero(a.K(), a.K()));
  if (need_cost) {
    const Metric metric = parse_metric(d.metric);
    if (metric == Metric::Table) {
      require(!d.cost.empty(), ErrorCode::InvalidParam, "--metric table requires --cost");
      cost = io::load_cost_table(d.cost);
      run.input(d.cost);
      require(cost.K() == a.K(), ErrorCode::DimError, "cost table is not K x K");
    } else {
      cost = cost_matrix(a, metric);
    }
  }
  return {std::move(a), std::move(cost), std::move(docs), std::move(labels)};
}

/// Indices of the two documents compared: the first document of each file for
/// two files, documents 0 and 1 of a single file, or --pair.
std::pair<std::size_t, std::size_t> select_pair(const DataOptions& d, const Loaded& data) {
  std::size_t i = 0, j = 1;
  if (d.counts.size() >= 2) {
    const auto first = io::load_counts(d.counts[0], parse_format(d.format), data.a.p()).size();
    j = first;
  }
  if (!d.pair.empty()) {
    require(d.pair.size() == 2, ErrorCode::InvalidParam, "--pair takes two document indices");
    require(d.pair[0] >= 0 && d.pair[1] >= 0, ErrorCode::InvalidParam, "document indices must be >= 0");
    i = static_cast<std::size_t>(d.pair[0]);
    j = static_cast<std::size_t>(d.pair[1]);
  }
  require(i < data.docs.size() && j < data.docs.size(), ErrorCode::InvalidParam,
          "need two documents; found " + std::to_string(data.docs.size()));
  return {i, j};
}

MleOptions mle_options(const DataOptions& d) {
  MleOptions o;
  o.tol = d.tol;
  o.max_iter = d.max_iter;
  return o;
}

json data_config(const DataOptions& d) {
  return json{{"counts", d.counts}, {"topics", d.topics}, {"format", d.format}, {"pair", d.pair},
              {"metric", d.metric}, {"cost", d.cost},     {"tol", d.tol},       {"max_iter", d.max_iter}};
}

// ---------------------------------------------------------------------------
// Commands

int cmd_estimate(const DataOptions& d, const Common& c, const std::vector<std::string>& argv) {
  Run run("estimate", argv, c);
  const Loaded data = load_data(d, run, false);
  run.config(json{{"data", data_config(d)}}, 0);
  json docs = json::array();
  for (std::size_t i = 0; i < data.docs.size(); ++i) {
    const DocumentFit fit = fit_document(data.docs[i], data.a, mle_options(d));
    json one{{"document", data.labels[i]},
             {"N", data.docs[i].N()},
             {"mle", io::to_json(fit.mle)},
             {"kkt_violation", mle_kkt_violation(fit.mle.alpha, fit.x, data.a)},
             {"debiased", io::to_json(fit.debiased)}};
    try {
      one["wls"] = io::to_json(wls_weights(fit.x, data.a));
    } catch (const Error& e) {
      one["wls_error"] = e.what();
    }
    try {
      one["sigma_hat"] = io::to_json(sigma_hat(fit.mle, data.a).sigma);
    } catch (const Error& e) {
      one["sigma_hat_error"] = e.what();
    }
    docs.push_back(one);
  }
  const json report{{"command", "estimate"}, {"version", io::kVersion}, {"K", data.a.K()},
                    {"p", data.a.p()},       {"documents", docs}};
  run.write_json("estimate.json", report);
  run.finish("estimate");
  std::cout << report.dump(2) << "\n";
  return 0;
}

int cmd_distance(const DataOptions& d, const Common& c, const std::vector<std::string>& argv) {
  Run run("distance", argv, c);
  const Loaded data = load_data(d, run, true);
  run.config(json{{"data", data_config(d)}}, 0);
  const auto [i, j] = select_pair(d, data);
  const DocumentFit fi = fit_document(data.docs[i], data.a, mle_options(d));
  const DocumentFit fj = fit_document(data.docs[j], data.a, mle_options(d));
  const DualPolytope f_hat(data.cost);
  const double w_tilde = distance_estimate(fi.debiased.alpha, fj.debiased.alpha, f_hat);
  const TransportPlan primal = wasserstein_primal(ProbVec::normalized(fi.mle.alpha.cwiseMax(0.0)),
                                                  ProbVec::normalized(fj.mle.alpha.cwiseMax(0.0)), data.cost);
  const double dual = kr_dual_value(fi.mle.alpha - fj.mle.alpha, f_hat).value;
  const json report{{"command", "distance"},
                    {"version", io::kVersion},
                    {"documents", {data.labels[i], data.labels[j]}},
                    {"N", {data.docs[i].N(), data.docs[j].N()}},
                    {"w_tilde", w_tilde},
                    {"w_mle_primal", primal.value},
                    {"w_mle_dual", dual},
                    {"duality_gap", std::abs(primal.value - dual)},
                    {"plan", io::to_json(primal.plan)},
                    {"mle", {io::to_json(fi.mle.alpha), io::to_json(fj.mle.alpha)}},
                    {"debiased", {io::to_json(fi.debiased.alpha), io::to_json(fj.debiased.alpha)}},
                    {"cost", io::to_json(data.cost.entries())}};
  run.write_json("distance.json", report);
  run.finish("distance");
  std::cout << report.dump(2) << "\n";
  return 0;
}

int cmd_ci(const DataOptions& d, const CiOptions& o, const Common& c, const std::vector<std::string>& argv) {
  Run run("ci", argv, c);
  const Loaded data = load_data(d, run, true);
  const std::uint64_t seed = resolve_seed(c);
  const double delta = parse_delta(o.delta);
  std::vector<sim::Method> methods;
  for (const auto& m : o.methods) methods.push_back(sim::parse_method(m));
  require(!methods.empty(), ErrorCode::InvalidParam, "--method needs at least one method");
  run.config(json{{"data", data_config(d)},
                  {"level", o.level},
                  {"methods", o.methods},
                  {"M", o.M},
                  {"B", o.B},
                  {"gamma", o.gamma},
                  {"delta", io::number(delta)},
                  {"seed", seed}},
             seed);

  const auto [i, j] = select_pair(d, data);
  const DocumentFit fi = fit_document(data.docs[i], data.a, mle_options(d));
  const DocumentFit fj = fit_document(data.docs[j], data.a, mle_options(d));
  const double w_tilde = distance_estimate(fi.debiased.alpha, fj.debiased.alpha, DualPolytope(data.cost));
  const std::int64_t n_i = data.docs[i].N(), n_j = data.docs[j].N();

  json results = json::array();
  for (std::size_t m = 0; m < methods.size(); ++m) {
    const std::uint64_t sub = rng::derive(seed, sim::kTagBoot, m);
    SampleSet s;
    if (methods[m] == sim::Method::Plugin) {
      LimitSamplerOptions lo;
      lo.delta = delta;
      lo.M = o.M;
      lo.seed = sub;
      lo.workers = run.workers();
      std::tie(lo.weight_i, lo.weight_j) = pair_cov_weights(n_i, n_j);
      s = limit_sampler(fi.mle, fj.mle, data.a, data.cost, lo);
    } else {
      BootstrapOptions bo;
      bo.B = o.B;
      bo.gamma = o.gamma;
      bo.delta = delta;
      bo.seed = sub;
      bo.workers = run.workers();
      bo.mle = mle_options(d);
      s = methods[m] == sim::Method::DerivBs ? derivative_bootstrap(fi, fj, data.a, data.cost, bo)
                                             : m_out_of_n_bootstrap(fi, fj, data.a, data.cost, bo);
    }
    const ConfidenceInterval ci = confidence_interval(w_tilde, s, o.level, n_i, n_j);
    const std::string name = std::string("ci_samples_") + sim::to_string(methods[m]) + ".csv";
    run.write_samples(name, s);
    results.push_back(json{{"method", sim::to_string(methods[m])},
                           {"ci", io::to_json(ci)},
                           {"draws", s.M()},
                           {"redraws", s.redraws},
                           {"samples", name}});
  }
  const json report{{"command", "ci"},
                    {"version", io::kVersion},
                    {"seed", seed},
                    {"rng", rng::kEngineName},
                    {"documents", {data.labels[i], data.labels[j]}},
                    {"N", {n_i, n_j}},
                    {"point", w_tilde},
                    {"level", o.level},
                    {"delta", io::number(delta)},
                    {"intervals", results}};
  run.write_json("ci.json", report);
  run.finish("ci");
  std::cout << report.dump(2) << "\n";
  return 0;
}

/// Paper-scale protocol per experiment, shrunk under --quick.
sim::SimConfig table_preset(const std::string& exp, bool quick, std::vector<std::int64_t>& ns) {
  sim::SimConfig c;
  constexpr double inf = std::numeric_limits<double>::infinity();
  const std::vector<sim::Method> all{sim::Method::Plugin, sim::Method::DerivBs, sim::Method::MofNBs};
  if (exp == "null-ci") {
    ns = quick ? std::vector<std::int64_t>{1000} : std::vector<std::int64_t>{100, 500, 1000, 3000};
    c.delta = inf;
    c.n_reps = quick ? 100 : 200;
    c.M = c.B = quick ? 500 : 1000;
    c.methods = quick ? std::vector<sim::Method>{sim::Method::Plugin} : all;
  } else if (exp == "alt-ci") {
    ns = quick ? std::vector<std::int64_t>{1000} : std::vector<std::int64_t>{100, 500, 1000, 3000};
    c.scenario = sim::Scenario::Alternative;
    c.n_outer = 10;
    c.n_reps = quick ? 20 : 200;
    c.M = c.B = quick ? 500 : 1000;
    c.methods = quick ? std::vector<sim::Method>{sim::Method::Plugin, sim::Method::MofNBs} : all;
  } else if (exp == "mle-vs-wls") {
    ns = {500};
    c.n_outer = 10;
    c.n_reps = quick ? 50 : 200;
    c.limit_draws = quick ? 2000 : 10000;
  } else if (exp == "ks-convergence") {
    ns = {1000};
    c.K = 10;
    c.p = 300;
    c.n_outer = quick ? 1 : 5;
    c.n_reps = c.limit_draws = quick ? 2000 : 10000;
  } else if (exp == "normality") {
    ns = quick ? std::vector<std::int64_t>{500} : std::vector<std::int64_t>{100, 500, 3000};
    c.p = 1000;
    c.tau = 3;
    c.n_reps = quick ? 200 : 500;
  } else {
    fail(ErrorCode::InvalidParam, "unknown experiment '" + exp + "'");
  }
  return c;
}

sim::ExperimentReport run_experiment(const std::string& exp, const sim::SimConfig& c) {
  if (exp == "null-ci" || exp == "alt-ci") return sim::run_ci_experiment(c);
  if (exp == "mle-vs-wls") return sim::run_mle_vs_wls_experiment(c);
  if (exp == "ks-convergence") return sim::run_convergence_experiment(c);
  return sim::run_normality_experiment(c);
}

void print_table(const std::string& exp, const sim::ExperimentReport& r) {
  std::cout << exp << "  N=" << r.config.N_i << "  reps=" << r.records.size() << "  failures=" << r.failures
            << (r.valid ? "" : "  (INVALID: >1% failed)") << "\n";
  for (const auto& s : r.summaries)
    std::cout << "  " << std::left << std::setw(14) << s.method << " coverage " << std::fixed << std::setprecision(3)
              << s.coverage << "  length " << std::setprecision(4) << s.mean_length << " (se " << s.se_length
              << ")\n";
  if (!r.ks.empty())
    std::cout << "  mean KS distance " << std::setprecision(4) << r.mean_ks_distance() << "  mean p-value "
              << r.mean_ks_pvalue() << "\n";
  for (const auto& s : r.normality)
    if (s.kind == "coordinate")
      std::cout << "  " << std::left << std::setw(9) << s.estimator << " coord " << s.index << " (alpha "
                << std::setprecision(3) << s.truth << ")  KS p-value " << std::setprecision(4) << s.ks_pvalue
                << "\n";
  std::cout.unsetf(std::ios::floatfield);
}

int cmd_table(const TableOptions& t, const Common& c, const std::vector<std::string>& argv) {
  Run run("simulate-table", argv, c);
  std::vector<std::int64_t> ns;
  sim::SimConfig cfg = table_preset(t.experiment, t.quick, ns);
  if (t.K) cfg.K = *t.K;
  if (t.p) cfg.p = *t.p;
  if (t.tau) cfg.tau = *t.tau;
  if (t.outer) cfg.n_outer = *t.outer;
  if (t.reps) cfg.n_reps = *t.reps;
  if (t.M) cfg.M = *t.M;
  if (t.B) cfg.B = *t.B;
  if (t.limit_draws) cfg.limit_draws = *t.limit_draws;
  if (t.gamma) cfg.gamma = *t.gamma;
  if (t.level) cfg.level = *t.level;
  if (t.a_noise) cfg.a_noise = *t.a_noise;
  if (t.delta) cfg.delta = parse_delta(*t.delta);
  if (!t.methods.empty()) {
    cfg.methods.clear();
    for (const auto& m : t.methods) cfg.methods.push_back(sim::parse_method(m));
  }
  if (!t.N.empty()) ns = t.N;
  cfg.seed = resolve_seed(c);
  cfg.workers = run.workers();

  json configs = json::array();
  for (auto n : ns) {
    sim::SimConfig one = cfg;
    one.N_i = one.N_j = n;
    one.validate();
    configs.push_back(io::to_json(one));
  }
  run.config(json{{"experiment", t.experiment}, {"quick", t.quick}, {"brief", t.brief}, {"runs", configs}}, cfg.seed);

  json tables = json::array();
  std::ostringstream draws;
  for (auto n : ns) {
    sim::SimConfig one = cfg;
    one.N_i = one.N_j = n;
    const sim::ExperimentReport r = run_experiment(t.experiment, one);
    print_table(t.experiment, r);
    json j = io::to_json(r, t.brief);
    if (t.experiment == "mle-vs-wls") {
      const sim::PairedDifference d = sim::paired_length_difference(r, "mle-debiased", "wls");
      j["paired_length_difference"] = json{{"wls_minus_mle", d.mean}, {"se", d.se}, {"outer_draws", d.n}};
    }
    tables.push_back(j);
    for (const auto& s : r.normality)
      for (double v : s.values)
        draws << n << ',' << s.estimator << ',' << s.kind << ',' << s.index << ',' << std::setprecision(17) << v
              << '\n';
  }
  const json report{{"command", "simulate-table"},
                    {"experiment", t.experiment},
                    {"version", io::kVersion},
                    {"seed", cfg.seed},
                    {"quick", t.quick},
                    {"tables", tables}};
  run.write_json(t.experiment + ".json", report);
  if (t.experiment == "normality") run.write_text("normality_draws.csv", "N,estimator,kind,index,value\n" + draws.str());
  run.finish(t.experiment);
  return 0;
}

int cmd_selftest(const SelftestOptions& s, const Common& c, bool write, const std::vector<std::string>& argv) {
  props::PropertyOptions o;
  if (c.seed) o.seed = *c.seed;
  o.module = s.module;
  o.include_slow = !s.fast;
  o.workers = std::max(2, resolve_workers(c.threads));
  if (!s.module.empty()) {
    const auto mods = props::property_modules();
    require(std::find(mods.begin(), mods.end(), s.module) != mods.end(), ErrorCode::InvalidParam,
            "unknown module '" + s.module + "'");
  }
  const auto results = props::run_properties(o);
  int failed = 0;
  json list = json::array();
  for (const auto& r : results) {
    failed += !r.passed;
    std::cout << (r.passed ? "PASS " : "FAIL ") << std::left << std::setw(11) << r.module << r.name;
    if (!r.passed) std::cout << "  [" << r.detail << "]";
    std::cout << "  (" << std::fixed << std::setprecision(2) << r.seconds << " s)\n";
    std::cout.unsetf(std::ios::floatfield);
    list.push_back(json{{"module", r.module}, {"name", r.name}, {"passed", r.passed}, {"detail", r.detail}});
  }
  std::cout << results.size() - failed << "/" << results.size() << " properties passed\n";
  if (write) {
    Run run("selftest", argv, c);
    run.config(json{{"module", s.module}, {"fast", s.fast}, {"seed", o.seed}}, o.seed);
    run.write_json("selftest.json", json{{"seed", o.seed}, {"results", list}, {"failed", failed}});
    run.finish("selftest");
  }
  return failed == 0 ? 0 : kExitNumerical;
}

int run_cli(std::vector<std::string> args);

int cmd_verify(const VerifyOptions& v) {
  const io::RunManifest m = io::load_manifest(v.manifest);
  auto bad = io::verify_manifest(m);
  for (const auto& b : bad) std::cout << "digest mismatch: " << b << "\n";
  if (bad.empty()) std::cout << "digests match (" << m.inputs.size() << " inputs, " << m.outputs.size() << " outputs)\n";
  if (v.rerun && bad.empty()) {
    const fs::path scratch = fs::temp_directory_path() / ("mixwass_rerun_" + m.config_hash.substr(0, 16));
    fs::remove_all(scratch);
    std::vector<std::string> args = m.argv;
    for (std::size_t i = 0; i < args.size(); ++i)
      if (args[i] == "--out" || args[i].rfind("--out=", 0) == 0) {
        const bool joined = args[i] != "--out";
        args.erase(args.begin() + static_cast<long>(i), args.begin() + static_cast<long>(i + (joined ? 1 : 2)));
        break;
      }
    args.push_back("--out");
    args.push_back(scratch.string());
    bool has_seed = false;
    for (const auto& a : args) has_seed |= a == "--seed" || a.rfind("--seed=", 0) == 0;
    if (!has_seed) {
      args.push_back("--seed");
      args.push_back(std::to_string(m.seed));
    }
    std::cout << "rerunning in " << scratch.string() << "\n";
    std::streambuf* saved = std::cout.rdbuf();
    std::ostringstream sink;
    std::cout.rdbuf(sink.rdbuf());
    int code = 0;
    try {
      code = run_cli(args);
    } catch (...) {
      std::cout.rdbuf(saved);
      throw;
    }
    std::cout.rdbuf(saved);
    if (code != 0) return code;
    for (const auto& f : m.outputs) {
      const fs::path again = scratch / fs::path(f.path).filename();
      if (!fs::exists(again) || io::file_sha256(again.string()) != f.sha256) {
        bad.push_back(f.path);
        std::cout << "rerun differs: " << f.path << "\n";
      } else {
        std::cout << "rerun identical: " << f.path << "\n";
      }
    }
    fs::remove_all(scratch);
  }
  return bad.empty() ? 0 : kExitValidation;
}

// ---------------------------------------------------------------------------
// Parser

void add_data_options(CLI::App* sub, DataOptions& d, bool pair) {
  sub->add_option("--counts", d.counts, "count CSV file(s), comma separated (long or dense form)")
      ->delimiter(',')
      ->required();
  sub->add_option("--topics", d.topics, "p x K topic matrix CSV")->required();
  sub->add_option("--format", d.format, "counts format")->check(CLI::IsMember({"auto", "long", "dense"}));
  if (pair) {
    sub->add_option("--pair", d.pair, "indices of the two documents (across files, in order)")->delimiter(',');
    sub->add_option("--metric", d.metric, "cost between topics")->check(CLI::IsMember({"tv", "l2", "table"}));
    sub->add_option("--cost", d.cost, "K x K cost table for --metric table");
  }
  sub->add_option("--tol", d.tol, "EM relative tolerance");
  sub->add_option("--max-iter", d.max_iter, "EM iteration limit");
}

int run_cli(std::vector<std::string> args) {
  CLI::App app{"Wasserstein distance between topic-model mixing measures, with inference"};
  app.name("mixwass");
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("mixwass ") + io::kVersion + " (build " + io::kBuildHash + ")");
  app.set_config("--config", "", "TOML or INI config file; command-line flags override it");

  Common common;
  std::uint64_t seed = 0;
  auto add_common = [&](CLI::App* sub, bool with_seed) {
    sub->add_option("--threads", common.threads, "worker threads (0: MIXWASS_THREADS or all cores)")
        ->envname("MIXWASS_THREADS")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--out", common.out, "output directory");
    if (with_seed) sub->add_option("--seed", seed, "RNG seed (generated and recorded when absent)");
  };

  DataOptions data;
  CiOptions ci;
  TableOptions table;
  SelftestOptions self;
  VerifyOptions verify;

  auto* est = app.add_subcommand("estimate", "simplex MLE, debiased and WLS weights for every document");
  add_data_options(est, data, false);
  add_common(est, false);

  auto* dist = app.add_subcommand("distance", "distance estimate between two documents");
  add_data_options(dist, data, true);
  add_common(dist, false);

  auto* cic = app.add_subcommand("ci", "confidence interval for the distance between two documents");
  add_data_options(cic, data, true);
  add_common(cic, true);
  cic->add_option("--level", ci.level, "1 - confidence")->check(CLI::Range(0.0, 1.0));
  cic->add_option("--method", ci.methods, "plugin, deriv-bs, m-of-n-bs (comma separated)")->delimiter(',');
  cic->add_option("--M", ci.M, "limit-law draws")->check(CLI::PositiveNumber);
  cic->add_option("--B", ci.B, "bootstrap resamples")->check(CLI::PositiveNumber);
  cic->add_option("--gamma", ci.gamma, "m-of-N exponent");
  cic->add_option("--delta", ci.delta, "facet slab width, or inf");

  auto* tab = app.add_subcommand("simulate-table", "regenerate a simulation table");
  tab->add_option("experiment", table.experiment, "experiment")
      ->required()
      ->check(CLI::IsMember({"null-ci", "alt-ci", "mle-vs-wls", "ks-convergence", "normality"}));
  add_common(tab, true);
  tab->add_flag("--quick", table.quick, "desk-scale replicate counts");
  tab->add_flag("--brief", table.brief, "omit per-replicate records from the report");
  tab->add_option("--K", table.K, "number of topics");
  tab->add_option("--p", table.p, "vocabulary size");
  tab->add_option("--N", table.N, "document lengths (comma separated)")->delimiter(',');
  tab->add_option("--tau", table.tau, "weight support size (0: dense)");
  tab->add_option("--outer", table.outer, "outer weight draws");
  tab->add_option("--reps", table.reps, "replicates per outer draw");
  tab->add_option("--M", table.M, "limit-law draws");
  tab->add_option("--B", table.B, "bootstrap resamples");
  tab->add_option("--limit-draws", table.limit_draws, "draws of a known limit law");
  tab->add_option("--gamma", table.gamma, "m-of-N exponent");
  tab->add_option("--level", table.level, "1 - confidence");
  tab->add_option("--delta", table.delta, "facet slab width, or inf");
  tab->add_option("--a-noise", table.a_noise, "relative perturbation of the estimators' topic matrix");
  tab->add_option("--methods", table.methods, "plugin, deriv-bs, m-of-n-bs")->delimiter(',');

  auto* st = app.add_subcommand("selftest", "run the property suites");
  st->add_option("--module", self.module, "restrict to one module");
  st->add_flag("--fast", self.fast, "skip the slower simulation properties");
  std::string st_out;
  st->add_option("--out", st_out, "write selftest.json and a manifest here");
  st->add_option("--seed", seed, "property seed");
  st->add_option("--threads", common.threads, "worker count compared against one")->envname("MIXWASS_THREADS");

  auto* ver = app.add_subcommand("verify", "check a manifest's digests, optionally rerunning the command");
  ver->add_option("manifest", verify.manifest, "manifest JSON")->required();
  ver->add_flag("--rerun", verify.rerun, "regenerate the outputs and compare bytes");

  std::vector<std::string> reversed(args.rbegin(), args.rend() - 1);
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: " << e.what() << "\n\n";
    const CLI::App* scope = &app;
    for (const auto* sub : app.get_subcommands())
      if (sub->parsed()) scope = sub;
    std::cerr << scope->help();
    return kExitUsage;
  }
  for (auto* sub : {cic, tab, st})
    if (sub->parsed() && sub->count("--seed")) common.seed = seed;

  if (est->parsed()) return cmd_estimate(data, common, args);
  if (dist->parsed()) return cmd_distance(data, common, args);
  if (cic->parsed()) return cmd_ci(data, ci, common, args);
  if (tab->parsed()) return cmd_table(table, common, args);
  if (st->parsed()) {
    if (!st_out.empty()) common.out = st_out;
    return cmd_selftest(self, common, !st_out.empty(), args);
  }
  return cmd_verify(verify);
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  try {
    return run_cli(args);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.is_validation() ? kExitValidation : kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
}
