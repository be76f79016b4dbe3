#pragma once

// Files in and out: count matrices and topic matrices as CSV, reports as
// JSON, sample dumps as CSV, and run manifests with SHA-256 digests.

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>
#include "mixwass/error.hpp"
#include "mixwass/estimators.hpp"
#include "mixwass/inference.hpp"
#include "mixwass/simulate.hpp"
#include "mixwass/transport.hpp"

#ifndef MIXWASS_VERSION
#define MIXWASS_VERSION "0.0.0"
#endif
#ifndef MIXWASS_BUILD_HASH
#define MIXWASS_BUILD_HASH "unknown"
#endif

namespace mixwass::io {

using json = nlohmann::ordered_json;

inline constexpr const char* kVersion = MIXWASS_VERSION;
inline constexpr const char* kBuildHash = MIXWASS_BUILD_HASH;
inline constexpr std::string_view kLongHeader = "doc_id,word_id,count";

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

[[noreturn]] inline void parse_fail(const std::string& path, std::size_t line, const std::string& msg) {
  fail(ErrorCode::ParseError, path + ":" + std::to_string(line) + ": " + msg);
}

inline std::int64_t parse_int(std::string_view s, const std::string& path, std::size_t line) {
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    parse_fail(path, line, "expected an integer, got '" + std::string(s) + "'");
  return v;
}

inline double parse_double(std::string_view s, const std::string& path, std::size_t line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty() || !std::isfinite(v))
    parse_fail(path, line, "expected a finite number, got '" + std::string(s) + "'");
  return v;
}

struct Line {
  std::size_t number;
  std::string text;
};

/// Non-blank lines with 1-based line numbers.
inline std::vector<Line> read_lines(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::ParseError, "cannot open '" + path + "'");
  std::vector<Line> out;
  std::string text;
  std::size_t n = 0;
  while (std::getline(in, text)) {
    ++n;
    if (!trim(text).empty()) out.push_back({n, text});
  }
  return out;
}

inline bool looks_numeric(std::string_view s) {
  double v;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  return ec == std::errc() && ptr == s.data() + s.size() && !s.empty();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Counts

enum class CountsFormat { Auto, Long, Dense };

/// Long form: `doc_id,word_id,count` rows (header optional when p is given
/// and differs from 3). Dense form: one document per row, p columns.
/// Documents come back ordered by doc_id.
inline std::vector<CountVector> load_counts(const std::string& path, CountsFormat format = CountsFormat::Auto,
                                            int p = 0) {
  const std::vector<detail::Line> lines = detail::read_lines(path);
  if (lines.empty()) return {};
  std::size_t first = 0;
  const bool header = detail::trim(lines[0].text) == kLongHeader;
  if (format == CountsFormat::Auto) {
    if (header) format = CountsFormat::Long;
    else if (p > 0 && p != 3 && detail::split(lines[0].text).size() == 3) format = CountsFormat::Long;
    else format = CountsFormat::Dense;
  }
  if (header) first = 1;

  if (format == CountsFormat::Long) {
    std::map<std::int64_t, std::map<std::int64_t, std::pair<std::int64_t, std::size_t>>> docs;
    std::int64_t max_word = -1;
    for (std::size_t i = first; i < lines.size(); ++i) {
      const auto f = detail::split(lines[i].text);
      if (f.size() != 3) detail::parse_fail(path, lines[i].number, "expected 3 fields doc_id,word_id,count");
      const std::int64_t doc = detail::parse_int(f[0], path, lines[i].number);
      const std::int64_t word = detail::parse_int(f[1], path, lines[i].number);
      const std::int64_t count = detail::parse_int(f[2], path, lines[i].number);
      if (doc < 0 || word < 0) detail::parse_fail(path, lines[i].number, "negative id");
      if (count < 0) detail::parse_fail(path, lines[i].number, "negative count");
      if (p > 0 && word >= p)
        detail::parse_fail(path, lines[i].number, "word_id " + std::to_string(word) + " outside [0, " + std::to_string(p) + ")");
      auto& cell = docs[doc][word];
      cell.first += count;
      cell.second = lines[i].number;
      max_word = std::max(max_word, word);
    }
    const int dim = p > 0 ? p : static_cast<int>(max_word + 1);
    std::vector<CountVector> out;
    for (const auto& [doc, words] : docs) {
      std::vector<std::int64_t> counts(static_cast<std::size_t>(dim), 0);
      std::size_t last_line = 0;
      for (const auto& [word, cell] : words) {
        counts[static_cast<std::size_t>(word)] = cell.first;
        last_line = std::max(last_line, cell.second);
      }
      std::int64_t total = 0;
      for (auto c : counts) total += c;
      if (total == 0) detail::parse_fail(path, last_line, "document " + std::to_string(doc) + " has no words");
      out.emplace_back(std::move(counts));
    }
    return out;
  }

  std::vector<CountVector> out;
  std::size_t width = 0;
  for (std::size_t i = first; i < lines.size(); ++i) {
    const auto f = detail::split(lines[i].text);
    if (i == first) {
      width = f.size();
      if (p > 0 && static_cast<int>(width) != p)
        detail::parse_fail(path, lines[i].number, "expected " + std::to_string(p) + " columns");
    }
    if (f.size() != width) detail::parse_fail(path, lines[i].number, "ragged row");
    std::vector<std::int64_t> counts;
    counts.reserve(width);
    std::int64_t total = 0;
    for (auto field : f) {
      const std::int64_t c = detail::parse_int(field, path, lines[i].number);
      if (c < 0) detail::parse_fail(path, lines[i].number, "negative count");
      counts.push_back(c);
      total += c;
    }
    if (total == 0) detail::parse_fail(path, lines[i].number, "document has no words");
    out.emplace_back(std::move(counts));
  }
  return out;
}

/// Long form with header; zero counts are omitted.
inline void save_counts(const std::vector<CountVector>& docs, const std::string& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCode::ParseError, "cannot write '" + path + "'");
  out << kLongHeader << '\n';
  for (std::size_t d = 0; d < docs.size(); ++d)
    for (int j = 0; j < docs[d].p(); ++j)
      if (docs[d][j] > 0) out << d << ',' << j << ',' << docs[d][j] << '\n';
}

// ---------------------------------------------------------------------------
// Matrices

/// Numeric CSV; a leading non-numeric row is treated as a header.
inline Matrix load_matrix(const std::string& path) {
  const std::vector<detail::Line> lines = detail::read_lines(path);
  require(!lines.empty(), ErrorCode::ParseError, "'" + path + "' is empty");
  std::size_t first = 0;
  if (!detail::looks_numeric(detail::split(lines[0].text)[0])) first = 1;
  require(first < lines.size(), ErrorCode::ParseError, "'" + path + "' has no data rows");
  const std::size_t cols = detail::split(lines[first].text).size();
  Matrix m(static_cast<Eigen::Index>(lines.size() - first), static_cast<Eigen::Index>(cols));
  for (std::size_t i = first; i < lines.size(); ++i) {
    const auto f = detail::split(lines[i].text);
    if (f.size() != cols) detail::parse_fail(path, lines[i].number, "ragged row");
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<Eigen::Index>(i - first), static_cast<Eigen::Index>(c)) =
          detail::parse_double(f[c], path, lines[i].number);
  }
  return m;
}

inline constexpr double kTopicRenormTol = 1e-6;

/// p x K topic matrix; columns within 1e-6 of unit mass are renormalized.
inline TopicMatrix load_topics(const std::string& path) {
  Matrix a = load_matrix(path);
  require(a.minCoeff() >= 0.0, ErrorCode::InvalidSimplex, "'" + path + "' has negative entries");
  for (Eigen::Index k = 0; k < a.cols(); ++k) {
    const double s = a.col(k).sum();
    require(std::abs(s - 1.0) <= kTopicRenormTol, ErrorCode::InvalidSimplex,
            "column " + std::to_string(k) + " of '" + path + "' sums to " + std::to_string(s));
    a.col(k) /= s;
  }
  return TopicMatrix(std::move(a));
}

inline CostMatrix load_cost_table(const std::string& path) { return CostMatrix(load_matrix(path)); }

inline void save_matrix(const Matrix& m, const std::string& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCode::ParseError, "cannot write '" + path + "'");
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << m(i, j);
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// JSON

/// JSON has no infinities; they are written as strings.
inline json number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

inline json to_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(number(v(i)));
  return a;
}

inline json to_json(const Matrix& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(to_json(Vector(m.row(i).transpose())));
  return a;
}

inline json to_json(const sim::SimConfig& c) {
  json methods = json::array();
  for (auto m : c.methods) methods.push_back(sim::to_string(m));
  return json{{"K", c.K},
              {"p", c.p},
              {"N_i", c.N_i},
              {"N_j", c.N_j},
              {"tau", c.tau},
              {"n_outer", c.n_outer},
              {"n_reps", c.n_reps},
              {"M", c.M},
              {"B", c.B},
              {"limit_draws", c.limit_draws},
              {"gamma", c.gamma},
              {"delta", number(c.delta)},
              {"level", c.level},
              {"metric", to_string(c.metric)},
              {"seed", c.seed},
              {"methods", methods},
              {"scenario", c.scenario == sim::Scenario::Null ? "null" : "alternative"},
              {"a_noise", c.a_noise}};
}

inline json to_json(const ConfidenceInterval& ci) {
  return json{{"lower", ci.lower}, {"upper", ci.upper}, {"level", ci.level}, {"point", ci.point}, {"scale", ci.scale}};
}

inline json to_json(const WeightEstimate& e) {
  return json{{"method", to_string(e.method)},
              {"alpha", to_json(e.alpha)},
              {"iterations", e.iterations},
              {"converged", e.converged},
              {"support_size", e.support.size()}};
}

/// Records are included unless `brief`; normality series always carry their draws.
inline json to_json(const sim::ExperimentReport& r, bool brief = false) {
  json j;
  j["experiment"] = r.experiment;
  j["seed"] = r.config.seed;
  j["rng"] = r.rng;
  j["config"] = to_json(r.config);
  j["valid"] = r.valid;
  j["failures"] = r.failures;
  j["replicates"] = r.records.size();
  json summaries = json::array();
  for (const auto& s : r.summaries)
    summaries.push_back(json{{"method", s.method},
                             {"n", s.n},
                             {"coverage", s.coverage},
                             {"mean_length", s.mean_length},
                             {"se_length", s.se_length}});
  j["summaries"] = summaries;
  if (!r.ks.empty()) {
    json ks = json::array();
    for (const auto& k : r.ks)
      ks.push_back(json{{"label", k.label}, {"outer", k.outer}, {"distance", k.distance}, {"pvalue", k.pvalue}});
    j["ks"] = ks;
    j["mean_ks_distance"] = r.mean_ks_distance();
    j["mean_ks_pvalue"] = r.mean_ks_pvalue();
  }
  if (!r.normality.empty()) {
    json ns = json::array();
    for (const auto& s : r.normality)
      ns.push_back(json{{"estimator", s.estimator},
                        {"kind", s.kind},
                        {"index", s.index},
                        {"truth", s.truth},
                        {"ks_distance", s.ks_distance},
                        {"ks_pvalue", s.ks_pvalue},
                        {"values", s.values}});
    j["normality"] = ns;
  }
  j["outer_weights_i"] = r.outer_weights_i;
  if (!r.outer_weights_j.empty()) j["outer_weights_j"] = r.outer_weights_j;
  if (!brief) {
    json recs = json::array();
    for (const auto& rec : r.records) {
      json one{{"outer", rec.outer}, {"rep", rec.rep}, {"w_true", rec.w_true}, {"w_tilde", rec.w_tilde}};
      if (rec.failed) {
        one["failed"] = true;
        one["error"] = rec.error;
      }
      if (!rec.intervals.empty()) {
        json ivs = json::array();
        for (const auto& iv : rec.intervals)
          ivs.push_back(json{{"method", iv.method}, {"lower", iv.lower}, {"upper", iv.upper}, {"covered", iv.covered}});
        one["intervals"] = ivs;
      }
      recs.push_back(one);
    }
    j["records"] = recs;
  }
  return j;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::ParseError, "cannot write '" + path + "'");
  out << text;
}

inline void save_json(const json& j, const std::string& path) { write_text(path, j.dump(2) + "\n"); }

inline void save_report(const sim::ExperimentReport& r, const std::string& path, bool brief = false) {
  save_json(to_json(r, brief), path);
}

/// `index,sample` rows in draw order.
inline void save_limit_samples(const SampleSet& s, const std::string& path) {
  std::ostringstream out;
  out << std::setprecision(17) << "index,sample\n";
  for (std::size_t i = 0; i < s.samples.size(); ++i) out << i << ',' << s.samples[i] << '\n';
  write_text(path, out.str());
}

inline std::vector<double> load_samples(const std::string& path) {
  const Matrix m = load_matrix(path);
  require(m.cols() == 2, ErrorCode::ParseError, "'" + path + "' must have columns index,sample");
  return {m.col(1).data(), m.col(1).data() + m.rows()};
}

// ---------------------------------------------------------------------------
// Digests and manifests

inline std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  require(ctx != nullptr, ErrorCode::InvalidParam, "cannot allocate digest context");
  const bool ok = EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, data.data(), data.size()) == 1 && EVP_DigestFinal_ex(ctx, md, &len) == 1;
  EVP_MD_CTX_free(ctx);
  require(ok, ErrorCode::InvalidParam, "SHA-256 failed");
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return hex.str();
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::ParseError, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string file_sha256(const std::string& path) { return sha256_hex(read_file(path)); }

inline std::string utc_timestamp(std::chrono::system_clock::time_point t) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

struct FileDigest {
  std::string path;
  std::string sha256;
};

/// Provenance of one CLI run. Wall-clock data lives here rather than in the
/// report, so reports stay byte-identical across reruns.
struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  json config;  // canonical configuration; hashed below
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string version = std::string(kVersion) + "+" + kBuildHash;
  std::string started;
  std::string finished;
  double wall_seconds = 0.0;
  std::vector<FileDigest> inputs;
  std::vector<FileDigest> outputs;

  void set_config(json c) {
    config = std::move(c);
    config_hash = sha256_hex(config.dump());
  }
  void add_input(const std::string& path) { inputs.push_back({path, file_sha256(path)}); }
  void add_output(const std::string& path) { outputs.push_back({path, file_sha256(path)}); }

  json to_json() const {
    auto files = [](const std::vector<FileDigest>& v) {
      json a = json::array();
      for (const auto& f : v) a.push_back(json{{"path", f.path}, {"sha256", f.sha256}});
      return a;
    };
    return json{{"command", command},     {"argv", argv},         {"config", config},
                {"config_hash", config_hash}, {"seed", seed},     {"version", version},
                {"started", started},     {"finished", finished}, {"wall_seconds", wall_seconds},
                {"inputs", files(inputs)}, {"outputs", files(outputs)}};
  }

  static RunManifest from_json(const json& j) {
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.argv = j.at("argv").get<std::vector<std::string>>();
    m.config = j.at("config");
    m.config_hash = j.at("config_hash").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.version = j.at("version").get<std::string>();
    m.started = j.at("started").get<std::string>();
    m.finished = j.at("finished").get<std::string>();
    m.wall_seconds = j.at("wall_seconds").get<double>();
    for (const auto& f : j.at("inputs")) m.inputs.push_back({f.at("path"), f.at("sha256")});
    for (const auto& f : j.at("outputs")) m.outputs.push_back({f.at("path"), f.at("sha256")});
    return m;
  }
};

inline void save_manifest(const RunManifest& m, const std::string& path) { save_json(m.to_json(), path); }

inline RunManifest load_manifest(const std::string& path) {
  try {
    return RunManifest::from_json(json::parse(read_file(path)));
  } catch (const json::exception& e) {
    fail(ErrorCode::ParseError, "'" + path + "': " + e.what());
  }
}

/// Mismatches between stored and recomputed digests (empty when consistent).
inline std::vector<std::string> verify_manifest(const RunManifest& m) {
  std::vector<std::string> bad;
  if (sha256_hex(m.config.dump()) != m.config_hash) bad.push_back("config_hash");
  for (const auto* list : {&m.inputs, &m.outputs}) {
    for (const auto& f : *list) {
      std::error_code ec;
      if (!std::filesystem::exists(f.path, ec)) bad.push_back(f.path + " (missing)");
      else if (file_sha256(f.path) != f.sha256) bad.push_back(f.path);
    }
  }
  return bad;
}

}  // namespace mixwass::io
