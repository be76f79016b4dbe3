#pragma once

// Seeded random streams. Every replicate or Monte Carlo draw gets its own
// generator derived from (seed, stream tag, index), so results do not depend
// on how work is scheduled across threads.

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include "mixwass/numlin.hpp"

namespace mixwass::rng {

using Engine = std::mt19937_64;

inline constexpr const char* kEngineName = "mt19937_64 seeded via splitmix64(seed, tag, index)";

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Child seed for a labelled sub-stream.
inline std::uint64_t derive(std::uint64_t seed, std::uint64_t tag, std::uint64_t index = 0) {
  std::uint64_t s = seed;
  std::uint64_t a = splitmix64(s);
  s = a ^ (tag * 0xD1B54A32D192ED03ull);
  std::uint64_t b = splitmix64(s);
  s = b ^ (index * 0x8CB92BA72F3D8DD7ull);
  return splitmix64(s);
}

inline Engine stream(std::uint64_t seed, std::uint64_t tag = 0, std::uint64_t index = 0) {
  std::uint64_t s = derive(seed, tag, index);
  std::seed_seq seq{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32),
                    static_cast<std::uint32_t>(splitmix64(s)), static_cast<std::uint32_t>(splitmix64(s))};
  return Engine(seq);
}

/// Uniform integer in [0, n) by rejection; identical across standard libraries.
inline std::uint64_t uniform_index(Engine& eng, std::uint64_t n) {
  const std::uint64_t limit = Engine::max() - Engine::max() % n;
  std::uint64_t v;
  do v = eng();
  while (v >= limit);
  return v % n;
}

inline Vector standard_normal(Engine& eng, int dim) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Vector z(dim);
  for (int i = 0; i < dim; ++i) z(i) = n01(eng);
  return z;
}

/// Multinomial(n, probs) by sequential conditional binomials. The last
/// positive cell absorbs the remainder, so zero cells never receive counts.
inline std::vector<std::int64_t> multinomial(Engine& eng, std::int64_t n, const Vector& probs) {
  std::vector<std::int64_t> out(static_cast<std::size_t>(probs.size()), 0);
  Eigen::Index last = -1;
  for (Eigen::Index j = 0; j < probs.size(); ++j)
    if (probs(j) > 0.0) last = j;
  if (last < 0) return out;
  double remaining_mass = probs.head(last + 1).sum();
  std::int64_t remaining = n;
  for (Eigen::Index j = 0; j <= last && remaining > 0; ++j) {
    const double pj = probs(j);
    if (pj <= 0.0) continue;
    if (j == last) {
      out[static_cast<std::size_t>(j)] = remaining;
      break;
    }
    const double q = std::clamp(pj / remaining_mass, 0.0, 1.0);
    std::binomial_distribution<std::int64_t> bin(remaining, q);
    const std::int64_t c = bin(eng);
    out[static_cast<std::size_t>(j)] = c;
    remaining -= c;
    remaining_mass -= pj;
  }
  return out;
}

/// Uniform draw from the simplex (Dirichlet(1, ..., 1)).
inline Vector uniform_simplex(Engine& eng, int dim) {
  std::exponential_distribution<double> ex(1.0);
  Vector v(dim);
  for (int i = 0; i < dim; ++i) v(i) = ex(eng);
  return v / v.sum();
}

}  // namespace mixwass::rng
