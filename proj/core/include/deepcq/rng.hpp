#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace deepcq {

/// Deterministic random stream. The mt19937_64 engine is fully specified by
/// the standard and the distribution transforms below are hand-rolled, so a
/// given seed produces the same draws on every platform and compiler.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform() {
    // 53 mantissa bits from the top of the draw.
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be >= 1.
  std::uint64_t uniform_int(std::uint64_t n);

  /// Standard normal via Box-Muller (branch-free draw count: two uniforms
  /// yield two normals, the spare is cached).
  double normal();

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// Derives the seed of a named substream from a master seed. Mixing is
/// splitmix64-based so distinct (name, a, b) tuples give independent streams;
/// changing one subsystem's draw count can never perturb another subsystem.
std::uint64_t substream_seed(std::uint64_t master, std::string_view name,
                             std::uint64_t a = 0, std::uint64_t b = 0);

inline RngStream make_stream(std::uint64_t master, std::string_view name,
                             std::uint64_t a = 0, std::uint64_t b = 0) {
  return RngStream(substream_seed(master, name, a, b));
}

}  // namespace deepcq
