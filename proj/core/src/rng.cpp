#include "deepcq/rng.hpp"

#include <cmath>
#include <numbers>

namespace deepcq {

std::uint64_t RngStream::uniform_int(std::uint64_t n) {
  // Rejection sampling; unbiased for any n.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

double RngStream::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  // u1 in (0,1] keeps the log finite.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  have_spare_ = true;
  return r * std::cos(theta);
}

namespace {
std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}
}  // namespace

std::uint64_t substream_seed(std::uint64_t master, std::string_view name,
                             std::uint64_t a, std::uint64_t b) {
  std::uint64_t state = master;
  std::uint64_t h = splitmix64(state);
  for (unsigned char c : name) {
    state ^= c;
    h ^= splitmix64(state);
  }
  state ^= a;
  h ^= splitmix64(state);
  state ^= b;
  h ^= splitmix64(state);
  return h;
}

}  // namespace deepcq
