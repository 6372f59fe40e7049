#include "weavesim/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace weavesim {

namespace {

std::uint64_t splitmix64(std::uint64_t& s) {
  s += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = s;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, const std::string& label) {
  // Mix seed and label hash through two splitmix rounds so that streams with
  // related seeds or labels do not share low-bit structure.
  std::uint64_t s = seed ^ (fnv1a(label) * 0x9e3779b97f4a7c15ULL);
  splitmix64(s);
  splitmix64(s);
  state_ = s;
}

std::uint64_t RngStream::next_u64() { return splitmix64(state_); }

double RngStream::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform01();
}

double RngStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform01();
  double u2 = uniform01();
  while (u1 <= 0.0) u1 = uniform01();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * M_PI * u2;
  spare_ = r * std::sin(a);
  has_spare_ = true;
  return r * std::cos(a);
}

bool RngStream::bernoulli(double p) { return uniform01() < p; }

std::uint64_t RngStream::uniform_int(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("uniform_int: n must be >= 1");
  // Rejection sampling to avoid modulo bias.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return x % n;
}

std::map<std::string, RngStream> make_rng_streams(
    std::uint64_t seed, const std::vector<std::string>& labels) {
  std::map<std::string, RngStream> streams;
  for (const auto& label : labels) {
    if (streams.count(label) != 0) {
      throw std::invalid_argument("make_rng_streams: duplicate label '" +
                                  label + "'");
    }
    streams.emplace(label, RngStream(seed, label));
  }
  return streams;
}

}  // namespace weavesim
