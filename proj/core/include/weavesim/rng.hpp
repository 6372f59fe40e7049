#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace weavesim {

// Deterministic labeled random stream. Every consumer of randomness pulls
// from its own labeled stream, so adding or removing a consumer never
// perturbs the draws seen by the others. The generator (splitmix64) is
// fully specified here, not delegated to implementation-defined library
// distributions, which keeps episodes bit-reproducible across toolchains.
class RngStream {
 public:
  RngStream() = default;
  RngStream(std::uint64_t seed, const std::string& label);

  std::uint64_t next_u64();
  double uniform01();  // [0, 1), 53-bit resolution
  double uniform(double lo, double hi);
  double normal();  // standard normal (Box-Muller, cached spare)
  bool bernoulli(double p);
  std::uint64_t uniform_int(std::uint64_t n);  // [0, n), n >= 1

 private:
  std::uint64_t state_ = 0x853c49e6748fea9bULL;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Builds one stream per label, each a deterministic function of
// (seed, label). Throws std::invalid_argument on duplicate labels.
std::map<std::string, RngStream> make_rng_streams(
    std::uint64_t seed, const std::vector<std::string>& labels);

}  // namespace weavesim
