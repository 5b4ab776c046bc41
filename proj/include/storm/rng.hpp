#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace storm::rng {

// All randomness derives from one 64-bit seed. A named sub-stream is
//   seed' = splitmix64(seed ^ fnv1a64(name) ^ splitmix64(index))
// and feeds an mt19937_64, whose output sequence is fixed by the standard.
// Uniform and normal variates are produced here rather than through
// <random> distributions, whose algorithms vary between library vendors.
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view text);
std::uint64_t derive(std::uint64_t seed, std::string_view stream, std::uint64_t index = 0);

class Stream {
 public:
  explicit Stream(std::uint64_t seed) : engine_(seed) {}

  double uniform();                      // [0, 1)
  double uniform(double lo, double hi);  // [lo, hi)
  double normal();                       // Box-Muller, standard normal

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace storm::rng
