#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace datapricer {

// Seeded stream built on std::mt19937_64 with explicit output transforms, so
// the stream is reproducible from the published generator algorithm alone:
//   uniform: (word >> 11) * 2^-53 in [0, 1)
//   normal:  Box-Muller, consuming exactly two words per variate
inline constexpr const char* kRngName = "mt19937_64/box-muller";

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_word() { return gen_(); }

  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double normal() {
    const double u1 = 1.0 - uniform01();  // (0, 1], keeps the log finite
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace datapricer
