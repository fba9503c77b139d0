// SPDX-License-Identifier: Apache-2.0
//
// Seeded random streams. Every draw is defined here rather than through the
// <random> distributions, whose output is implementation-defined, so runs
// reproduce bit for bit across standard libraries.
#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace ctg::util {

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t hash_tag(std::string_view tag);

class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  // Independent stream keyed by (seed, tag, counter).
  static Rng derive(std::uint64_t seed, std::string_view tag, std::uint64_t counter = 0);

  std::uint64_t next_u64() { return engine_(); }
  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n), n > 0, by rejection.
  std::uint64_t below(std::uint64_t n);
  // Standard normal via Box-Muller; consumes two uniforms, keeps no spare.
  double normal();
  // Index drawn with probability proportional to `weights` (must sum > 0).
  std::size_t categorical(const double* weights, std::size_t n);

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace ctg::util
