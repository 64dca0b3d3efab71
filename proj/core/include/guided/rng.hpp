// Copyright 2026 The Guided Grounding Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef GUIDED_RNG_HPP_
#define GUIDED_RNG_HPP_

#include <array>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <string_view>

namespace guided {

// splitmix64 step; used for seeding and for deriving child seeds.
std::uint64_t splitmix64(std::uint64_t& state);

// Mixes a seed with a list of stream identifiers into a new seed. The same
// inputs give the same output on every platform.
std::uint64_t derive_seed(std::uint64_t seed,
                          std::initializer_list<std::uint64_t> streams);

// FNV-1a over the bytes of a string; stable id hashing for seeding.
std::uint64_t hash_string(std::string_view s);

// xoshiro256** seeded through splitmix64. Satisfies
// UniformRandomBitGenerator, but the distribution helpers below are used
// instead of <random> distributions, whose output is implementation-defined.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() { return next(); }
  std::uint64_t next();

  std::uint64_t seed() const { return seed_; }

  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);
  // Standard normal via Box-Muller; the second variate is cached.
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> s_{};
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Fisher-Yates shuffle driven by Rng::below.
template <typename Container>
void shuffle(Container& c, Rng& rng) {
  using std::swap;
  for (std::size_t i = c.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    swap(c[i - 1], c[j]);
  }
}

}  // namespace guided

#endif  // GUIDED_RNG_HPP_
