#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "grain/numeric.hpp"

namespace grain {

// Counter-based generator: output i is splitmix64 finalization of key + i * golden.
// Streams derived with split() are independent of how many draws the parent made.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t seed = 0) : key_(mix64(seed)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();
  bool bit();
  // Uniform double in [0,1) from 53 bits.
  double uniform();

  CounterRng split(std::uint64_t stream) const;
  std::uint64_t key() const { return key_; }
  std::uint64_t draws() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  std::uint64_t bits_ = 0;
  int bits_left_ = 0;
};

// Seed derived from (seed, a, b), e.g. (config seed, repetition, agent).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

// Exact draw of 1 with probability p, by lazily comparing uniform bits to the binary expansion of p.
bool bernoulli(const Rational& p, CounterRng& rng);
// Index drawn from a law summing to at most 1; returns law.size() for the leftover mass.
std::size_t categorical(const std::vector<Rational>& law, CounterRng& rng);

}  // namespace grain
