#include "grain/rng.hpp"

namespace grain {

CounterRng::result_type CounterRng::operator()() {
  ++counter_;
  return mix64(key_ + counter_ * 0x9e3779b97f4a7c15ULL);
}

bool CounterRng::bit() {
  if (bits_left_ == 0) {
    bits_ = (*this)();
    bits_left_ = 64;
  }
  bool b = bits_ & 1ULL;
  bits_ >>= 1;
  --bits_left_;
  return b;
}

double CounterRng::uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

CounterRng CounterRng::split(std::uint64_t stream) const {
  CounterRng child;
  child.key_ = mix64(key_ ^ mix64(stream + 0x632be59bd9b4e019ULL));
  return child;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return hash_combine(hash_combine(mix64(seed), a), b);
}

bool bernoulli(const Rational& p, CounterRng& rng) {
  if (p <= 0) return false;
  if (p >= 1) return true;
  Rational x = p;
  // u < p decided at the first bit where the expansions differ.
  for (;;) {
    x *= 2;
    bool pb = x >= 1;
    if (pb) x -= 1;
    bool ub = rng.bit();
    if (ub != pb) return pb;
    if (x == 0) return false;
  }
}

std::size_t categorical(const std::vector<Rational>& law, CounterRng& rng) {
  Rational remaining = 1;
  for (std::size_t i = 0; i < law.size(); ++i) {
    if (remaining <= 0) break;
    if (law[i] > 0) {
      Rational c = law[i] / remaining;
      if (bernoulli(c, rng)) return i;
    }
    remaining -= law[i];
  }
  return law.size();
}

}  // namespace grain
