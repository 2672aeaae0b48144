#pragma once

#include <gmpxx.h>

#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace grain {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Rational = mpq_class;

// Exact number mantissa / 2^exponent, kept canonical: odd mantissa or exponent 0.
class Dyadic {
 public:
  Dyadic() = default;
  Dyadic(long value) : mantissa_(value) {}
  Dyadic(mpz_class mantissa, unsigned exponent);

  // 2^-k
  static Dyadic unit(unsigned k);
  // Parses "m/2^e", "m/d" with d a power of two, or an integer.
  static Dyadic parse(std::string_view text);
  static std::optional<Dyadic> from_rational(const Rational& r);

  const mpz_class& mantissa() const { return mantissa_; }
  unsigned exponent() const { return exponent_; }

  Rational rational() const;
  double to_double() const;
  std::string str() const;

  // True when the value is an integer multiple of 2^-k.
  bool on_grid(unsigned k) const { return exponent_ <= k; }
  // Numerator of the value on the 2^-k grid; requires on_grid(k).
  mpz_class grid_index(unsigned k) const;
  static Dyadic from_grid(const mpz_class& index, unsigned k);

  bool is_zero() const { return mantissa_ == 0; }
  int sign() const { return sgn(mantissa_); }

  Dyadic& operator+=(const Dyadic& o);
  Dyadic& operator-=(const Dyadic& o);
  Dyadic& operator*=(const Dyadic& o);
  Dyadic operator-() const { return Dyadic(-mantissa_, exponent_); }
  Dyadic half() const { return Dyadic(mantissa_, exponent_ + 1); }

  friend Dyadic operator+(Dyadic a, const Dyadic& b) { return a += b; }
  friend Dyadic operator-(Dyadic a, const Dyadic& b) { return a -= b; }
  friend Dyadic operator*(Dyadic a, const Dyadic& b) { return a *= b; }
  friend bool operator==(const Dyadic& a, const Dyadic& b) {
    return a.exponent_ == b.exponent_ && a.mantissa_ == b.mantissa_;
  }
  friend std::strong_ordering operator<=>(const Dyadic& a, const Dyadic& b);

 private:
  void canonicalize();

  mpz_class mantissa_{0};
  unsigned exponent_ = 0;
};

std::strong_ordering compare(const Rational& a, const Rational& b);

Rational parse_rational(std::string_view text);
std::string rational_str(const Rational& r);
double to_double(const Rational& r);

inline Dyadic min(const Dyadic& a, const Dyadic& b) { return b < a ? b : a; }
inline Dyadic max(const Dyadic& a, const Dyadic& b) { return a < b ? b : a; }

// Hashing helpers shared by memo tables and visited sets.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t mix64(std::uint64_t x);
std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value);
std::uint64_t hash_value(const mpz_class& z);
std::uint64_t hash_value(const Dyadic& d);
std::uint64_t hash_value(const Rational& r);
std::uint64_t hash_values(const std::vector<Rational>& v);

}  // namespace grain
