#include "grain/numeric.hpp"

#include <charconv>

namespace grain {

Dyadic::Dyadic(mpz_class mantissa, unsigned exponent)
    : mantissa_(std::move(mantissa)), exponent_(exponent) {
  canonicalize();
}

void Dyadic::canonicalize() {
  if (mantissa_ == 0) {
    exponent_ = 0;
    return;
  }
  if (exponent_ == 0) return;
  mp_bitcnt_t zeros = mpz_scan1(mantissa_.get_mpz_t(), 0);
  mp_bitcnt_t shift = zeros < exponent_ ? zeros : exponent_;
  if (shift > 0) {
    mpz_fdiv_q_2exp(mantissa_.get_mpz_t(), mantissa_.get_mpz_t(), shift);
    exponent_ -= static_cast<unsigned>(shift);
  }
}

Dyadic Dyadic::unit(unsigned k) { return Dyadic(mpz_class(1), k); }

Dyadic Dyadic::from_grid(const mpz_class& index, unsigned k) { return Dyadic(index, k); }

mpz_class Dyadic::grid_index(unsigned k) const {
  if (!on_grid(k)) throw Error("value " + str() + " is not on the 2^-" + std::to_string(k) + " grid");
  mpz_class out;
  mpz_mul_2exp(out.get_mpz_t(), mantissa_.get_mpz_t(), k - exponent_);
  return out;
}

namespace {

unsigned power_of_two_exponent(const mpz_class& d) {
  if (d <= 0 || mpz_popcount(d.get_mpz_t()) != 1) throw Error("denominator is not a power of two");
  return static_cast<unsigned>(mpz_scan1(d.get_mpz_t(), 0));
}

mpz_class parse_integer(std::string_view text) {
  std::string s(text);
  while (!s.empty() && s.front() == ' ') s.erase(s.begin());
  while (!s.empty() && s.back() == ' ') s.pop_back();
  if (!s.empty() && s.front() == '+') s.erase(s.begin());
  mpz_class z;
  if (s.empty() || z.set_str(s, 10) != 0) throw Error("malformed integer '" + std::string(text) + "'");
  return z;
}

}  // namespace

Dyadic Dyadic::parse(std::string_view text) {
  auto slash = text.find('/');
  if (slash == std::string_view::npos) return Dyadic(parse_integer(text), 0);
  mpz_class m = parse_integer(text.substr(0, slash));
  std::string_view rest = text.substr(slash + 1);
  if (rest.size() > 2 && rest.substr(0, 2) == "2^") {
    std::string_view e = rest.substr(2);
    unsigned exp = 0;
    auto [ptr, ec] = std::from_chars(e.data(), e.data() + e.size(), exp);
    if (ec != std::errc() || ptr != e.data() + e.size())
      throw Error("malformed dyadic exponent in '" + std::string(text) + "'");
    return Dyadic(m, exp);
  }
  return Dyadic(m, power_of_two_exponent(parse_integer(rest)));
}

std::optional<Dyadic> Dyadic::from_rational(const Rational& r) {
  const mpz_class& d = r.get_den();
  if (mpz_popcount(d.get_mpz_t()) != 1) return std::nullopt;
  return Dyadic(r.get_num(), static_cast<unsigned>(mpz_scan1(d.get_mpz_t(), 0)));
}

Rational Dyadic::rational() const {
  mpz_class den;
  mpz_ui_pow_ui(den.get_mpz_t(), 2, exponent_);
  Rational q(mantissa_, den);
  q.canonicalize();
  return q;
}

double Dyadic::to_double() const { return rational().get_d(); }

std::string Dyadic::str() const { return mantissa_.get_str() + "/2^" + std::to_string(exponent_); }

Dyadic& Dyadic::operator+=(const Dyadic& o) {
  if (exponent_ >= o.exponent_) {
    mpz_class t;
    mpz_mul_2exp(t.get_mpz_t(), o.mantissa_.get_mpz_t(), exponent_ - o.exponent_);
    mantissa_ += t;
  } else {
    mpz_mul_2exp(mantissa_.get_mpz_t(), mantissa_.get_mpz_t(), o.exponent_ - exponent_);
    mantissa_ += o.mantissa_;
    exponent_ = o.exponent_;
  }
  canonicalize();
  return *this;
}

Dyadic& Dyadic::operator-=(const Dyadic& o) { return *this += -o; }

Dyadic& Dyadic::operator*=(const Dyadic& o) {
  mantissa_ *= o.mantissa_;
  exponent_ += o.exponent_;
  canonicalize();
  return *this;
}

std::strong_ordering operator<=>(const Dyadic& a, const Dyadic& b) {
  int c;
  if (a.exponent_ == b.exponent_) {
    c = cmp(a.mantissa_, b.mantissa_);
  } else if (a.exponent_ > b.exponent_) {
    mpz_class t;
    mpz_mul_2exp(t.get_mpz_t(), b.mantissa_.get_mpz_t(), a.exponent_ - b.exponent_);
    c = cmp(a.mantissa_, t);
  } else {
    mpz_class t;
    mpz_mul_2exp(t.get_mpz_t(), a.mantissa_.get_mpz_t(), b.exponent_ - a.exponent_);
    c = cmp(t, b.mantissa_);
  }
  return c < 0 ? std::strong_ordering::less : c > 0 ? std::strong_ordering::greater : std::strong_ordering::equal;
}

std::strong_ordering compare(const Rational& a, const Rational& b) {
  int c = cmp(a, b);
  return c < 0 ? std::strong_ordering::less : c > 0 ? std::strong_ordering::greater : std::strong_ordering::equal;
}

Rational parse_rational(std::string_view text) {
  auto slash = text.find('/');
  if (slash == std::string_view::npos) return Rational(parse_integer(text));
  std::string_view rest = text.substr(slash + 1);
  if (rest.size() > 2 && rest.substr(0, 2) == "2^") return Dyadic::parse(text).rational();
  mpz_class den = parse_integer(rest);
  if (den == 0) throw Error("zero denominator in '" + std::string(text) + "'");
  Rational q(parse_integer(text.substr(0, slash)), den);
  q.canonicalize();
  return q;
}

std::string rational_str(const Rational& r) { return r.get_str(); }

double to_double(const Rational& r) { return r.get_d(); }

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value) {
  return mix64(seed ^ (value + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2)));
}

std::uint64_t hash_value(const mpz_class& z) {
  std::uint64_t h = static_cast<std::uint64_t>(sgn(z) + 2);
  std::size_t n = mpz_size(z.get_mpz_t());
  for (std::size_t i = 0; i < n; ++i)
    h = hash_combine(h, static_cast<std::uint64_t>(mpz_getlimbn(z.get_mpz_t(), static_cast<mp_size_t>(i))));
  return h;
}

std::uint64_t hash_value(const Dyadic& d) { return hash_combine(hash_value(d.mantissa()), d.exponent()); }

std::uint64_t hash_value(const Rational& r) {
  return hash_combine(hash_value(r.get_num()), hash_value(r.get_den()));
}

std::uint64_t hash_values(const std::vector<Rational>& v) {
  std::uint64_t h = v.size();
  for (const auto& r : v) h = hash_combine(h, hash_value(r));
  return h;
}

}  // namespace grain
