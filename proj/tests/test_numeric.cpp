#include <doctest.h>

#include <cmath>
#include <random>

#include "grain/numeric.hpp"
#include "grain/rng.hpp"

using namespace grain;

TEST_CASE("dyadic values are canonical") {
  Dyadic a(mpz_class(6), 3);
  CHECK(a.mantissa() == 3);
  CHECK(a.exponent() == 2);
  CHECK(Dyadic(mpz_class(0), 7).exponent() == 0);
  CHECK(Dyadic(mpz_class(8), 3) == Dyadic(1));
  CHECK(Dyadic::unit(3).str() == "1/2^3");
}

TEST_CASE("dyadic text round trips") {
  for (const char* s : {"0/2^0", "1/2^1", "-3/2^4", "5/2^0", "7/2^10"}) CHECK(Dyadic::parse(s).str() == s);
  CHECK(Dyadic::parse("3/4") == Dyadic(mpz_class(3), 2));
  CHECK(Dyadic::parse("2") == Dyadic(2));
  CHECK(Dyadic::parse("6/2^2") == Dyadic(mpz_class(3), 1));
  CHECK_THROWS_AS(Dyadic::parse("1/3"), Error);
  CHECK_THROWS_AS(Dyadic::parse("x/2^1"), Error);
  CHECK_FALSE(Dyadic::from_rational(Rational(1, 3)).has_value());
  CHECK(*Dyadic::from_rational(Rational(5, 8)) == Dyadic(mpz_class(5), 3));
}

TEST_CASE("dyadic arithmetic agrees with rational arithmetic") {
  std::mt19937_64 gen(7);
  std::uniform_int_distribution<long> mant(-1000, 1000);
  std::uniform_int_distribution<unsigned> ex(0, 12);
  for (int i = 0; i < 2000; ++i) {
    Dyadic a(mpz_class(mant(gen)), ex(gen)), b(mpz_class(mant(gen)), ex(gen));
    Rational ra = a.rational(), rb = b.rational();
    CHECK((a + b).rational() == ra + rb);
    CHECK((a - b).rational() == ra - rb);
    CHECK((a * b).rational() == ra * rb);
    CHECK(((a < b) == (ra < rb)));
    CHECK(((a == b) == (ra == rb)));
    Dyadic s = a + b;
    CHECK((s.mantissa() % 2 != 0 || s.exponent() == 0));
  }
}

TEST_CASE("grid indices") {
  Dyadic v = Dyadic::parse("3/2^2");
  CHECK(v.on_grid(2));
  CHECK_FALSE(v.on_grid(1));
  CHECK(v.grid_index(4) == 12);
  CHECK(Dyadic::from_grid(mpz_class(12), 4) == v);
}

TEST_CASE("rational parsing") {
  CHECK(parse_rational("1/20") == Rational(1, 20));
  CHECK(parse_rational("3/2^3") == Rational(3, 8));
  CHECK(parse_rational("2") == Rational(2));
  CHECK_THROWS_AS(parse_rational("1/0"), Error);
}

TEST_CASE("counter generator is deterministic and splits independently") {
  CounterRng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a() == b());
  CounterRng c(42);
  CounterRng s1 = c.split(3);
  c();
  c();
  CounterRng s2 = c.split(3);
  CHECK(s1() == s2());
  CHECK(CounterRng(42).split(1)() != CounterRng(42).split(2)());
  CHECK(derive_seed(1, 2, 3) == derive_seed(1, 2, 3));
  CHECK(derive_seed(1, 2, 3) != derive_seed(1, 3, 2));
}

TEST_CASE("exact bernoulli draws match their probability") {
  CounterRng rng(11);
  for (Rational p : {Rational(1, 3), Rational(1, 2), Rational(7, 8), Rational(1, 10)}) {
    const int n = 20000;
    int ones = 0;
    for (int i = 0; i < n; ++i) ones += bernoulli(p, rng);
    double pd = p.get_d();
    double sigma = std::sqrt(pd * (1 - pd) / n);
    CHECK(std::abs(ones / double(n) - pd) <= 3 * sigma);
  }
  CHECK(bernoulli(Rational(0), rng) == false);
  CHECK(bernoulli(Rational(1), rng) == true);
}

TEST_CASE("categorical draws include leftover mass") {
  CounterRng rng(5);
  std::vector<Rational> law{Rational(1, 4), Rational(1, 4)};
  const int n = 20000;
  int left = 0;
  for (int i = 0; i < n; ++i) left += categorical(law, rng) == 2;
  double sigma = std::sqrt(0.25 / n);
  CHECK(std::abs(left / double(n) - 0.5) <= 3 * sigma);
}
