#include <doctest.h>

#include <random>

#include "grain/machine.hpp"
#include "grain/oracle.hpp"
#include "machines.hpp"
#include "reference.hpp"

using namespace grain;

namespace {

Universe diag_universe() {
  std::vector<Program> progs{Program::parse(machines::kDiag)};
  return Universe(progs, {Query{0, {}, Dyadic::parse("1/2"), "a"}});
}

void check_against_reference(const Universe& u, std::size_t prog, const Input& x, unsigned k,
                             const PartialOracle& po) {
  OutcomeDistribution got = run_bounded(u, prog, x, k, po);
  const std::size_t answerable = std::min<std::size_t>(k, po.values.size());
  ref::Outcome want = ref::run(u.program(prog), x, k, [&](std::size_t site) -> std::optional<Rational> {
    auto idx = u.resolve(prog, site, x);
    REQUIRE(idx.has_value());
    if (*idx >= answerable) return std::nullopt;
    return po.values[*idx].rational();
  });
  for (std::size_t s = 0; s < got.alphabet.size(); ++s) CHECK(got.mass[s].rational() == want.mass[got.alphabet[s]]);
  CHECK(got.silent.rational() == want.silent);
  CHECK(got.total() == Dyadic(1));
}

}  // namespace

TEST_CASE("emit machine yields its symbol in one step") {
  Program p = Program::parse(machines::kEmitA);
  auto d = run_bounded(p, {}, 1);
  CHECK(d.of("a") == Dyadic(1));
  CHECK(d.of("b") == Dyadic(0));
  CHECK(d.silent == Dyadic(0));
}

TEST_CASE("zero budget halts silently") {
  auto d = run_bounded(Program::parse(machines::kCoin), {}, 0);
  CHECK(d.silent == Dyadic(1));
}

TEST_CASE("calls above the oracle level halt") {
  Universe u = diag_universe();
  PartialOracle empty{0, {}};
  for (unsigned k : {0u, 1u, 4u}) {
    auto d = run_bounded(u, 0, {}, k, empty);
    CHECK(d.silent == Dyadic(1));
  }
}

TEST_CASE("diagonal machine at value one half") {
  Universe u = diag_universe();
  for (unsigned k = 2; k <= 12; ++k) {
    PartialOracle po{k, {Dyadic::parse("1/2")}};
    auto d = run_bounded(u, 0, {}, k, po);
    Dyadic expect = Dyadic::parse("1/2") - Dyadic::unit(k);
    CHECK(d.of("a") == expect);
    CHECK(d.of("b") == expect);
    CHECK(d.silent == Dyadic::unit(k - 1));
    CHECK_FALSE(d.clamped);
  }
}

TEST_CASE("negative branch masses are clamped and flagged") {
  Universe u = diag_universe();
  PartialOracle po{3, {Dyadic(0)}};
  auto d = run_bounded(u, 0, {}, 3, po);
  CHECK(d.clamped);
  CHECK(d.of("b") == Dyadic(0));
  CHECK(d.of("a") == Dyadic::parse("7/8"));
  CHECK(d.total() == Dyadic(1));
}

TEST_CASE("bounded runs match exhaustive path enumeration") {
  std::vector<Program> progs{Program::parse(machines::kDiag), Program::parse(machines::kEcho),
                             Program::parse(machines::kMirror), Program::parse(machines::kTri),
                             Program::parse(machines::kGeometric)};
  Universe u(progs, {Query{0, {}, Dyadic::parse("1/2"), "a"}, Query{2, {}, Dyadic::parse("1/2"), "a"},
                     Query{1, {}, Dyadic::parse("1/2"), "a"}});
  std::mt19937 gen(3);
  for (unsigned k = 0; k <= 9; ++k) {
    for (int trial = 0; trial < 4; ++trial) {
      PartialOracle po{k, {}};
      std::uniform_int_distribution<unsigned> pick(0, 1u << k);
      for (std::size_t i = 0; i < std::min<std::size_t>(k, u.size()); ++i)
        po.values.push_back(Dyadic::from_grid(mpz_class(pick(gen)), k));
      for (std::size_t prog = 0; prog < progs.size(); ++prog) check_against_reference(u, prog, {}, k, po);
    }
  }
}

TEST_CASE("random oracle-free programs agree with the reference walker") {
  std::mt19937 gen(99);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(gen() % 7);
    std::string src = ".name rnd\n.type a b\n";
    for (int i = 0; i < n; ++i) {
      int kind = static_cast<int>(gen() % 8);
      auto tgt = [&] { return "@" + std::to_string(gen() % n); };
      switch (kind) {
        case 0:
          src += "emit a\n";
          break;
        case 1:
          src += "emit b\n";
          break;
        case 2:
          src += "halt\n";
          break;
        case 3:
        case 4:
          src += "coin " + tgt() + " " + tgt() + "\n";
          break;
        case 5:
          src += "read r1 " + std::to_string(static_cast<int>(gen() % 3) - 1) + "\n";
          break;
        case 6:
          src += "jeq r1 a " + tgt() + "\n";
          break;
        default:
          src += "jump " + tgt() + "\n";
      }
    }
    Program p = Program::parse(src);
    Input x = gen() % 2 ? Input{"a", "b"} : Input{"b"};
    for (unsigned k : {0u, 1u, 3u, 6u, 9u}) {
      auto got = run_bounded(p, x, k);
      auto want = ref::run(p, x, k, [](std::size_t) -> std::optional<Rational> { return std::nullopt; });
      CHECK(got.of("a").rational() == want.mass["a"]);
      CHECK(got.of("b").rational() == want.mass["b"]);
      CHECK(got.total() == Dyadic(1));
    }
    // Bounded masses never exceed the exact limit and increase with the budget.
    auto exact = lambda_exact(p, x);
    Dyadic prev_a(0);
    for (unsigned k = 0; k <= 12; ++k) {
      auto d = run_bounded(p, x, k);
      CHECK(d.of("a").rational() <= exact[0]);
      CHECK(d.of("b").rational() <= exact[1]);
      CHECK(prev_a <= d.of("a"));
      prev_a = d.of("a");
    }
  }
}

TEST_CASE("coin tree lower bounds") {
  Program coin = Program::parse(machines::kCoin);
  CHECK(lambda_lower(coin, {}, "a", 1) == Dyadic::parse("1/2"));
  CHECK(lambda_lower(coin, {}, "a", 0) == Dyadic(0));
  Program loop = Program::parse(machines::kLoop);
  for (unsigned d : {0u, 1u, 5u, 20u}) CHECK(lambda_lower(loop, {}, "a", d) == Dyadic(0));
  Program p11 = Program::parse(machines::kPrefix11);
  CHECK(lambda_lower(p11, {}, "a", 1) == Dyadic(0));
  CHECK(lambda_lower(p11, {}, "a", 2) == Dyadic::parse("1/4"));
  CHECK_THROWS_AS(lambda_lower(Program::parse(machines::kDiag), {}, "a", 3), Error);
}

TEST_CASE("coin tree lower bounds are monotone and bounded by the other symbols") {
  Program g = Program::parse(machines::kGeometric);
  auto exact = lambda_exact(g, {});
  CHECK(exact[0] == Rational(2, 3));
  CHECK(exact[1] == Rational(1, 3));
  Dyadic prev(0);
  for (unsigned d = 0; d <= 30; ++d) {
    Dyadic a = lambda_lower(g, {}, "a", d);
    Dyadic b = lambda_lower(g, {}, "b", d);
    CHECK(prev <= a);
    CHECK(a <= Dyadic(1) - b);
    CHECK(a.rational() <= exact[0]);
    prev = a;
  }
  CHECK(exact[0] - prev.rational() < Rational(1, 10000));
}

TEST_CASE("exact limits of simple machines") {
  CHECK(lambda_exact(Program::parse(machines::kLoop), {}) == std::vector<Rational>{0, 0});
  CHECK(lambda_exact(Program::parse(machines::kHalfSilent), {}) == std::vector<Rational>{Rational(1, 2), 0});
  CHECK(lambda_exact(Program::parse(machines::kTri), {}) ==
        std::vector<Rational>{Rational(1, 2), Rational(1, 4), Rational(1, 4)});
}

TEST_CASE("bernoulli programs realise their probability") {
  for (const char* s : {"0", "1", "1/2", "3/8", "5/2^5", "255/2^8"}) {
    Dyadic p = Dyadic::parse(s);
    Program prog = make_bernoulli_program(p, "yes", "no", "bern");
    auto law = lambda_exact(prog, {});
    CHECK(law[prog.symbol_index("yes")] == p.rational());
    CHECK(run_bounded(prog, {}, p.exponent() + 2).of("yes") == p);
  }
}

TEST_CASE("self binding") {
  Program plain = Program::parse(machines::kCoin);
  std::vector<Program> list{Program::parse(machines::kEmitA), Program::parse(machines::kLoop),
                            Program::parse(machines::kTri), plain};
  Program bound = resolve_self(plain, list);
  CHECK(bound.encode() == plain.encode());

  Program who = Program::parse(R"(.name who
.type yes no
self r0
jeq r0 #3 hit
emit no
hit: emit yes
)");
  std::vector<Program> universe{Program::parse(machines::kEmitA), Program::parse(machines::kLoop),
                                Program::parse(machines::kTri), who};
  Program b = resolve_self(who, universe);
  REQUIRE(b.self_index().has_value());
  CHECK(*b.self_index() == 3);
  CHECK(universe[*b.self_index()].hash() == b.hash());
  CHECK(run_bounded(b, {}, 4).of("yes") == Dyadic(1));
  Program twice = resolve_self(b, universe);
  CHECK(twice.self_index() == b.self_index());
  CHECK(twice.encode() == b.encode());
  CHECK_THROWS_AS(resolve_self(who, {plain}), Error);
  CHECK_THROWS_AS(run_bounded(who, {}, 4), Error);
}

TEST_CASE("self-querying machine reaches its own query") {
  Universe u = diag_universe();
  auto sites = u.program(0).reachable_query_sites();
  REQUIRE(sites.size() == 1);
  auto idx = u.resolve(0, sites[0], {});
  REQUIRE(idx.has_value());
  CHECK(u.query(*idx).program == 0);
}

TEST_CASE("canonical encoding round trips and hashes stably") {
  for (const char* src : {machines::kDiag, machines::kEcho, machines::kTri, machines::kGeometric}) {
    Program p = Program::parse(src);
    Program q = Program::parse(p.encode());
    CHECK(q.encode() == p.encode());
    CHECK(q.hash() == p.hash());
  }
  Program literal = Program::parse(R"(.name lit
.type a b
read r2 -1
jeq r2 none empty
jeq r2 a saw_a
query lit a,b 3/2^3 b empty saw_a
empty: emit a
saw_a: emit b
)");
  CHECK(Program::parse(literal.encode()).encode() == literal.encode());
  CHECK(Program::parse(machines::kDiag).hash() != Program::parse(machines::kMirror).hash());
}

TEST_CASE("input reads") {
  Program p = Program::parse(R"(.name last
.type a b none
read r0 -1
jeq r0 a is_a
jeq r0 none is_none
emit b
is_a: emit a
is_none: emit none
)");
  CHECK(run_bounded(p, {"b", "a"}, 5).of("a") == Dyadic(1));
  CHECK(run_bounded(p, {"a", "b"}, 5).of("b") == Dyadic(1));
  CHECK(run_bounded(p, {}, 5).of("none") == Dyadic(1));
  CHECK(run_bounded(p, {"zzz"}, 5).of("b") == Dyadic(1));
}

TEST_CASE("parse errors are reported") {
  CHECK_THROWS_AS(Program::parse(".name x\n"), Error);
  CHECK_THROWS_AS(Program::parse(".name x\nfly a\n"), Error);
  CHECK_THROWS_AS(Program::parse(".name x\ncoin a b\n"), Error);
  CHECK_THROWS_AS(Program::parse(".name x\n.type a\nemit b\n"), Error);
  CHECK_THROWS_AS(Program::parse(".name x\nread r9 0\nemit a\n"), Error);
  CHECK_THROWS_AS(Program::parse(".name x\nquery self eps 3/2 a @0 @0\n"), Error);
  CHECK(parse_input("eps").empty());
  CHECK(parse_input("a,b") == Input{"a", "b"});
  CHECK_THROWS_AS(parse_input("a,,b"), Error);
}
