#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "grain/oracle.hpp"
#include "machines.hpp"

using namespace grain;

namespace {

Dyadic D(const char* s) { return Dyadic::parse(s); }

Universe single(const char* src, const char* p, const char* symbol) {
  return Universe({Program::parse(src)}, {Query{0, {}, D(p), symbol}});
}

// Eight queries over the shared test machines.
Universe mixed_universe() {
  std::vector<Program> progs{Program::parse(machines::kDiag),   Program::parse(machines::kEmitA),
                             Program::parse(machines::kCoin),   Program::parse(machines::kLoop),
                             Program::parse(machines::kHalfSilent), Program::parse(machines::kEcho),
                             Program::parse(machines::kMirror), Program::parse(machines::kTri)};
  std::vector<Query> qs{{0, {}, D("1/2"), "a"}, {1, {}, D("1/4"), "a"}, {2, {}, D("1/2"), "a"},
                        {3, {}, D("1/2"), "a"}, {4, {}, D("1/2"), "a"}, {5, {}, D("1/2"), "a"},
                        {6, {}, D("1/2"), "a"}, {7, {}, D("1/4"), "c"}};
  return Universe(progs, qs);
}

std::set<std::vector<std::string>> as_set(const std::vector<PartialOracle>& v) {
  std::set<std::vector<std::string>> out;
  for (const auto& po : v) {
    std::vector<std::string> s;
    for (const auto& x : po.values) s.push_back(x.str());
    out.insert(s);
  }
  return out;
}

}  // namespace

TEST_CASE("closure of simple universes") {
  CHECK(validate_universe(single(machines::kEmitA, "1/2", "a")).closed);
  CHECK(validate_universe(single(machines::kDiag, "1/2", "a")).closed);
}

TEST_CASE("closure violations name the missing program") {
  Universe u({Program::parse(machines::kEcho)}, {Query{0, {}, D("1/2"), "a"}});
  auto check = validate_universe(u);
  CHECK_FALSE(check.closed);
  REQUIRE(check.violations.size() == 1);
  CHECK(check.violations[0].program == "echo");
  CHECK(check.violations[0].detail.find("diag") != std::string::npos);

  Universe listed({Program::parse(machines::kEcho), Program::parse(machines::kDiag)},
                  {Query{0, {}, D("1/2"), "a"}, Query{1, {}, D("1/4"), "a"}});
  auto check2 = validate_universe(listed);
  CHECK_FALSE(check2.closed);
  REQUIRE_FALSE(check2.violations.empty());
  CHECK(check2.violations[0].detail.find("diag") != std::string::npos);

  CHECK_FALSE(validate_universe(single(machines::kEmitA, "1/2", "z")).closed);
  CHECK_THROWS_AS(search_oracle(u, {}), Error);
}

TEST_CASE("reflectivity clauses") {
  Universe u = single(machines::kEmitA, "1/2", "a");
  CHECK(check_partial_reflective({0, {}}, u).pass);
  auto bad = check_partial_reflective({1, {Dyadic(0)}}, u);
  CHECK_FALSE(bad.pass);
  REQUIRE(!bad.violations.empty());
  CHECK(bad.violations[0].clause == Clause::Lower);
  CHECK(check_partial_reflective({1, {Dyadic(1)}}, u).pass);

  // b never happens, so a query about b above 0 must answer 0 once the run finishes.
  Universe ub = single(machines::kEmitA, "1/2", "b");
  auto upper = check_partial_reflective({1, {Dyadic(1)}}, ub);
  CHECK_FALSE(upper.pass);
  CHECK(upper.violations[0].clause == Clause::Upper);

  // Two values strictly inside (0,1) for the same symbol.
  Universe loop({Program::parse(machines::kLoop)},
                {Query{0, {}, D("1/4"), "a"}, Query{0, {}, D("3/4"), "a"}});
  auto mono = check_partial_reflective({2, {D("1/2"), D("1/4")}}, loop);
  CHECK_FALSE(mono.pass);
  CHECK(mono.violations[0].clause == Clause::Monotone);
  auto incr = check_partial_reflective({2, {Dyadic(0), Dyadic(1)}}, loop);
  CHECK_FALSE(incr.pass);
  CHECK(incr.violations[0].clause == Clause::Monotone);
  CHECK(check_partial_reflective({2, {Dyadic(1), Dyadic(0)}}, loop).pass);

  // Zero-points summing below one.
  Universe simplex({Program::parse(machines::kLoop)},
                   {Query{0, {}, D("1/4"), "a"}, Query{0, {}, D("1/4"), "b"}});
  auto s = check_partial_reflective({2, {Dyadic(0), Dyadic(0)}}, simplex);
  CHECK_FALSE(s.pass);
  CHECK(s.violations[0].clause == Clause::Simplex);
  CHECK(check_partial_reflective({2, {Dyadic(1), Dyadic(0)}}, simplex).pass);
  // One-points summing above one.
  Universe simplex2({Program::parse(machines::kLoop)},
                    {Query{0, {}, D("3/4"), "a"}, Query{0, {}, D("3/4"), "b"}});
  auto s2 = check_partial_reflective({2, {Dyadic(1), Dyadic(1)}}, simplex2);
  CHECK_FALSE(s2.pass);
  CHECK(s2.violations[0].clause == Clause::Simplex);
}

TEST_CASE("parallel and serial reflectivity checks agree") {
  Universe u = mixed_universe();
  std::mt19937 gen(17);
  int passes = 0;
  for (unsigned k = 0; k <= 8; ++k) {
    for (int t = 0; t < 30; ++t) {
      PartialOracle po{k, {}};
      for (std::size_t i = 0; i < std::min<std::size_t>(k, u.size()); ++i) {
        unsigned choice = gen() % 4;
        unsigned long idx = choice == 0 ? 0 : choice == 1 ? (1UL << k) : gen() % ((1UL << k) + 1);
        po.values.push_back(Dyadic::from_grid(mpz_class(idx), k));
      }
      auto a = check_partial_reflective(po, u);
      auto b = check_partial_reflective_serial(po, u);
      CHECK(a.pass == b.pass);
      REQUIRE(a.violations.size() == b.violations.size());
      for (std::size_t i = 0; i < a.violations.size(); ++i) {
        CHECK(a.violations[i].query == b.violations[i].query);
        CHECK(a.violations[i].clause == b.violations[i].clause);
      }
      passes += a.pass;
    }
  }
  CHECK(passes > 0);
}

TEST_CASE("extension candidates") {
  CHECK(refinements(D("1/2"), 1) == std::vector<Dyadic>{D("1/4"), D("1/2"), D("3/4")});
  CHECK(refinements(Dyadic(0), 1) == std::vector<Dyadic>{Dyadic(0), D("1/4")});
  CHECK(refinements(Dyadic(1), 1) == std::vector<Dyadic>{D("3/4"), Dyadic(1)});
  Universe u = mixed_universe();
  PartialOracle po{2, {D("1/2"), D("1/4")}};
  auto ext = extensions(po, u);
  CHECK(ext.status == ExtensionStatus::NewQuery);
  CHECK(ext.oracles.size() == 3u * 3u * 9u);
  for (const auto& c : ext.oracles) CHECK(extends(c, po));
  PartialOracle edge{2, {Dyadic(0), Dyadic(1)}};
  CHECK(extensions(edge, u).oracles.size() == 2u * 2u * 9u);

  Universe one = single(machines::kEmitA, "1/4", "a");
  auto refine = extensions({1, {Dyadic(1)}}, one);
  CHECK(refine.status == ExtensionStatus::RefineOnly);
  CHECK(refine.oracles.size() == 2);
}

TEST_CASE("child enumeration equals filtered extensions") {
  Universe u = mixed_universe();
  SearchOptions opt;
  opt.target_level = 6;
  auto res = search_oracle(u, opt);
  REQUIRE(res.complete);
  std::vector<PartialOracle> parents{{0, {}}};
  for (const auto& po : res.levels) parents.push_back(po);
  // Perturbed parents exercise nodes off the search path.
  parents.push_back({2, {D("1/2"), Dyadic(1)}});
  parents.push_back({3, {D("1/2"), Dyadic(1), D("3/8")}});
  for (const auto& parent : parents) {
    if (parent.level >= 6) continue;
    std::vector<PartialOracle> brute;
    for (auto& c : extensions(parent, u).oracles)
      if (check_partial_reflective_serial(c, u).pass) brute.push_back(c);
    std::vector<PartialOracle> lazy;
    ChildEnumerator e(u, parent);
    while (auto c = e.next()) lazy.push_back(*c);
    CHECK(as_set(lazy) == as_set(brute));
    CHECK(lazy.size() == as_set(lazy).size());
  }
}

TEST_CASE("forced queries settle at one") {
  Universe u = single(machines::kEmitA, "1/4", "a");
  SearchOptions opt;
  opt.target_level = 8;
  auto res = search_oracle(u, opt);
  REQUIRE(res.complete);
  REQUIRE(res.levels.size() == 8);
  for (const auto& po : res.levels) CHECK(po.values[0] == Dyadic(1));
}

TEST_CASE("diagonal query converges to one half") {
  Universe u = single(machines::kDiag, "1/2", "a");
  SearchOptions opt;
  opt.target_level = 10;
  auto res = search_oracle(u, opt);
  REQUIRE(res.complete);
  for (const auto& po : res.levels) {
    Dyadic d = po.values[0] - D("1/2");
    if (d.sign() < 0) d = -d;
    CHECK(d <= Dyadic::unit(po.level));
    CHECK(check_partial_reflective(po, u).pass);
  }
}

TEST_CASE("non-halting machine leaves several legal children") {
  Universe u = single(machines::kLoop, "1/2", "a");
  ChildEnumerator e(u, {0, {}});
  std::vector<PartialOracle> kids;
  while (auto c = e.next()) kids.push_back(*c);
  CHECK(kids.size() == 3);
  SearchOptions opt;
  opt.target_level = 1;
  auto res = search_oracle(u, opt);
  REQUIRE(res.levels.size() == 1);
  CHECK(res.levels[0] == kids.front());
}

TEST_CASE("search is deterministic and follows the extension chain") {
  Universe u = mixed_universe();
  SearchOptions opt;
  opt.target_level = 10;
  auto a = search_oracle(u, opt);
  auto b = search_oracle(u, opt);
  REQUIRE(a.complete);
  CHECK(a.trace == b.trace);
  CHECK(a.levels == b.levels);
  PartialOracle prev{0, {}};
  for (const auto& po : a.levels) {
    CHECK(extends(po, prev));
    prev = po;
  }
}

TEST_CASE("search resumes from a checkpoint") {
  Universe u = mixed_universe();
  auto dir = std::filesystem::temp_directory_path() / "grain_checkpoint_test";
  std::filesystem::remove_all(dir);
  SearchOptions opt;
  opt.target_level = 5;
  opt.checkpoint_dir = dir;
  auto first = search_oracle(u, opt);
  REQUIRE(first.complete);
  Checkpoint cp = read_checkpoint(dir / "level-05.json");
  CHECK(cp.universe_hash == u.hash());
  CHECK(cp.path == first.levels);
  SearchOptions more;
  more.target_level = 9;
  more.resume = cp.path;
  auto resumed = search_oracle(u, more);
  SearchOptions direct;
  direct.target_level = 9;
  auto fresh = search_oracle(u, direct);
  CHECK(resumed.levels == fresh.levels);
  std::filesystem::remove_all(dir);
}

TEST_CASE("node limit aborts with the deepest level") {
  Universe u = mixed_universe();
  SearchOptions opt;
  opt.target_level = 10;
  opt.max_nodes = 4;
  auto res = search_oracle(u, opt);
  CHECK_FALSE(res.complete);
  CHECK(res.stats.deepest == 3);
  CHECK(res.message.find("deepest level 3") != std::string::npos);
}

TEST_CASE("oracle flips") {
  CounterRng rng(1);
  PartialOracle po{3, {Dyadic(1), Dyadic(0), D("1/2")}};
  for (int i = 0; i < 100; ++i) {
    CHECK(oracle_answer(po, 0, rng));
    CHECK_FALSE(oracle_answer(po, 1, rng));
  }
  const int n = 10000;
  int ones = 0;
  for (int i = 0; i < n; ++i) ones += oracle_answer(po, 2, rng);
  CHECK(std::abs(ones / double(n) - 0.5) <= 3 * std::sqrt(0.25 / n));
  CHECK_THROWS_AS(oracle_answer(po, 3, rng), Error);
  CounterRng r1(9), r2(9);
  for (int i = 0; i < 50; ++i) CHECK(oracle_answer(po, 2, r1) == oracle_answer(po, 2, r2));
}

TEST_CASE("universe manifest round trip") {
  Universe u = mixed_universe();
  auto file = std::filesystem::temp_directory_path() / "grain_manifest_test.json";
  {
    std::ofstream out(file);
    out << universe_manifest(u);
  }
  Universe back = load_universe(file);
  CHECK(back.hash() == u.hash());
  CHECK(back.size() == u.size());
  std::filesystem::remove(file);
}
