// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "grain/completion.hpp"
#include "grain/experiments.hpp"
#include "grain/oracle.hpp"

using namespace grain;

namespace {

const std::filesystem::path kData = GRAIN_DATA_DIR;

struct Outcome {
  bool pass = false;
  std::string detail;
};

Rational R(long n, long d = 1) { return Rational(n, d); }

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

bool within_3_sigma(long hits, long n, double p) {
  const double sigma = std::sqrt(p * (1 - p) / static_cast<double>(n));
  return std::abs(static_cast<double>(hits) / static_cast<double>(n) - p) <= 3 * sigma + 1e-12;
}

// The searched mixed universe is shared by the first three criteria.
struct Searched {
  Universe universe;
  SearchResult result;
  double seconds = 0;
};

const Searched& mixed_search() {
  static const Searched s = [] {
    Searched out;
    out.universe = load_universe(kData / "universes" / "mixed.json");
    SearchOptions opt;
    opt.target_level = 10;
    opt.record_trace = false;
    const auto start = std::chrono::steady_clock::now();
    out.result = search_oracle(out.universe, opt);
    out.seconds = seconds_since(start);
    return out;
  }();
  return s;
}

// Inputs at which a program is queried, plus the empty input.
std::vector<Input> inputs_of(const Universe& u, std::size_t program) {
  std::vector<Input> out{Input{}};
  for (const auto& q : u.queries())
    if (q.program == program && std::find(out.begin(), out.end(), q.input) == out.end()) out.push_back(q.input);
  return out;
}

Outcome oracle_search() {
  const auto& s = mixed_search();
  const auto& u = s.universe;
  if (!validate_universe(u).closed) return {false, "universe is not closed"};
  if (u.size() > 8) return {false, "universe has more than 8 queries"};
  if (!s.result.complete) return {false, "search stopped: " + s.result.message};
  for (const auto& po : s.result.levels)
    if (!check_partial_reflective(po, u).pass)
      return {false, "level " + std::to_string(po.level) + " is not partially reflective"};
  auto diag = u.find_program("diag");
  if (!diag) return {false, "universe has no diagonal machine"};
  std::optional<std::size_t> q;
  for (std::size_t j = 0; j < u.size(); ++j)
    if (u.query(j).program == *diag) q = j;
  if (!q) return {false, "diagonal machine is never queried"};
  const auto& top = s.result.levels.back();
  Dyadic d = top.values[*q] - Dyadic::unit(1);
  if (d.sign() < 0) d = -d;
  const bool close = d <= Dyadic::unit(top.level);
  return {close && s.seconds < 60,
          "K=" + std::to_string(top.level) + " in " + fmt("%.2f s", s.seconds) + ", " + std::to_string(u.size()) +
              " queries, diagonal value " + top.values[*q].str()};
}

Outcome lambda_monotone() {
  const auto& s = mixed_search();
  const auto& u = s.universe;
  const auto& lv = s.result.levels;
  std::size_t comparisons = 0;
  for (std::size_t i = 0; i < u.programs().size(); ++i)
    for (const auto& in : inputs_of(u, i))
      for (std::size_t k = 0; k + 1 < lv.size(); ++k) {
        auto lo = run_bounded(u, i, in, lv[k].level, lv[k]);
        auto hi = run_bounded(u, i, in, lv[k + 1].level, lv[k + 1]);
        for (std::size_t a = 0; a < lo.mass.size(); ++a, ++comparisons)
          if (hi.mass[a] < lo.mass[a])
            return {false, u.program(i).name() + " symbol " + lo.alphabet[a] + " drops at level " +
                               std::to_string(lv[k].level)};
      }
  return {true, std::to_string(comparisons) + " per-symbol comparisons"};
}

Outcome completion_simplex() {
  const auto& s = mixed_search();
  const auto& u = s.universe;
  const auto& top = s.result.levels.back();
  const unsigned m = 12;
  std::size_t checked = 0;
  for (std::size_t i = 0; i < u.programs().size(); ++i)
    for (const auto& in : inputs_of(u, i)) {
      auto est = completed_conditional(top, u, i, in, m);
      auto lam = run_bounded(u, i, in, top.level, top);
      Rational sum = 0;
      for (std::size_t a = 0; a < est.size(); ++a) {
        sum += est[a].mid().rational();
        if (lam.mass[a].rational() > est[a].hi.rational() + Dyadic::unit(m).rational())
          return {false, u.program(i).name() + " estimate for " + lam.alphabet[a] + " falls below the bounded mass"};
      }
      const Rational tol = Rational(static_cast<long>(est.size())) * Dyadic::unit(m).rational();
      if (abs(sum - 1) > tol) return {false, u.program(i).name() + " midpoints sum to " + rational_str(sum)};
      ++checked;
    }
  return {true, std::to_string(checked) + " machine inputs at m=12"};
}

Outcome subjective_independence() {
  const auto start = std::chrono::steady_clock::now();
  const unsigned horizon = 6;
  auto mp = matching_pennies();
  auto pd = prisoners_dilemma();
  auto copier = std::make_shared<HistoryPolicy>(mp->player(1).actions, [mp](std::span<const Step> h) -> std::optional<Law> {
    if (h.empty()) return Law{R(1, 2), R(1, 2)};
    Law l{R(1, 4), R(1, 4)};
    l[mp->decode(1, h.back().percept).others[0]] = R(3, 4);
    return l;
  });
  std::vector<std::pair<std::shared_ptr<RepeatedGame>, PolicyPtr>> cases{
      {mp, copier}, {pd, std::make_shared<GrimTrigger>(pd, 1, 0, 1, 2u)}};
  std::size_t contexts = 0;
  for (const auto& [g, other] : cases) {
    const auto& spec = g->player(0);
    auto rewards = spec.rewards;
    std::vector<PolicyPtr> probes{
        uniform_policy(spec.actions), std::make_shared<StationaryPolicy>(spec.actions, Law{R(1, 4), R(3, 4)}),
        std::make_shared<HistoryPolicy>(spec.actions, [rewards](std::span<const Step> h) -> std::optional<Law> {
          if (!h.empty() && rewards[h.back().percept] == 1) return Law{R(1, 4), R(3, 4)};
          return Law{R(5, 8), R(3, 8)};
        })};
    std::vector<ConditionalTable> tables;
    for (const auto& p : probes) tables.push_back(subjective_table(*g, {p, other}, 0, horizon));
    if (tables[0].empty() || tables[0] != tables[1] || tables[0] != tables[2])
      return {false, "tables differ between probes"};
    auto env = subjective_env(g, {other}, 0);
    for (const auto& [ctx, law] : tables[0])
      if (env->law_at(ctx.first, ctx.second) != std::optional<Law>(law))
        return {false, "subjective environment disagrees with the quotient table"};
    contexts += tables[0].size();
  }
  const double secs = seconds_since(start);
  return {secs < 5, std::to_string(contexts) + " contexts to horizon 6 in " + fmt("%.2f s", secs)};
}

void all_histories(unsigned n, History& h, std::vector<History>& out) {
  out.push_back(h);
  if (h.size() == n) return;
  for (Symbol a = 0; a < 2; ++a)
    for (Symbol e = 0; e < 2; ++e) {
      h.push_back({a, e});
      all_histories(n, h, out);
      h.pop_back();
    }
}

Outcome mixture_dominance() {
  const Alphabet acts{"a", "b"};
  std::vector<PolicyPtr> members{
      deterministic_policy(acts, 0), deterministic_policy(acts, 1), uniform_policy(acts),
      std::make_shared<StationaryPolicy>(acts, Law{R(1, 8), R(7, 8)}),
      std::make_shared<HistoryPolicy>(acts, [](std::span<const Step> h) -> std::optional<Law> {
        if (h.empty()) return Law{R(1, 2), R(1, 2)};
        return h.back().percept == 1 ? Law{R(7, 8), R(1, 8)} : Law{R(1, 8), R(7, 8)};
      })};
  std::vector<Rational> w{R(1, 2), R(1, 8), R(1, 8), R(1, 8), R(1, 8)};
  auto zeta = mixture_policy(members, w);
  std::vector<History> hs;
  History h;
  all_histories(6, h, hs);
  for (const auto& x : hs) {
    const Rational z = zeta->probability(x);
    for (std::size_t k = 0; k < members.size(); ++k)
      if (z < w[k] * members[k]->probability(x))
        return {false, "dominance fails for member " + std::to_string(k)};
  }
  return {true, std::to_string(hs.size()) + " histories, 5 members"};
}

Outcome nash_certificates() {
  auto g = Discount::geometric(Dyadic::unit(2));
  const unsigned T = 8, K = 10;
  auto mp = nash_profile(matching_pennies(), g, T, K);
  std::string detail = "matching pennies gaps";
  bool pass = mp.certified;
  for (const auto& gap : mp.gaps) {
    detail += " " + fmt("%.2e", to_double(gap.hi));
    pass = pass && to_double(gap.hi) <= 0.05;
  }
  auto pd = nash_profile(prisoners_dilemma(), g, T, K);
  const Rational bound = g.slack(1, T);
  detail += "; prisoner's dilemma P(C)";
  for (std::size_t i = 0; i < 2; ++i) {
    // Probability of the second action (Defect) is one minus the first.
    detail += " " + pd.first_action[i].str();
    pass = pass && pd.first_action[i] == Dyadic(0) && pd.gaps[i].hi <= bound;
  }
  return {pass, detail + ", gap bound " + fmt("%.2e", to_double(bound))};
}

const CheckResult* find_check(const ExperimentResult& r, const std::string& prefix) {
  for (const auto& c : r.checks)
    if (c.name.find(prefix) != std::string::npos) return &c;
  return nullptr;
}

Outcome grim_trigger() {
  auto config = load_config(kData / "configs" / "grim_prisoners_dilemma.json");
  auto res = run_experiment(config);
  const auto* c = find_check(res, "defects with probability 1");
  if (!c) return {false, "no defection check configured"};
  return {c->pass && res.runs.size() == 20, c->threshold + ", " + std::to_string(res.runs.size()) + " repetitions"};
}

Outcome thompson_convergence() {
  auto config = load_config(kData / "configs" / "ts_matching_pennies.json");
  const auto start = std::chrono::steady_clock::now();
  auto res = run_experiment(config);
  const double secs = seconds_since(start);
  bool pass = config.steps == 2000 && config.repetitions == 20 && config.window == 500 &&
              config.epsilon == R(1, 20) && !res.checks.empty() && res.passed() && secs < 600;
  std::string detail;
  for (const auto& c : res.checks) detail += c.name + " " + fmt("%.4f", c.value) + "; ";
  return {pass, detail + fmt("%.1f s", secs)};
}

Outcome thompson_dual_form() {
  const PlayerSpec spec{{"a", "b"}, {"0", "1"}, {R(0), R(1)}};
  auto bandit = [&](Rational pa, Rational pb) -> EnvironmentPtr {
    return std::make_shared<HistoryEnvironment>(spec, [pa, pb](std::span<const Step>, Symbol a) -> std::optional<Law> {
      const Rational p = a == 0 ? pa : pb;
      return Law{1 - p, p};
    });
  };
  std::vector<EnvironmentPtr> cls{bandit(R(3, 4), R(1, 4)), bandit(R(1, 4), R(3, 4))};
  auto ts = std::make_shared<ThompsonPolicy>(cls, std::vector<Rational>{R(1, 4), R(3, 4)},
                                             Discount::geometric(Dyadic::unit(1)), 2, TieBreak::lexicographic(),
                                             [](unsigned) { return R(1, 4); });
  const auto& truth = *cls[0];
  const unsigned n = 4;

  // Exact law of the evaluator's interaction histories.
  std::map<History, Rational> exact;
  std::function<void(History&, const StatePtr&, const Rational&)> walk = [&](History& h, const StatePtr& s,
                                                                              const Rational& mass) {
    if (h.size() == n) {
      exact[h] += mass;
      return;
    }
    auto pl = ts->law(s);
    for (Symbol a = 0; a < pl->size(); ++a) {
      if ((*pl)[a] == 0) continue;
      auto el = truth.law_at(h, a);
      for (Symbol e = 0; e < el->size(); ++e) {
        if ((*el)[e] == 0) continue;
        h.push_back({a, e});
        walk(h, ts->advance(s, {a, e}), mass * (*pl)[a] * (*el)[e]);
        h.pop_back();
      }
    }
  };
  History root;
  walk(root, ts->initial(), Rational(1));

  const long runs = 100000;
  std::map<History, long> counts;
  for (long r = 0; r < runs; ++r) {
    ThompsonSampler agent(ts, CounterRng(derive_seed(17, static_cast<std::uint64_t>(r), 1)));
    CounterRng env(derive_seed(17, static_cast<std::uint64_t>(r), 0));
    History h;
    for (unsigned t = 0; t < n; ++t) {
      Symbol a = agent.act();
      Symbol e = categorical(*truth.law_at(h, a), env);
      h.push_back({a, e});
      agent.observe({a, e});
    }
    ++counts[h];
  }
  double tv = 0;
  for (const auto& [h, p] : exact) {
    auto it = counts.find(h);
    tv += std::abs((it == counts.end() ? 0.0 : static_cast<double>(it->second) / runs) - to_double(p));
  }
  for (const auto& [h, c] : counts)
    if (!exact.count(h)) return {false, "sampler produced a history the evaluator gives probability zero"};
  tv /= 2;
  return {tv <= 0.02, "TV " + fmt("%.4f", tv) + " over " + std::to_string(exact.size()) + " histories, 10^5 runs"};
}

Outcome sampler_laws() {
  const long n = 20000;
  CounterRng rng(2024);
  std::string detail;
  bool pass = true;

  Approximator even = [](const Input&, unsigned k) {
    Dyadic v = (Dyadic(1) - Dyadic::unit(k)).half();
    return std::vector<Dyadic>{v, v};
  };
  long a = 0;
  for (long i = 0; i < n; ++i) {
    auto s = sample_lsc(even, {}, rng, 64);
    a += s.symbol && *s.symbol == 0;
  }
  pass = pass && within_3_sigma(a, n, 0.5);
  detail += "lsc even " + fmt("%.4f", static_cast<double>(a) / n);

  Approximator defective = [](const Input&, unsigned k) {
    Dyadic v = (Dyadic(1) - Dyadic::unit(k)).half().half();
    return std::vector<Dyadic>{v, v};
  };
  long none = 0, first = 0;
  for (long i = 0; i < n; ++i) {
    auto s = sample_lsc(defective, {}, rng, 64);
    if (!s.symbol) ++none;
    else first += *s.symbol == 0;
  }
  pass = pass && within_3_sigma(none, n, 0.5) && within_3_sigma(first, n, 0.25);
  detail += ", lsc non-halt " + fmt("%.4f", static_cast<double>(none) / n);

  FairOracle fair;
  Program third = make_bernoulli_program(Dyadic::parse("5/16"), "b", "a", "third");
  long bs = 0;
  for (long i = 0; i < n; ++i) bs += sample_completed(fair, third, {}, rng) == std::optional<std::string>("b");
  pass = pass && within_3_sigma(bs, n, 5.0 / 16);
  detail += ", completed 5/16 " + fmt("%.4f", static_cast<double>(bs) / n);

  Universe diag({Program::load(kData / "machines" / "diag.gm")}, {Query{0, {}, Dyadic::unit(1), "a"}});
  SearchOptions opt;
  opt.target_level = 10;
  opt.record_trace = false;
  auto res = search_oracle(diag, opt);
  if (!res.complete) return {false, "diagonal search failed"};
  CompletedOracle view(diag, res.levels.back());
  bs = 0;
  for (long i = 0; i < n; ++i)
    bs += sample_completed(view, diag.program(0), {}, rng) == std::optional<std::string>(diag.program(0).alphabet()[1]);
  pass = pass && within_3_sigma(bs, n, 0.5);
  detail += ", completed diagonal " + fmt("%.4f", static_cast<double>(bs) / n);
  return {pass, detail};
}

Outcome anti_predictor() {
  auto fair = std::make_shared<FairOracle>();
  std::vector<Program> machines{
      Program::load(kData / "machines" / "always_h.gm"), Program::load(kData / "machines" / "always_t.gm"),
      Program::load(kData / "machines" / "copy_last.gm"),
      Program::parse(".name own_last\n.type H T\nread r0 -2\njeq r0 T tails\nemit H\ntails: emit T\n"),
      Program::parse(".name flip_own_last\n.type H T\nread r0 -2\njeq r0 T heads\nemit T\nheads: emit H\n")};
  auto mp = matching_pennies();
  const auto& spec = mp->player(0);
  auto anti = std::make_shared<AntiPredictor>(machines, fair, spec.percepts);
  auto opponent = uniform_policy(mp->player(1).actions);

  const unsigned seeds = 200;
  unsigned matched = 0;
  for (unsigned r = 0; r < seeds; ++r) {
    CounterRng own(derive_seed(31, r, 1)), other(derive_seed(31, r, 2));
    StatePtr s = anti->initial(), o = opponent->initial();
    StatePtr gs = mp->initial();
    History h;
    bool ok = true;
    for (std::size_t k = 0; k < machines.size(); ++k) {
      auto predicted = lambda_exact(machines[k], encode_history(h, spec.actions, spec.percepts));
      Symbol a = categorical(*anti->law(s), own);
      ok = ok && predicted[a] == 0;
      std::vector<Symbol> acts{a, categorical(*opponent->law(o), other)};
      auto outcome = mp->law(gs, acts).front().first;
      gs = mp->advance(gs, {acts, outcome});
      const Step mine{a, outcome[0]};
      h.push_back(mine);
      s = anti->advance(s, mine);
      o = opponent->advance(o, {acts[1], outcome[1]});
    }
    matched += ok;
  }
  return {matched == seeds, std::to_string(matched) + "/" + std::to_string(seeds) + " runs against 5 machines"};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, Outcome (*)()>> criteria{
      {"oracle search soundness", oracle_search},
      {"bounded masses grow with the level", lambda_monotone},
      {"completion simplex and domination", completion_simplex},
      {"subjective environment independence", subjective_independence},
      {"mixture dominance", mixture_dominance},
      {"equilibrium certificates", nash_certificates},
      {"grim-trigger defection", grim_trigger},
      {"Thompson sampling convergence", thompson_convergence},
      {"Thompson sampling dual forms agree", thompson_dual_form},
      {"sampler laws", sampler_laws},
      {"anti-predictor", anti_predictor}};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s  %2zu. %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str(),
                seconds_since(start));
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed ? 1 : 0;
}
