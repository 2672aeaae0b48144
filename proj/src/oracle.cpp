#include "grain/oracle.hpp"

#include <algorithm>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

namespace grain {

using nlohmann::json;

UniverseCheck validate_universe(const Universe& universe) {
  UniverseCheck check;
  check.certificate.universe_hash = universe.hash();
  for (std::size_t i = 0; i < universe.size(); ++i) {
    const Query& q = universe.query(i);
    const Program& prog = universe.program(q.program);
    if (!prog.in_alphabet(q.symbol))
      check.violations.push_back({prog.name(), "query " + std::to_string(i + 1) + " asks about symbol '" + q.symbol +
                                                   "' outside the program's output type"});
  }
  for (std::size_t c = 0; c < universe.contexts().size(); ++c) {
    const Context& ctx = universe.contexts()[c];
    const Program& prog = universe.program(ctx.program);
    ++check.certificate.contexts;
    for (std::size_t site : prog.reachable_query_sites()) {
      const QuerySpec& spec = prog.code()[site].query;
      ++check.certificate.edges;
      if (spec.is_self() && !prog.self_index()) {
        check.violations.push_back({prog.name(), "unresolved SELF in query at instruction " + std::to_string(site)});
        continue;
      }
      auto subject = universe.subject_of(ctx.program, spec);
      Input input = spec.instantiate(ctx.input);
      std::string shown = "(" + spec.subject + ", [" + format_input(input) + "], " + spec.p.str() + ", " + spec.symbol + ")";
      if (!subject) {
        check.violations.push_back(
            {prog.name(), "queries program '" + spec.subject + "' which is not in the universe: " + shown});
        continue;
      }
      if (!universe.program(*subject).in_alphabet(spec.symbol)) {
        check.violations.push_back({prog.name(), "query " + shown + " uses a symbol outside '" +
                                                     universe.program(*subject).name() + "' output type"});
        continue;
      }
      if (!universe.find(*subject, input, spec.p, spec.symbol))
        check.violations.push_back({prog.name(), "reaches unlisted query on '" + universe.program(*subject).name() +
                                                     "': " + shown});
    }
  }
  check.closed = check.violations.empty();
  return check;
}

std::vector<OutcomeDistribution> context_outcomes(const PartialOracle& po, const Universe& universe, bool parallel) {
  const std::size_t n = std::min<std::size_t>(po.level, universe.size());
  std::vector<std::size_t> active;
  std::vector<char> seen(universe.contexts().size(), 0);
  for (std::size_t j = 0; j < n; ++j) {
    std::size_t c = universe.context_of(j);
    if (!seen[c]) {
      seen[c] = 1;
      active.push_back(c);
    }
  }
  std::vector<OutcomeDistribution> out(universe.contexts().size());
  std::exception_ptr failure;
  const long count = static_cast<long>(active.size());
#pragma omp parallel for schedule(dynamic) if (parallel && count > 1)
  for (long i = 0; i < count; ++i) {
    try {
      const Context& ctx = universe.contexts()[active[static_cast<std::size_t>(i)]];
      out[active[static_cast<std::size_t>(i)]] = run_bounded(universe, ctx.program, ctx.input, po.level, po);
    } catch (...) {
#pragma omp critical(context_outcomes_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

namespace {

Dyadic others_mass(const OutcomeDistribution& d, std::size_t symbol) {
  Dyadic s(0);
  for (std::size_t b = 0; b < d.mass.size(); ++b)
    if (b != symbol) s += d.mass[b];
  return s;
}

bool is_boundary(const Dyadic& v) { return v.is_zero() || v == Dyadic(1); }

ReflectivityReport evaluate_clauses(const PartialOracle& po, const Universe& universe,
                                    const std::vector<OutcomeDistribution>& lambda) {
  ReflectivityReport report;
  const std::size_t n = std::min<std::size_t>(po.level, universe.size());
  if (po.values.size() != n) {
    report.pass = false;
    report.violations.push_back({0, Clause::Lower, "oracle stores " + std::to_string(po.values.size()) +
                                                       " values but level " + std::to_string(po.level) + " needs " +
                                                       std::to_string(n)});
    return report;
  }
  for (std::size_t j = 0; j < n; ++j) {
    const Dyadic& v = po.values[j];
    if (v < Dyadic(0) || Dyadic(1) < v || !v.on_grid(po.level))
      report.violations.push_back({j, Clause::Lower, "value " + v.str() + " is off the level grid"});
  }
  for (std::size_t j = 0; j < n; ++j) {
    const Query& q = universe.query(j);
    const OutcomeDistribution& d = lambda[universe.context_of(j)];
    const std::size_t a = universe.program(q.program).symbol_index(q.symbol);
    const Dyadic& v = po.values[j];
    if (q.p < d.mass[a] && v != Dyadic(1))
      report.violations.push_back(
          {j, Clause::Lower, "p=" + q.p.str() + " < lambda=" + d.mass[a].str() + " but value " + v.str()});
    Dyadic upper = Dyadic(1) - others_mass(d, a);
    if (upper < q.p && !v.is_zero())
      report.violations.push_back(
          {j, Clause::Upper, "p=" + q.p.str() + " > 1 - others=" + upper.str() + " but value " + v.str()});
  }
  // Per (context, symbol): non-increasing in p with at most one interior value.
  std::map<std::pair<std::size_t, std::string>, std::vector<std::size_t>> lines;
  for (std::size_t j = 0; j < n; ++j) lines[{universe.context_of(j), universe.query(j).symbol}].push_back(j);
  for (auto& [key, idx] : lines) {
    std::sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) { return universe.query(x).p < universe.query(y).p; });
    std::size_t interior = 0;
    for (std::size_t t = 0; t < idx.size(); ++t) {
      if (!is_boundary(po.values[idx[t]]) && ++interior == 2)
        report.violations.push_back({idx[t], Clause::Monotone, "second value strictly between 0 and 1"});
      if (t > 0 && po.values[idx[t - 1]] < po.values[idx[t]])
        report.violations.push_back({idx[t], Clause::Monotone, "value increases with p"});
    }
  }
  // Per context: sum of smallest zero-points >= 1 and sum of largest one-points <= 1.
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t j = 0; j < n; ++j) groups[universe.context_of(j)].push_back(j);
  for (const auto& [ctx, idx] : groups) {
    const Program& prog = universe.program(universe.contexts()[ctx].program);
    Dyadic sum_min(0), sum_max(0);
    for (const auto& sym : prog.alphabet()) {
      std::optional<Dyadic> lo, hi;
      for (std::size_t j : idx) {
        const Query& q = universe.query(j);
        if (q.symbol != sym) continue;
        if (po.values[j].is_zero() && (!lo || q.p < *lo)) lo = q.p;
        if (po.values[j] == Dyadic(1) && (!hi || *hi < q.p)) hi = q.p;
      }
      sum_min += lo.value_or(Dyadic(1));
      sum_max += hi.value_or(Dyadic(0));
    }
    if (sum_min < Dyadic(1))
      report.violations.push_back({idx.front(), Clause::Simplex, "sum of zero-points " + sum_min.str() + " < 1"});
    if (Dyadic(1) < sum_max)
      report.violations.push_back({idx.front(), Clause::Simplex, "sum of one-points " + sum_max.str() + " > 1"});
  }
  report.pass = report.violations.empty();
  return report;
}

}  // namespace

ReflectivityReport check_partial_reflective(const PartialOracle& po, const Universe& universe) {
  return evaluate_clauses(po, universe, context_outcomes(po, universe, true));
}

ReflectivityReport check_partial_reflective_serial(const PartialOracle& po, const Universe& universe) {
  return evaluate_clauses(po, universe, context_outcomes(po, universe, false));
}

std::vector<Dyadic> refinements(const Dyadic& old, unsigned k) {
  const Dyadic step = Dyadic::unit(k + 1);
  std::vector<Dyadic> out;
  for (const Dyadic& c : {old - step, old, old + step})
    if (!(c < Dyadic(0)) && !(Dyadic(1) < c)) out.push_back(c);
  return out;
}

namespace {

std::vector<Dyadic> grid(unsigned k) {
  std::vector<Dyadic> out;
  const unsigned long n = 1UL << k;
  for (unsigned long i = 0; i <= n; ++i) out.push_back(Dyadic::from_grid(mpz_class(i), k));
  return out;
}

}  // namespace

ExtensionList extensions(const PartialOracle& po, const Universe& universe) {
  ExtensionList list;
  const unsigned k = po.level;
  const std::size_t n0 = po.values.size();
  const std::size_t n1 = std::min<std::size_t>(k + 1, universe.size());
  list.status = n1 > n0 ? ExtensionStatus::NewQuery : ExtensionStatus::RefineOnly;
  std::vector<std::vector<Dyadic>> domains;
  for (const auto& v : po.values) domains.push_back(refinements(v, k));
  if (n1 > n0) domains.push_back(grid(k + 1));
  std::vector<std::size_t> pos(domains.size(), 0);
  for (;;) {
    PartialOracle child{k + 1, {}};
    for (std::size_t i = 0; i < domains.size(); ++i) child.values.push_back(domains[i][pos[i]]);
    list.oracles.push_back(std::move(child));
    std::size_t i = domains.size();
    while (i > 0) {
      --i;
      if (++pos[i] < domains[i].size()) break;
      pos[i] = 0;
      if (i == 0) return list;
    }
    if (domains.empty()) return list;
  }
}

bool extends(const PartialOracle& child, const PartialOracle& parent) {
  if (child.level != parent.level + 1 || child.values.size() < parent.values.size()) return false;
  if (child.values.size() > parent.values.size() + 1) return false;
  const Dyadic step = Dyadic::unit(child.level);
  for (const auto& v : child.values)
    if (!v.on_grid(child.level) || v < Dyadic(0) || Dyadic(1) < v) return false;
  for (std::size_t i = 0; i < parent.values.size(); ++i) {
    Dyadic d = child.values[i] - parent.values[i];
    if (d.sign() < 0) d = -d;
    if (step < d) return false;
  }
  return true;
}

struct ChildEnumerator::Impl {
  const Universe& u;
  PartialOracle parent;
  unsigned level;
  std::size_t n;
  std::vector<std::vector<Dyadic>> domain;  // ordered candidates per variable
  std::vector<std::vector<Dyadic>> live;    // candidates left after forward checking
  std::vector<std::size_t> cursor;
  std::vector<Dyadic> value;
  std::vector<std::vector<std::size_t>> lambda_at;  // clause-1/2 checks unlocked by each variable
  std::vector<char> prefilter;                      // clause 1/2 decidable before the variable is chosen
  std::vector<std::unordered_map<std::string, OutcomeDistribution>> cache;  // per context
  std::size_t depth = 0;
  std::size_t tested = 0;
  bool started = false;
  bool advance_last = false;
  bool done = false;

  Impl(const Universe& universe, const PartialOracle& p)
      : u(universe), parent(p), level(p.level + 1), n(std::min<std::size_t>(p.level + 1, universe.size())) {
    cache.resize(u.contexts().size());
    // Parent-level bounds give a crossover estimate used only for ordering.
    std::vector<OutcomeDistribution> coarse(u.contexts().size());
    std::vector<char> have(u.contexts().size(), 0);
    for (std::size_t j = 0; j < n; ++j) {
      std::size_t c = u.context_of(j);
      if (have[c]) continue;
      const Context& ctx = u.contexts()[c];
      coarse[c] = run_bounded(u, ctx.program, ctx.input, parent.level, parent);
      have[c] = 1;
    }
    const Dyadic half = Dyadic::unit(1);
    for (std::size_t j = 0; j < n; ++j) {
      const Query& q = u.query(j);
      std::vector<Dyadic> cand = j < parent.values.size() ? refinements(parent.values[j], parent.level) : grid(level);
      const OutcomeDistribution& d = coarse[u.context_of(j)];
      const std::size_t a = u.program(q.program).symbol_index(q.symbol);
      Dyadic mid = (d.mass[a] + Dyadic(1) - others_mass(d, a)).half();
      Dyadic target = q.p < mid ? Dyadic(1) : mid < q.p ? Dyadic(0) : half;
      std::stable_sort(cand.begin(), cand.end(), [&](const Dyadic& x, const Dyadic& y) {
        Dyadic dx = x - target, dy = y - target;
        if (dx.sign() < 0) dx = -dx;
        if (dy.sign() < 0) dy = -dy;
        return dx < dy;
      });
      domain.push_back(std::move(cand));
    }
    lambda_at.resize(n);
    prefilter.assign(n, 0);
    for (std::size_t j = 0; j < n; ++j) {
      std::size_t trigger = j;
      bool early = true;
      for (std::size_t d : u.dependencies(u.context_of(j))) {
        if (d >= n) continue;
        trigger = std::max(trigger, d);
        if (d >= j) early = false;
      }
      lambda_at[trigger].push_back(j);
      prefilter[j] = early;
    }
    live.resize(n);
    cursor.assign(n, 0);
    value.assign(n, Dyadic(0));
  }

  const OutcomeDistribution& lambda(std::size_t context) {
    std::string key;
    for (std::size_t d : u.dependencies(context))
      if (d < n) key += value[d].str() + ";";
    auto& slot = cache[context];
    auto it = slot.find(key);
    if (it != slot.end()) return it->second;
    const Context& ctx = u.contexts()[context];
    PartialOracle po{level, value};
    return slot.emplace(key, run_bounded(u, ctx.program, ctx.input, level, po)).first->second;
  }

  bool clause12(std::size_t j, const Dyadic& v) {
    const Query& q = u.query(j);
    const OutcomeDistribution& d = lambda(u.context_of(j));
    const std::size_t a = u.program(q.program).symbol_index(q.symbol);
    if (q.p < d.mass[a] && v != Dyadic(1)) return false;
    if (Dyadic(1) - others_mass(d, a) < q.p && !v.is_zero()) return false;
    return true;
  }

  // Monotonicity and simplex bounds among assigned members of i's context.
  bool group_ok(std::size_t i) {
    const std::size_t ctx = u.context_of(i);
    const Query& qi = u.query(i);
    const Dyadic& vi = value[i];
    for (std::size_t j : u.members(ctx)) {
      if (j >= i) break;
      const Query& qj = u.query(j);
      if (qj.symbol != qi.symbol) continue;
      if (qj.p < qi.p && value[j] < vi) return false;
      if (qi.p < qj.p && vi < value[j]) return false;
      if (!is_boundary(vi) && !is_boundary(value[j])) return false;
    }
    const Program& prog = u.program(qi.program);
    Dyadic sum_min(0), sum_max(0);
    for (const auto& sym : prog.alphabet()) {
      std::optional<Dyadic> lo, hi;
      for (std::size_t j : u.members(ctx)) {
        if (j > i) break;
        const Query& q = u.query(j);
        if (q.symbol != sym) continue;
        if (value[j].is_zero() && (!lo || q.p < *lo)) lo = q.p;
        if (value[j] == Dyadic(1) && (!hi || *hi < q.p)) hi = q.p;
      }
      sum_min += lo.value_or(Dyadic(1));
      sum_max += hi.value_or(Dyadic(0));
    }
    return !(sum_min < Dyadic(1)) && !(Dyadic(1) < sum_max);
  }

  void enter(std::size_t i) {
    cursor[i] = 0;
    live[i].clear();
    for (const auto& v : domain[i]) {
      if (prefilter[i] && !clause12(i, v)) continue;
      live[i].push_back(v);
    }
  }

  bool consistent(std::size_t i) {
    if (!group_ok(i)) return false;
    for (std::size_t j : lambda_at[i]) {
      if (prefilter[j] && j == i) continue;
      if (!clause12(j, value[j])) return false;
    }
    return true;
  }

  std::optional<PartialOracle> next() {
    if (done) return std::nullopt;
    if (!started) {
      started = true;
      if (n == 0) {
        done = true;
        return PartialOracle{level, {}};
      }
      enter(0);
    } else if (advance_last) {
      advance_last = false;
      ++cursor[depth];
    }
    for (;;) {
      const std::size_t i = depth;
      if (cursor[i] >= live[i].size()) {
        if (i == 0) {
          done = true;
          return std::nullopt;
        }
        --depth;
        ++cursor[depth];
        continue;
      }
      value[i] = live[i][cursor[i]];
      ++tested;
      if (!consistent(i)) {
        ++cursor[i];
        continue;
      }
      if (i + 1 == n) {
        advance_last = true;
        return PartialOracle{level, value};
      }
      depth = i + 1;
      enter(depth);
    }
  }
};

ChildEnumerator::ChildEnumerator(const Universe& universe, const PartialOracle& parent)
    : impl_(std::make_unique<Impl>(universe, parent)) {}
ChildEnumerator::~ChildEnumerator() = default;
ChildEnumerator::ChildEnumerator(ChildEnumerator&&) noexcept = default;
ChildEnumerator& ChildEnumerator::operator=(ChildEnumerator&&) noexcept = default;

std::optional<PartialOracle> ChildEnumerator::next() { return impl_->next(); }
std::size_t ChildEnumerator::candidates() const { return impl_->tested; }

namespace {

std::string hex(std::uint64_t h) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string level_file(unsigned level) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "level-%02u.json", level);
  return buf;
}

}  // namespace

SearchResult search_oracle(const Universe& universe, const SearchOptions& options) {
  UniverseCheck closure = validate_universe(universe);
  if (!closure.closed) {
    std::string msg = "universe is not closed:";
    for (const auto& v : closure.violations) msg += "\n  " + v.program + ": " + v.detail;
    throw Error(msg);
  }
  SearchResult result;
  struct Frame {
    PartialOracle node;
    ChildEnumerator children;
  };
  std::vector<Frame> stack;
  std::unordered_set<std::uint64_t> visited;
  auto log = [&](const std::string& line) {
    if (options.record_trace) result.trace.push_back(line);
  };
  auto push = [&](PartialOracle node) {
    visited.insert(node.hash());
    ++result.stats.nodes;
    result.stats.deepest = std::max(result.stats.deepest, node.level);
    log("push " + std::to_string(node.level) + " " + hex(node.hash()));
    ChildEnumerator children(universe, node);
    stack.push_back({std::move(node), std::move(children)});
    if (options.checkpoint_dir && stack.back().node.level > 0) {
      std::vector<PartialOracle> path;
      for (std::size_t i = 1; i < stack.size(); ++i) path.push_back(stack[i].node);
      write_checkpoint(*options.checkpoint_dir / level_file(stack.back().node.level), universe, path);
    }
  };

  if (options.checkpoint_dir) std::filesystem::create_directories(*options.checkpoint_dir);
  push(PartialOracle{0, {}});
  for (const auto& target : options.resume) {
    if (!extends(target, stack.back().node)) throw Error("resume path does not extend level " + std::to_string(stack.back().node.level));
    bool found = false;
    while (auto child = stack.back().children.next()) {
      if (*child == target) {
        found = true;
        break;
      }
      visited.insert(child->hash());
    }
    if (!found) throw Error("resume path is not reflective at level " + std::to_string(target.level));
    push(target);
  }

  while (!stack.empty()) {
    Frame& top = stack.back();
    if (top.node.level >= options.target_level) {
      result.complete = true;
      break;
    }
    auto child = top.children.next();
    if (!child) {
      ++result.stats.backtracks;
      result.stats.candidates += top.children.candidates();
      log("pop " + std::to_string(top.node.level) + " " + hex(top.node.hash()));
      stack.pop_back();
      continue;
    }
    if (visited.count(child->hash())) continue;
    if (result.stats.nodes >= options.max_nodes) {
      result.message = "node limit reached at level " + std::to_string(top.node.level) + ", deepest level " +
                       std::to_string(result.stats.deepest);
      break;
    }
    ReflectivityReport report = check_partial_reflective(*child, universe);
    if (!report.pass)
      throw Error("internal: accepted child at level " + std::to_string(child->level) + " fails clause " +
                  std::to_string(static_cast<int>(report.violations.front().clause)) + ": " +
                  report.violations.front().detail);
    push(std::move(*child));
  }
  for (const auto& f : stack) result.stats.candidates += f.children.candidates();
  for (std::size_t i = 1; i < stack.size(); ++i) result.levels.push_back(stack[i].node);
  if (stack.empty()) result.message = "no reflective extension exists below the root";
  if (result.complete) result.message = "reached level " + std::to_string(options.target_level);
  return result;
}

bool oracle_answer(const PartialOracle& po, std::size_t query, CounterRng& rng) {
  if (query >= po.values.size())
    throw Error("query " + std::to_string(query + 1) + " is above oracle level " + std::to_string(po.level));
  return bernoulli(po.values[query].rational(), rng);
}

Rational AnswerSource::value(const NativeMachine& machine, const Dyadic&, std::string_view) const {
  throw Error("answer source cannot evaluate native machine '" + machine.name + "'");
}

UniverseOracle::UniverseOracle(const Universe& universe, PartialOracle oracle)
    : universe_(universe), oracle_(std::move(oracle)) {}

Rational UniverseOracle::value(const Program& program, const Input& input, const Dyadic& p,
                               std::string_view symbol) const {
  auto prog = universe_.find_program_hash(program.hash());
  if (!prog) throw Error("program '" + program.name() + "' is not in the universe");
  auto idx = universe_.find(*prog, input, p, symbol);
  if (!idx)
    throw Error("query (" + program.name() + ", [" + format_input(input) + "], " + p.str() + ", " +
                std::string(symbol) + ") is not in the universe");
  if (*idx >= oracle_.values.size())
    throw Error("query " + std::to_string(*idx + 1) + " is above oracle level " + std::to_string(oracle_.level));
  return oracle_.values[*idx].rational();
}

namespace {

Input json_input(const json& j) {
  if (j.is_null()) return {};
  if (j.is_string()) return parse_input(j.get<std::string>());
  Input out;
  for (const auto& s : j) out.push_back(s.get<std::string>());
  return out;
}

json read_json(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error("cannot open '" + file.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error("malformed JSON in '" + file.string() + "': " + e.what());
  }
}

}  // namespace

Universe load_universe(const std::filesystem::path& manifest) {
  json doc = read_json(manifest);
  const auto base = manifest.parent_path();
  std::vector<Program> programs;
  try {
    for (const auto& entry : doc.at("programs")) {
      Program prog = entry.contains("source")
                         ? Program::parse(entry.at("source").get<std::string>(), entry.value("name", ""))
                         : Program::load(base / entry.at("file").get<std::string>());
      if (entry.contains("name") && entry.at("name").get<std::string>() != prog.name())
        throw Error("manifest name '" + entry.at("name").get<std::string>() + "' does not match program '" +
                    prog.name() + "'");
      if (entry.contains("hash") && entry.at("hash").get<std::string>() != prog.hash())
        throw Error("hash mismatch for program '" + prog.name() + "': manifest " +
                    entry.at("hash").get<std::string>() + ", computed " + prog.hash());
      programs.push_back(std::move(prog));
    }
    std::vector<Query> queries;
    for (const auto& entry : doc.at("queries")) {
      const std::string ref = entry.at("program").get<std::string>();
      std::optional<std::size_t> idx;
      for (std::size_t i = 0; i < programs.size(); ++i)
        if (programs[i].hash() == ref || programs[i].name() == ref) idx = i;
      if (!idx) throw Error("query refers to unknown program '" + ref + "'");
      Query q{*idx, json_input(entry.value("input", json())), Dyadic::parse(entry.at("p").get<std::string>()),
              entry.at("symbol").get<std::string>()};
      if (entry.contains("type") && entry.at("type").get<std::vector<std::string>>() != programs[*idx].alphabet())
        throw Error("declared type of query on '" + ref + "' does not match the program's output type");
      queries.push_back(std::move(q));
    }
    return Universe(std::move(programs), std::move(queries));
  } catch (const json::exception& e) {
    throw Error("malformed universe manifest '" + manifest.string() + "': " + e.what());
  }
}

std::string universe_manifest(const Universe& universe) {
  json doc;
  doc["programs"] = json::array();
  for (const auto& p : universe.programs())
    doc["programs"].push_back({{"name", p.name()}, {"hash", p.hash()}, {"source", p.encode()}});
  doc["queries"] = json::array();
  for (const auto& q : universe.queries()) {
    const Program& p = universe.program(q.program);
    doc["queries"].push_back({{"program", p.hash()},
                              {"input", format_input(q.input)},
                              {"p", q.p.str()},
                              {"symbol", q.symbol},
                              {"type", p.alphabet()}});
  }
  return doc.dump(2) + "\n";
}

void write_checkpoint(const std::filesystem::path& file, const Universe& universe,
                      const std::vector<PartialOracle>& path) {
  json doc;
  doc["universe"] = universe.hash();
  doc["level"] = path.empty() ? 0 : path.back().level;
  doc["path"] = json::array();
  for (const auto& po : path) {
    json values = json::array();
    for (const auto& v : po.values) values.push_back(v.str());
    doc["path"].push_back({{"level", po.level}, {"values", values}});
  }
  std::ofstream out(file);
  if (!out) throw Error("cannot write checkpoint '" + file.string() + "'");
  out << doc.dump(2) << "\n";
}

Checkpoint read_checkpoint(const std::filesystem::path& file) {
  json doc = read_json(file);
  Checkpoint cp;
  try {
    cp.universe_hash = doc.at("universe").get<std::string>();
    for (const auto& entry : doc.at("path")) {
      PartialOracle po{entry.at("level").get<unsigned>(), {}};
      for (const auto& v : entry.at("values")) po.values.push_back(Dyadic::parse(v.get<std::string>()));
      cp.path.push_back(std::move(po));
    }
  } catch (const json::exception& e) {
    throw Error("malformed checkpoint '" + file.string() + "': " + e.what());
  }
  return cp;
}

}  // namespace grain
