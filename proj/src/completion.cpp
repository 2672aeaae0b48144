#include "grain/completion.hpp"

#include <algorithm>

namespace grain {

QEstimate estimate_q(const AnswerSource& source, const Program& program, const Input& input, std::string_view symbol,
                     unsigned m, ProbeMode mode, CounterRng* rng) {
  if (!program.in_alphabet(symbol))
    throw Error("symbol '" + std::string(symbol) + "' is not in the output type of '" + program.name() + "'");
  if (mode == ProbeMode::Stochastic && !rng) throw Error("stochastic probing needs a random stream");
  QEstimate est;
  est.precision = m;
  const Rational half(1, 2);
  for (unsigned i = 0; i < m; ++i) {
    Dyadic p = est.mid();
    Rational v = source.value(program, input, p, symbol);
    if (v == half) est.hit_half = true;
    if (mode == ProbeMode::Bracket) {
      if (v > half) {
        est.lo = p;
      } else if (v < half) {
        est.hi = p;
      } else {
        est.lo = est.hi = p;
        break;
      }
    } else if (bernoulli(v, *rng)) {
      est.lo = p;
    } else {
      est.hi = p;
    }
  }
  return est;
}

std::vector<Rational> spread_deficit(const std::vector<Rational>& law) {
  Rational total = 0;
  for (const auto& x : law) total += x;
  std::vector<Rational> out = law;
  if (law.empty()) return out;
  Rational share = (1 - total) / static_cast<long>(law.size());
  for (auto& x : out) x += share;
  return out;
}

namespace {

Rational answer_from_crossover(const Rational& q, const Dyadic& p) {
  Rational pr = p.rational();
  if (pr < q) return 1;
  if (q < pr) return 0;
  return Rational(1, 2);
}

}  // namespace

CompletedOracle::CompletedOracle(const Universe& universe, PartialOracle oracle)
    : universe_(universe), oracle_(std::move(oracle)) {}

const CompletedOracle::Entry& CompletedOracle::entry(std::size_t program, const Input& input) const {
  const std::string key = std::to_string(program) + "|" + format_input(input);
  {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
  }
  const Program& prog = universe_.program(program);
  const std::size_t k = prog.alphabet().size();
  OutcomeDistribution d = run_bounded(universe_, program, input, oracle_.level, oracle_);
  Rational halted = 0;
  for (const auto& m : d.mass) halted += m.rational();
  std::vector<Rational> lo(k), hi(k);
  for (std::size_t a = 0; a < k; ++a) {
    lo[a] = d.mass[a].rational();
    hi[a] = 1 - (halted - lo[a]);
  }
  if (auto ctx = universe_.find_context(program, input)) {
    for (std::size_t j : universe_.members(*ctx)) {
      if (j >= oracle_.values.size()) continue;
      const Query& q = universe_.query(j);
      const std::size_t a = prog.symbol_index(q.symbol);
      const Dyadic& v = oracle_.values[j];
      const Rational p = q.p.rational();
      if (!v.is_zero()) lo[a] = std::max(lo[a], p);
      if (v != Dyadic(1)) hi[a] = std::min(hi[a], p);
    }
  }
  Entry e;
  for (std::size_t a = 0; a < k; ++a) {
    if (hi[a] < lo[a]) {
      e.inconsistent = true;
      hi[a] = lo[a];
    }
  }
  std::vector<Rational> q = lo;
  Rational rest = 1;
  for (const auto& x : lo) rest -= x;
  if (rest < 0) {
    e.inconsistent = true;
    Rational total = 1 - rest;
    for (auto& x : q) x /= total;
  } else {
    // Raise the open coordinates evenly until the mass is used up.
    while (rest > 0) {
      std::vector<std::size_t> open;
      for (std::size_t a = 0; a < k; ++a)
        if (q[a] < hi[a]) open.push_back(a);
      if (open.empty()) {
        e.inconsistent = true;
        Rational share = rest / static_cast<long>(k);
        for (auto& x : q) x += share;
        break;
      }
      Rational share = rest / static_cast<long>(open.size());
      Rational room = hi[open[0]] - q[open[0]];
      for (std::size_t a : open) room = std::min<Rational>(room, hi[a] - q[a]);
      Rational step = std::min(share, room);
      for (std::size_t a : open) q[a] += step;
      rest -= step * static_cast<long>(open.size());
    }
  }
  e.q = std::move(q);
  std::lock_guard<std::mutex> lock(mutex_);
  return cache_.emplace(key, std::move(e)).first->second;
}

Rational CompletedOracle::value(const Program& program, const Input& input, const Dyadic& p,
                                std::string_view symbol) const {
  auto prog = universe_.find_program_hash(program.hash());
  if (!prog) throw Error("program '" + program.name() + "' is not in the universe");
  const std::size_t a = program.symbol_index(symbol);
  if (a == Program::npos) throw Error("symbol '" + std::string(symbol) + "' is not in the output type");
  if (auto idx = universe_.find(*prog, input, p, symbol); idx && *idx < oracle_.values.size())
    return oracle_.values[*idx].rational();
  return answer_from_crossover(entry(*prog, input).q[a], p);
}

std::vector<Rational> CompletedOracle::crossovers(const Program& program, const Input& input) const {
  auto prog = universe_.find_program_hash(program.hash());
  if (!prog) throw Error("program '" + program.name() + "' is not in the universe");
  return entry(*prog, input).q;
}

bool CompletedOracle::inconsistent(const Program& program, const Input& input) const {
  auto prog = universe_.find_program_hash(program.hash());
  if (!prog) throw Error("program '" + program.name() + "' is not in the universe");
  return entry(*prog, input).inconsistent;
}

std::vector<Rational> FairOracle::crossovers(const Program& program, const Input& input) const {
  return spread_deficit(lambda_exact(program, input));
}

std::vector<Rational> FairOracle::crossovers(const NativeMachine& machine) const { return spread_deficit(machine.law); }

Rational FairOracle::value(const Program& program, const Input& input, const Dyadic& p,
                           std::string_view symbol) const {
  const std::size_t a = program.symbol_index(symbol);
  if (a == Program::npos) throw Error("symbol '" + std::string(symbol) + "' is not in the output type");
  return answer_from_crossover(crossovers(program, input)[a], p);
}

Rational FairOracle::value(const NativeMachine& machine, const Dyadic& p, std::string_view symbol) const {
  auto it = std::find(machine.alphabet.begin(), machine.alphabet.end(), symbol);
  if (it == machine.alphabet.end()) throw Error("symbol '" + std::string(symbol) + "' is not in the output type");
  return answer_from_crossover(crossovers(machine)[static_cast<std::size_t>(it - machine.alphabet.begin())], p);
}

std::vector<QEstimate> completed_conditional(const PartialOracle& po, const Universe& universe, std::size_t program,
                                             const Input& input, unsigned m) {
  CompletedOracle view(universe, po);
  const Program& prog = universe.program(program);
  std::vector<QEstimate> out;
  for (const auto& sym : prog.alphabet()) out.push_back(estimate_q(view, prog, input, sym, m, ProbeMode::Bracket));
  return out;
}

std::optional<std::string> sample_completed(const AnswerSource& source, const Program& program, const Input& input,
                                            CounterRng& rng, unsigned max_iterations) {
  if (program.alphabet().size() != 2)
    throw Error("program '" + program.name() + "' is not binary; sample via completed_conditional instead");
  const std::string& one = program.alphabet()[1];
  Dyadic l(0), h(1), omega(0);
  for (unsigned i = 1; i <= max_iterations; ++i) {
    Dyadic m = (l + h).half();
    if (bernoulli(source.value(program, input, m, one), rng))
      l = m;
    else
      h = m;
    const Dyadic width = Dyadic::unit(i);
    if (rng.bit()) omega += width;
    if (omega + width < l) return one;
    if (h < omega) return program.alphabet()[0];
  }
  return std::nullopt;
}

std::size_t sample_from_estimates(const std::vector<QEstimate>& estimates, CounterRng& rng) {
  Rational total = 0;
  std::vector<Rational> law;
  for (const auto& e : estimates) {
    law.push_back(e.mid().rational());
    total += law.back();
  }
  if (total <= 0) throw Error("estimates carry no mass");
  for (auto& x : law) x /= total;
  std::size_t i = categorical(law, rng);
  return i < law.size() ? i : law.size() - 1;
}

void IntervalPartition::push(std::size_t label, const Dyadic& length) {
  if (length.sign() < 0) throw Error("interval lengths must be non-negative");
  pieces.push_back({label, end() + length});
}

std::optional<std::size_t> IntervalPartition::check(const Dyadic& omega, const Dyadic& width) const {
  Dyadic left(0);
  const Dyadic top = omega + width;
  for (const auto& piece : pieces) {
    if (left <= omega && top <= piece.right) return piece.label;
    left = piece.right;
  }
  return std::nullopt;
}

LscSample sample_lsc(const Approximator& phi, const Input& input, CounterRng& rng, unsigned max_rounds) {
  IntervalPartition partition;
  std::vector<Dyadic> psi;
  Dyadic omega(0);
  LscSample out;
  for (unsigned k = 1; k <= max_rounds; ++k) {
    std::vector<Dyadic> now = phi(input, k);
    if (psi.empty()) psi.assign(now.size(), Dyadic(0));
    if (now.size() != psi.size()) throw Error("approximator changed its alphabet size");
    for (std::size_t a = 0; a < now.size(); ++a) {
      Dyadic delta = now[a] - psi[a];
      if (delta.sign() < 0) throw Error("approximator decreased for symbol " + std::to_string(a));
      psi[a] = now[a];
      partition.push(a, delta);
    }
    if (Dyadic(1) < partition.end()) throw Error("approximator exceeds total mass 1");
    const Dyadic width = Dyadic::unit(k);
    if (rng.bit()) omega += width;
    out.rounds = k;
    if (auto label = partition.check(omega, width)) {
      out.symbol = label;
      return out;
    }
  }
  return out;
}

}  // namespace grain
