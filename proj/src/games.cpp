#include "grain/games.hpp"

#include <omp.h>

#include <algorithm>
#include <set>

namespace grain {

History project(const JointHistory& h, std::size_t player) {
  History out;
  out.reserve(h.size());
  for (const auto& s : h) out.push_back({s.actions.at(player), s.percepts.at(player)});
  return out;
}

Symbol index_of(const Alphabet& alphabet, std::string_view name) {
  auto it = std::find(alphabet.begin(), alphabet.end(), name);
  if (it == alphabet.end()) throw Error("unknown symbol '" + std::string(name) + "'");
  return static_cast<Symbol>(it - alphabet.begin());
}

namespace {

class ConstantState : public State {
 public:
  std::optional<std::uint64_t> key() const override { return 0; }
};

class HistoryState : public State {
 public:
  explicit HistoryState(History h) : history(std::move(h)) {}
  History history;
};

StatePtr extend_history(const StatePtr& state, const Step& step) {
  const auto& h = static_cast<const HistoryState&>(*state).history;
  History next = h;
  next.push_back(step);
  return std::make_shared<HistoryState>(std::move(next));
}

const History& history_of(const StatePtr& state) { return static_cast<const HistoryState&>(*state).history; }

}  // namespace

StatePtr constant_state() {
  static const StatePtr s = std::make_shared<ConstantState>();
  return s;
}

StatePtr Policy::state_after(std::span<const Step> history) const {
  StatePtr s = initial();
  for (const auto& step : history) s = advance(s, step);
  return s;
}

std::optional<Law> Policy::law_at(std::span<const Step> history) const { return law(state_after(history)); }

Rational Policy::probability(std::span<const Step> history) const {
  Rational p = 1;
  StatePtr s = initial();
  for (const auto& step : history) {
    auto l = law(s);
    if (!l) throw Error("undefined policy conditional");
    p *= l->at(step.action);
    if (p == 0) return p;
    s = advance(s, step);
  }
  return p;
}

StatePtr Environment::state_after(std::span<const Step> history) const {
  StatePtr s = initial();
  for (const auto& step : history) s = advance(s, step);
  return s;
}

std::optional<Law> Environment::law_at(std::span<const Step> history, Symbol action) const {
  return law(state_after(history), action);
}

Rational Environment::probability(std::span<const Step> history) const {
  Rational p = 1;
  StatePtr s = initial();
  for (const auto& step : history) {
    auto l = law(s, step.action);
    if (!l) return 0;
    p *= l->at(step.percept);
    if (p == 0) return p;
    s = advance(s, step);
  }
  return p;
}

// ---- repeated games

RepeatedGame::RepeatedGame(std::vector<Alphabet> actions, std::vector<std::vector<Dyadic>> payoffs)
    : actions_(std::move(actions)), payoffs_(std::move(payoffs)) {
  const std::size_t n = actions_.size();
  if (n == 0) throw Error("a game needs at least one player");
  std::size_t count = 1;
  for (const auto& a : actions_) {
    if (a.empty()) throw Error("every player needs at least one action");
    count *= a.size();
  }
  if (payoffs_.size() != count)
    throw Error("payoff table has " + std::to_string(payoffs_.size()) + " rows, expected " + std::to_string(count));
  for (const auto& row : payoffs_) {
    if (row.size() != n) throw Error("payoff row has the wrong number of players");
    for (const auto& r : row)
      if (r.sign() < 0 || Dyadic(1) < r) throw Error("reward " + r.str() + " is outside [0,1]");
  }
  specs_.resize(n);
  decoded_.resize(n);
  encode_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::set<std::pair<std::size_t, Dyadic>> seen;
    for (std::size_t j = 0; j < count; ++j) {
      auto prof = profile(j);
      std::size_t others = 0;
      for (std::size_t k = 0; k < n; ++k)
        if (k != i) others = others * actions_[k].size() + prof[k];
      seen.insert({others, payoffs_[j][i]});
    }
    for (const auto& [others, reward] : seen) {
      Percept p;
      p.reward = reward;
      std::size_t rest = others;
      std::vector<Symbol> acts;
      for (std::size_t k = n; k-- > 0;) {
        if (k == i) continue;
        acts.push_back(rest % actions_[k].size());
        rest /= actions_[k].size();
      }
      std::reverse(acts.begin(), acts.end());
      p.others = acts;
      std::string name;
      std::size_t pos = 0;
      for (std::size_t k = 0; k < n; ++k) {
        if (k == i) continue;
        if (!name.empty()) name += ",";
        name += actions_[k][acts[pos++]];
      }
      name += ":" + rational_str(reward.rational());
      encode_[i][{others, reward}] = decoded_[i].size();
      decoded_[i].push_back(std::move(p));
      specs_[i].percepts.push_back(std::move(name));
      specs_[i].rewards.push_back(reward.rational());
    }
    specs_[i].actions = actions_[i];
  }
}

std::size_t RepeatedGame::joint_index(const std::vector<Symbol>& profile) const {
  if (profile.size() != actions_.size()) throw Error("action profile has the wrong number of players");
  std::size_t idx = 0;
  for (std::size_t k = 0; k < profile.size(); ++k) {
    if (profile[k] >= actions_[k].size()) throw Error("action index out of range");
    idx = idx * actions_[k].size() + profile[k];
  }
  return idx;
}

std::vector<Symbol> RepeatedGame::profile(std::size_t index) const {
  std::vector<Symbol> out(actions_.size());
  for (std::size_t k = actions_.size(); k-- > 0;) {
    out[k] = index % actions_[k].size();
    index /= actions_[k].size();
  }
  return out;
}

const Dyadic& RepeatedGame::payoff(std::size_t player, const std::vector<Symbol>& profile) const {
  return payoffs_.at(joint_index(profile)).at(player);
}

Symbol RepeatedGame::percept_of(std::size_t player, const std::vector<Symbol>& profile) const {
  std::size_t others = 0;
  for (std::size_t k = 0; k < profile.size(); ++k)
    if (k != player) others = others * actions_[k].size() + profile[k];
  return encode_.at(player).at({others, payoff(player, profile)});
}

Game::PerceptLaw RepeatedGame::law(const StatePtr&, const std::vector<Symbol>& actions) const {
  std::vector<Symbol> e(actions.size());
  for (std::size_t i = 0; i < actions.size(); ++i) e[i] = percept_of(i, actions);
  return {{std::move(e), Rational(1)}};
}

std::shared_ptr<RepeatedGame> repeated_game(std::vector<Alphabet> actions, std::vector<std::vector<Dyadic>> payoffs) {
  return std::make_shared<RepeatedGame>(std::move(actions), std::move(payoffs));
}

std::shared_ptr<RepeatedGame> matching_pennies() {
  return repeated_game({{"H", "T"}, {"H", "T"}}, {{1, 0}, {0, 1}, {0, 1}, {1, 0}});
}

std::shared_ptr<RepeatedGame> prisoners_dilemma() {
  const Dyadic q = Dyadic::unit(2), tq = Dyadic(3) * Dyadic::unit(2);
  return repeated_game({{"C", "D"}, {"C", "D"}}, {{tq, tq}, {0, 1}, {1, 0}, {q, q}});
}

// ---- policies

StationaryPolicy::StationaryPolicy(Alphabet actions, Law law) : actions_(std::move(actions)), law_(std::move(law)) {
  if (law_.size() != actions_.size()) throw Error("stationary law does not match the action alphabet");
  Rational total = 0;
  for (const auto& x : law_) {
    if (x < 0) throw Error("negative action probability");
    total += x;
  }
  if (total != 1) throw Error("stationary law sums to " + rational_str(total));
}

PolicyPtr uniform_policy(const Alphabet& actions) {
  Law law(actions.size(), Rational(1, static_cast<long>(actions.size())));
  return std::make_shared<StationaryPolicy>(actions, std::move(law));
}

PolicyPtr deterministic_policy(const Alphabet& actions, Symbol action) {
  Law law(actions.size(), Rational(0));
  law.at(action) = 1;
  return std::make_shared<StationaryPolicy>(actions, std::move(law));
}

namespace {

class GrimState : public State {
 public:
  GrimState(unsigned s, bool t, std::optional<unsigned> trig) : steps(s), triggered(t), trigger(trig) {}
  bool defects() const { return triggered || (trigger && steps >= *trigger); }
  std::optional<std::uint64_t> key() const override {
    if (defects()) return 1;
    if (!trigger) return 2;
    return hash_combine(3, steps);
  }
  unsigned steps;
  bool triggered;
  std::optional<unsigned> trigger;
};

}  // namespace

GrimTrigger::GrimTrigger(std::shared_ptr<const RepeatedGame> game, std::size_t player, Symbol cooperate,
                         Symbol defect, std::optional<unsigned> trigger)
    : game_(std::move(game)), player_(player), cooperate_(cooperate), defect_(defect), trigger_(trigger) {
  const auto& a = game_->player(player_).actions;
  if (cooperate_ >= a.size() || defect_ >= a.size()) throw Error("grim trigger action out of range");
}

const Alphabet& GrimTrigger::actions() const { return game_->player(player_).actions; }

StatePtr GrimTrigger::initial() const { return std::make_shared<GrimState>(0, false, trigger_); }

StatePtr GrimTrigger::advance(const StatePtr& state, const Step& step) const {
  const auto& g = static_cast<const GrimState&>(*state);
  bool triggered = g.triggered;
  for (Symbol a : game_->decode(player_, step.percept).others) triggered = triggered || a == defect_;
  return std::make_shared<GrimState>(g.steps + 1, triggered, trigger_);
}

std::optional<Law> GrimTrigger::law(const StatePtr& state) const {
  Law l(actions().size(), Rational(0));
  l[static_cast<const GrimState&>(*state).defects() ? defect_ : cooperate_] = 1;
  return l;
}

HistoryPolicy::HistoryPolicy(Alphabet actions, Fn fn) : actions_(std::move(actions)), fn_(std::move(fn)) {}

StatePtr HistoryPolicy::initial() const { return std::make_shared<HistoryState>(History{}); }

StatePtr HistoryPolicy::advance(const StatePtr& state, const Step& step) const { return extend_history(state, step); }

std::optional<Law> HistoryPolicy::law(const StatePtr& state) const { return fn_(history_of(state)); }

HistoryEnvironment::HistoryEnvironment(PlayerSpec spec, Fn fn) : spec_(std::move(spec)), fn_(std::move(fn)) {
  if (spec_.rewards.size() != spec_.percepts.size()) throw Error("every percept needs a reward");
}

StatePtr HistoryEnvironment::initial() const { return std::make_shared<HistoryState>(History{}); }

StatePtr HistoryEnvironment::advance(const StatePtr& state, const Step& step) const {
  return extend_history(state, step);
}

std::optional<Law> HistoryEnvironment::law(const StatePtr& state, Symbol action) const {
  return fn_(history_of(state), action);
}

Input encode_history(std::span<const Step> history, const Alphabet& actions, const Alphabet& percepts) {
  Input out;
  out.reserve(2 * history.size());
  for (const auto& s : history) {
    out.push_back(actions.at(s.action));
    out.push_back(percepts.at(s.percept));
  }
  return out;
}

std::string format_history(std::span<const Step> history, const Alphabet& actions, const Alphabet& percepts) {
  if (history.empty()) return "(empty)";
  std::string out;
  for (const auto& s : history) {
    if (!out.empty()) out += " ";
    out += actions.at(s.action) + "|" + percepts.at(s.percept);
  }
  return out;
}

MachinePolicy::MachinePolicy(Program program, std::shared_ptr<const CompletionSource> source, Alphabet percepts)
    : program_(std::move(program)), source_(std::move(source)), percepts_(std::move(percepts)) {}

StatePtr MachinePolicy::initial() const { return std::make_shared<HistoryState>(History{}); }

StatePtr MachinePolicy::advance(const StatePtr& state, const Step& step) const { return extend_history(state, step); }

std::optional<Law> MachinePolicy::law(const StatePtr& state) const {
  return source_->crossovers(program_, encode_history(history_of(state), program_.alphabet(), percepts_));
}

// ---- history distributions

namespace {

void check_profile(const Game& game, const std::vector<PolicyPtr>& policies) {
  if (policies.size() != game.players())
    throw Error("expected " + std::to_string(game.players()) + " policies, got " + std::to_string(policies.size()));
  for (std::size_t i = 0; i < policies.size(); ++i)
    if (policies[i]->actions() != game.player(i).actions)
      throw Error("policy " + std::to_string(i) + " does not use the game's action alphabet");
}

struct Node {
  JointHistory history;
  StatePtr game;
  std::vector<StatePtr> states;
  Rational mass;
};

// Enumerates joint action profiles with their probabilities under the players' laws.
template <class F>
void for_each_profile(const std::vector<Law>& laws, F&& f) {
  const std::size_t n = laws.size();
  std::vector<Symbol> prof(n, 0);
  while (true) {
    Rational p = 1;
    for (std::size_t i = 0; i < n && p != 0; ++i) p *= laws[i][prof[i]];
    if (p != 0) f(prof, p);
    std::size_t k = n;
    while (k-- > 0) {
      if (++prof[k] < laws[k].size()) break;
      prof[k] = 0;
    }
    if (k == static_cast<std::size_t>(-1)) return;
  }
}

std::vector<Node> children(const Game& game, const std::vector<PolicyPtr>& policies, const Node& node) {
  const std::size_t n = policies.size();
  std::vector<Law> laws(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto l = policies[i]->law(node.states[i]);
    if (!l)
      throw Error("undefined conditional for player " + std::to_string(i) + " at " +
                  format_history(project(node.history, i), game.player(i).actions, game.player(i).percepts));
    laws[i] = std::move(*l);
  }
  std::vector<Node> out;
  for_each_profile(laws, [&](const std::vector<Symbol>& prof, const Rational& pa) {
    for (const auto& [e, pe] : game.law(node.game, prof)) {
      if (pe == 0) continue;
      Node c;
      JointStep js{prof, e};
      c.history = node.history;
      c.history.push_back(js);
      c.game = game.advance(node.game, js);
      c.states.resize(n);
      for (std::size_t i = 0; i < n; ++i) c.states[i] = policies[i]->advance(node.states[i], {prof[i], e[i]});
      c.mass = node.mass * pa * pe;
      out.push_back(std::move(c));
    }
  });
  return out;
}

void expand(const Game& game, const std::vector<PolicyPtr>& policies, const Node& node, unsigned horizon,
            JointMeasure& out) {
  if (node.history.size() == horizon) {
    out.emplace_back(node.history, node.mass);
    return;
  }
  for (const auto& c : children(game, policies, node)) expand(game, policies, c, horizon, out);
}

Node root(const Game& game, const std::vector<PolicyPtr>& policies) {
  Node r;
  r.game = game.initial();
  for (const auto& p : policies) r.states.push_back(p->initial());
  r.mass = 1;
  return r;
}

void check_horizon(unsigned horizon, unsigned cap) {
  if (horizon > cap)
    throw Error("horizon " + std::to_string(horizon) + " exceeds the exact enumeration cap " + std::to_string(cap));
}

}  // namespace

JointMeasure history_distribution_serial(const Game& game, const std::vector<PolicyPtr>& policies, unsigned horizon,
                                         unsigned cap) {
  check_horizon(horizon, cap);
  check_profile(game, policies);
  JointMeasure out;
  expand(game, policies, root(game, policies), horizon, out);
  std::sort(out.begin(), out.end());
  return out;
}

JointMeasure history_distribution(const Game& game, const std::vector<PolicyPtr>& policies, unsigned horizon,
                                  unsigned cap) {
  check_horizon(horizon, cap);
  check_profile(game, policies);
  std::vector<Node> frontier{root(game, policies)};
  // Grow the frontier until there is enough independent work to share.
  while (!frontier.empty() && frontier.front().history.size() < horizon &&
         frontier.size() < 4 * static_cast<std::size_t>(omp_get_max_threads())) {
    std::vector<Node> next;
    for (const auto& node : frontier)
      for (auto& c : children(game, policies, node)) next.push_back(std::move(c));
    frontier = std::move(next);
  }
  std::vector<JointMeasure> parts(frontier.size());
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (std::size_t j = 0; j < frontier.size(); ++j) {
    try {
      expand(game, policies, frontier[j], horizon, parts[j]);
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  JointMeasure out;
  for (auto& p : parts)
    for (auto& x : p) out.push_back(std::move(x));
  std::sort(out.begin(), out.end());
  return out;
}

Measure marginal(const JointMeasure& joint, std::size_t player) {
  std::map<History, Rational> acc;
  for (const auto& [h, m] : joint) acc[project(h, player)] += m;
  return Measure(acc.begin(), acc.end());
}

Measure player_distribution(const Game& game, const std::vector<PolicyPtr>& policies, std::size_t player,
                            unsigned horizon, unsigned cap) {
  return marginal(history_distribution(game, policies, horizon, cap), player);
}

// ---- subjective environments

namespace {

struct Particle {
  StatePtr game;
  std::vector<StatePtr> others;
  Rational weight;
};

class FilterState : public State {
 public:
  std::vector<Particle> particles;
  std::optional<std::uint64_t> cached_key;

  std::optional<std::uint64_t> key() const override { return cached_key; }
};

std::optional<std::uint64_t> particle_key(const Particle& p) {
  auto g = p.game->key();
  if (!g) return std::nullopt;
  std::uint64_t h = hash_combine(0x5b, *g);
  for (const auto& s : p.others) {
    auto k = s->key();
    if (!k) return std::nullopt;
    h = hash_combine(h, *k);
  }
  return h;
}

class SubjectiveEnvironment : public Environment {
 public:
  SubjectiveEnvironment(GamePtr game, std::vector<PolicyPtr> others, std::size_t player)
      : game_(std::move(game)), others_(std::move(others)), player_(player),
        monitored_(dynamic_cast<const RepeatedGame*>(game_.get())) {
    if (player_ >= game_->players()) throw Error("player index out of range");
    if (others_.size() + 1 != game_->players())
      throw Error("expected " + std::to_string(game_->players() - 1) + " other policies");
    for (std::size_t j = 0, k = 0; j < game_->players(); ++j) {
      if (j == player_) continue;
      if (others_[k++]->actions() != game_->player(j).actions)
        throw Error("policy for player " + std::to_string(j) + " does not use the game's action alphabet");
    }
  }

  const Alphabet& actions() const override { return game_->player(player_).actions; }
  const Alphabet& percepts() const override { return game_->player(player_).percepts; }
  const std::vector<Rational>& rewards() const override { return game_->player(player_).rewards; }

  StatePtr initial() const override {
    auto s = std::make_shared<FilterState>();
    Particle p{game_->initial(), {}, Rational(1)};
    for (const auto& o : others_) p.others.push_back(o->initial());
    s->particles.push_back(std::move(p));
    finish(*s);
    return s;
  }

  StatePtr advance(const StatePtr& state, const Step& step) const override {
    const auto& f = static_cast<const FilterState&>(*state);
    auto next = std::make_shared<FilterState>();
    std::map<std::uint64_t, std::size_t> merged;
    Rational total = 0;
    for (const auto& p : f.particles) {
      auto laws = other_laws(p);
      if (!laws) continue;
      for_each_profile(*laws, [&](const std::vector<Symbol>& prof, const Rational& pa) {
        auto full = with_player(prof, step.action);
        for (const auto& [e, pe] : game_->law(p.game, full)) {
          if (pe == 0 || e[player_] != step.percept) continue;
          Particle c;
          JointStep js{full, e};
          c.game = game_->advance(p.game, js);
          for (std::size_t j = 0, k = 0; j < full.size(); ++j) {
            if (j == player_) continue;
            c.others.push_back(others_[k]->advance(p.others[k], {full[j], e[j]}));
            ++k;
          }
          c.weight = p.weight * pa * pe;
          total += c.weight;
          auto key = particle_key(c);
          if (key) {
            auto [it, fresh] = merged.emplace(*key, next->particles.size());
            if (!fresh) {
              next->particles[it->second].weight += c.weight;
              continue;
            }
          }
          next->particles.push_back(std::move(c));
        }
      });
    }
    if (total == 0 && monitored_) reconstruct(f, step, *next);
    if (total != 0)
      for (auto& p : next->particles) p.weight /= total;
    finish(*next);
    return next;
  }

  std::optional<Law> law(const StatePtr& state, Symbol action) const override {
    const auto& f = static_cast<const FilterState&>(*state);
    Law out(percepts().size(), Rational(0));
    Rational total = 0;
    for (const auto& p : f.particles) {
      if (p.weight == 0) continue;
      auto laws = other_laws(p);
      if (!laws) return std::nullopt;
      total += p.weight;
      for_each_profile(*laws, [&](const std::vector<Symbol>& prof, const Rational& pa) {
        for (const auto& [e, pe] : game_->law(p.game, with_player(prof, action))) out[e[player_]] += p.weight * pa * pe;
      });
    }
    if (total == 0) return std::nullopt;
    for (auto& x : out) x /= total;
    return out;
  }

 private:
  // The percept names the others' actions, so the joint step is known even when the others'
  // policies gave it probability zero; their states follow it and the weights are kept.
  void reconstruct(const FilterState& f, const Step& step, FilterState& next) const {
    const auto& seen = monitored_->decode(player_, step.percept);
    auto full = with_player(seen.others, step.action);
    if (monitored_->percept_of(player_, full) != step.percept) return;
    std::vector<Symbol> e(full.size());
    for (std::size_t j = 0; j < full.size(); ++j) e[j] = monitored_->percept_of(j, full);
    for (const auto& p : f.particles) {
      if (p.weight == 0) continue;
      Particle c;
      c.game = game_->advance(p.game, {full, e});
      for (std::size_t j = 0, k = 0; j < full.size(); ++j) {
        if (j == player_) continue;
        c.others.push_back(others_[k]->advance(p.others[k], {full[j], e[j]}));
        ++k;
      }
      c.weight = p.weight;
      next.particles.push_back(std::move(c));
    }
  }

  std::optional<std::vector<Law>> other_laws(const Particle& p) const {
    std::vector<Law> laws;
    for (std::size_t k = 0; k < others_.size(); ++k) {
      auto l = others_[k]->law(p.others[k]);
      if (!l) return std::nullopt;
      laws.push_back(std::move(*l));
    }
    return laws;
  }

  std::vector<Symbol> with_player(const std::vector<Symbol>& others, Symbol action) const {
    std::vector<Symbol> full;
    full.reserve(others.size() + 1);
    for (std::size_t j = 0, k = 0; j < game_->players(); ++j) full.push_back(j == player_ ? action : others[k++]);
    return full;
  }

  static void finish(FilterState& s) {
    std::uint64_t h = 0x77;
    for (const auto& p : s.particles) {
      auto k = particle_key(p);
      if (!k) {
        s.cached_key.reset();
        return;
      }
      h = hash_combine(hash_combine(h, *k), s.particles.size() > 1 ? hash_value(p.weight) : 1);
    }
    s.cached_key = h;
  }

  GamePtr game_;
  std::vector<PolicyPtr> others_;
  std::size_t player_;
  const RepeatedGame* monitored_;
};

}  // namespace

EnvironmentPtr subjective_env(GamePtr game, std::vector<PolicyPtr> others, std::size_t player) {
  return std::make_shared<SubjectiveEnvironment>(std::move(game), std::move(others), player);
}

ConditionalTable subjective_table(const Game& game, const std::vector<PolicyPtr>& profile, std::size_t player,
                                  unsigned horizon, unsigned cap) {
  check_horizon(horizon, cap);
  check_profile(game, profile);
  const std::size_t np = game.player(player).percepts.size();
  std::map<std::pair<History, Symbol>, Law> acc;
  std::vector<Node> level{root(game, profile)};
  for (unsigned t = 0; t < horizon; ++t) {
    std::vector<Node> next;
    for (const auto& node : level) {
      const History own = project(node.history, player);
      for (auto& c : children(game, profile, node)) {
        const JointStep& js = c.history.back();
        auto& slot = acc[{own, js.actions[player]}];
        if (slot.empty()) slot.assign(np, Rational(0));
        slot[js.percepts[player]] += c.mass;
        next.push_back(std::move(c));
      }
    }
    level = std::move(next);
  }
  // The percept laws of the game are normalized, so the mass of (history, action) is the row sum.
  ConditionalTable out;
  for (auto& [ctx, row] : acc) {
    Rational den = 0;
    for (const auto& x : row) den += x;
    if (den == 0) continue;
    for (auto& x : row) x /= den;
    out.emplace(ctx, std::move(row));
  }
  return out;
}

}  // namespace grain
