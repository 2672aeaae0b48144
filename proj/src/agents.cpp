#include "grain/agents.hpp"

#include <algorithm>
#include <bit>

namespace grain {

// ---- discounting

Discount Discount::geometric(const Dyadic& gamma) {
  if (gamma.sign() <= 0 || !(gamma < Dyadic(1))) throw Error("geometric discount must lie in (0,1), got " + gamma.str());
  Discount d;
  d.geometric_ = true;
  d.gamma_ = gamma;
  return d;
}

Discount Discount::finite_horizon(unsigned horizon) {
  if (horizon == 0) throw Error("finite horizon must be positive");
  Discount d;
  d.geometric_ = false;
  d.horizon_ = horizon;
  return d;
}

namespace {

Rational power(const Rational& x, unsigned n) {
  Rational out = 1, base = x;
  while (n) {
    if (n & 1) out *= base;
    base *= base;
    n >>= 1;
  }
  return out;
}

}  // namespace

Rational Discount::gamma(unsigned t) const {
  if (geometric_) return power(gamma_.rational(), t);
  return t >= 1 && t <= horizon_ ? 1 : 0;
}

Rational Discount::Gamma(unsigned t) const {
  if (geometric_) return power(gamma_.rational(), t) / (1 - gamma_.rational());
  return t <= horizon_ ? Rational(horizon_ - std::max(t, 1u) + 1) : Rational(0);
}

Rational Discount::weight(unsigned t, unsigned j) const {
  if (geometric_) return (1 - gamma_.rational()) * power(gamma_.rational(), j);
  if (t > horizon_ || t + j > horizon_) return 0;
  return Rational(1, static_cast<long>(horizon_ - t + 1));
}

Rational Discount::slack(unsigned t, unsigned lookahead) const {
  if (geometric_) return power(gamma_.rational(), lookahead);
  if (t > horizon_) return 0;
  const unsigned end = t + lookahead;
  if (end > horizon_) return 0;
  Rational r(static_cast<long>(horizon_ - end + 1), static_cast<long>(horizon_ - t + 1));
  r.canonicalize();
  return r;
}

// ---- expectimax

namespace {

std::uint64_t memo_key(std::uint64_t tag, std::uint64_t a, std::uint64_t b, unsigned j) {
  return hash_combine(hash_combine(hash_combine(tag, a), b), j);
}

// Truncated sums over steps j..T-1 of a lookahead rooted at 1-based time t0, in units of Gamma_{t0}.
class Planner {
 public:
  Planner(const Environment& env, const Discount& discount, unsigned t0, unsigned horizon)
      : env_(env), horizon_(horizon) {
    for (unsigned j = 0; j < horizon; ++j) w_.push_back(discount.weight(t0, j));
  }

  Rational optimal(const StatePtr& es, unsigned j) {
    if (j >= horizon_) return 0;
    auto k = es->key();
    if (k) {
      auto it = opt_.find(memo_key(1, *k, 0, j));
      if (it != opt_.end()) return it->second;
    }
    Rational best = 0;
    for (Symbol a = 0; a < env_.actions().size(); ++a) {
      Rational q = action(es, j, a);
      if (a == 0 || best < q) best = q;
    }
    if (k) opt_.emplace(memo_key(1, *k, 0, j), best);
    return best;
  }

  Rational action(const StatePtr& es, unsigned j, Symbol a) {
    const Law l = env_law(es, a);
    Rational sum = 0;
    for (Symbol e = 0; e < l.size(); ++e) {
      if (l[e] == 0) continue;
      Rational v = w_[j] * env_.rewards()[e];
      if (j + 1 < horizon_) {
        path_.push_back({a, e});
        v += optimal(env_.advance(es, {a, e}), j + 1);
        path_.pop_back();
      }
      sum += l[e] * v;
    }
    return sum;
  }

  Rational policy(const Policy& p, const StatePtr& ps, const StatePtr& es, unsigned j) {
    if (j >= horizon_) return 0;
    auto pk = ps->key();
    auto ek = es->key();
    const bool keyed = pk && ek;
    if (keyed) {
      auto it = pol_.find(memo_key(2, *pk, *ek, j));
      if (it != pol_.end()) return it->second;
    }
    auto pl = p.law(ps);
    if (!pl) throw Error("undefined policy conditional " + where());
    Rational sum = 0;
    for (Symbol a = 0; a < pl->size(); ++a) {
      if ((*pl)[a] == 0) continue;
      const Law l = env_law(es, a);
      for (Symbol e = 0; e < l.size(); ++e) {
        if (l[e] == 0) continue;
        Rational v = w_[j] * env_.rewards()[e];
        if (j + 1 < horizon_) {
          const Step s{a, e};
          path_.push_back(s);
          v += policy(p, p.advance(ps, s), env_.advance(es, s), j + 1);
          path_.pop_back();
        }
        sum += (*pl)[a] * l[e] * v;
      }
    }
    if (keyed) pol_.emplace(memo_key(2, *pk, *ek, j), sum);
    return sum;
  }

 private:
  Law env_law(const StatePtr& es, Symbol a) {
    auto l = env_.law(es, a);
    if (!l) throw Error("undefined environment conditional " + where() + " for action " + env_.actions().at(a));
    return std::move(*l);
  }

  std::string where() const {
    return "after " + format_history(path_, env_.actions(), env_.percepts()) + " beyond the root history";
  }

  const Environment& env_;
  unsigned horizon_;
  std::vector<Rational> w_;
  std::vector<Step> path_;
  std::unordered_map<std::uint64_t, Rational> opt_, pol_;
};

void require_possible(const Environment& env, std::span<const Step> history) {
  if (env.probability(history) == 0) throw Error("history has probability zero under the environment");
}

unsigned time_of(std::span<const Step> history) { return static_cast<unsigned>(history.size()) + 1; }

}  // namespace

ValueInterval value_interval(const Policy& policy, const Environment& env, std::span<const Step> history,
                             const Discount& discount, unsigned horizon) {
  require_possible(env, history);
  const unsigned t = time_of(history);
  Planner plan(env, discount, t, horizon);
  Rational lo = plan.policy(policy, policy.state_after(history), env.state_after(history), 0);
  return {lo, lo + discount.slack(t, horizon), horizon};
}

namespace {

void paths(const Policy& p, const StatePtr& ps, const Environment& env, const StatePtr& es,
           const std::vector<Rational>& w, unsigned j, const Rational& mass, const Rational& ret, Rational& out) {
  if (j == w.size()) {
    out += mass * ret;
    return;
  }
  auto pl = p.law(ps);
  if (!pl) throw Error("undefined policy conditional");
  for (Symbol a = 0; a < pl->size(); ++a) {
    if ((*pl)[a] == 0) continue;
    auto l = env.law(es, a);
    if (!l) throw Error("undefined environment conditional");
    for (Symbol e = 0; e < l->size(); ++e) {
      if ((*l)[e] == 0) continue;
      const Step s{a, e};
      paths(p, p.advance(ps, s), env, env.advance(es, s), w, j + 1, mass * (*pl)[a] * (*l)[e],
            ret + w[j] * env.rewards()[e], out);
    }
  }
}

}  // namespace

Rational value_by_paths(const Policy& policy, const Environment& env, std::span<const Step> history,
                        const Discount& discount, unsigned horizon) {
  require_possible(env, history);
  const unsigned t = time_of(history);
  std::vector<Rational> w;
  for (unsigned j = 0; j < horizon; ++j) w.push_back(discount.weight(t, j));
  Rational out = 0;
  paths(policy, policy.state_after(history), env, env.state_after(history), w, 0, 1, 0, out);
  return out;
}

ValueInterval optimal_value(const Environment& env, std::span<const Step> history, const Discount& discount,
                            unsigned horizon) {
  require_possible(env, history);
  const unsigned t = time_of(history);
  Planner plan(env, discount, t, horizon);
  Rational lo = plan.optimal(env.state_after(history), 0);
  return {lo, lo + discount.slack(t, horizon), horizon};
}

std::vector<ValueInterval> action_values(const Environment& env, std::span<const Step> history,
                                         const Discount& discount, unsigned horizon) {
  require_possible(env, history);
  const unsigned t = time_of(history);
  Planner plan(env, discount, t, horizon);
  StatePtr es = env.state_after(history);
  const Rational s = discount.slack(t, horizon);
  std::vector<ValueInterval> out;
  for (Symbol a = 0; a < env.actions().size(); ++a) {
    Rational lo = horizon ? plan.action(es, 0, a) : Rational(0);
    out.push_back({lo, lo + s, horizon});
  }
  return out;
}

Law choose_action(const std::vector<Rational>& values, const TieBreak& tie) {
  if (values.empty()) throw Error("no actions to choose from");
  Law out(values.size(), Rational(0));
  if (!tie.uses_oracle()) {
    std::size_t best = 0;
    for (std::size_t a = 1; a < values.size(); ++a)
      if (values[best] < values[a]) best = a;
    out[best] = 1;
    return out;
  }
  // Compare each action against the running best; the oracle answers whether the comparator
  // keeps the incumbent with probability above 1/2.
  out[0] = 1;
  const Dyadic half = Dyadic::unit(1);
  for (std::size_t a = 1; a < values.size(); ++a) {
    Law next(values.size(), Rational(0));
    for (std::size_t b = 0; b < a; ++b) {
      if (out[b] == 0) continue;
      Rational keep = (values[b] - values[a] + 1) / 2;
      NativeMachine cmp{"compare[" + std::to_string(b) + "," + std::to_string(a) + "]", {"keep", "switch"},
                        {keep, 1 - keep}};
      Rational v = tie.oracle->value(cmp, half, "keep");
      next[b] += out[b] * v;
      next[a] += out[b] * (1 - v);
    }
    out = std::move(next);
  }
  return out;
}

// ---- optimal policies

namespace {

class TimedState : public State {
 public:
  TimedState(StatePtr inner_state, unsigned steps, bool timed) : inner(std::move(inner_state)), t(steps) {
    if (auto k = inner->key()) cached = hash_combine(*k, timed ? t : 0xffffffffu);
  }
  std::optional<std::uint64_t> key() const override { return cached; }
  StatePtr inner;
  unsigned t;
  std::optional<std::uint64_t> cached;
};

}  // namespace

OptimalPolicy::OptimalPolicy(EnvironmentPtr env, Discount discount, unsigned horizon, TieBreak tie)
    : env_(std::move(env)), discount_(discount), horizon_(horizon), tie_(std::move(tie)) {
  if (horizon_ == 0) throw Error("planning horizon must be positive");
}

StatePtr OptimalPolicy::initial() const {
  return std::make_shared<TimedState>(env_->initial(), 0, !discount_.is_geometric());
}

StatePtr OptimalPolicy::advance(const StatePtr& state, const Step& step) const {
  const auto& s = static_cast<const TimedState&>(*state);
  return std::make_shared<TimedState>(env_->advance(s.inner, step), s.t + 1, !discount_.is_geometric());
}

const StatePtr& OptimalPolicy::env_state(const StatePtr& state) const {
  return static_cast<const TimedState&>(*state).inner;
}

std::optional<Law> OptimalPolicy::law(const StatePtr& state) const {
  const auto& s = static_cast<const TimedState&>(*state);
  if (s.cached) {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = cache_.find(*s.cached);
    if (it != cache_.end()) return it->second;
  }
  Planner plan(*env_, discount_, s.t + 1, horizon_);
  std::vector<Rational> q;
  for (Symbol a = 0; a < env_->actions().size(); ++a) {
    if (!env_->law(s.inner, a)) return std::nullopt;
    q.push_back(plan.action(s.inner, 0, a));
  }
  Law l = choose_action(q, tie_);
  if (s.cached) {
    std::lock_guard<std::mutex> lock(mutex_);
    cache_.emplace(*s.cached, l);
  }
  return l;
}

std::shared_ptr<OptimalPolicy> optimal_policy(EnvironmentPtr env, const Discount& discount, unsigned horizon,
                                              TieBreak tie) {
  return std::make_shared<OptimalPolicy>(std::move(env), discount, horizon, std::move(tie));
}

// ---- mixtures

namespace {

void check_weights(const std::vector<Rational>& w, std::size_t n) {
  if (n == 0) throw Error("a mixture needs at least one member");
  if (w.size() != n) throw Error("expected " + std::to_string(n) + " weights, got " + std::to_string(w.size()));
  Rational total = 0;
  for (const auto& x : w) {
    if (x <= 0) throw Error("mixture weights must be positive");
    total += x;
  }
  if (total != 1) throw Error("mixture weights sum to " + rational_str(total) + ", not 1");
}

void normalize(std::vector<Rational>& w) {
  Rational total = 0;
  for (const auto& x : w) total += x;
  if (total == 0) return;
  for (auto& x : w) x /= total;
}

class WeightedState : public State {
 public:
  std::vector<StatePtr> members;
  std::vector<Rational> weights;
  std::optional<std::uint64_t> cached;

  void finish() {
    std::uint64_t h = 0x3d;
    for (std::size_t k = 0; k < weights.size(); ++k) {
      if (weights[k] == 0) continue;
      auto mk = members[k]->key();
      if (!mk) {
        cached.reset();
        return;
      }
      h = hash_combine(hash_combine(hash_combine(h, k), *mk), hash_value(weights[k]));
    }
    cached = h;
  }
  std::optional<std::uint64_t> key() const override { return cached; }
};

}  // namespace

MixturePolicy::MixturePolicy(std::vector<PolicyPtr> members, std::vector<Rational> weights)
    : members_(std::move(members)), prior_(std::move(weights)) {
  check_weights(prior_, members_.size());
  for (const auto& m : members_)
    if (m->actions() != members_.front()->actions()) throw Error("mixture members use different action alphabets");
}

StatePtr MixturePolicy::initial() const {
  auto s = std::make_shared<WeightedState>();
  for (const auto& m : members_) s->members.push_back(m->initial());
  s->weights = prior_;
  s->finish();
  return s;
}

StatePtr MixturePolicy::advance(const StatePtr& state, const Step& step) const {
  const auto& s = static_cast<const WeightedState&>(*state);
  auto next = std::make_shared<WeightedState>(s);
  for (std::size_t k = 0; k < members_.size(); ++k) {
    if (s.weights[k] == 0) continue;
    auto l = members_[k]->law(s.members[k]);
    next->weights[k] = l ? s.weights[k] * (*l)[step.action] : Rational(0);
    if (next->weights[k] != 0) next->members[k] = members_[k]->advance(s.members[k], step);
  }
  normalize(next->weights);
  next->finish();
  return next;
}

std::optional<Law> MixturePolicy::law(const StatePtr& state) const {
  const auto& s = static_cast<const WeightedState&>(*state);
  Law out(actions().size(), Rational(0));
  bool any = false;
  for (std::size_t k = 0; k < members_.size(); ++k) {
    if (s.weights[k] == 0) continue;
    auto l = members_[k]->law(s.members[k]);
    if (!l) return std::nullopt;
    any = true;
    for (std::size_t a = 0; a < out.size(); ++a) out[a] += s.weights[k] * (*l)[a];
  }
  if (!any) return std::nullopt;
  return out;
}

std::vector<Rational> MixturePolicy::weights(const StatePtr& state) const {
  return static_cast<const WeightedState&>(*state).weights;
}

std::shared_ptr<MixturePolicy> mixture_policy(std::vector<PolicyPtr> members, std::vector<Rational> weights) {
  return std::make_shared<MixturePolicy>(std::move(members), std::move(weights));
}

MixtureEnvironment::MixtureEnvironment(std::vector<EnvironmentPtr> members, std::vector<Rational> prior)
    : members_(std::move(members)), prior_(std::move(prior)) {
  check_weights(prior_, members_.size());
  for (const auto& m : members_)
    if (m->actions() != members_.front()->actions() || m->percepts() != members_.front()->percepts() ||
        m->rewards() != members_.front()->rewards())
      throw Error("mixture members use different interfaces");
}

StatePtr MixtureEnvironment::initial() const {
  auto s = std::make_shared<WeightedState>();
  for (const auto& m : members_) s->members.push_back(m->initial());
  s->weights = prior_;
  s->finish();
  return s;
}

StatePtr MixtureEnvironment::advance(const StatePtr& state, const Step& step) const {
  const auto& s = static_cast<const WeightedState&>(*state);
  auto next = std::make_shared<WeightedState>(s);
  for (std::size_t k = 0; k < members_.size(); ++k) {
    if (s.weights[k] == 0) continue;
    auto l = members_[k]->law(s.members[k], step.action);
    next->weights[k] = l ? s.weights[k] * (*l)[step.percept] : Rational(0);
    if (next->weights[k] != 0) next->members[k] = members_[k]->advance(s.members[k], step);
  }
  if (std::all_of(next->weights.begin(), next->weights.end(), [](const Rational& w) { return w == 0; })) {
    // Evidence every member rules out: the weights stay, and members continue past it.
    next->weights = s.weights;
    for (std::size_t k = 0; k < members_.size(); ++k)
      if (s.weights[k] != 0) next->members[k] = members_[k]->advance(s.members[k], step);
  }
  normalize(next->weights);
  next->finish();
  return next;
}

std::optional<Law> MixtureEnvironment::law(const StatePtr& state, Symbol action) const {
  const auto& s = static_cast<const WeightedState&>(*state);
  Law out(percepts().size(), Rational(0));
  bool any = false;
  for (std::size_t k = 0; k < members_.size(); ++k) {
    if (s.weights[k] == 0) continue;
    auto l = members_[k]->law(s.members[k], action);
    if (!l) return std::nullopt;
    any = true;
    for (std::size_t e = 0; e < out.size(); ++e) out[e] += s.weights[k] * (*l)[e];
  }
  if (!any) return std::nullopt;
  return out;
}

std::vector<Rational> MixtureEnvironment::posterior(const StatePtr& state) const {
  return static_cast<const WeightedState&>(*state).weights;
}

std::vector<Rational> posterior(const std::vector<Rational>& prior, const std::vector<EnvironmentPtr>& members,
                                std::span<const Step> history) {
  check_weights(prior, members.size());
  std::vector<Rational> w(prior.size());
  Rational total = 0;
  for (std::size_t k = 0; k < members.size(); ++k) {
    w[k] = prior[k] * members[k]->probability(history);
    total += w[k];
  }
  if (total == 0) throw Error("history has probability zero under every member of the class");
  for (auto& x : w) x /= total;
  return w;
}

unsigned effective_horizon(const Discount& discount, unsigned t, const Rational& eps) {
  if (eps <= 0 || eps > 1) throw Error("effective horizon needs eps in (0,1], got " + rational_str(eps));
  if (discount.Gamma(t) == 0) return 0;
  unsigned k = 0;
  while (discount.slack(t, k) > eps) ++k;
  return k;
}

EpsilonSchedule default_schedule() {
  return [](unsigned t) {
    const unsigned n = t + 2;
    return Rational(1, static_cast<long>(std::bit_width(n - 1)));
  };
}

// ---- Thompson sampling

namespace {

class ThompsonState : public State {
 public:
  unsigned t = 0;      // steps taken
  unsigned start = 0;  // first step of the current segment
  unsigned next = 0;   // first step of the following segment
  std::vector<StatePtr> members;
  std::vector<Rational> post;  // w(rho | history)
  std::vector<Rational> seg;   // w(rho | history before start) times rho's optimal action probabilities since
  std::vector<std::optional<Law>> laws;  // optimal laws of the members with seg > 0
  std::optional<std::uint64_t> cached;

  std::optional<std::uint64_t> key() const override { return cached; }
};

}  // namespace

ThompsonPolicy::ThompsonPolicy(std::vector<EnvironmentPtr> members, std::vector<Rational> prior, Discount discount,
                               unsigned horizon, TieBreak tie, EpsilonSchedule schedule)
    : prior_(std::move(prior)), discount_(discount), schedule_(std::move(schedule)) {
  check_weights(prior_, members.size());
  for (auto& m : members) optimal_.push_back(optimal_policy(std::move(m), discount, horizon, tie));
  for (const auto& o : optimal_)
    if (o->environment().percepts() != optimal_.front()->environment().percepts() ||
        o->actions() != optimal_.front()->actions())
      throw Error("Thompson class members use different interfaces");
}

unsigned ThompsonPolicy::segment_length(unsigned t) const {
  Rational eps = schedule_(t);
  if (eps <= 0) throw Error("eps schedule must stay positive");
  if (eps > 1) eps = 1;
  return std::max(1u, effective_horizon(discount_, t + 1, eps));
}

namespace {

void finish_thompson(ThompsonState& s, const std::vector<std::shared_ptr<OptimalPolicy>>& optimal) {
  s.laws.assign(optimal.size(), std::nullopt);
  std::uint64_t h = hash_combine(hash_combine(hash_combine(0x75, s.t), s.start), s.next);
  bool keyed = true;
  for (std::size_t k = 0; k < optimal.size(); ++k) {
    if (s.seg[k] != 0) s.laws[k] = optimal[k]->law(s.members[k]);
    if (s.seg[k] == 0 && s.post[k] == 0) continue;
    auto mk = s.members[k]->key();
    if (!mk) keyed = false;
    if (keyed) h = hash_combine(hash_combine(hash_combine(h, *mk), hash_value(s.post[k])), hash_value(s.seg[k]));
  }
  if (keyed)
    s.cached = h;
  else
    s.cached.reset();
}

}  // namespace

StatePtr ThompsonPolicy::initial() const {
  auto s = std::make_shared<ThompsonState>();
  s->next = segment_length(0);
  for (const auto& o : optimal_) s->members.push_back(o->initial());
  s->post = prior_;
  s->seg = prior_;
  finish_thompson(*s, optimal_);
  return s;
}

StatePtr ThompsonPolicy::advance(const StatePtr& state, const Step& step) const {
  const auto& s = static_cast<const ThompsonState&>(*state);
  auto n = std::make_shared<ThompsonState>();
  n->t = s.t + 1;
  n->start = s.start;
  n->next = s.next;
  n->members = s.members;
  n->post = s.post;
  n->seg = s.seg;
  for (std::size_t k = 0; k < optimal_.size(); ++k) {
    if (s.seg[k] != 0) n->seg[k] = s.laws[k] ? s.seg[k] * (*s.laws[k])[step.action] : Rational(0);
    if (s.post[k] != 0) {
      const auto& o = *optimal_[k];
      auto l = o.environment().law(o.env_state(s.members[k]), step.action);
      n->post[k] = l ? s.post[k] * (*l)[step.percept] : Rational(0);
    }
    if (n->seg[k] != 0 || n->post[k] != 0) n->members[k] = optimal_[k]->advance(s.members[k], step);
  }
  normalize(n->post);
  normalize(n->seg);
  if (n->t == n->next) {
    n->start = n->t;
    n->next = n->t + segment_length(n->t);
    n->seg = n->post;
  }
  finish_thompson(*n, optimal_);
  return n;
}

std::optional<Law> ThompsonPolicy::law(const StatePtr& state) const {
  const auto& s = static_cast<const ThompsonState&>(*state);
  Law out(actions().size(), Rational(0));
  bool any = false;
  for (std::size_t k = 0; k < optimal_.size(); ++k) {
    if (s.seg[k] == 0) continue;
    if (!s.laws[k]) return std::nullopt;
    any = true;
    for (std::size_t a = 0; a < out.size(); ++a) out[a] += s.seg[k] * (*s.laws[k])[a];
  }
  if (!any) return std::nullopt;
  return out;
}

std::vector<Rational> ThompsonPolicy::posterior(const StatePtr& state) const {
  return static_cast<const ThompsonState&>(*state).post;
}

bool ThompsonPolicy::at_boundary(const StatePtr& state) const {
  const auto& s = static_cast<const ThompsonState&>(*state);
  return s.t == s.start;
}

std::vector<std::optional<Law>> ThompsonPolicy::member_laws(const StatePtr& state) const {
  return static_cast<const ThompsonState&>(*state).laws;
}

ThompsonSampler::ThompsonSampler(std::shared_ptr<const ThompsonPolicy> policy, CounterRng rng)
    : policy_(std::move(policy)), rng_(rng), state_(policy_->initial()) {}

Symbol ThompsonSampler::act() {
  if (policy_->at_boundary(state_) || !sampled_) {
    auto post = policy_->posterior(state_);
    std::size_t k = categorical(post, rng_);
    if (k >= post.size()) throw Error("posterior is empty; the history is impossible under the class");
    sampled_ = k;
  }
  auto laws = policy_->member_laws(state_);
  const auto& l = laws.at(*sampled_);
  if (!l) throw Error("sampled environment has no optimal action law here");
  std::size_t a = categorical(*l, rng_);
  if (a >= l->size()) throw Error("optimal action law does not sum to 1");
  return a;
}

void ThompsonSampler::observe(const Step& step) { state_ = policy_->advance(state_, step); }

// ---- Self-AIXI

namespace {

class PairState : public State {
 public:
  PairState(StatePtr a, StatePtr b, unsigned steps, bool timed) : first(std::move(a)), second(std::move(b)), t(steps) {
    auto k1 = first->key(), k2 = second->key();
    if (k1 && k2) cached = hash_combine(hash_combine(*k1, *k2), timed ? t : 0xffffffffu);
  }
  std::optional<std::uint64_t> key() const override { return cached; }
  StatePtr first, second;
  unsigned t;
  std::optional<std::uint64_t> cached;
};

}  // namespace

SelfAixiPolicy::SelfAixiPolicy(PolicyPtr zeta, EnvironmentPtr xi, Discount discount, unsigned horizon, TieBreak tie)
    : zeta_(std::move(zeta)), xi_(std::move(xi)), discount_(discount), horizon_(horizon), tie_(std::move(tie)) {
  if (zeta_->actions() != xi_->actions()) throw Error("self model and environment use different action alphabets");
  if (horizon_ == 0) throw Error("planning horizon must be positive");
}

StatePtr SelfAixiPolicy::initial() const {
  return std::make_shared<PairState>(zeta_->initial(), xi_->initial(), 0, !discount_.is_geometric());
}

StatePtr SelfAixiPolicy::advance(const StatePtr& state, const Step& step) const {
  const auto& s = static_cast<const PairState&>(*state);
  return std::make_shared<PairState>(zeta_->advance(s.first, step), xi_->advance(s.second, step), s.t + 1,
                                     !discount_.is_geometric());
}

std::optional<Law> SelfAixiPolicy::law(const StatePtr& state) const {
  const auto& s = static_cast<const PairState&>(*state);
  Planner plan(*xi_, discount_, s.t + 1, horizon_);
  const Rational w0 = discount_.weight(s.t + 1, 0);
  std::vector<Rational> q;
  for (Symbol a = 0; a < actions().size(); ++a) {
    auto l = xi_->law(s.second, a);
    if (!l) return std::nullopt;
    Rational v = 0;
    for (Symbol e = 0; e < l->size(); ++e) {
      if ((*l)[e] == 0) continue;
      const Step st{a, e};
      Rational r = w0 * xi_->rewards()[e];
      if (horizon_ > 1) r += plan.policy(*zeta_, zeta_->advance(s.first, st), xi_->advance(s.second, st), 1);
      v += (*l)[e] * r;
    }
    q.push_back(v);
  }
  return choose_action(q, tie_);
}

// ---- best responses and equilibria

Gap best_response_gap_at(const Policy& policy, const StatePtr& policy_state, const Environment& env,
                         const StatePtr& env_state, unsigned t, const Discount& discount, unsigned horizon) {
  Planner plan(env, discount, t, horizon);
  Rational a = plan.optimal(env_state, 0);
  Rational b = plan.policy(policy, policy_state, env_state, 0);
  Rational s = discount.slack(t, horizon);
  Gap g;
  g.optimal = {a, a + s, horizon};
  g.policy = {b, b + s, horizon};
  g.lo = a - b - s;
  g.hi = a - b + s;
  return g;
}

Gap best_response_gap(const std::vector<PolicyPtr>& profile, GamePtr game, std::size_t player,
                      const Discount& discount, unsigned horizon, std::span<const Step> history) {
  if (profile.size() != game->players()) throw Error("profile size does not match the game");
  std::vector<PolicyPtr> others;
  for (std::size_t j = 0; j < profile.size(); ++j)
    if (j != player) others.push_back(profile[j]);
  auto env = subjective_env(game, others, player);
  require_possible(*env, history);
  return best_response_gap_at(*profile.at(player), profile[player]->state_after(history), *env,
                              env->state_after(history), time_of(history), discount, horizon);
}

namespace {

std::string player_tag(std::size_t i) { return "p" + std::to_string(i + 1); }

void emit_branch(const RepeatedGame& game, const Dyadic& scale, std::size_t player, std::vector<Symbol>& profile,
                 std::size_t next, const std::string& label, std::vector<std::string>& lines) {
  while (next < game.players() && next == player) ++next;
  lines.push_back(label + ":");
  if (next == game.players()) {
    profile[player] = 0;
    Dyadic d = game.payoff(player, profile);
    profile[player] = 1;
    d -= game.payoff(player, profile);
    const Dyadic p = (scale * d + Dyadic(1)).half();
    for (auto& l : bernoulli_lines(p, "x", "y", label + "_")) lines.push_back(l);
    return;
  }
  const std::string first = label + "f", second = label + "s";
  lines.push_back("query self " + player_tag(next) + " 1/2 x " + second + " " + first);
  profile[next] = 0;
  emit_branch(game, scale, player, profile, next + 1, first, lines);
  profile[next] = 1;
  emit_branch(game, scale, player, profile, next + 1, second, lines);
}

}  // namespace

Program nash_program(const RepeatedGame& game, const Dyadic& scale) {
  for (std::size_t i = 0; i < game.players(); ++i)
    if (game.player(i).actions.size() != 2) throw Error("equilibrium construction needs two actions per player");
  std::vector<std::string> lines{".name nash", ".type x y", "read r0 0"};
  for (std::size_t i = 0; i < game.players(); ++i) lines.push_back("jeq r0 " + player_tag(i) + " " + player_tag(i));
  lines.push_back("halt");
  for (std::size_t i = 0; i < game.players(); ++i) {
    std::vector<Symbol> profile(game.players(), 0);
    emit_branch(game, scale, i, profile, 0, player_tag(i), lines);
  }
  std::string src;
  for (const auto& l : lines) src += l + "\n";
  return Program::parse(src);
}

NashProfile nash_profile(std::shared_ptr<const RepeatedGame> game, const Discount& discount, unsigned horizon,
                         unsigned level, std::size_t max_nodes) {
  // Positive rescaling of the value difference does not move the comparator's crossover.
  Dyadic scale;
  if (discount.is_geometric()) {
    scale = Dyadic(1) - discount.factor();
  } else {
    scale = Dyadic::unit(static_cast<unsigned>(std::bit_width(discount.horizon() - 1)));
  }
  NashProfile out;
  out.program = nash_program(*game, scale);
  std::vector<Query> queries;
  for (std::size_t i = 0; i < game->players(); ++i) queries.push_back({0, {player_tag(i)}, Dyadic::unit(1), "x"});
  Universe u({out.program}, queries);
  UniverseCheck check = validate_universe(u);
  if (!check.closed) {
    std::string why = check.violations.empty() ? "unknown" : check.violations.front().detail;
    throw Error("equilibrium universe is not closed: " + why);
  }
  SearchOptions opt;
  opt.target_level = level;
  opt.max_nodes = max_nodes;
  opt.record_trace = false;
  SearchResult res = search_oracle(u, opt);
  if (!res.complete) throw Error("level budget exhausted: " + res.message);
  out.oracle = res.levels.back();
  out.stats = res.stats;
  for (std::size_t i = 0; i < game->players(); ++i) {
    const Dyadic& v = out.oracle.values.at(i);
    out.first_action.push_back(v);
    out.policies.push_back(
        std::make_shared<StationaryPolicy>(game->player(i).actions, Law{v.rational(), 1 - v.rational()}));
  }
  out.bound = discount.slack(1, horizon) + Rational(level) * Dyadic::unit(level).rational();
  out.certified = true;
  for (std::size_t i = 0; i < game->players(); ++i) {
    out.gaps.push_back(best_response_gap(out.policies, game, i, discount, horizon));
    if (out.gaps.back().hi > out.bound) out.certified = false;
  }
  return out;
}

// ---- anti-predictor

AntiPredictor::AntiPredictor(std::vector<Program> enumeration, std::shared_ptr<const AnswerSource> oracle,
                             Alphabet percepts)
    : enumeration_(std::move(enumeration)), oracle_(std::move(oracle)), percepts_(std::move(percepts)) {
  if (enumeration_.empty()) throw Error("anti-predictor needs at least one machine");
  actions_ = enumeration_.front().alphabet();
  if (actions_.size() != 2) throw Error("anti-predictor needs a binary action alphabet");
  for (const auto& p : enumeration_)
    if (p.alphabet() != actions_) throw Error("machine '" + p.name() + "' has a different output type");
}

namespace {

class StepsState : public State {
 public:
  explicit StepsState(History h) : history(std::move(h)) {}
  History history;
};

}  // namespace

StatePtr AntiPredictor::initial() const { return std::make_shared<StepsState>(History{}); }

StatePtr AntiPredictor::advance(const StatePtr& state, const Step& step) const {
  History h = static_cast<const StepsState&>(*state).history;
  h.push_back(step);
  return std::make_shared<StepsState>(std::move(h));
}

std::optional<Law> AntiPredictor::law(const StatePtr& state) const {
  const History& h = static_cast<const StepsState&>(*state).history;
  if (h.size() >= enumeration_.size())
    throw Error("step " + std::to_string(h.size() + 1) + " is beyond the enumeration of " +
                std::to_string(enumeration_.size()) + " machines");
  const Program& m = enumeration_[h.size()];
  Rational v = oracle_->value(m, encode_history(h, actions_, percepts_), Dyadic::unit(1), actions_[1]);
  return Law{v, 1 - v};
}

Rational total_variation(const Law& a, const Law& b) {
  if (a.size() != b.size()) throw Error("laws over different alphabets");
  Rational sum = 0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += abs(a[i] - b[i]);
  return sum / 2;
}

}  // namespace grain
