#pragma once

#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "grain/games.hpp"
#include "grain/oracle.hpp"
#include "grain/rng.hpp"

namespace grain {

// Discount sequence gamma_t (t >= 1) with tail sums Gamma_t = sum_{i >= t} gamma_i.
class Discount {
 public:
  static Discount geometric(const Dyadic& gamma);  // gamma_t = gamma^t
  static Discount finite_horizon(unsigned horizon);  // gamma_t = 1 for t <= H

  bool is_geometric() const { return geometric_; }
  const Dyadic& factor() const { return gamma_; }
  unsigned horizon() const { return horizon_; }

  Rational gamma(unsigned t) const;
  Rational Gamma(unsigned t) const;
  // gamma_{t+j} / Gamma_t, or 0 when Gamma_t = 0.
  Rational weight(unsigned t, unsigned j) const;
  // Gamma_{t+T} / Gamma_t, or 0 when Gamma_t = 0.
  Rational slack(unsigned t, unsigned lookahead) const;

 private:
  bool geometric_ = true;
  Dyadic gamma_;
  unsigned horizon_ = 0;
};

// Normalized value bounds at a history of length t-1 from a T-step lookahead.
struct ValueInterval {
  Rational lo;
  Rational hi;
  unsigned horizon = 0;
};

ValueInterval value_interval(const Policy& policy, const Environment& env, std::span<const Step> history,
                             const Discount& discount, unsigned horizon);
// Same lower bound by summing over every path; used to cross-check the recursion.
Rational value_by_paths(const Policy& policy, const Environment& env, std::span<const Step> history,
                        const Discount& discount, unsigned horizon);
ValueInterval optimal_value(const Environment& env, std::span<const Step> history, const Discount& discount,
                            unsigned horizon);
// Per-action bounds on the optimal value after taking the action.
std::vector<ValueInterval> action_values(const Environment& env, std::span<const Step> history,
                                         const Discount& discount, unsigned horizon);

// How an agent chooses among actions of equal truncated value. The oracle mode runs the
// comparison chain through machines with law 1/2 [V(a) - V(b) + 1].
struct TieBreak {
  std::shared_ptr<const AnswerSource> oracle;  // null selects the first maximizer

  static TieBreak lexicographic() { return {}; }
  static TieBreak with_oracle(std::shared_ptr<const AnswerSource> source) { return {std::move(source)}; }
  bool uses_oracle() const { return oracle != nullptr; }
};

// Action law chosen from per-action values.
Law choose_action(const std::vector<Rational>& values, const TieBreak& tie);

class OptimalPolicy : public Policy {
 public:
  OptimalPolicy(EnvironmentPtr env, Discount discount, unsigned horizon, TieBreak tie = TieBreak::lexicographic());
  const Alphabet& actions() const override { return env_->actions(); }
  StatePtr initial() const override;
  StatePtr advance(const StatePtr& state, const Step& step) const override;
  std::optional<Law> law(const StatePtr& state) const override;

  const Environment& environment() const { return *env_; }
  const StatePtr& env_state(const StatePtr& state) const;

 private:
  EnvironmentPtr env_;
  Discount discount_;
  unsigned horizon_;
  TieBreak tie_;
  mutable std::mutex mutex_;
  mutable std::unordered_map<std::uint64_t, Law> cache_;
};

std::shared_ptr<OptimalPolicy> optimal_policy(EnvironmentPtr env, const Discount& discount, unsigned horizon,
                                              TieBreak tie = TieBreak::lexicographic());

// Bayes mixture of policies; the weights follow w_pi pi(ae) / zeta(ae).
class MixturePolicy : public Policy {
 public:
  MixturePolicy(std::vector<PolicyPtr> members, std::vector<Rational> weights);
  const Alphabet& actions() const override { return members_.front()->actions(); }
  StatePtr initial() const override;
  StatePtr advance(const StatePtr& state, const Step& step) const override;
  std::optional<Law> law(const StatePtr& state) const override;

  const std::vector<PolicyPtr>& members() const { return members_; }
  const std::vector<Rational>& prior() const { return prior_; }
  std::vector<Rational> weights(const StatePtr& state) const;

 private:
  std::vector<PolicyPtr> members_;
  std::vector<Rational> prior_;
};

std::shared_ptr<MixturePolicy> mixture_policy(std::vector<PolicyPtr> members, std::vector<Rational> weights);

// Bayes mixture of environments over a shared interface.
class MixtureEnvironment : public Environment {
 public:
  MixtureEnvironment(std::vector<EnvironmentPtr> members, std::vector<Rational> prior);
  const Alphabet& actions() const override { return members_.front()->actions(); }
  const Alphabet& percepts() const override { return members_.front()->percepts(); }
  const std::vector<Rational>& rewards() const override { return members_.front()->rewards(); }
  StatePtr initial() const override;
  StatePtr advance(const StatePtr& state, const Step& step) const override;
  std::optional<Law> law(const StatePtr& state, Symbol action) const override;

  const std::vector<EnvironmentPtr>& members() const { return members_; }
  const std::vector<Rational>& prior() const { return prior_; }
  std::vector<Rational> posterior(const StatePtr& state) const;

 private:
  std::vector<EnvironmentPtr> members_;
  std::vector<Rational> prior_;
};

// Bayes posterior w(rho) rho(ae) / xi(ae).
std::vector<Rational> posterior(const std::vector<Rational>& prior, const std::vector<EnvironmentPtr>& members,
                                std::span<const Step> history);

// Smallest k with Gamma_{t+k} / Gamma_t <= eps.
unsigned effective_horizon(const Discount& discount, unsigned t, const Rational& eps);

// eps_t for the 0-based step t.
using EpsilonSchedule = std::function<Rational(unsigned)>;
// 1 / ceil(log2(t + 2)).
EpsilonSchedule default_schedule();

// Thompson sampling in evaluator form: the exact action law obtained by marginalizing the
// environment drawn at the start of each segment. Segments start at 0-based steps
// t_0 = 0 and t_{i+1} = t_i + max(1, H_{t_i + 1}(eps_{t_i})).
class ThompsonPolicy : public Policy {
 public:
  ThompsonPolicy(std::vector<EnvironmentPtr> members, std::vector<Rational> prior, Discount discount,
                 unsigned horizon, TieBreak tie = TieBreak::lexicographic(), EpsilonSchedule schedule = default_schedule());
  const Alphabet& actions() const override { return optimal_.front()->actions(); }
  StatePtr initial() const override;
  StatePtr advance(const StatePtr& state, const Step& step) const override;
  std::optional<Law> law(const StatePtr& state) const override;

  std::size_t size() const { return optimal_.size(); }
  const OptimalPolicy& optimal(std::size_t i) const { return *optimal_.at(i); }
  unsigned segment_length(unsigned t) const;
  // Posterior over the class at the state's history.
  std::vector<Rational> posterior(const StatePtr& state) const;
  bool at_boundary(const StatePtr& state) const;
  std::vector<std::optional<Law>> member_laws(const StatePtr& state) const;

 private:
  std::vector<std::shared_ptr<OptimalPolicy>> optimal_;
  std::vector<Rational> prior_;
  Discount discount_;
  EpsilonSchedule schedule_;
};

// Thompson sampling as an acting agent: draws an environment from the posterior at each
// segment start and follows its optimal policy.
class ThompsonSampler {
 public:
  ThompsonSampler(std::shared_ptr<const ThompsonPolicy> policy, CounterRng rng);
  Symbol act();
  void observe(const Step& step);
  std::optional<std::size_t> sampled() const { return sampled_; }
  const StatePtr& state() const { return state_; }

 private:
  std::shared_ptr<const ThompsonPolicy> policy_;
  CounterRng rng_;
  StatePtr state_;
  std::optional<std::size_t> sampled_;
};

// Acts greedily on V^zeta_xi: future actions follow zeta, future percepts follow xi.
class SelfAixiPolicy : public Policy {
 public:
  SelfAixiPolicy(PolicyPtr zeta, EnvironmentPtr xi, Discount discount, unsigned horizon,
                 TieBreak tie = TieBreak::lexicographic());
  const Alphabet& actions() const override { return xi_->actions(); }
  StatePtr initial() const override;
  StatePtr advance(const StatePtr& state, const Step& step) const override;
  std::optional<Law> law(const StatePtr& state) const override;

 private:
  PolicyPtr zeta_;
  EnvironmentPtr xi_;
  Discount discount_;
  unsigned horizon_;
  TieBreak tie_;
};

struct Gap {
  Rational lo;
  Rational hi;
  ValueInterval optimal;
  ValueInterval policy;
};

// V*_sigma - V^pi_sigma for player i against the others of the profile.
Gap best_response_gap(const std::vector<PolicyPtr>& profile, GamePtr game, std::size_t player,
                      const Discount& discount, unsigned horizon, std::span<const Step> history = {});
// Same bounds from prepared states; t is the 1-based time of the next action.
Gap best_response_gap_at(const Policy& policy, const StatePtr& policy_state, const Environment& env,
                         const StatePtr& env_state, unsigned t, const Discount& discount, unsigned horizon);

struct NashProfile {
  std::vector<PolicyPtr> policies;
  std::vector<Dyadic> first_action;  // oracle value = probability of each player's first action
  std::vector<Gap> gaps;
  Rational bound;  // Gamma_{T+1}/Gamma_1 + K 2^-K
  bool certified = false;
  Program program;
  PartialOracle oracle;
  SearchStats stats;
};

// Mutual best responses for a repeated game with two actions per player: one self-referential
// program answers for every player, and the oracle is searched to level K.
NashProfile nash_profile(std::shared_ptr<const RepeatedGame> game, const Discount& discount, unsigned horizon,
                         unsigned level, std::size_t max_nodes = 1'000'000);
// The program used by nash_profile.
Program nash_program(const RepeatedGame& game, const Dyadic& scale);

// Plays against the t-th machine of an enumeration: asks the oracle whether machine t outputs
// the second action with probability above 1/2 and does the opposite.
class AntiPredictor : public Policy {
 public:
  AntiPredictor(std::vector<Program> enumeration, std::shared_ptr<const AnswerSource> oracle, Alphabet percepts);
  const Alphabet& actions() const override { return actions_; }
  StatePtr initial() const override;
  StatePtr advance(const StatePtr& state, const Step& step) const override;
  std::optional<Law> law(const StatePtr& state) const override;

 private:
  std::vector<Program> enumeration_;
  std::shared_ptr<const AnswerSource> oracle_;
  Alphabet actions_;
  Alphabet percepts_;
};

Rational total_variation(const Law& a, const Law& b);

}  // namespace grain
