#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "grain/completion.hpp"
#include "grain/machine.hpp"
#include "grain/numeric.hpp"

namespace grain {

using Symbol = std::size_t;
using Alphabet = std::vector<std::string>;
using Law = std::vector<Rational>;

struct Step {
  Symbol action = 0;
  Symbol percept = 0;
  auto operator<=>(const Step&) const = default;
};
using History = std::vector<Step>;

struct JointStep {
  std::vector<Symbol> actions;
  std::vector<Symbol> percepts;
  auto operator<=>(const JointStep&) const = default;
};
using JointHistory = std::vector<JointStep>;

// Player i's own coordinates of a joint history.
History project(const JointHistory& h, std::size_t player);

Symbol index_of(const Alphabet& alphabet, std::string_view name);

// Immutable evaluator state. key() identifies states with identical future behaviour
// and enables memoization; states without a key are never merged.
class State {
 public:
  virtual ~State() = default;
  virtual std::optional<std::uint64_t> key() const { return std::nullopt; }
};
using StatePtr = std::shared_ptr<const State>;

// Shared constant state for stateless evaluators.
StatePtr constant_state();

class Policy {
 public:
  virtual ~Policy() = default;
  virtual const Alphabet& actions() const = 0;
  virtual StatePtr initial() const = 0;
  virtual StatePtr advance(const StatePtr& state, const Step& step) const = 0;
  // nullopt marks an undefined conditional.
  virtual std::optional<Law> law(const StatePtr& state) const = 0;

  StatePtr state_after(std::span<const Step> history) const;
  std::optional<Law> law_at(std::span<const Step> history) const;
  // Product of the policy's own action probabilities along the history.
  Rational probability(std::span<const Step> history) const;
};
using PolicyPtr = std::shared_ptr<const Policy>;

class Environment {
 public:
  virtual ~Environment() = default;
  virtual const Alphabet& actions() const = 0;
  virtual const Alphabet& percepts() const = 0;
  virtual const std::vector<Rational>& rewards() const = 0;  // per percept, in [0,1]
  virtual StatePtr initial() const = 0;
  virtual StatePtr advance(const StatePtr& state, const Step& step) const = 0;
  virtual std::optional<Law> law(const StatePtr& state, Symbol action) const = 0;

  StatePtr state_after(std::span<const Step> history) const;
  std::optional<Law> law_at(std::span<const Step> history, Symbol action) const;
  // Product of percept probabilities along the history, given its actions.
  Rational probability(std::span<const Step> history) const;
};
using EnvironmentPtr = std::shared_ptr<const Environment>;

struct PlayerSpec {
  Alphabet actions;
  Alphabet percepts;
  std::vector<Rational> rewards;
};

// Multi-player game: law over percept vectors given the joint history and action vector.
class Game {
 public:
  using PerceptLaw = std::vector<std::pair<std::vector<Symbol>, Rational>>;

  virtual ~Game() = default;
  virtual std::size_t players() const = 0;
  virtual const PlayerSpec& player(std::size_t i) const = 0;
  virtual StatePtr initial() const = 0;
  virtual StatePtr advance(const StatePtr& state, const JointStep& step) const = 0;
  virtual PerceptLaw law(const StatePtr& state, const std::vector<Symbol>& actions) const = 0;
};
using GamePtr = std::shared_ptr<const Game>;

// Perfect-monitoring repeated stage game. Player i's percept is one symbol per
// (others' action profile, own reward) pair, named "b,c:r".
class RepeatedGame : public Game {
 public:
  struct Percept {
    std::vector<Symbol> others;  // actions of the other players in player order
    Dyadic reward;
  };

  // payoffs[joint_index(profile)][i] is player i's reward; player 0 is the most significant digit.
  RepeatedGame(std::vector<Alphabet> actions, std::vector<std::vector<Dyadic>> payoffs);

  std::size_t players() const override { return specs_.size(); }
  const PlayerSpec& player(std::size_t i) const override { return specs_.at(i); }
  StatePtr initial() const override { return constant_state(); }
  StatePtr advance(const StatePtr& state, const JointStep&) const override { return state; }
  PerceptLaw law(const StatePtr& state, const std::vector<Symbol>& actions) const override;

  std::size_t profiles() const { return payoffs_.size(); }
  std::size_t joint_index(const std::vector<Symbol>& profile) const;
  std::vector<Symbol> profile(std::size_t index) const;
  const Dyadic& payoff(std::size_t player, const std::vector<Symbol>& profile) const;
  Symbol percept_of(std::size_t player, const std::vector<Symbol>& profile) const;
  const Percept& decode(std::size_t player, Symbol percept) const { return decoded_.at(player).at(percept); }

 private:
  std::vector<Alphabet> actions_;
  std::vector<std::vector<Dyadic>> payoffs_;
  std::vector<PlayerSpec> specs_;
  std::vector<std::vector<Percept>> decoded_;
  std::vector<std::map<std::pair<std::size_t, Dyadic>, Symbol>> encode_;
};

// Builds a repeated game from a payoff table; rewards must lie in [0,1].
std::shared_ptr<RepeatedGame> repeated_game(std::vector<Alphabet> actions, std::vector<std::vector<Dyadic>> payoffs);
// Player 0 wins on a match. Actions H, T.
std::shared_ptr<RepeatedGame> matching_pennies();
// Rewards (3/4,3/4), (0,1), (1,0), (1/4,1/4). Actions C, D.
std::shared_ptr<RepeatedGame> prisoners_dilemma();

class StationaryPolicy : public Policy {
 public:
  StationaryPolicy(Alphabet actions, Law law);
  const Alphabet& actions() const override { return actions_; }
  StatePtr initial() const override { return constant_state(); }
  StatePtr advance(const StatePtr& state, const Step&) const override { return state; }
  std::optional<Law> law(const StatePtr&) const override { return law_; }

 private:
  Alphabet actions_;
  Law law_;
};

PolicyPtr uniform_policy(const Alphabet& actions);
PolicyPtr deterministic_policy(const Alphabet& actions, Symbol action);

// Cooperates until its own trigger step, then defects forever; also defects forever once
// any opponent has played the defect action. trigger = nullopt never self-triggers.
class GrimTrigger : public Policy {
 public:
  GrimTrigger(std::shared_ptr<const RepeatedGame> game, std::size_t player, Symbol cooperate, Symbol defect,
              std::optional<unsigned> trigger);
  const Alphabet& actions() const override;
  StatePtr initial() const override;
  StatePtr advance(const StatePtr& state, const Step& step) const override;
  std::optional<Law> law(const StatePtr& state) const override;

 private:
  std::shared_ptr<const RepeatedGame> game_;
  std::size_t player_;
  Symbol cooperate_, defect_;
  std::optional<unsigned> trigger_;
};

// Policy given directly as a function of the history.
class HistoryPolicy : public Policy {
 public:
  using Fn = std::function<std::optional<Law>(std::span<const Step>)>;
  HistoryPolicy(Alphabet actions, Fn fn);
  const Alphabet& actions() const override { return actions_; }
  StatePtr initial() const override;
  StatePtr advance(const StatePtr& state, const Step& step) const override;
  std::optional<Law> law(const StatePtr& state) const override;

 private:
  Alphabet actions_;
  Fn fn_;
};

class HistoryEnvironment : public Environment {
 public:
  using Fn = std::function<std::optional<Law>(std::span<const Step>, Symbol)>;
  HistoryEnvironment(PlayerSpec spec, Fn fn);
  const Alphabet& actions() const override { return spec_.actions; }
  const Alphabet& percepts() const override { return spec_.percepts; }
  const std::vector<Rational>& rewards() const override { return spec_.rewards; }
  StatePtr initial() const override;
  StatePtr advance(const StatePtr& state, const Step& step) const override;
  std::optional<Law> law(const StatePtr& state, Symbol action) const override;

 private:
  PlayerSpec spec_;
  Fn fn_;
};

// History as machine input: action and percept names interleaved.
Input encode_history(std::span<const Step> history, const Alphabet& actions, const Alphabet& percepts);

// Conditionals read off a completed machine: the crossovers of `program` on the encoded history.
class MachinePolicy : public Policy {
 public:
  MachinePolicy(Program program, std::shared_ptr<const CompletionSource> source, Alphabet percepts);
  const Alphabet& actions() const override { return program_.alphabet(); }
  StatePtr initial() const override;
  StatePtr advance(const StatePtr& state, const Step& step) const override;
  std::optional<Law> law(const StatePtr& state) const override;

 private:
  Program program_;
  std::shared_ptr<const CompletionSource> source_;
  Alphabet percepts_;
};

inline constexpr unsigned kDefaultHorizonCap = 8;

using JointMeasure = std::vector<std::pair<JointHistory, Rational>>;
using Measure = std::vector<std::pair<History, Rational>>;

// Exact distribution over joint histories of length T; only positive masses are listed,
// in lexicographic order. The first level is enumerated in parallel.
JointMeasure history_distribution(const Game& game, const std::vector<PolicyPtr>& policies, unsigned horizon,
                                  unsigned cap = kDefaultHorizonCap);
JointMeasure history_distribution_serial(const Game& game, const std::vector<PolicyPtr>& policies, unsigned horizon,
                                         unsigned cap = kDefaultHorizonCap);
// Player view: other players' coordinates summed out.
Measure marginal(const JointMeasure& joint, std::size_t player);
Measure player_distribution(const Game& game, const std::vector<PolicyPtr>& policies, std::size_t player,
                            unsigned horizon, unsigned cap = kDefaultHorizonCap);

// The environment faced by `player` when the others follow `others` (given in player order,
// skipping `player`). Its state is a filter over the others' hidden coordinates. In a repeated
// game a percept the others' policies made impossible still fixes their actions, and the
// conditionals continue from that joint history; percepts contradicting the payoffs stay undefined.
EnvironmentPtr subjective_env(GamePtr game, std::vector<PolicyPtr> others, std::size_t player);

// Conditional tables of the subjective environment computed as quotients of the joint
// distribution under a full profile; contexts of probability zero are absent.
using ConditionalTable = std::map<std::pair<History, Symbol>, Law>;
ConditionalTable subjective_table(const Game& game, const std::vector<PolicyPtr>& profile, std::size_t player,
                                  unsigned horizon, unsigned cap = kDefaultHorizonCap);

std::string format_history(std::span<const Step> history, const Alphabet& actions, const Alphabet& percepts);

}  // namespace grain
