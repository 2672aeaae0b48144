#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "grain/agents.hpp"

namespace grain {

// One player's agent block. Policy and class specs stay as JSON and are resolved against the game.
struct AgentConfig {
  std::string kind;  // bayes | thompson | fixed | mixture | self-aixi | anti-predictor | nash
  nlohmann::json spec;
  std::optional<unsigned> horizon;           // overrides the experiment planning horizon
  std::optional<std::string> tie_break;      // "oracle" | "lexicographic"
};

struct CheckConfig {
  std::optional<double> best_response_min;  // final-window eps-best-response frequency, every player
  std::optional<Rational> action_target;    // final-window frequency of each player's first action
  double action_tolerance = 0.05;
  // Player whose law must put mass 1 on `defect_action` at every step after the first defection.
  std::optional<std::size_t> defect_player;
  std::string defect_action = "D";
  bool merging_nonincreasing = false;
};

struct ExperimentConfig {
  std::string name;
  nlohmann::json game;
  std::vector<AgentConfig> agents;
  Discount discount = Discount::geometric(Dyadic::unit(1));
  unsigned horizon = 4;      // planning lookahead T
  unsigned gap_horizon = 4;  // lookahead of the per-step gap intervals
  unsigned oracle_level = 10;
  unsigned steps = 100;
  unsigned repetitions = 1;
  std::uint64_t seed = 0;
  Rational epsilon = Rational(1, 20);
  unsigned window = 50;
  std::string tie_break = "lexicographic";
  bool measure_gaps = true;
  CheckConfig check;
  std::filesystem::path base_dir;  // relative machine paths resolve here
};

// Parses and validates a config; every violation is reported before any simulation.
ExperimentConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& file);

GamePtr make_game(const nlohmann::json& spec);

// An acting player: samples actions and exposes its exact conditional law.
class Agent {
 public:
  virtual ~Agent() = default;
  virtual Symbol act() = 0;
  virtual void observe(const Step& step) = 0;
  virtual PolicyPtr policy() const = 0;
  virtual const StatePtr& policy_state() const = 0;
  // Predictive model of the percepts, for agents that hold one.
  virtual const Environment* belief() const { return nullptr; }
  virtual StatePtr belief_state() const { return nullptr; }
  virtual std::vector<Rational> posterior() const { return {}; }
};

// Immutable parts of a player's agent (planners, classes, caches), shared by all repetitions.
class PlayerFactory {
 public:
  virtual ~PlayerFactory() = default;
  // A fresh agent at the empty history; `rng` drives its own randomness.
  virtual std::unique_ptr<Agent> create(CounterRng rng) const = 0;
  virtual PolicyPtr policy() const = 0;
  // Construction certificate, e.g. the best-response gaps of an equilibrium profile.
  virtual nlohmann::json certificate() const { return nullptr; }
};

std::shared_ptr<const PlayerFactory> player_factory(const ExperimentConfig& config, const GamePtr& game,
                                                    std::size_t player);
std::unique_ptr<Agent> make_agent(const ExperimentConfig& config, const GamePtr& game, std::size_t player,
                                  CounterRng rng);

// Total variation between the believed and the true next-percept laws after `action`.
Rational merging_metric(const Environment& believed, const StatePtr& believed_state, const Environment& truth,
                        const StatePtr& true_state, Symbol action);
Rational merging_metric(const Environment& believed, const Environment& truth, std::span<const Step> history,
                        Symbol action);

struct PlayerRecord {
  Symbol action = 0;
  double frequency = 0;  // running frequency of the first action
  std::optional<Gap> gap;
  bool best_response = false;
  std::optional<Rational> merging;
  std::vector<Rational> posterior;
  Law law;                     // the policy's conditional law before acting
  bool after_defection = false;  // some player defected at an earlier step
};

struct StepRecord {
  std::vector<PlayerRecord> players;
};

struct RunRecord {
  std::vector<StepRecord> steps;
};

struct CheckResult {
  std::string name;
  double value = 0;
  std::string threshold;
  bool pass = false;
};

struct ExperimentResult {
  std::vector<RunRecord> runs;
  nlohmann::json summary;
  std::vector<CheckResult> checks;
  bool passed() const;
};

// Simulates N steps for each of R repetitions. Repetitions run in parallel with seeds
// derive_seed(seed, repetition, agent); the result does not depend on the thread count.
ExperimentResult run_experiment(const ExperimentConfig& config);
RunRecord run_repetition(const ExperimentConfig& config, const GamePtr& game,
                         const std::vector<std::shared_ptr<const PlayerFactory>>& players, unsigned repetition);

// One row per step per repetition.
std::string metrics_csv(const ExperimentConfig& config, const ExperimentResult& result);
void write_outputs(const ExperimentConfig& config, const ExperimentResult& result, const std::filesystem::path& dir);

// Re-evaluates checks and final-window statistics from a written metrics.csv.
nlohmann::json report(const std::filesystem::path& metrics_csv, unsigned window);

}  // namespace grain
