#include "grain/experiments.hpp"

#include <omp.h>

#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace grain {

using nlohmann::json;

namespace {

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? sep : "") + parts[i];
  return out;
}

Rational json_rational(const json& v, const std::string& what) {
  if (v.is_number_integer()) return Rational(v.get<long>());
  if (v.is_string()) return parse_rational(v.get<std::string>());
  throw Error(what + " must be a rational given as a string such as \"1/4\"");
}

Dyadic json_dyadic(const json& v, const std::string& what) {
  if (v.is_number_integer()) return Dyadic(v.get<long>());
  if (v.is_string()) return Dyadic::parse(v.get<std::string>());
  throw Error(what + " must be a dyadic given as a string such as \"1/4\"");
}

std::string fixed6(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

}  // namespace

// ---- games

GamePtr make_game(const json& spec) {
  if (spec.is_string()) {
    const auto name = spec.get<std::string>();
    if (name == "matching-pennies") return matching_pennies();
    if (name == "prisoners-dilemma") return prisoners_dilemma();
    throw Error("unknown game '" + name + "'");
  }
  if (!spec.is_object() || !spec.contains("actions") || !spec.contains("payoffs"))
    throw Error("game must be a known name or an object with actions and payoffs");
  std::vector<Alphabet> actions = spec.at("actions").get<std::vector<Alphabet>>();
  std::vector<std::vector<Dyadic>> payoffs;
  for (const auto& row : spec.at("payoffs")) {
    std::vector<Dyadic> r;
    for (const auto& x : row) r.push_back(json_dyadic(x, "payoff"));
    payoffs.push_back(std::move(r));
  }
  return repeated_game(std::move(actions), std::move(payoffs));
}

// ---- config

ExperimentConfig parse_config(const json& j, const std::filesystem::path& base_dir) {
  static const std::set<std::string> known{"name",       "game",     "agents",  "discount",     "horizon",
                                           "gap_horizon", "oracle_level", "steps", "repetitions", "seed",
                                           "epsilon",    "window",   "tie_break", "measure_gaps", "check"};
  std::vector<std::string> errors;
  auto guard = [&](const std::string& field, auto fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      errors.push_back(field + ": " + e.what());
    }
  };
  if (!j.is_object()) throw Error("config must be a JSON object");
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) errors.push_back("unknown field '" + k + "'");

  ExperimentConfig c;
  c.base_dir = base_dir;
  c.name = j.value("name", std::string("experiment"));
  if (!j.contains("seed"))
    errors.push_back("seed: required");
  else
    guard("seed", [&] { c.seed = j.at("seed").get<std::uint64_t>(); });

  GamePtr game;
  if (!j.contains("game"))
    errors.push_back("game: required");
  else
    guard("game", [&] {
      c.game = j.at("game");
      game = make_game(c.game);
    });

  guard("discount", [&] {
    if (!j.contains("discount")) return;
    const auto& d = j.at("discount");
    if (d.contains("gamma") == d.contains("horizon"))
      throw Error("give exactly one of gamma (geometric) or horizon (finite)");
    c.discount = d.contains("gamma") ? Discount::geometric(json_dyadic(d.at("gamma"), "gamma"))
                                     : Discount::finite_horizon(d.at("horizon").get<unsigned>());
  });
  auto positive = [&](const char* key, unsigned& out) {
    guard(key, [&] {
      if (!j.contains(key)) return;
      out = j.at(key).get<unsigned>();
      if (out == 0) throw Error("must be positive");
    });
  };
  positive("horizon", c.horizon);
  c.gap_horizon = c.horizon;
  positive("gap_horizon", c.gap_horizon);
  positive("oracle_level", c.oracle_level);
  positive("steps", c.steps);
  positive("repetitions", c.repetitions);
  c.window = std::min(c.window, c.steps);
  positive("window", c.window);
  if (c.window > c.steps) errors.push_back("window: exceeds the run length");
  guard("epsilon", [&] {
    if (!j.contains("epsilon")) return;
    c.epsilon = json_rational(j.at("epsilon"), "epsilon");
    if (c.epsilon <= 0 || c.epsilon > 1) throw Error("must lie in (0,1]");
  });
  guard("tie_break", [&] {
    c.tie_break = j.value("tie_break", c.tie_break);
    if (c.tie_break != "oracle" && c.tie_break != "lexicographic") throw Error("must be oracle or lexicographic");
  });
  guard("measure_gaps", [&] { c.measure_gaps = j.value("measure_gaps", true); });

  guard("check", [&] {
    if (!j.contains("check")) return;
    const auto& k = j.at("check");
    if (k.contains("best_response_min")) c.check.best_response_min = k.at("best_response_min").get<double>();
    if (k.contains("action_target")) c.check.action_target = json_rational(k.at("action_target"), "action_target");
    c.check.action_tolerance = k.value("action_tolerance", c.check.action_tolerance);
    if (k.contains("defect_player")) c.check.defect_player = k.at("defect_player").get<std::size_t>();
    c.check.defect_action = k.value("defect_action", c.check.defect_action);
    c.check.merging_nonincreasing = k.value("merging_nonincreasing", false);
  });

  if (!j.contains("agents") || !j.at("agents").is_array()) {
    errors.push_back("agents: required list, one entry per player");
  } else {
    for (std::size_t i = 0; i < j.at("agents").size(); ++i) {
      const auto& a = j.at("agents")[i];
      const std::string field = "agents[" + std::to_string(i) + "]";
      guard(field, [&] {
        AgentConfig ac;
        ac.kind = a.at("kind").get<std::string>();
        ac.spec = a;
        if (a.contains("horizon")) ac.horizon = a.at("horizon").get<unsigned>();
        if (a.contains("tie_break")) ac.tie_break = a.at("tie_break").get<std::string>();
        c.agents.push_back(std::move(ac));
      });
    }
  }

  if (game && c.agents.size() == j.value("agents", json::array()).size()) {
    if (c.agents.size() != game->players()) {
      errors.push_back("agents: the game has " + std::to_string(game->players()) + " players but " +
                       std::to_string(c.agents.size()) + " agents are given");
    } else if (errors.empty()) {
      for (std::size_t i = 0; i < c.agents.size(); ++i)
        guard("agents[" + std::to_string(i) + "]", [&] { player_factory(c, game, i); });
    }
  }
  if (c.check.defect_player && game && *c.check.defect_player >= game->players())
    errors.push_back("check.defect_player: no such player");

  if (!errors.empty()) throw Error("invalid config:\n  " + join(errors, "\n  "));
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error("cannot open config " + file.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error("config " + file.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(j, file.parent_path());
}

// ---- agents

namespace {

struct BuildContext {
  const ExperimentConfig& config;
  GamePtr game;
  std::shared_ptr<const FairOracle> fair = std::make_shared<FairOracle>();
};

std::shared_ptr<const RepeatedGame> as_repeated(const GamePtr& game, const std::string& what) {
  auto g = std::dynamic_pointer_cast<const RepeatedGame>(game);
  if (!g) throw Error(what + " needs a repeated game");
  return g;
}

Symbol action_named(const Alphabet& actions, const json& v) {
  if (v.is_number_integer()) {
    auto a = v.get<long>();
    if (a < 0 || static_cast<std::size_t>(a) >= actions.size()) throw Error("action index out of range");
    return static_cast<Symbol>(a);
  }
  return index_of(actions, v.get<std::string>());
}

Program load_machine(const json& v, const std::filesystem::path& base) {
  if (v.is_object() && v.contains("source")) return Program::parse(v.at("source").get<std::string>(), "machine");
  std::filesystem::path p = v.is_object() ? v.at("file").get<std::string>() : v.get<std::string>();
  if (p.is_relative()) p = base / p;
  return Program::load(p);
}

std::vector<Rational> make_weights(const json& spec, std::size_t n) {
  if (n == 0) throw Error("empty class");
  std::vector<Rational> w;
  const std::string kind = spec.is_string() ? spec.get<std::string>() : "";
  if (spec.is_null() || kind == "uniform") {
    w.assign(n, Rational(1, static_cast<long>(n)));
    for (auto& x : w) x.canonicalize();
  } else if (kind == "geometric") {
    // 2^-(k+1) for all but the last member, which takes the remaining 2^-(n-1).
    for (std::size_t k = 0; k + 1 < n; ++k) w.push_back(Dyadic::unit(static_cast<unsigned>(k + 1)).rational());
    w.push_back(Dyadic::unit(static_cast<unsigned>(n - 1)).rational());
  } else if (spec.is_array()) {
    for (const auto& x : spec) w.push_back(json_rational(x, "weight"));
    if (w.size() != n) throw Error("expected " + std::to_string(n) + " weights, got " + std::to_string(w.size()));
  } else {
    throw Error("weights must be a list, \"uniform\" or \"geometric\"");
  }
  return w;
}

PolicyPtr make_policy(const json& s, const BuildContext& ctx, std::size_t player) {
  const Alphabet& actions = ctx.game->player(player).actions;
  const std::string type = s.at("type").get<std::string>();
  if (type == "uniform") return uniform_policy(actions);
  if (type == "deterministic") return deterministic_policy(actions, action_named(actions, s.at("action")));
  if (type == "stationary") {
    Law l;
    for (const auto& x : s.at("law")) l.push_back(json_rational(x, "law entry"));
    return std::make_shared<StationaryPolicy>(actions, std::move(l));
  }
  if (type == "grim") {
    auto g = as_repeated(ctx.game, "grim trigger");
    std::optional<unsigned> trigger;
    if (s.contains("trigger")) trigger = s.at("trigger").get<unsigned>();
    return std::make_shared<GrimTrigger>(g, player, action_named(actions, s.value("cooperate", json(0))),
                                         action_named(actions, s.value("defect", json(1))), trigger);
  }
  if (type == "machine") {
    Program p = load_machine(s.contains("source") ? s : s.at("file"), ctx.config.base_dir);
    if (p.alphabet() != actions) throw Error("machine '" + p.name() + "' does not output the player's actions");
    return std::make_shared<MachinePolicy>(std::move(p), ctx.fair, ctx.game->player(player).percepts);
  }
  if (type == "mixture") {
    std::vector<PolicyPtr> members;
    for (const auto& m : s.at("members")) members.push_back(make_policy(m, ctx, player));
    auto w = make_weights(s.value("weights", json()), members.size());
    return mixture_policy(std::move(members), std::move(w));
  }
  throw Error("unknown policy type '" + type + "'");
}

// Class members as lists of policy specs for the other players.
std::vector<json> expand_class(const json& spec, std::size_t others) {
  std::vector<json> out;
  if (spec.is_object() && spec.contains("grim_triggers")) {
    if (others != 1) throw Error("grim_triggers needs a two-player game");
    const unsigned m = spec.at("grim_triggers").get<unsigned>();
    json base{{"type", "grim"}};
    if (spec.contains("cooperate")) base["cooperate"] = spec.at("cooperate");
    if (spec.contains("defect")) base["defect"] = spec.at("defect");
    for (unsigned t = 0; t < m; ++t) {
      json g = base;
      g["trigger"] = t;
      out.push_back(json::array({g}));
    }
    out.push_back(json::array({base}));
    return out;
  }
  if (!spec.is_array() || spec.empty()) throw Error("class must be a non-empty list");
  for (const auto& m : spec) {
    if (m.is_array()) {
      if (m.size() != others) throw Error("each class member needs one policy per other player");
      out.push_back(m);
    } else {
      if (others != 1) throw Error("class members must list one policy per other player");
      out.push_back(json::array({m}));
    }
  }
  return out;
}

std::vector<EnvironmentPtr> make_class(const json& spec, const BuildContext& ctx, std::size_t player) {
  const std::size_t n = ctx.game->players();
  std::vector<EnvironmentPtr> envs;
  for (const auto& member : expand_class(spec, n - 1)) {
    std::vector<PolicyPtr> others;
    std::size_t k = 0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != player) others.push_back(make_policy(member[k++], ctx, j));
    envs.push_back(subjective_env(ctx.game, std::move(others), player));
  }
  return envs;
}

class PolicyAgent : public Agent {
 public:
  PolicyAgent(PolicyPtr policy, CounterRng rng, std::shared_ptr<const MixtureEnvironment> belief)
      : policy_(std::move(policy)), rng_(rng), state_(policy_->initial()), belief_(std::move(belief)) {
    if (belief_) belief_state_ = belief_->initial();
  }
  Symbol act() override {
    auto l = policy_->law(state_);
    if (!l) throw Error("policy is undefined at the current history");
    Symbol a = categorical(*l, rng_);
    if (a >= l->size()) throw Error("policy law does not sum to 1");
    return a;
  }
  void observe(const Step& step) override {
    state_ = policy_->advance(state_, step);
    if (belief_) belief_state_ = belief_->advance(belief_state_, step);
  }
  PolicyPtr policy() const override { return policy_; }
  const StatePtr& policy_state() const override { return state_; }
  const Environment* belief() const override { return belief_.get(); }
  StatePtr belief_state() const override { return belief_state_; }
  std::vector<Rational> posterior() const override {
    return belief_ ? belief_->posterior(belief_state_) : std::vector<Rational>{};
  }

 private:
  PolicyPtr policy_;
  CounterRng rng_;
  StatePtr state_;
  std::shared_ptr<const MixtureEnvironment> belief_;
  StatePtr belief_state_;
};

class ThompsonAgent : public Agent {
 public:
  ThompsonAgent(std::shared_ptr<const ThompsonPolicy> ts, CounterRng rng,
                std::shared_ptr<const MixtureEnvironment> belief)
      : ts_(std::move(ts)), sampler_(ts_, rng), belief_(std::move(belief)), belief_state_(belief_->initial()) {}
  Symbol act() override { return sampler_.act(); }
  void observe(const Step& step) override {
    sampler_.observe(step);
    belief_state_ = belief_->advance(belief_state_, step);
  }
  PolicyPtr policy() const override { return ts_; }
  const StatePtr& policy_state() const override { return sampler_.state(); }
  const Environment* belief() const override { return belief_.get(); }
  StatePtr belief_state() const override { return belief_state_; }
  std::vector<Rational> posterior() const override { return ts_->posterior(sampler_.state()); }

 private:
  std::shared_ptr<const ThompsonPolicy> ts_;
  ThompsonSampler sampler_;
  std::shared_ptr<const MixtureEnvironment> belief_;
  StatePtr belief_state_;
};

class Factory : public PlayerFactory {
 public:
  std::unique_ptr<Agent> create(CounterRng rng) const override {
    if (ts) return std::make_unique<ThompsonAgent>(ts, rng, belief);
    return std::make_unique<PolicyAgent>(pol, rng, belief);
  }
  PolicyPtr policy() const override { return ts ? PolicyPtr(ts) : pol; }
  json certificate() const override { return cert; }

  PolicyPtr pol;
  std::shared_ptr<const ThompsonPolicy> ts;
  std::shared_ptr<const MixtureEnvironment> belief;
  json cert;
};

EpsilonSchedule make_schedule(const json& spec) {
  if (spec.is_null() || (spec.is_string() && spec.get<std::string>() == "default")) return default_schedule();
  Rational eps = json_rational(spec, "epsilon_schedule");
  if (eps <= 0 || eps > 1) throw Error("constant epsilon schedule must lie in (0,1]");
  return [eps](unsigned) { return eps; };
}

}  // namespace

std::shared_ptr<const PlayerFactory> player_factory(const ExperimentConfig& config, const GamePtr& game,
                                                    std::size_t player) {
  const AgentConfig& ac = config.agents.at(player);
  const json& s = ac.spec;
  BuildContext ctx{config, game};
  const unsigned horizon = ac.horizon.value_or(config.horizon);
  const std::string tie_name = ac.tie_break.value_or(config.tie_break);
  if (tie_name != "oracle" && tie_name != "lexicographic") throw Error("tie_break must be oracle or lexicographic");
  const TieBreak tie = tie_name == "oracle" ? TieBreak::with_oracle(ctx.fair) : TieBreak::lexicographic();
  auto f = std::make_shared<Factory>();

  auto belief_class = [&] {
    auto envs = make_class(s.at("class"), ctx, player);
    auto prior = make_weights(s.value("prior", json()), envs.size());
    return std::make_shared<MixtureEnvironment>(std::move(envs), std::move(prior));
  };

  if (ac.kind == "fixed") {
    f->pol = make_policy(s.at("policy"), ctx, player);
  } else if (ac.kind == "mixture") {
    json m = s;
    m["type"] = "mixture";
    f->pol = make_policy(m, ctx, player);
  } else if (ac.kind == "bayes") {
    f->belief = belief_class();
    f->pol = optimal_policy(f->belief, config.discount, horizon, tie);
  } else if (ac.kind == "thompson") {
    f->belief = belief_class();
    f->ts = std::make_shared<ThompsonPolicy>(f->belief->members(), f->belief->prior(), config.discount, horizon, tie,
                                             make_schedule(s.value("epsilon_schedule", json())));
  } else if (ac.kind == "self-aixi") {
    f->belief = belief_class();
    json self = s.at("self");
    self["type"] = "mixture";
    f->pol = std::make_shared<SelfAixiPolicy>(make_policy(self, ctx, player), f->belief, config.discount, horizon,
                                              tie);
  } else if (ac.kind == "anti-predictor") {
    std::vector<Program> machines;
    for (const auto& m : s.at("machines")) machines.push_back(load_machine(m, config.base_dir));
    auto anti = std::make_shared<AntiPredictor>(std::move(machines), ctx.fair, game->player(player).percepts);
    if (anti->actions() != game->player(player).actions)
      throw Error("anti-predictor machines must output the player's actions");
    f->pol = anti;
  } else if (ac.kind == "nash") {
    auto g = as_repeated(game, "nash");
    NashProfile np = nash_profile(g, config.discount, horizon, config.oracle_level);
    f->pol = np.policies.at(player);
    json gaps = json::array();
    for (const auto& gp : np.gaps) gaps.push_back({{"lo", to_double(gp.lo)}, {"hi", to_double(gp.hi)}});
    f->cert = {{"kind", "nash"},
               {"first_action", np.first_action.at(player).str()},
               {"gaps", gaps},
               {"bound", to_double(np.bound)},
               {"certified", np.certified},
               {"nodes", np.stats.nodes}};
  } else {
    throw Error("unknown agent kind '" + ac.kind + "'");
  }
  return f;
}

std::unique_ptr<Agent> make_agent(const ExperimentConfig& config, const GamePtr& game, std::size_t player,
                                  CounterRng rng) {
  return player_factory(config, game, player)->create(rng);
}

// ---- merging

Rational merging_metric(const Environment& believed, const StatePtr& believed_state, const Environment& truth,
                        const StatePtr& true_state, Symbol action) {
  auto b = believed.law(believed_state, action);
  auto t = truth.law(true_state, action);
  if (!b) throw Error("believed environment is undefined here");
  if (!t) throw Error("true environment is undefined here");
  return total_variation(*b, *t);
}

Rational merging_metric(const Environment& believed, const Environment& truth, std::span<const Step> history,
                        Symbol action) {
  return merging_metric(believed, believed.state_after(history), truth, truth.state_after(history), action);
}

// ---- simulation

RunRecord run_repetition(const ExperimentConfig& config, const GamePtr& game,
                         const std::vector<std::shared_ptr<const PlayerFactory>>& players, unsigned repetition) {
  const std::size_t n = game->players();
  std::vector<std::unique_ptr<Agent>> agents;
  for (std::size_t i = 0; i < n; ++i)
    agents.push_back(players[i]->create(CounterRng(derive_seed(config.seed, repetition, i + 1))));
  CounterRng nature(derive_seed(config.seed, repetition, 0));

  std::vector<EnvironmentPtr> subj;
  std::vector<StatePtr> es;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<PolicyPtr> others;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) others.push_back(agents[j]->policy());
    subj.push_back(subjective_env(game, std::move(others), i));
    es.push_back(subj.back()->initial());
  }
  std::vector<std::optional<Symbol>> defect(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& acts = game->player(i).actions;
    auto it = std::find(acts.begin(), acts.end(), config.check.defect_action);
    if (it != acts.end()) defect[i] = static_cast<Symbol>(it - acts.begin());
  }

  RunRecord run;
  StatePtr gs = game->initial();
  std::vector<std::size_t> first(n, 0);
  bool defected = false;
  for (unsigned t = 0; t < config.steps; ++t) {
    StepRecord rec;
    rec.players.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      auto& pr = rec.players[i];
      auto l = agents[i]->policy()->law(agents[i]->policy_state());
      if (!l) throw Error("player " + std::to_string(i) + "'s policy is undefined at step " + std::to_string(t));
      pr.law = std::move(*l);
      pr.after_defection = defected;
      pr.posterior = agents[i]->posterior();
      if (config.measure_gaps) {
        pr.gap = best_response_gap_at(*agents[i]->policy(), agents[i]->policy_state(), *subj[i], es[i], t + 1,
                                      config.discount, config.gap_horizon);
        pr.best_response = pr.gap->hi <= config.epsilon;
      }
    }
    std::vector<Symbol> acts(n);
    for (std::size_t i = 0; i < n; ++i) acts[i] = agents[i]->act();
    auto outcomes = game->law(gs, acts);
    std::vector<Rational> probs;
    for (const auto& [e, p] : outcomes) probs.push_back(p);
    std::size_t pick = categorical(probs, nature);
    if (pick >= outcomes.size()) throw Error("game percept law does not sum to 1");
    const std::vector<Symbol>& percepts = outcomes[pick].first;

    for (std::size_t i = 0; i < n; ++i) {
      auto& pr = rec.players[i];
      if (const Environment* b = agents[i]->belief())
        pr.merging = merging_metric(*b, agents[i]->belief_state(), *subj[i], es[i], acts[i]);
    }
    gs = game->advance(gs, {acts, percepts});
    for (std::size_t i = 0; i < n; ++i) {
      const Step s{acts[i], percepts[i]};
      agents[i]->observe(s);
      es[i] = subj[i]->advance(es[i], s);
      if (acts[i] == 0) ++first[i];
      rec.players[i].action = acts[i];
      rec.players[i].frequency = static_cast<double>(first[i]) / (t + 1);
      if (defect[i] && acts[i] == *defect[i]) defected = true;
    }
    run.steps.push_back(std::move(rec));
  }
  return run;
}

bool ExperimentResult::passed() const {
  for (const auto& c : checks)
    if (!c.pass) return false;
  return true;
}

namespace {

double slope(const std::vector<double>& y) {
  const double n = static_cast<double>(y.size());
  if (y.size() < 2) return 0;
  double mx = (n - 1) / 2, my = 0;
  for (double v : y) my += v;
  my /= n;
  double num = 0, den = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    num += (static_cast<double>(i) - mx) * (y[i] - my);
    den += (static_cast<double>(i) - mx) * (static_cast<double>(i) - mx);
  }
  return num / den;
}

void summarize(const ExperimentConfig& config, const GamePtr& game,
               const std::vector<std::shared_ptr<const PlayerFactory>>& players, ExperimentResult& res) {
  const std::size_t n = game->players();
  const double reps = static_cast<double>(res.runs.size());
  const unsigned from = config.steps - config.window;
  json js = {{"name", config.name},
             {"seed", config.seed},
             {"steps", config.steps},
             {"repetitions", config.repetitions},
             {"window", config.window},
             {"epsilon", rational_str(config.epsilon)},
             {"tie_break", config.tie_break},
             {"horizon", config.horizon},
             {"gap_horizon", config.gap_horizon},
             {"oracle_level", config.oracle_level}};
  js["discount"] = config.discount.is_geometric() ? json{{"gamma", config.discount.factor().str()}}
                                                  : json{{"horizon", config.discount.horizon()}};
  json plist = json::array();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& actions = game->player(i).actions;
    double br = 0, gap_hi = 0, merge = 0, run_first = 0;
    std::vector<double> freq(actions.size(), 0);
    std::size_t merge_count = 0;
    std::vector<double> final_post;
    for (const auto& run : res.runs) {
      double br_r = 0, gap_r = 0;
      std::vector<double> f_r(actions.size(), 0);
      for (unsigned t = from; t < config.steps; ++t) {
        const auto& pr = run.steps[t].players[i];
        br_r += pr.best_response;
        if (pr.gap) gap_r += to_double(pr.gap->hi);
        f_r[pr.action] += 1;
        if (pr.merging) {
          merge += to_double(*pr.merging);
          ++merge_count;
        }
      }
      br += br_r / config.window;
      gap_hi += gap_r / config.window;
      for (std::size_t a = 0; a < actions.size(); ++a) freq[a] += f_r[a] / config.window;
      run_first += run.steps.back().players[i].frequency;
      const auto& post = run.steps.back().players[i].posterior;
      final_post.resize(post.size(), 0);
      for (std::size_t k = 0; k < post.size(); ++k) final_post[k] += to_double(post[k]) / reps;
    }
    json p = {{"player", i}, {"kind", config.agents[i].kind}};
    json fw;
    if (config.measure_gaps) {
      fw["best_response_frequency"] = br / reps;
      fw["gap_hi_mean"] = gap_hi / reps;
    }
    json af;
    for (std::size_t a = 0; a < actions.size(); ++a) af[actions[a]] = freq[a] / reps;
    fw["action_frequency"] = af;
    if (merge_count) fw["merging_mean"] = merge / static_cast<double>(merge_count);
    p["final_window"] = fw;
    p["run_first_action_frequency"] = run_first / reps;
    if (!final_post.empty()) p["final_posterior_mean"] = final_post;
    json cert = players[i]->certificate();
    if (!cert.is_null()) p["certificate"] = cert;
    plist.push_back(p);

    const std::string who = "player " + std::to_string(i);
    if (config.check.best_response_min && config.measure_gaps) {
      const double v = br / reps;
      res.checks.push_back({who + " final-window eps-best-response frequency", v,
                            ">= " + fixed6(*config.check.best_response_min), v >= *config.check.best_response_min});
    }
    if (config.check.action_target) {
      const double v = freq[0] / reps;
      const double target = to_double(*config.check.action_target);
      res.checks.push_back({who + " final-window frequency of " + actions[0], v,
                            "within " + fixed6(config.check.action_tolerance) + " of " + fixed6(target),
                            std::abs(v - target) <= config.check.action_tolerance});
    }
    if (config.check.merging_nonincreasing && merge_count) {
      std::vector<double> mean(config.steps, 0);
      for (const auto& run : res.runs)
        for (unsigned t = 0; t < config.steps; ++t)
          if (run.steps[t].players[i].merging) mean[t] += to_double(*run.steps[t].players[i].merging) / reps;
      const double s = slope(mean);
      res.checks.push_back({who + " merging distance trend", s, "<= 0", s <= 1e-12});
    }
  }
  js["players"] = plist;

  if (config.check.defect_player) {
    const std::size_t i = *config.check.defect_player;
    const Symbol d = index_of(game->player(i).actions, config.check.defect_action);
    std::size_t steps = 0, ok = 0, runs_with = 0;
    for (const auto& run : res.runs) {
      bool any = false;
      for (const auto& rec : run.steps) {
        const auto& pr = rec.players[i];
        if (!pr.after_defection) continue;
        any = true;
        ++steps;
        ok += pr.law[d] == 1;
      }
      runs_with += any;
    }
    const double v = steps ? static_cast<double>(ok) / static_cast<double>(steps) : 1.0;
    res.checks.push_back({"player " + std::to_string(i) + " defects with probability 1 after the first defection", v,
                          "== 1 over " + std::to_string(steps) + " steps in " + std::to_string(runs_with) + " runs",
                          ok == steps});
  }

  json checks = json::array();
  for (const auto& c : res.checks)
    checks.push_back({{"name", c.name}, {"value", c.value}, {"threshold", c.threshold}, {"pass", c.pass}});
  js["checks"] = checks;
  js["passed"] = res.passed();
  res.summary = std::move(js);
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  GamePtr game = make_game(config.game);
  std::vector<std::shared_ptr<const PlayerFactory>> players;
  for (std::size_t i = 0; i < game->players(); ++i) players.push_back(player_factory(config, game, i));

  ExperimentResult res;
  res.runs.resize(config.repetitions);
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 1)
  for (long r = 0; r < static_cast<long>(config.repetitions); ++r) {
    try {
      res.runs[r] = run_repetition(config, game, players, static_cast<unsigned>(r));
    } catch (...) {
#pragma omp critical(grain_experiment_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  summarize(config, game, players, res);
  return res;
}

// ---- output

std::string metrics_csv(const ExperimentConfig& config, const ExperimentResult& result) {
  GamePtr game = make_game(config.game);
  const std::size_t n = game->players();
  std::ostringstream out;
  out << "rep,step";
  for (std::size_t i = 0; i < n; ++i)
    out << ",a" << i << ",law" << i << ",freq" << i << ",gap_lo" << i << ",gap_hi" << i << ",br" << i << ",tv" << i
        << ",post" << i;
  out << "\n";
  for (std::size_t r = 0; r < result.runs.size(); ++r) {
    const auto& run = result.runs[r];
    for (std::size_t t = 0; t < run.steps.size(); ++t) {
      out << r << "," << t;
      for (std::size_t i = 0; i < n; ++i) {
        const auto& pr = run.steps[t].players[i];
        out << "," << game->player(i).actions[pr.action] << "," << fixed6(to_double(pr.law[0])) << ","
            << fixed6(pr.frequency);
        if (pr.gap)
          out << "," << fixed6(to_double(pr.gap->lo)) << "," << fixed6(to_double(pr.gap->hi)) << ","
              << (pr.best_response ? 1 : 0);
        else
          out << ",,,";
        out << "," << (pr.merging ? fixed6(to_double(*pr.merging)) : "") << ",";
        for (std::size_t k = 0; k < pr.posterior.size(); ++k)
          out << (k ? ";" : "") << fixed6(to_double(pr.posterior[k]));
      }
      out << "\n";
    }
  }
  return out.str();
}

void write_outputs(const ExperimentConfig& config, const ExperimentResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream csv(dir / "metrics.csv");
    if (!csv) throw Error("cannot write " + (dir / "metrics.csv").string());
    csv << metrics_csv(config, result);
  }
  std::ofstream js(dir / "summary.json");
  if (!js) throw Error("cannot write " + (dir / "summary.json").string());
  js << result.summary.dump(2) << "\n";
}

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

}  // namespace

json report(const std::filesystem::path& metrics, unsigned window) {
  std::ifstream in(metrics);
  if (!in) throw Error("cannot open " + metrics.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(metrics.string() + " is empty");
  const auto header = split(line, ',');
  std::map<std::string, std::size_t> col;
  for (std::size_t k = 0; k < header.size(); ++k) col[header[k]] = k;
  if (!col.count("rep") || !col.count("step")) throw Error(metrics.string() + " is not a metrics file");
  std::size_t n = 0;
  while (col.count("a" + std::to_string(n))) ++n;

  std::map<long, std::vector<std::vector<std::string>>> runs;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = split(line, ',');
    if (f.size() != header.size()) throw Error("malformed row in " + metrics.string());
    runs[std::stol(f[col["rep"]])].push_back(std::move(f));
  }
  if (runs.empty()) throw Error(metrics.string() + " has no rows");

  json players = json::array();
  for (std::size_t i = 0; i < n; ++i) {
    const std::string s = std::to_string(i);
    double br = 0, tv = 0, gap = 0;
    std::size_t br_n = 0, tv_n = 0;
    std::map<std::string, double> freq;
    for (const auto& [r, rows] : runs) {
      const std::size_t w = std::min<std::size_t>(window, rows.size());
      double br_r = 0;
      std::size_t br_rn = 0;
      std::map<std::string, double> f_r;
      for (std::size_t k = rows.size() - w; k < rows.size(); ++k) {
        const auto& row = rows[k];
        f_r[row[col["a" + s]]] += 1.0 / static_cast<double>(w);
        if (!row[col["br" + s]].empty()) {
          br_r += std::stod(row[col["br" + s]]);
          gap += std::stod(row[col["gap_hi" + s]]);
          ++br_rn;
        }
        if (!row[col["tv" + s]].empty()) {
          tv += std::stod(row[col["tv" + s]]);
          ++tv_n;
        }
      }
      if (br_rn) {
        br += br_r / static_cast<double>(br_rn);
        ++br_n;
      }
      for (const auto& [a, v] : f_r) freq[a] += v / static_cast<double>(runs.size());
    }
    json p{{"player", i}, {"action_frequency", freq}};
    if (br_n) {
      p["best_response_frequency"] = br / static_cast<double>(br_n);
      p["gap_hi_mean"] = gap / static_cast<double>(br_n * std::min<std::size_t>(window, runs.begin()->second.size()));
    }
    if (tv_n) p["merging_mean"] = tv / static_cast<double>(tv_n);
    players.push_back(p);
  }
  return {{"file", metrics.string()}, {"repetitions", runs.size()}, {"window", window}, {"players", players}};
}

}  // namespace grain
