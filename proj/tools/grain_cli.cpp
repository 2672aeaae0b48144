#include <CLI11.hpp>
#include <json.hpp>
#include <omp.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "grain/completion.hpp"
#include "grain/experiments.hpp"
#include "grain/oracle.hpp"

using namespace grain;
using nlohmann::json;

namespace {

json outcome_json(const OutcomeDistribution& d) {
  json mass;
  for (std::size_t i = 0; i < d.alphabet.size(); ++i) mass[d.alphabet[i]] = d.mass[i].str();
  return {{"mass", mass}, {"silent", d.silent.str()}, {"clamped", d.clamped}};
}

int search_command(const std::string& manifest, unsigned level, std::size_t max_nodes, const std::string& checkpoints,
                   const std::string& resume, bool verify) {
  Universe u = load_universe(manifest);
  UniverseCheck check = validate_universe(u);
  if (!check.closed) {
    for (const auto& v : check.violations) std::cerr << "not closed: " << v.detail << "\n";
    return 2;
  }
  SearchOptions opt;
  opt.target_level = level;
  opt.max_nodes = max_nodes;
  opt.record_trace = false;
  if (!checkpoints.empty()) opt.checkpoint_dir = checkpoints;
  if (!resume.empty()) {
    Checkpoint cp = read_checkpoint(resume);
    if (cp.universe_hash != u.hash()) throw Error("checkpoint belongs to a different universe");
    opt.resume = cp.path;
  }
  const auto start = std::chrono::steady_clock::now();
  SearchResult res = search_oracle(u, opt);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  json out{{"universe", u.hash()},
           {"complete", res.complete},
           {"message", res.message},
           {"seconds", secs},
           {"nodes", res.stats.nodes},
           {"backtracks", res.stats.backtracks},
           {"candidates", res.stats.candidates}};
  json levels = json::array();
  for (const auto& po : res.levels) {
    json vals = json::array();
    for (const auto& v : po.values) vals.push_back(v.str());
    json lv{{"level", po.level}, {"values", vals}};
    if (verify) lv["reflective"] = check_partial_reflective(po, u).pass;
    levels.push_back(lv);
  }
  out["levels"] = levels;
  std::cout << out.dump(2) << "\n";
  return res.complete ? 0 : 1;
}

int eval_command(const std::string& file, const std::string& input, unsigned budget, const std::string& manifest,
                 const std::string& checkpoint) {
  Program p = Program::load(file);
  Input in = parse_input(input);
  json out{{"program", p.name()}, {"hash", p.hash()}, {"type", p.alphabet()}, {"input", format_input(in)}};
  if (!manifest.empty()) {
    Universe u = load_universe(manifest);
    auto idx = u.find_program_hash(p.hash());
    if (!idx) throw Error("program '" + p.name() + "' is not part of the universe");
    PartialOracle po;
    if (!checkpoint.empty()) {
      Checkpoint cp = read_checkpoint(checkpoint);
      if (cp.universe_hash != u.hash()) throw Error("checkpoint belongs to a different universe");
      if (!cp.path.empty()) po = cp.path.back();
    }
    out["level"] = po.level;
    out["bounded"] = outcome_json(run_bounded(u, *idx, in, budget, po));
    CompletedOracle completed(u, po);
    json q;
    auto cross = completed.crossovers(u.program(*idx), in);
    for (std::size_t a = 0; a < cross.size(); ++a) q[p.alphabet()[a]] = rational_str(cross[a]);
    out["crossovers"] = q;
  } else if (p.makes_queries()) {
    throw Error("program '" + p.name() + "' makes oracle queries; pass --universe");
  } else {
    out["bounded"] = outcome_json(run_bounded(p, in, budget));
    json exact;
    auto l = lambda_exact(p, in);
    for (std::size_t a = 0; a < l.size(); ++a) exact[p.alphabet()[a]] = rational_str(l[a]);
    out["exact"] = exact;
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

int run_command(const std::string& config_file, const std::string& out_dir, bool check, int threads) {
  if (threads > 0) omp_set_num_threads(threads);
  ExperimentConfig config = load_config(config_file);
  const auto start = std::chrono::steady_clock::now();
  ExperimentResult res = run_experiment(config);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_outputs(config, res, out_dir);
  std::fprintf(stderr, "%s: %u repetitions x %u steps in %.1f s\n", config.name.c_str(), config.repetitions,
               config.steps, secs);
  for (const auto& c : res.checks)
    std::printf("%s  %s: %.6f (%s)\n", c.pass ? "PASS" : "FAIL", c.name.c_str(), c.value, c.threshold.c_str());
  if (check && !res.passed()) return 1;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reflective-oracle agents: oracle search, machine evaluation and game experiments"};
  app.require_subcommand(1);

  auto* search = app.add_subcommand("search-oracle", "Search a k-partially reflective oracle for a universe");
  std::string manifest, checkpoints, resume;
  unsigned level = 10;
  std::size_t max_nodes = 1'000'000;
  bool verify = false;
  search->add_option("universe", manifest, "Universe manifest (JSON)")->required()->check(CLI::ExistingFile);
  search->add_option("-k,--level", level, "Target level K");
  search->add_option("--max-nodes", max_nodes, "Node budget");
  search->add_option("--checkpoint-dir", checkpoints, "Write one checkpoint per accepted level here");
  search->add_option("--resume", resume, "Resume from a checkpoint file")->check(CLI::ExistingFile);
  search->add_flag("--verify", verify, "Re-check every level for partial reflectivity");

  auto* eval = app.add_subcommand("eval-machine", "Output distribution of a machine");
  std::string machine, input, eval_universe, eval_checkpoint;
  unsigned budget = 64;
  eval->add_option("machine", machine, "Machine source file")->required()->check(CLI::ExistingFile);
  eval->add_option("-i,--input", input, "Input symbols, comma separated");
  eval->add_option("-b,--budget", budget, "Step budget for the bounded run");
  eval->add_option("--universe", eval_universe, "Universe manifest for oracle machines")->check(CLI::ExistingFile);
  eval->add_option("--oracle", eval_checkpoint, "Oracle checkpoint to answer queries with")->check(CLI::ExistingFile);

  auto* run = app.add_subcommand("run", "Run an experiment config");
  std::string config, out_dir = "out";
  bool check = false;
  int threads = 0;
  run->add_option("config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("-o,--out", out_dir, "Output directory for metrics.csv and summary.json");
  run->add_flag("--check", check, "Exit nonzero when an acceptance check fails");
  run->add_option("-j,--threads", threads, "OpenMP threads for repetitions");

  auto* rep = app.add_subcommand("report", "Final-window statistics from a metrics.csv");
  std::string metrics;
  unsigned window = 500;
  rep->add_option("metrics", metrics, "metrics.csv written by run")->required()->check(CLI::ExistingFile);
  rep->add_option("-w,--window", window, "Final-window length");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*search) return search_command(manifest, level, max_nodes, checkpoints, resume, verify);
    if (*eval) return eval_command(machine, input, budget, eval_universe, eval_checkpoint);
    if (*run) return run_command(config, out_dir, check, threads);
    if (*rep) {
      std::cout << report(metrics, window).dump(2) << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
