#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "grain/machine.hpp"
#include "grain/numeric.hpp"
#include "grain/rng.hpp"
#include "grain/universe.hpp"

namespace grain {

struct UniverseViolation {
  std::string program;
  std::string detail;
};

struct ClosureCertificate {
  std::string universe_hash;
  std::size_t contexts = 0;
  std::size_t edges = 0;  // (context, reachable query) pairs checked
};

struct UniverseCheck {
  bool closed = false;
  std::vector<UniverseViolation> violations;
  ClosureCertificate certificate;
};

UniverseCheck validate_universe(const Universe& universe);

enum class Clause { Lower = 1, Upper = 2, Monotone = 3, Simplex = 4 };

struct ReflectivityViolation {
  std::size_t query = 0;  // 0-based universe index
  Clause clause = Clause::Lower;
  std::string detail;
};

struct ReflectivityReport {
  bool pass = true;
  std::vector<ReflectivityViolation> violations;
};

// Outcome distribution at budget po.level for every context among the first po.level queries,
// indexed by context id (contexts outside that prefix are left empty).
std::vector<OutcomeDistribution> context_outcomes(const PartialOracle& po, const Universe& universe,
                                                  bool parallel = true);

ReflectivityReport check_partial_reflective(const PartialOracle& po, const Universe& universe);
ReflectivityReport check_partial_reflective_serial(const PartialOracle& po, const Universe& universe);

enum class ExtensionStatus {
  NewQuery,    // the next query receives its first value
  RefineOnly,  // every query already has a value; only the grid is refined
};

struct ExtensionList {
  ExtensionStatus status = ExtensionStatus::NewQuery;
  std::vector<PartialOracle> oracles;
};

// Candidate values for a query already assigned `old` at level k, refined to level k+1.
std::vector<Dyadic> refinements(const Dyadic& old, unsigned k);
// Every level-(k+1) oracle extending po, unfiltered.
ExtensionList extensions(const PartialOracle& po, const Universe& universe);
bool extends(const PartialOracle& child, const PartialOracle& parent);

struct SearchOptions {
  unsigned target_level = 10;
  std::size_t max_nodes = 1'000'000;
  // When set, one checkpoint file per accepted level is written here.
  std::optional<std::filesystem::path> checkpoint_dir;
  // Path prefix to resume from (levels 1..j), e.g. read back from a checkpoint.
  std::vector<PartialOracle> resume;
  bool record_trace = true;
};

struct SearchStats {
  std::size_t nodes = 0;       // nodes pushed, including the root
  std::size_t backtracks = 0;  // nodes abandoned without a valid child
  std::size_t candidates = 0;  // partial assignments tested
  unsigned deepest = 0;
};

struct SearchResult {
  bool complete = false;  // reached target_level
  std::vector<PartialOracle> levels;  // levels[k-1] is the level-k oracle on the final path
  SearchStats stats;
  std::vector<std::string> trace;
  std::string message;
};

SearchResult search_oracle(const Universe& universe, const SearchOptions& options);

// Deterministic reflectively-consistent children of `parent`, in visiting order.
class ChildEnumerator {
 public:
  ChildEnumerator(const Universe& universe, const PartialOracle& parent);
  ~ChildEnumerator();
  ChildEnumerator(ChildEnumerator&&) noexcept;
  ChildEnumerator& operator=(ChildEnumerator&&) noexcept;

  std::optional<PartialOracle> next();
  std::size_t candidates() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// One flip of the stored value for a query at index < level.
bool oracle_answer(const PartialOracle& po, std::size_t query, CounterRng& rng);

// An exact or defective output law given natively instead of as a program.
struct NativeMachine {
  std::string name;
  std::vector<std::string> alphabet;
  std::vector<Rational> law;  // sums to at most 1
};

// Source of oracle answers: the probability of answering 1 on (T, x, p, alpha).
class AnswerSource {
 public:
  virtual ~AnswerSource() = default;
  virtual Rational value(const Program& program, const Input& input, const Dyadic& p,
                         std::string_view symbol) const = 0;
  virtual Rational value(const NativeMachine& machine, const Dyadic& p, std::string_view symbol) const;
};

// Answers listed queries below the oracle's level from the stored values.
class UniverseOracle : public AnswerSource {
 public:
  UniverseOracle(const Universe& universe, PartialOracle oracle);
  using AnswerSource::value;
  Rational value(const Program& program, const Input& input, const Dyadic& p, std::string_view symbol) const override;

  const Universe& universe() const { return universe_; }
  const PartialOracle& oracle() const { return oracle_; }

 private:
  const Universe& universe_;
  PartialOracle oracle_;
};

// Universe manifest: programs with hashes and the ordered query list.
Universe load_universe(const std::filesystem::path& manifest);
std::string universe_manifest(const Universe& universe);

struct Checkpoint {
  std::string universe_hash;
  std::vector<PartialOracle> path;  // levels 1..k
};

void write_checkpoint(const std::filesystem::path& file, const Universe& universe,
                      const std::vector<PartialOracle>& path);
Checkpoint read_checkpoint(const std::filesystem::path& file);

}  // namespace grain
