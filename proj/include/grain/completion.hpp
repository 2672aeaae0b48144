#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "grain/machine.hpp"
#include "grain/numeric.hpp"
#include "grain/oracle.hpp"
#include "grain/rng.hpp"
#include "grain/universe.hpp"

namespace grain {

struct QEstimate {
  Dyadic lo{0};
  Dyadic hi{1};
  unsigned precision = 0;  // hi - lo <= 2^-precision
  bool hit_half = false;   // some probe returned exactly 1/2

  Dyadic mid() const { return (lo + hi).half(); }
};

enum class ProbeMode { Stochastic, Bracket };

// Binary search for the crossover q_alpha with m probes.
// Bracket mode thresholds the answer probability; stochastic mode flips it.
QEstimate estimate_q(const AnswerSource& source, const Program& program, const Input& input,
                     std::string_view symbol, unsigned m, ProbeMode mode, CounterRng* rng = nullptr);

// An answer source that also knows its crossover points.
class CompletionSource : public AnswerSource {
 public:
  // q_alpha for every symbol of the program's alphabet.
  virtual std::vector<Rational> crossovers(const Program& program, const Input& input) const = 0;
};

// Extends a partial oracle to every probe of a universe program. Listed queries below the level
// keep their stored value; other probes are answered from crossovers chosen between the bounds
// implied by run_bounded masses and stored values.
class CompletedOracle : public CompletionSource {
 public:
  CompletedOracle(const Universe& universe, PartialOracle oracle);
  using AnswerSource::value;
  Rational value(const Program& program, const Input& input, const Dyadic& p, std::string_view symbol) const override;
  std::vector<Rational> crossovers(const Program& program, const Input& input) const override;
  // True when the stored values and masses gave an empty feasible region for the context.
  bool inconsistent(const Program& program, const Input& input) const;

 private:
  struct Entry {
    std::vector<Rational> q;
    bool inconsistent = false;
  };
  const Entry& entry(std::size_t program, const Input& input) const;

  const Universe& universe_;
  PartialOracle oracle_;
  mutable std::mutex mutex_;
  mutable std::map<std::string, Entry> cache_;
};

// Reflective answers for oracle-free programs and native machines: the non-halting mass is spread
// evenly over the alphabet and the crossover itself is answered with 1/2.
class FairOracle : public CompletionSource {
 public:
  Rational value(const Program& program, const Input& input, const Dyadic& p, std::string_view symbol) const override;
  Rational value(const NativeMachine& machine, const Dyadic& p, std::string_view symbol) const override;
  std::vector<Rational> crossovers(const Program& program, const Input& input) const override;
  std::vector<Rational> crossovers(const NativeMachine& machine) const;
};

// Even spreading of the missing mass of a defective law.
std::vector<Rational> spread_deficit(const std::vector<Rational>& law);

// Bracket estimates for each symbol under the completed view of a partial oracle.
std::vector<QEstimate> completed_conditional(const PartialOracle& po, const Universe& universe, std::size_t program,
                                             const Input& input, unsigned m);

// Binary-alphabet sampler: returns alphabet[1] with probability E[p*] where p* is the limit of
// the randomized binary search. Returns nullopt only if max_iterations pass without a decision.
std::optional<std::string> sample_completed(const AnswerSource& source, const Program& program, const Input& input,
                                            CounterRng& rng, unsigned max_iterations = 200);

// Inverse transform over renormalized estimate midpoints.
std::size_t sample_from_estimates(const std::vector<QEstimate>& estimates, CounterRng& rng);

// Labelled subintervals of [0,1] in order of allocation.
struct IntervalPartition {
  struct Piece {
    std::size_t label;
    Dyadic right;
  };
  std::vector<Piece> pieces;

  Dyadic end() const { return pieces.empty() ? Dyadic(0) : pieces.back().right; }
  void push(std::size_t label, const Dyadic& length);
  // Label of the piece containing every point of [omega, omega + width], if any.
  std::optional<std::size_t> check(const Dyadic& omega, const Dyadic& width) const;
};

// Non-decreasing per-symbol lower bounds phi(x, k).
using Approximator = std::function<std::vector<Dyadic>(const Input& input, unsigned k)>;

struct LscSample {
  std::optional<std::size_t> symbol;  // nullopt: no output within max_rounds
  unsigned rounds = 0;
};

LscSample sample_lsc(const Approximator& phi, const Input& input, CounterRng& rng, unsigned max_rounds);

}  // namespace grain
