#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "grain/numeric.hpp"

namespace grain {

using Input = std::vector<std::string>;

// "a,b,c"; the empty input prints as "".
std::string format_input(const Input& input);
// Accepts "", "eps" or a comma separated list.
Input parse_input(std::string_view text);

enum class Op { Emit, Halt, Coin, Query, Self, Read, JumpEq, Jump };

struct QuerySpec {
  enum class Source { Current, Empty, Literal };

  std::string subject;  // program name or "self"
  Source source = Source::Current;
  Input literal;
  Dyadic p;
  std::string symbol;

  bool is_self() const { return subject == "self"; }
  Input instantiate(const Input& current) const;
};

struct Instruction {
  enum class Operand { Symbol, None, Integer };

  Op op = Op::Halt;
  std::string symbol;          // Emit, and the JumpEq symbol operand
  int reg = 0;                 // Self, Read, JumpEq
  int pos = 0;                 // Read; negative counts from the end
  Operand operand = Operand::Symbol;
  std::int64_t integer = 0;    // JumpEq integer operand
  std::array<int, 2> target{-1, -1};  // Coin/Query branches for bit 0 and 1; Jump/JumpEq use target[0]
  QuerySpec query;
};

inline constexpr int kRegisters = 8;

class Program {
 public:
  static Program parse(std::string_view source, std::string_view default_name = "");
  static Program load(const std::filesystem::path& path);

  const std::string& name() const { return name_; }
  const std::vector<std::string>& alphabet() const { return alphabet_; }
  const std::vector<Instruction>& code() const { return code_; }
  std::size_t symbol_index(std::string_view symbol) const;
  bool in_alphabet(std::string_view symbol) const { return symbol_index(symbol) != npos; }

  // Canonical text; parse(encode()) reproduces the program.
  std::string encode() const;
  // "fnv1a64:" followed by 16 hex digits of the canonical text hash.
  std::string hash() const;

  std::optional<std::size_t> self_index() const { return self_index_; }
  bool uses_self() const;
  // Instruction indices of query sites reachable from the entry point.
  std::vector<std::size_t> reachable_query_sites() const;
  bool makes_queries() const { return !reachable_query_sites().empty(); }

  // Register encoding of symbol literals used by READ and JEQ.
  std::int64_t symbol_code(std::string_view symbol) const;

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  friend Program resolve_self(const Program&, const std::vector<Program>&);

  std::string name_;
  std::vector<std::string> alphabet_;
  std::vector<Instruction> code_;
  std::vector<std::string> literals_;
  std::optional<std::size_t> self_index_;
};

// Binds SELF to the program's position in `universe` (matched by hash).
Program resolve_self(const Program& program, const std::vector<Program>& universe);

struct OutcomeDistribution {
  std::vector<std::string> alphabet;
  std::vector<Dyadic> mass;  // aligned with alphabet
  Dyadic silent;             // silent halts, unanswerable calls and budget exhaustion
  bool clamped = false;      // an oracle branch mass was negative and clamped to 0

  Dyadic total() const;
  const Dyadic& of(std::string_view symbol) const;
};

class Universe;
struct PartialOracle;

// Exact distribution of a k-step run of universe program `program` on `input` against `oracle`.
OutcomeDistribution run_bounded(const Universe& universe, std::size_t program, const Input& input,
                                unsigned budget, const PartialOracle& oracle);
// Oracle-free variant; any reachable oracle call is an error.
OutcomeDistribution run_bounded(const Program& program, const Input& input, unsigned budget);

// Mass of coin-bit prefixes of length <= depth whose run emits `symbol`. Rejects oracle calls.
Dyadic lambda_lower(const Program& program, const Input& input, std::string_view symbol, unsigned depth);

// Exact output probabilities of an oracle-free program, solved as an absorbing Markov chain.
std::vector<Rational> lambda_exact(const Program& program, const Input& input);

// DSL lines that emit `yes` with probability p and `no` otherwise, one coin per bit of p.
// Labels are prefixed with `prefix`; execution starts at the first returned line.
std::vector<std::string> bernoulli_lines(const Dyadic& p, std::string_view yes, std::string_view no,
                                         std::string_view prefix);
Program make_bernoulli_program(const Dyadic& p, std::string_view yes, std::string_view no,
                               std::string_view name);

}  // namespace grain
