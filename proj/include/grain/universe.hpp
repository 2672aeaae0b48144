#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "grain/machine.hpp"
#include "grain/numeric.hpp"

namespace grain {

// (T, x, p, alpha): is the probability that T on x outputs alpha greater than p?
struct Query {
  std::size_t program = 0;
  Input input;
  Dyadic p;
  std::string symbol;
};

// A (program, input) pair shared by all queries that differ only in p and symbol.
struct Context {
  std::size_t program = 0;
  Input input;
};

// Level-k assignment to the first min(k, m) queries, on the 2^-k grid.
struct PartialOracle {
  unsigned level = 0;
  std::vector<Dyadic> values;

  std::uint64_t hash() const;
  friend bool operator==(const PartialOracle&, const PartialOracle&) = default;
};

// Ordered, closed list of queries over a fixed list of programs.
class Universe {
 public:
  Universe() = default;
  Universe(std::vector<Program> programs, std::vector<Query> queries);

  const std::vector<Program>& programs() const { return programs_; }
  const Program& program(std::size_t i) const { return programs_.at(i); }
  const std::vector<Query>& queries() const { return queries_; }
  const Query& query(std::size_t i) const { return queries_.at(i); }
  std::size_t size() const { return queries_.size(); }

  std::optional<std::size_t> find_program(std::string_view name) const;
  std::optional<std::size_t> find_program_hash(std::string_view hash) const;
  std::optional<std::size_t> find(std::size_t program, const Input& input, const Dyadic& p,
                                  std::string_view symbol) const;
  std::optional<std::size_t> subject_of(std::size_t caller, const QuerySpec& spec) const;
  // Listed index of the query issued at instruction `site` of `caller` running on `input`.
  std::optional<std::size_t> resolve(std::size_t caller, std::size_t site, const Input& input) const;

  const std::vector<Context>& contexts() const { return contexts_; }
  std::size_t context_of(std::size_t query) const { return query_context_.at(query); }
  std::optional<std::size_t> find_context(std::size_t program, const Input& input) const;
  // Listed queries the context can call directly, ascending.
  const std::vector<std::size_t>& dependencies(std::size_t context) const { return deps_.at(context); }
  // Queries of the context in universe order.
  const std::vector<std::size_t>& members(std::size_t context) const { return members_.at(context); }

  std::string hash() const;

 private:
  std::vector<Program> programs_;
  std::vector<Query> queries_;
  std::vector<Context> contexts_;
  std::vector<std::size_t> query_context_;
  std::vector<std::vector<std::size_t>> members_;
  std::vector<std::vector<std::size_t>> deps_;
  // Per context: resolved query index per instruction, or -1.
  std::vector<std::vector<long>> site_index_;
  std::unordered_map<std::string, std::size_t> query_index_;
  std::unordered_map<std::string, std::size_t> context_index_;
};

std::string query_key(std::size_t program, const Input& input, const Dyadic& p, std::string_view symbol);
std::string format_query(const Universe& universe, const Query& q);

}  // namespace grain
