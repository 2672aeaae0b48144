#include "grain/universe.hpp"

#include <algorithm>
#include <set>

namespace grain {

std::uint64_t PartialOracle::hash() const {
  std::uint64_t h = hash_combine(0x51ed270b27a1b3c5ULL, level);
  for (const auto& v : values) h = hash_combine(h, hash_value(v));
  return h;
}

std::string query_key(std::size_t program, const Input& input, const Dyadic& p, std::string_view symbol) {
  return std::to_string(program) + "|" + format_input(input) + "|" + p.str() + "|" + std::string(symbol);
}

namespace {

std::string context_key(std::size_t program, const Input& input) {
  return std::to_string(program) + "|" + format_input(input);
}

}  // namespace

std::string format_query(const Universe& universe, const Query& q) {
  return "(" + universe.program(q.program).name() + ", [" + format_input(q.input) + "], " + q.p.str() + ", " +
         q.symbol + ")";
}

Universe::Universe(std::vector<Program> programs, std::vector<Query> queries) : queries_(std::move(queries)) {
  std::set<std::string> names;
  for (const auto& p : programs)
    if (!names.insert(p.name()).second) throw Error("duplicate program name '" + p.name() + "' in universe");
  for (const auto& p : programs) programs_.push_back(resolve_self(p, programs));

  for (std::size_t i = 0; i < queries_.size(); ++i) {
    const Query& q = queries_[i];
    if (q.program >= programs_.size()) throw Error("query " + std::to_string(i + 1) + " names an unknown program");
    if (q.p < Dyadic(0) || Dyadic(1) < q.p) throw Error("query " + std::to_string(i + 1) + " has p outside [0,1]");
    if (!query_index_.emplace(query_key(q.program, q.input, q.p, q.symbol), i).second)
      throw Error("query " + std::to_string(i + 1) + " is listed twice");
    auto [it, fresh] = context_index_.emplace(context_key(q.program, q.input), contexts_.size());
    if (fresh) {
      contexts_.push_back({q.program, q.input});
      members_.emplace_back();
    }
    query_context_.push_back(it->second);
    members_[it->second].push_back(i);
  }

  for (const auto& ctx : contexts_) {
    const Program& prog = programs_[ctx.program];
    std::vector<long> sites(prog.code().size(), -1);
    std::vector<std::size_t> deps;
    for (std::size_t site : prog.reachable_query_sites()) {
      const QuerySpec& spec = prog.code()[site].query;
      auto subject = subject_of(ctx.program, spec);
      if (!subject) continue;
      auto idx = find(*subject, spec.instantiate(ctx.input), spec.p, spec.symbol);
      if (!idx) continue;
      sites[site] = static_cast<long>(*idx);
      deps.push_back(*idx);
    }
    std::sort(deps.begin(), deps.end());
    deps.erase(std::unique(deps.begin(), deps.end()), deps.end());
    site_index_.push_back(std::move(sites));
    deps_.push_back(std::move(deps));
  }
}

std::optional<std::size_t> Universe::find_program(std::string_view name) const {
  for (std::size_t i = 0; i < programs_.size(); ++i)
    if (programs_[i].name() == name) return i;
  return std::nullopt;
}

std::optional<std::size_t> Universe::find_program_hash(std::string_view hash) const {
  for (std::size_t i = 0; i < programs_.size(); ++i)
    if (programs_[i].hash() == hash) return i;
  return std::nullopt;
}

std::optional<std::size_t> Universe::find(std::size_t program, const Input& input, const Dyadic& p,
                                          std::string_view symbol) const {
  auto it = query_index_.find(query_key(program, input, p, symbol));
  if (it == query_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> Universe::subject_of(std::size_t caller, const QuerySpec& spec) const {
  if (spec.is_self()) return caller;
  return find_program(spec.subject);
}

std::optional<std::size_t> Universe::find_context(std::size_t program, const Input& input) const {
  auto it = context_index_.find(context_key(program, input));
  if (it == context_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> Universe::resolve(std::size_t caller, std::size_t site, const Input& input) const {
  if (auto ctx = find_context(caller, input)) {
    long idx = site_index_[*ctx].at(site);
    if (idx < 0) return std::nullopt;
    return static_cast<std::size_t>(idx);
  }
  const QuerySpec& spec = programs_.at(caller).code().at(site).query;
  auto subject = subject_of(caller, spec);
  if (!subject) return std::nullopt;
  return find(*subject, spec.instantiate(input), spec.p, spec.symbol);
}

std::string Universe::hash() const {
  std::string text;
  for (const auto& p : programs_) text += p.hash() + "\n";
  for (const auto& q : queries_) text += query_key(q.program, q.input, q.p, q.symbol) + "\n";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(text)));
  return std::string("fnv1a64:") + buf;
}

}  // namespace grain
