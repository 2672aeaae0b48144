#pragma once

// Test-side reference implementations, written independently of the library kernels.

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "grain/machine.hpp"
#include "grain/numeric.hpp"

namespace ref {

using grain::Rational;

struct Outcome {
  std::map<std::string, Rational> mass;
  Rational silent = 0;
  Rational total() const {
    Rational t = silent;
    for (const auto& [s, m] : mass) t += m;
    return t;
  }
};

// Oracle value for the query issued at `site`, or nullopt when the call must halt.
using Lookup = std::function<std::optional<Rational>(std::size_t site)>;

namespace detail {

inline void walk(const grain::Program& prog, const grain::Input& input, int ip, std::vector<long long> regs,
                 unsigned steps, const Rational& mass, const Rational& slack, const Lookup& lookup, Outcome& out) {
  if (mass == 0) return;
  if (steps == 0 || ip < 0 || ip >= static_cast<int>(prog.code().size())) {
    out.silent += mass;
    return;
  }
  const auto& ins = prog.code()[ip];
  using grain::Op;
  switch (ins.op) {
    case Op::Emit:
      out.mass[ins.symbol] += mass;
      return;
    case Op::Halt:
      out.silent += mass;
      return;
    case Op::Coin:
      walk(prog, input, ins.target[0], regs, steps - 1, mass / 2, slack, lookup, out);
      walk(prog, input, ins.target[1], regs, steps - 1, mass / 2, slack, lookup, out);
      return;
    case Op::Query: {
      auto v = lookup(static_cast<std::size_t>(ip));
      if (!v) {
        out.silent += mass;
        return;
      }
      Rational one = *v - slack, zero = 1 - *v - slack;
      if (one < 0) one = 0;
      if (zero < 0) zero = 0;
      out.silent += mass * (1 - one - zero);
      walk(prog, input, ins.target[1], regs, steps - 1, mass * one, slack, lookup, out);
      walk(prog, input, ins.target[0], regs, steps - 1, mass * zero, slack, lookup, out);
      return;
    }
    case Op::Self:
      regs[ins.reg] = static_cast<long long>(prog.self_index().value());
      walk(prog, input, ip + 1, regs, steps - 1, mass, slack, lookup, out);
      return;
    case Op::Read: {
      long idx = ins.pos >= 0 ? ins.pos : static_cast<long>(input.size()) + ins.pos;
      regs[ins.reg] = (idx < 0 || idx >= static_cast<long>(input.size())) ? -1 : prog.symbol_code(input[idx]);
      walk(prog, input, ip + 1, regs, steps - 1, mass, slack, lookup, out);
      return;
    }
    case Op::JumpEq:
      walk(prog, input, regs[ins.reg] == ins.integer ? ins.target[0] : ip + 1, regs, steps - 1, mass, slack, lookup,
           out);
      return;
    case Op::Jump:
      walk(prog, input, ins.target[0], regs, steps - 1, mass, slack, lookup, out);
      return;
  }
}

}  // namespace detail

// Exhaustive path enumeration without state merging.
inline Outcome run(const grain::Program& prog, const grain::Input& input, unsigned budget, const Lookup& lookup) {
  Outcome out;
  for (const auto& s : prog.alphabet()) out.mass[s] = 0;
  Rational slack(1);
  for (unsigned i = 0; i < budget; ++i) slack /= 2;
  detail::walk(prog, input, 0, std::vector<long long>(grain::kRegisters, -1), budget, Rational(1), slack, lookup, out);
  return out;
}

// Total variation distance between two laws on the same support order.
inline Rational total_variation(const std::vector<Rational>& a, const std::vector<Rational>& b) {
  Rational s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += abs(a[i] - b[i]);
  return s / 2;
}

}  // namespace ref
