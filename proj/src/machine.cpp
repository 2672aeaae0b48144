#include "grain/machine.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "grain/universe.hpp"

namespace grain {

namespace {

constexpr std::int64_t kNone = -1;
constexpr std::int64_t kOther = INT64_MIN;

std::vector<std::string> split_ws(std::string_view line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.emplace_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

int parse_int(const std::string& s, int line) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw Error("line " + std::to_string(line) + ": expected integer, got '" + s + "'");
  return v;
}

int parse_register(const std::string& s, int line) {
  if (s.size() < 2 || s[0] != 'r') throw Error("line " + std::to_string(line) + ": expected register, got '" + s + "'");
  int r = parse_int(s.substr(1), line);
  if (r < 0 || r >= kRegisters) throw Error("line " + std::to_string(line) + ": register out of range '" + s + "'");
  return r;
}

struct ExecState {
  int ip = 0;
  std::array<std::int64_t, kRegisters> regs{};

  ExecState() { regs.fill(kNone); }
  friend bool operator==(const ExecState&, const ExecState&) = default;
};

struct ExecStateHash {
  std::size_t operator()(const ExecState& s) const {
    std::uint64_t h = static_cast<std::uint64_t>(s.ip);
    for (auto r : s.regs) h = hash_combine(h, static_cast<std::uint64_t>(r));
    return static_cast<std::size_t>(h);
  }
};

std::int64_t read_input(const Program& prog, const Input& input, int pos) {
  long idx = pos >= 0 ? pos : static_cast<long>(input.size()) + pos;
  if (idx < 0 || idx >= static_cast<long>(input.size())) return kNone;
  return prog.symbol_code(input[static_cast<std::size_t>(idx)]);
}

std::int64_t self_register(const Program& prog) {
  if (!prog.self_index()) throw Error("program '" + prog.name() + "' executes SELF without a bound self-reference");
  return static_cast<std::int64_t>(*prog.self_index());
}

// Executes one non-branching instruction in place; returns false if it is not one.
bool step_plain(const Program& prog, const Input& input, ExecState& s) {
  const Instruction& ins = prog.code()[static_cast<std::size_t>(s.ip)];
  switch (ins.op) {
    case Op::Self:
      s.regs[ins.reg] = self_register(prog);
      ++s.ip;
      return true;
    case Op::Read:
      s.regs[ins.reg] = read_input(prog, input, ins.pos);
      ++s.ip;
      return true;
    case Op::Jump:
      s.ip = ins.target[0];
      return true;
    case Op::JumpEq:
      s.ip = s.regs[ins.reg] == ins.integer ? ins.target[0] : s.ip + 1;
      return true;
    default:
      return false;
  }
}

bool off_end(const Program& prog, const ExecState& s) {
  return s.ip < 0 || s.ip >= static_cast<int>(prog.code().size());
}

// Result of running deterministic instructions until a coin, an emit, a halt or a cycle.
struct Segment {
  enum class Kind { Emit, Silent, Coin, Query } kind;
  ExecState state;
  std::size_t symbol = 0;
};

Segment run_segment(const Program& prog, const Input& input, ExecState s) {
  std::unordered_set<ExecState, ExecStateHash> seen;
  for (;;) {
    if (off_end(prog, s)) return {Segment::Kind::Silent, s};
    const Instruction& ins = prog.code()[static_cast<std::size_t>(s.ip)];
    switch (ins.op) {
      case Op::Emit:
        return {Segment::Kind::Emit, s, prog.symbol_index(ins.symbol)};
      case Op::Halt:
        return {Segment::Kind::Silent, s};
      case Op::Coin:
        return {Segment::Kind::Coin, s};
      case Op::Query:
        return {Segment::Kind::Query, s};
      default:
        if (!seen.insert(s).second) return {Segment::Kind::Silent, s};
        step_plain(prog, input, s);
    }
  }
}

void require_oracle_free(const Program& prog) {
  if (prog.makes_queries())
    throw Error("program '" + prog.name() + "' makes oracle calls; use run_bounded with an oracle");
}

std::string target_str(int t) { return "@" + std::to_string(t); }

}  // namespace

std::string format_input(const Input& input) {
  std::string out;
  for (std::size_t i = 0; i < input.size(); ++i) {
    if (i) out += ',';
    out += input[i];
  }
  return out;
}

Input parse_input(std::string_view text) {
  Input out;
  if (text.empty() || text == "eps") return out;
  std::size_t start = 0;
  for (;;) {
    std::size_t comma = text.find(',', start);
    std::string_view part = text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    if (part.empty()) throw Error("empty symbol in input '" + std::string(text) + "'");
    out.emplace_back(part);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

Input QuerySpec::instantiate(const Input& current) const {
  switch (source) {
    case Source::Current:
      return current;
    case Source::Empty:
      return {};
    case Source::Literal:
      return literal;
  }
  return {};
}

Program Program::parse(std::string_view source, std::string_view default_name) {
  Program prog;
  prog.name_ = std::string(default_name);
  bool typed = false;

  struct Pending {
    std::array<std::string, 2> labels;
    int line = 0;
  };
  std::vector<Pending> pending;
  std::map<std::string, int> labels;

  std::istringstream in{std::string(source)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (auto c = raw.find(';'); c != std::string::npos) raw.erase(c);
    auto tok = split_ws(raw);
    while (!tok.empty() && tok.front().size() > 1 && tok.front().back() == ':') {
      std::string label = tok.front().substr(0, tok.front().size() - 1);
      if (!labels.emplace(label, static_cast<int>(prog.code_.size())).second)
        throw Error("line " + std::to_string(line_no) + ": duplicate label '" + label + "'");
      tok.erase(tok.begin());
    }
    if (tok.empty()) continue;
    const std::string& op = tok[0];
    auto need = [&](std::size_t n) {
      if (tok.size() != n)
        throw Error("line " + std::to_string(line_no) + ": '" + op + "' takes " + std::to_string(n - 1) + " operands");
    };
    if (op == ".name") {
      need(2);
      prog.name_ = tok[1];
      continue;
    }
    if (op == ".type") {
      if (tok.size() < 2) throw Error("line " + std::to_string(line_no) + ": '.type' needs at least one symbol");
      typed = true;
      prog.alphabet_.assign(tok.begin() + 1, tok.end());
      continue;
    }
    Instruction ins;
    Pending pend;
    pend.line = line_no;
    if (op == "emit") {
      need(2);
      ins.op = Op::Emit;
      ins.symbol = tok[1];
    } else if (op == "halt") {
      need(1);
      ins.op = Op::Halt;
    } else if (op == "coin") {
      need(3);
      ins.op = Op::Coin;
      pend.labels = {tok[1], tok[2]};
    } else if (op == "query") {
      need(7);
      ins.op = Op::Query;
      ins.query.subject = tok[1];
      if (tok[2] == "in") {
        ins.query.source = QuerySpec::Source::Current;
      } else if (tok[2] == "eps") {
        ins.query.source = QuerySpec::Source::Empty;
      } else {
        ins.query.source = QuerySpec::Source::Literal;
        ins.query.literal = parse_input(tok[2]);
      }
      ins.query.p = Dyadic::parse(tok[3]);
      if (ins.query.p < Dyadic(0) || Dyadic(1) < ins.query.p)
        throw Error("line " + std::to_string(line_no) + ": query probability outside [0,1]");
      ins.query.symbol = tok[4];
      pend.labels = {tok[5], tok[6]};
    } else if (op == "self") {
      need(2);
      ins.op = Op::Self;
      ins.reg = parse_register(tok[1], line_no);
    } else if (op == "read") {
      need(3);
      ins.op = Op::Read;
      ins.reg = parse_register(tok[1], line_no);
      ins.pos = parse_int(tok[2], line_no);
    } else if (op == "jeq") {
      need(4);
      ins.op = Op::JumpEq;
      ins.reg = parse_register(tok[1], line_no);
      if (tok[2] == "none") {
        ins.operand = Instruction::Operand::None;
      } else if (tok[2][0] == '#') {
        ins.operand = Instruction::Operand::Integer;
        ins.integer = parse_int(tok[2].substr(1), line_no);
      } else {
        ins.operand = Instruction::Operand::Symbol;
        ins.symbol = tok[2];
      }
      pend.labels = {tok[3], ""};
    } else if (op == "jump") {
      need(2);
      ins.op = Op::Jump;
      pend.labels = {tok[1], ""};
    } else {
      throw Error("line " + std::to_string(line_no) + ": unknown instruction '" + op + "'");
    }
    prog.code_.push_back(std::move(ins));
    pending.push_back(std::move(pend));
  }

  if (prog.code_.empty()) throw Error("program '" + prog.name_ + "' has no instructions");
  if (prog.name_.empty()) throw Error("program has no name");

  for (std::size_t i = 0; i < prog.code_.size(); ++i) {
    for (int b = 0; b < 2; ++b) {
      const std::string& l = pending[i].labels[b];
      if (l.empty()) continue;
      int t;
      if (l[0] == '@') {
        t = parse_int(l.substr(1), pending[i].line);
      } else {
        auto it = labels.find(l);
        if (it == labels.end()) throw Error("line " + std::to_string(pending[i].line) + ": unknown label '" + l + "'");
        t = it->second;
      }
      if (t < 0 || t >= static_cast<int>(prog.code_.size()))
        throw Error("line " + std::to_string(pending[i].line) + ": jump target out of range");
      prog.code_[i].target[b] = t;
    }
  }

  for (const auto& ins : prog.code_) {
    if (ins.op != Op::Emit) continue;
    if (std::find(prog.alphabet_.begin(), prog.alphabet_.end(), ins.symbol) == prog.alphabet_.end()) {
      if (typed) throw Error("program '" + prog.name_ + "' emits '" + ins.symbol + "' outside its declared type");
      prog.alphabet_.push_back(ins.symbol);
    }
  }
  if (prog.alphabet_.empty()) throw Error("program '" + prog.name_ + "' has an empty output alphabet");
  for (auto& ins : prog.code_) {
    if (ins.op != Op::JumpEq) continue;
    if (ins.operand == Instruction::Operand::None) {
      ins.integer = kNone;
    } else if (ins.operand == Instruction::Operand::Symbol) {
      auto it = std::find(prog.literals_.begin(), prog.literals_.end(), ins.symbol);
      if (it == prog.literals_.end()) {
        prog.literals_.push_back(ins.symbol);
        it = prog.literals_.end() - 1;
      }
      ins.integer = -2 - static_cast<std::int64_t>(it - prog.literals_.begin());
    } else if (ins.integer < 0) {
      throw Error("program '" + prog.name_ + "': integer operands must be non-negative");
    }
  }
  return prog;
}

Program Program::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open program file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.stem().string());
}

std::size_t Program::symbol_index(std::string_view symbol) const {
  for (std::size_t i = 0; i < alphabet_.size(); ++i)
    if (alphabet_[i] == symbol) return i;
  return npos;
}

std::int64_t Program::symbol_code(std::string_view symbol) const {
  for (std::size_t i = 0; i < literals_.size(); ++i)
    if (literals_[i] == symbol) return -2 - static_cast<std::int64_t>(i);
  return kOther;
}

std::string Program::encode() const {
  std::string out = ".name " + name_ + "\n.type";
  for (const auto& s : alphabet_) out += " " + s;
  out += "\n";
  for (const auto& ins : code_) {
    switch (ins.op) {
      case Op::Emit:
        out += "emit " + ins.symbol;
        break;
      case Op::Halt:
        out += "halt";
        break;
      case Op::Coin:
        out += "coin " + target_str(ins.target[0]) + " " + target_str(ins.target[1]);
        break;
      case Op::Query: {
        const auto& q = ins.query;
        std::string src = q.source == QuerySpec::Source::Current ? "in"
                          : q.source == QuerySpec::Source::Empty ? "eps"
                                                                 : format_input(q.literal);
        out += "query " + q.subject + " " + src + " " + q.p.str() + " " + q.symbol + " " + target_str(ins.target[0]) +
               " " + target_str(ins.target[1]);
        break;
      }
      case Op::Self:
        out += "self r" + std::to_string(ins.reg);
        break;
      case Op::Read:
        out += "read r" + std::to_string(ins.reg) + " " + std::to_string(ins.pos);
        break;
      case Op::JumpEq: {
        std::string operand = ins.operand == Instruction::Operand::None      ? "none"
                              : ins.operand == Instruction::Operand::Integer ? "#" + std::to_string(ins.integer)
                                                                             : ins.symbol;
        out += "jeq r" + std::to_string(ins.reg) + " " + operand + " " + target_str(ins.target[0]);
        break;
      }
      case Op::Jump:
        out += "jump " + target_str(ins.target[0]);
        break;
    }
    out += "\n";
  }
  return out;
}

std::string Program::hash() const {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(encode())));
  return std::string("fnv1a64:") + buf;
}

bool Program::uses_self() const {
  return std::any_of(code_.begin(), code_.end(), [](const Instruction& ins) {
    return ins.op == Op::Self || (ins.op == Op::Query && ins.query.is_self());
  });
}

std::vector<std::size_t> Program::reachable_query_sites() const {
  std::vector<char> seen(code_.size(), 0);
  std::vector<int> stack{0};
  std::vector<std::size_t> sites;
  while (!stack.empty()) {
    int ip = stack.back();
    stack.pop_back();
    if (ip < 0 || ip >= static_cast<int>(code_.size()) || seen[ip]) continue;
    seen[ip] = 1;
    const auto& ins = code_[ip];
    switch (ins.op) {
      case Op::Emit:
      case Op::Halt:
        break;
      case Op::Coin:
      case Op::Query:
        stack.push_back(ins.target[0]);
        stack.push_back(ins.target[1]);
        if (ins.op == Op::Query) sites.push_back(static_cast<std::size_t>(ip));
        break;
      case Op::Jump:
        stack.push_back(ins.target[0]);
        break;
      case Op::JumpEq:
        stack.push_back(ins.target[0]);
        stack.push_back(ip + 1);
        break;
      default:
        stack.push_back(ip + 1);
    }
  }
  std::sort(sites.begin(), sites.end());
  return sites;
}

Program resolve_self(const Program& program, const std::vector<Program>& universe) {
  const std::string h = program.hash();
  for (std::size_t i = 0; i < universe.size(); ++i) {
    if (universe[i].hash() == h) {
      Program out = program;
      out.self_index_ = i;
      return out;
    }
  }
  throw Error("unbound self-reference: program '" + program.name() + "' is not in the universe");
}

Dyadic OutcomeDistribution::total() const {
  Dyadic t = silent;
  for (const auto& m : mass) t += m;
  return t;
}

const Dyadic& OutcomeDistribution::of(std::string_view symbol) const {
  for (std::size_t i = 0; i < alphabet.size(); ++i)
    if (alphabet[i] == symbol) return mass[i];
  throw Error("symbol '" + std::string(symbol) + "' is not in the output alphabet");
}

namespace {

template <class Resolve>
OutcomeDistribution run_frontier(const Program& prog, const Input& input, unsigned budget, Resolve&& on_query) {
  OutcomeDistribution out;
  out.alphabet = prog.alphabet();
  out.mass.assign(prog.alphabet().size(), Dyadic(0));
  std::unordered_map<ExecState, Dyadic, ExecStateHash> frontier, next;
  frontier.emplace(ExecState{}, Dyadic(1));
  for (unsigned step = 1; step <= budget && !frontier.empty(); ++step) {
    next.clear();
    for (auto& [state, mass] : frontier) {
      if (off_end(prog, state)) {
        out.silent += mass;
        continue;
      }
      const Instruction& ins = prog.code()[static_cast<std::size_t>(state.ip)];
      switch (ins.op) {
        case Op::Emit:
          out.mass[prog.symbol_index(ins.symbol)] += mass;
          break;
        case Op::Halt:
          out.silent += mass;
          break;
        case Op::Coin: {
          Dyadic half = mass.half();
          for (int b = 0; b < 2; ++b) {
            ExecState s = state;
            s.ip = ins.target[b];
            next[s] += half;
          }
          break;
        }
        case Op::Query: {
          // Branch masses for answers 0 and 1; the rest halts.
          std::array<Dyadic, 2> branch;
          if (!on_query(static_cast<std::size_t>(state.ip), branch, out.clamped)) {
            out.silent += mass;
            break;
          }
          Dyadic used(0);
          for (int b = 0; b < 2; ++b) {
            if (branch[b].is_zero()) continue;
            ExecState s = state;
            s.ip = ins.target[b];
            Dyadic m = mass * branch[b];
            used += m;
            next[s] += m;
          }
          out.silent += mass - used;
          break;
        }
        default: {
          ExecState s = state;
          step_plain(prog, input, s);
          next[s] += mass;
        }
      }
    }
    std::swap(frontier, next);
  }
  for (auto& [state, mass] : frontier) out.silent += mass;
  return out;
}

}  // namespace

OutcomeDistribution run_bounded(const Universe& universe, std::size_t program, const Input& input, unsigned budget,
                                const PartialOracle& oracle) {
  const Program& prog = universe.program(program);
  const Dyadic u = Dyadic::unit(budget);
  const std::size_t answerable = std::min<std::size_t>(budget, oracle.values.size());
  return run_frontier(prog, input, budget, [&](std::size_t site, std::array<Dyadic, 2>& branch, bool& clamped) {
    auto idx = universe.resolve(program, site, input);
    if (!idx) {
      const auto& q = prog.code()[site].query;
      throw Error("program '" + prog.name() + "' reaches query (" + q.subject + ", " +
                  format_input(q.instantiate(input)) + ", " + q.p.str() + ", " + q.symbol +
                  ") which is not in the universe");
    }
    if (*idx >= answerable) return false;
    const Dyadic& v = oracle.values[*idx];
    branch[1] = v - u;
    branch[0] = Dyadic(1) - v - u;
    for (auto& b : branch) {
      if (b.sign() < 0) {
        b = Dyadic(0);
        clamped = true;
      }
    }
    return true;
  });
}

OutcomeDistribution run_bounded(const Program& program, const Input& input, unsigned budget) {
  require_oracle_free(program);
  return run_frontier(program, input, budget, [](std::size_t, std::array<Dyadic, 2>&, bool&) { return false; });
}

Dyadic lambda_lower(const Program& program, const Input& input, std::string_view symbol, unsigned depth) {
  require_oracle_free(program);
  const std::size_t target = program.symbol_index(symbol);
  if (target == Program::npos) throw Error("symbol '" + std::string(symbol) + "' is not in the output alphabet");
  Dyadic total(0);
  std::unordered_map<ExecState, Dyadic, ExecStateHash> frontier, next;
  frontier.emplace(ExecState{}, Dyadic(1));
  for (unsigned level = 0; !frontier.empty(); ++level) {
    next.clear();
    for (auto& [state, mass] : frontier) {
      Segment seg = run_segment(program, input, state);
      if (seg.kind == Segment::Kind::Emit) {
        if (seg.symbol == target) total += mass;
      } else if (seg.kind == Segment::Kind::Coin && level < depth) {
        const auto& ins = program.code()[static_cast<std::size_t>(seg.state.ip)];
        for (int b = 0; b < 2; ++b) {
          ExecState s = seg.state;
          s.ip = ins.target[b];
          next[s] += mass.half();
        }
      }
    }
    std::swap(frontier, next);
  }
  return total;
}

std::vector<Rational> lambda_exact(const Program& program, const Input& input) {
  require_oracle_free(program);
  const std::size_t k = program.alphabet().size();
  constexpr std::size_t kMaxStates = 4096;

  std::unordered_map<ExecState, std::size_t, ExecStateHash> ids;
  std::vector<ExecState> coins;
  // Outcome of a collapsed segment: an emitted symbol, silence, or a coin state.
  struct Leaf {
    long symbol = -1;
    long coin = -1;
  };
  auto classify = [&](const ExecState& s) {
    Segment seg = run_segment(program, input, s);
    Leaf leaf;
    if (seg.kind == Segment::Kind::Emit) {
      leaf.symbol = static_cast<long>(seg.symbol);
    } else if (seg.kind == Segment::Kind::Coin) {
      auto [it, fresh] = ids.emplace(seg.state, coins.size());
      if (fresh) {
        coins.push_back(seg.state);
        if (coins.size() > kMaxStates) throw Error("program '" + program.name() + "' has too many coin states");
      }
      leaf.coin = static_cast<long>(it->second);
    }
    return leaf;
  };

  Leaf start = classify(ExecState{});
  std::vector<std::array<Leaf, 2>> succ;
  for (std::size_t i = 0; i < coins.size(); ++i) {
    const auto& ins = program.code()[static_cast<std::size_t>(coins[i].ip)];
    std::array<Leaf, 2> s;
    for (int b = 0; b < 2; ++b) {
      ExecState t = coins[i];
      t.ip = ins.target[b];
      s[b] = classify(t);
    }
    succ.push_back(s);
  }
  const std::size_t n = coins.size();

  // States that can reach an emit; the rest have value 0 and are dropped from the system.
  std::vector<char> live(n, 0);
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (live[i]) continue;
      for (const auto& l : succ[i]) {
        if (l.symbol >= 0 || (l.coin >= 0 && live[static_cast<std::size_t>(l.coin)])) {
          live[i] = 1;
          changed = true;
          break;
        }
      }
    }
  }
  std::vector<long> row(n, -1);
  std::size_t m = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (live[i]) row[i] = static_cast<long>(m++);

  // (I - P) x = b with one right-hand column per symbol.
  std::vector<std::vector<Rational>> a(m, std::vector<Rational>(m + k, Rational(0)));
  for (std::size_t i = 0; i < n; ++i) {
    if (row[i] < 0) continue;
    auto& r = a[static_cast<std::size_t>(row[i])];
    r[static_cast<std::size_t>(row[i])] += 1;
    for (const auto& l : succ[i]) {
      if (l.symbol >= 0) {
        r[m + static_cast<std::size_t>(l.symbol)] += Rational(1, 2);
      } else if (l.coin >= 0 && row[static_cast<std::size_t>(l.coin)] >= 0) {
        r[static_cast<std::size_t>(row[static_cast<std::size_t>(l.coin)])] -= Rational(1, 2);
      }
    }
  }
  for (std::size_t c = 0; c < m; ++c) {
    std::size_t piv = c;
    while (piv < m && a[piv][c] == 0) ++piv;
    if (piv == m) throw Error("singular absorption system");
    std::swap(a[c], a[piv]);
    Rational inv = 1 / a[c][c];
    for (std::size_t j = c; j < m + k; ++j) a[c][j] *= inv;
    for (std::size_t r = 0; r < m; ++r) {
      if (r == c || a[r][c] == 0) continue;
      Rational f = a[r][c];
      for (std::size_t j = c; j < m + k; ++j) a[r][j] -= f * a[c][j];
    }
  }

  std::vector<Rational> out(k, Rational(0));
  if (start.symbol >= 0) {
    out[static_cast<std::size_t>(start.symbol)] = 1;
  } else if (start.coin >= 0 && row[static_cast<std::size_t>(start.coin)] >= 0) {
    auto r = static_cast<std::size_t>(row[static_cast<std::size_t>(start.coin)]);
    for (std::size_t s = 0; s < k; ++s) out[s] = a[r][m + s];
  }
  return out;
}

std::vector<std::string> bernoulli_lines(const Dyadic& p, std::string_view yes, std::string_view no,
                                         std::string_view prefix) {
  if (p < Dyadic(0) || Dyadic(1) < p) throw Error("probability outside [0,1]");
  const std::string pre(prefix);
  if (p == Dyadic(1)) return {"emit " + std::string(yes)};
  if (p.is_zero()) return {"emit " + std::string(no)};
  const unsigned e = p.exponent();
  const mpz_class& m = p.mantissa();
  std::vector<std::string> lines;
  for (unsigned i = 1; i <= e; ++i) {
    bool one = mpz_tstbit(m.get_mpz_t(), e - i) != 0;
    std::string next = i == e ? pre + "no" : pre + "b" + std::to_string(i + 1);
    std::string label = pre + "b" + std::to_string(i) + ": ";
    lines.push_back(label + (one ? "coin " + pre + "yes " + next : "coin " + next + " " + pre + "no"));
  }
  lines.push_back(pre + "yes: emit " + std::string(yes));
  lines.push_back(pre + "no: emit " + std::string(no));
  return lines;
}

Program make_bernoulli_program(const Dyadic& p, std::string_view yes, std::string_view no, std::string_view name) {
  std::string src = ".name " + std::string(name) + "\n.type " + std::string(yes) + " " + std::string(no) + "\n";
  for (const auto& l : bernoulli_lines(p, yes, no, "")) src += l + "\n";
  return Program::parse(src);
}

}  // namespace grain
