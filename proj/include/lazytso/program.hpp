#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace lazytso {

// Values and addresses share one finite domain 0..size-1. Value 0 always exists.
struct DomainConfig {
  int size = 2;
};

using Value = std::uint8_t;

enum class BinOp { Add, Sub, Mul, Eq, Ne, Lt, And, Or };

// Immutable expression tree. Register references use global register indices.
struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
  enum class Kind { Const, Reg, Bin, Not };

  Kind kind = Kind::Const;
  int value = 0;  // Const: literal in 0..D-1; Reg: global register index
  BinOp op = BinOp::Add;
  ExprPtr lhs, rhs;  // Bin: both; Not: lhs only

  static ExprPtr constant(int v) {
    auto e = std::make_shared<Expr>();
    e->kind = Kind::Const;
    e->value = v;
    return e;
  }
  static ExprPtr reg(int r) {
    auto e = std::make_shared<Expr>();
    e->kind = Kind::Reg;
    e->value = r;
    return e;
  }
  static ExprPtr bin(BinOp op, ExprPtr a, ExprPtr b) {
    auto e = std::make_shared<Expr>();
    e->kind = Kind::Bin;
    e->op = op;
    e->lhs = std::move(a);
    e->rhs = std::move(b);
    return e;
  }
  static ExprPtr negation(ExprPtr a) {
    auto e = std::make_shared<Expr>();
    e->kind = Kind::Not;
    e->lhs = std::move(a);
    return e;
  }
};

inline bool expr_equal(const ExprPtr& a, const ExprPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->kind != b->kind) return false;
  switch (a->kind) {
  case Expr::Kind::Const:
  case Expr::Kind::Reg:
    return a->value == b->value;
  case Expr::Kind::Bin:
    return a->op == b->op && expr_equal(a->lhs, b->lhs) && expr_equal(a->rhs, b->rhs);
  case Expr::Kind::Not:
    return expr_equal(a->lhs, b->lhs);
  }
  return false;
}

inline void collect_regs(const ExprPtr& e, std::vector<int>& out) {
  if (!e) return;
  if (e->kind == Expr::Kind::Reg) out.push_back(e->value);
  collect_regs(e->lhs, out);
  collect_regs(e->rhs, out);
}

struct Command {
  enum class Kind { Load, Store, Mfence, Assign, Assume };

  Kind kind = Kind::Mfence;
  int reg = -1;  // Load/Assign target (global register index)
  ExprPtr addr;  // Load/Store address expression
  ExprPtr expr;  // Store value / Assign value / Assume condition

  static Command load(int reg, ExprPtr addr) { return {Kind::Load, reg, std::move(addr), nullptr}; }
  static Command store(ExprPtr addr, ExprPtr value) { return {Kind::Store, -1, std::move(addr), std::move(value)}; }
  static Command mfence() { return {Kind::Mfence, -1, nullptr, nullptr}; }
  static Command assign(int reg, ExprPtr value) { return {Kind::Assign, reg, nullptr, std::move(value)}; }
  static Command assume(ExprPtr cond) { return {Kind::Assume, -1, nullptr, std::move(cond)}; }
};

inline bool command_equal(const Command& a, const Command& b) {
  return a.kind == b.kind && a.reg == b.reg && expr_equal(a.addr, b.addr) && expr_equal(a.expr, b.expr);
}

// src/dst are global control-state ids. `origin` tracks the instruction this one
// was copied from during unrolling ("" = not a copy).
struct Instruction {
  std::string id;
  int src = -1;
  int dst = -1;
  Command cmd;
  std::string origin;
};

struct Thread {
  std::string name;
  std::vector<int> states;     // global state ids owned by this thread
  int initial = -1;
  std::vector<int> registers;  // global register ids owned by this thread
  std::vector<Instruction> instrs;
};

// Conjunctive goal: per-thread control-state constraint (any of the listed
// states) plus required values for registers/addresses. Locations use the
// valuation layout: [0, D) memory, [D, D+R) registers.
struct GoalSpec {
  std::vector<std::optional<std::vector<int>>> pc;
  std::vector<std::pair<int, Value>> val;
};

struct Program {
  DomainConfig domain;
  std::vector<std::string> state_names;  // global state id -> name
  std::vector<int> state_owner;          // global state id -> thread index
  std::vector<std::string> reg_names;    // global register id -> name
  std::vector<int> reg_owner;
  std::vector<std::string> addr_names;   // address i (bound to value i) -> name
  std::vector<Thread> threads;
  GoalSpec goal;

  int n_threads() const { return static_cast<int>(threads.size()); }
  int n_locations() const { return domain.size + static_cast<int>(reg_names.size()); }
  int loc_of_reg(int reg) const { return domain.size + reg; }

  int add_state(int thread, const std::string& name) {
    int id = static_cast<int>(state_names.size());
    state_names.push_back(name);
    state_owner.push_back(thread);
    threads[thread].states.push_back(id);
    return id;
  }
  int add_register(int thread, const std::string& name) {
    int id = static_cast<int>(reg_names.size());
    reg_names.push_back(name);
    reg_owner.push_back(thread);
    threads[thread].registers.push_back(id);
    return id;
  }

  const Instruction* find_instruction(const std::string& id) const {
    for (const auto& t : threads)
      for (const auto& i : t.instrs)
        if (i.id == id) return &i;
    return nullptr;
  }
  int thread_of_instruction(const std::string& id) const {
    for (int t = 0; t < n_threads(); ++t)
      for (const auto& i : threads[t].instrs)
        if (i.id == id) return t;
    return -1;
  }

  // Stable id scheme: thread.src.dst.index, with index counting parallel edges.
  void assign_instruction_ids() {
    for (auto& t : threads) {
      std::unordered_map<std::string, int> seen;
      for (auto& i : t.instrs) {
        std::string base = t.name + "." + state_names[i.src] + "." + state_names[i.dst];
        int n = seen[base]++;
        i.id = base + "." + std::to_string(n);
      }
    }
  }
};

inline bool operator==(const GoalSpec& a, const GoalSpec& b) {
  return a.pc == b.pc && a.val == b.val;
}

inline bool operator==(const Program& a, const Program& b) {
  if (a.domain.size != b.domain.size || a.state_names != b.state_names ||
      a.state_owner != b.state_owner || a.reg_names != b.reg_names ||
      a.reg_owner != b.reg_owner || a.addr_names != b.addr_names || !(a.goal == b.goal) ||
      a.threads.size() != b.threads.size())
    return false;
  for (size_t t = 0; t < a.threads.size(); ++t) {
    const Thread& x = a.threads[t];
    const Thread& y = b.threads[t];
    if (x.name != y.name || x.states != y.states || x.initial != y.initial ||
        x.registers != y.registers || x.instrs.size() != y.instrs.size())
      return false;
    for (size_t i = 0; i < x.instrs.size(); ++i) {
      const Instruction& p = x.instrs[i];
      const Instruction& q = y.instrs[i];
      if (p.id != q.id || p.src != q.src || p.dst != q.dst || !command_equal(p.cmd, q.cmd))
        return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Validation

struct Diagnostic {
  std::string message;
};

inline std::vector<Diagnostic> validate(const Program& p) {
  std::vector<Diagnostic> out;
  auto fail = [&](const std::string& m) { out.push_back({m}); };

  if (p.domain.size < 1) fail("domain size must be at least 1");
  if (static_cast<int>(p.addr_names.size()) > p.domain.size)
    fail("more addresses declared than domain values");

  // State/register ownership tables must be consistent with the thread lists.
  std::vector<char> state_seen(p.state_names.size(), 0);
  for (int t = 0; t < p.n_threads(); ++t) {
    for (int s : p.threads[t].states) {
      if (s < 0 || s >= static_cast<int>(p.state_names.size()) || p.state_owner[s] != t)
        fail("thread " + p.threads[t].name + " references foreign control state");
      else if (state_seen[s]++)
        fail("control state " + p.state_names[s] + " shared between threads");
    }
  }

  std::unordered_set<std::string> ids;
  for (int t = 0; t < p.n_threads(); ++t) {
    const Thread& th = p.threads[t];
    auto owns_state = [&](int s) {
      return s >= 0 && s < static_cast<int>(p.state_owner.size()) && p.state_owner[s] == t;
    };
    if (!owns_state(th.initial)) fail("thread " + th.name + ": initial state not in its state set");
    for (const Instruction& i : th.instrs) {
      if (!ids.insert(i.id).second) fail("duplicate instruction id " + i.id);
      if (!owns_state(i.src) || !owns_state(i.dst))
        fail("instruction " + i.id + ": endpoint outside thread " + th.name);
      std::vector<int> regs;
      if (i.cmd.reg >= 0) regs.push_back(i.cmd.reg);
      collect_regs(i.cmd.addr, regs);
      collect_regs(i.cmd.expr, regs);
      for (int r : regs) {
        if (r < 0 || r >= static_cast<int>(p.reg_owner.size()))
          fail("instruction " + i.id + ": unknown register");
        else if (p.reg_owner[r] != t)
          fail("instruction " + i.id + ": register " + p.reg_names[r] + " belongs to thread " +
               p.threads[p.reg_owner[r]].name);
      }
    }
  }

  // Constants must stay inside the domain.
  std::vector<const ExprPtr*> stack;
  auto check_consts = [&](const ExprPtr& root, const std::string& where) {
    std::vector<const Expr*> todo;
    if (root) todo.push_back(root.get());
    while (!todo.empty()) {
      const Expr* e = todo.back();
      todo.pop_back();
      if (e->kind == Expr::Kind::Const && (e->value < 0 || e->value >= p.domain.size))
        fail(where + ": constant " + std::to_string(e->value) + " outside domain");
      if (e->lhs) todo.push_back(e->lhs.get());
      if (e->rhs) todo.push_back(e->rhs.get());
    }
  };
  for (const auto& th : p.threads)
    for (const auto& i : th.instrs) {
      check_consts(i.cmd.addr, i.id);
      check_consts(i.cmd.expr, i.id);
    }

  if (!p.goal.pc.empty() && static_cast<int>(p.goal.pc.size()) != p.n_threads())
    fail("goal: pc constraint list does not match thread count");
  for (int t = 0; t < static_cast<int>(p.goal.pc.size()); ++t) {
    if (!p.goal.pc[t]) continue;
    for (int s : *p.goal.pc[t])
      if (s < 0 || s >= static_cast<int>(p.state_owner.size()) || p.state_owner[s] != t)
        fail("goal: state constraint for thread " + p.threads[t].name +
             " names a state outside that thread");
  }
  for (auto [loc, v] : p.goal.val) {
    if (loc < 0 || loc >= p.n_locations()) fail("goal: value constraint on unknown location");
    if (static_cast<int>(v) >= p.domain.size) fail("goal: required value outside domain");
  }
  return out;
}

// True iff every thread's control-flow graph is a DAG.
inline bool is_acyclic(const Program& p) {
  for (const Thread& th : p.threads) {
    std::unordered_map<int, std::vector<int>> succ;
    for (const Instruction& i : th.instrs) succ[i.src].push_back(i.dst);
    std::unordered_map<int, int> mark;  // 0 new, 1 on stack, 2 done
    std::vector<std::pair<int, size_t>> stack;
    for (int root : th.states) {
      if (mark[root]) continue;
      stack.push_back({root, 0});
      mark[root] = 1;
      while (!stack.empty()) {
        auto& [s, idx] = stack.back();
        auto& edges = succ[s];
        if (idx == edges.size()) {
          mark[s] = 2;
          stack.pop_back();
          continue;
        }
        int next = edges[idx++];
        if (mark[next] == 1) return false;
        if (mark[next] == 0) {
          mark[next] = 1;
          stack.push_back({next, 0});
        }
      }
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Printing (concrete syntax; parse(print(p)) == p for parsed programs)

inline std::string print_expr(const Program& p, const ExprPtr& e);

inline std::string binop_token(BinOp op) {
  switch (op) {
  case BinOp::Add: return "+";
  case BinOp::Sub: return "-";
  case BinOp::Mul: return "*";
  case BinOp::Eq: return "==";
  case BinOp::Ne: return "!=";
  case BinOp::Lt: return "<";
  case BinOp::And: return "&&";
  case BinOp::Or: return "||";
  }
  return "?";
}

inline std::string print_expr(const Program& p, const ExprPtr& e) {
  switch (e->kind) {
  case Expr::Kind::Const: return std::to_string(e->value);
  case Expr::Kind::Reg: return p.reg_names[e->value];
  case Expr::Kind::Not: return "!(" + print_expr(p, e->lhs) + ")";
  case Expr::Kind::Bin:
    return "(" + print_expr(p, e->lhs) + " " + binop_token(e->op) + " " +
           print_expr(p, e->rhs) + ")";
  }
  return "?";
}

inline std::string print_addr(const Program& p, const ExprPtr& e) {
  if (e->kind == Expr::Kind::Const && e->value >= 0 &&
      e->value < static_cast<int>(p.addr_names.size()))
    return p.addr_names[e->value];
  return "[" + print_expr(p, e) + "]";
}

inline std::string print_command(const Program& p, const Command& c) {
  switch (c.kind) {
  case Command::Kind::Load: return "load " + p.reg_names[c.reg] + " <- " + print_addr(p, c.addr);
  case Command::Kind::Store: return "store " + print_addr(p, c.addr) + " <- " + print_expr(p, c.expr);
  case Command::Kind::Mfence: return "mfence";
  case Command::Kind::Assign: return p.reg_names[c.reg] + " := " + print_expr(p, c.expr);
  case Command::Kind::Assume: return "assume " + print_expr(p, c.expr);
  }
  return "?";
}

inline std::string location_name(const Program& p, int loc) {
  if (loc < p.domain.size) {
    if (loc < static_cast<int>(p.addr_names.size())) return p.addr_names[loc];
    return "[" + std::to_string(loc) + "]";
  }
  return p.reg_names[loc - p.domain.size];
}

inline std::string print(const Program& p) {
  std::ostringstream os;
  os << "domain " << p.domain.size << ";\n";
  if (!p.addr_names.empty()) {
    os << "addresses";
    for (const auto& a : p.addr_names) os << " " << a;
    os << ";\n";
  }
  for (const Thread& th : p.threads) {
    os << "\nthread " << th.name << " {\n";
    os << "  init " << p.state_names[th.initial] << ";\n";
    for (const Instruction& i : th.instrs)
      os << "  " << p.state_names[i.src] << " -> " << p.state_names[i.dst] << " : "
         << print_command(p, i.cmd) << ";\n";
    os << "}\n";
  }
  bool has_pc = false;
  for (const auto& c : p.goal.pc) has_pc |= c.has_value();
  if (has_pc || !p.goal.val.empty()) {
    os << "\ngoal {";
    bool first = true;
    if (has_pc) {
      os << " ";
      for (int t = 0; t < p.n_threads(); ++t) {
        if (!p.goal.pc[t]) continue;
        if (!first) os << ", ";
        first = false;
        os << p.threads[t].name << " @ ";
        const auto& states = *p.goal.pc[t];
        if (states.size() == 1) {
          os << p.state_names[states[0]];
        } else {
          os << "{";
          for (size_t k = 0; k < states.size(); ++k)
            os << (k ? ", " : "") << p.state_names[states[k]];
          os << "}";
        }
      }
      os << ";";
    }
    if (!p.goal.val.empty()) {
      os << " where ";
      for (size_t k = 0; k < p.goal.val.size(); ++k) {
        if (k) os << ", ";
        os << location_name(p, p.goal.val[k].first) << " == "
           << static_cast<int>(p.goal.val[k].second);
      }
      os << ";";
    }
    os << " }\n";
  }
  return os.str();
}

}  // namespace lazytso
