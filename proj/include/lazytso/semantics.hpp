#pragma once

#include <cassert>
#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "lazytso/program.hpp"

namespace lazytso {

enum class Mode { SC, TSO };

inline const char* mode_name(Mode m) { return m == Mode::SC ? "sc" : "tso"; }

// ---------------------------------------------------------------------------
// Machine states

struct BufferEntry {
  int event_id;  // event counter value of the buffering store
  Value addr;
  Value val;
  bool operator==(const BufferEntry&) const = default;
};

// (pc, val, buf) plus per-thread event counters. Buffers are FIFO with the
// oldest entry at the front.
struct MachineState {
  std::vector<int> pc;
  std::vector<Value> val;                      // [0,D) memory, [D,D+R) registers
  std::vector<std::vector<BufferEntry>> buf;   // per thread
  std::vector<int> ec;                         // per-thread event counter

  bool buffers_empty() const {
    for (const auto& b : buf)
      if (!b.empty()) return false;
    return true;
  }
  bool operator==(const MachineState&) const = default;
};

inline MachineState initial_state(const Program& p) {
  MachineState s;
  s.pc.resize(p.n_threads());
  for (int t = 0; t < p.n_threads(); ++t) s.pc[t] = p.threads[t].initial;
  s.val.assign(p.n_locations(), 0);
  s.buf.resize(p.n_threads());
  s.ec.assign(p.n_threads(), 0);
  return s;
}

// ---------------------------------------------------------------------------
// Expression evaluation: arithmetic modulo D, comparisons and logicals 0/1.

inline Value eval_expr(const std::vector<Value>& val, const ExprPtr& e, int domain_size) {
  switch (e->kind) {
  case Expr::Kind::Const:
    return static_cast<Value>(e->value % domain_size);
  case Expr::Kind::Reg:
    return val[static_cast<size_t>(domain_size) + e->value];
  case Expr::Kind::Not:
    return eval_expr(val, e->lhs, domain_size) == 0 ? 1 % domain_size : 0;
  case Expr::Kind::Bin: {
    int a = eval_expr(val, e->lhs, domain_size);
    int b = eval_expr(val, e->rhs, domain_size);
    int r = 0;
    switch (e->op) {
    case BinOp::Add: r = a + b; break;
    case BinOp::Sub: r = a - b; break;
    case BinOp::Mul: r = a * b; break;
    case BinOp::Eq: r = (a == b); break;
    case BinOp::Ne: r = (a != b); break;
    case BinOp::Lt: r = (a < b); break;
    case BinOp::And: r = (a != 0 && b != 0); break;
    case BinOp::Or: r = (a != 0 || b != 0); break;
    }
    r %= domain_size;
    if (r < 0) r += domain_size;
    return static_cast<Value>(r);
  }
  }
  return 0;
}

// ---------------------------------------------------------------------------
// Events and computations

struct Event {
  int thread = -1;
  int id = -1;           // per-thread event counter; a flush carries its store's id
  bool flush = false;
  std::string instr;     // instruction id; for a flush, the matching store's
  int addr = -1;         // accessed address, -1 if none
  Command::Kind op = Command::Kind::Mfence;  // command kind (Store for flushes)
};

inline bool operator==(const Event& a, const Event& b) {
  return a.thread == b.thread && a.id == b.id && a.flush == b.flush && a.instr == b.instr &&
         a.addr == b.addr;
}

struct Computation {
  std::vector<Event> events;
  MachineState reached;
};

// A step descriptor. Replaying descriptors from the initial state rebuilds the
// computation with full event information.
struct Step {
  enum class Kind { Instr, ScStore, Flush };
  Kind kind = Kind::Instr;
  int thread = -1;
  int instr = -1;  // local index into threads[thread].instrs; -1 for Flush
};

// ---------------------------------------------------------------------------
// Small-step rules (Fig.-9-style, with the SC store+flush composite)

namespace detail_sem {

inline const Instruction& instr_at(const Program& p, int t, int i) {
  return p.threads[t].instrs[i];
}

// Newest buffered store to `a` by thread t, or nullptr.
inline const BufferEntry* newest_to(const MachineState& s, int t, Value a) {
  const auto& b = s.buf[t];
  for (auto it = b.rbegin(); it != b.rend(); ++it)
    if (it->addr == a) return &*it;
  return nullptr;
}

}  // namespace detail_sem

// Applies one step; returns false if the step is not enabled in `s`.
// On success appends the emitted events and mutates the state.
inline bool apply_step(const Program& p, MachineState& s, const Step& st,
                       std::vector<Event>* events = nullptr) {
  const int D = p.domain.size;
  auto emit = [&](Event e) {
    if (events) events->push_back(std::move(e));
  };
  if (st.kind == Step::Kind::Flush) {
    auto& b = s.buf[st.thread];
    if (b.empty()) return false;
    BufferEntry e = b.front();
    b.erase(b.begin());
    s.val[e.addr] = e.val;
    // The flush reuses the store's event id; the instruction is filled in by
    // replay, so record only thread/id/addr here.
    emit({st.thread, e.event_id, true, "", e.addr, Command::Kind::Store});
    return true;
  }
  const Instruction& ins = detail_sem::instr_at(p, st.thread, st.instr);
  if (s.pc[st.thread] != ins.src) return false;
  const Command& c = ins.cmd;
  int t = st.thread;
  switch (c.kind) {
  case Command::Kind::Load: {
    Value a = eval_expr(s.val, c.addr, D);
    const BufferEntry* hit = detail_sem::newest_to(s, t, a);
    Value v = hit ? hit->val : s.val[a];
    s.val[p.loc_of_reg(c.reg)] = v;
    emit({t, s.ec[t]++, false, ins.id, a, c.kind});
    break;
  }
  case Command::Kind::Store: {
    Value a = eval_expr(s.val, c.addr, D);
    Value v = eval_expr(s.val, c.expr, D);
    int id = s.ec[t]++;
    emit({t, id, false, ins.id, a, c.kind});
    if (st.kind == Step::Kind::ScStore) {
      s.val[a] = v;
      emit({t, id, true, ins.id, a, c.kind});
    } else {
      s.buf[t].push_back({id, a, v});
    }
    break;
  }
  case Command::Kind::Mfence:
    if (!s.buf[t].empty()) return false;
    emit({t, s.ec[t]++, false, ins.id, -1, c.kind});
    break;
  case Command::Kind::Assign:
    s.val[p.loc_of_reg(c.reg)] = eval_expr(s.val, c.expr, D);
    emit({t, s.ec[t]++, false, ins.id, -1, c.kind});
    break;
  case Command::Kind::Assume:
    if (eval_expr(s.val, c.expr, D) == 0) return false;
    emit({t, s.ec[t]++, false, ins.id, -1, c.kind});
    break;
  }
  s.pc[t] = ins.dst;
  return true;
}

// Flush events carry the matching store's instruction; fill those in from the
// buffer contents while replaying.
inline Computation replay(const Program& p, const std::vector<Step>& steps) {
  MachineState s = initial_state(p);
  Computation c;
  std::vector<std::unordered_map<int, std::string>> store_instr(p.n_threads());
  for (const Step& st : steps) {
    size_t before = c.events.size();
    if (!apply_step(p, s, st, &c.events)) throw std::logic_error("replay: step not enabled");
    for (size_t k = before; k < c.events.size(); ++k) {
      Event& e = c.events[k];
      if (!e.flush && e.op == Command::Kind::Store)
        store_instr[e.thread][e.id] = e.instr;
      else if (e.flush && e.instr.empty())
        e.instr = store_instr[e.thread][e.id];
    }
  }
  c.reached = s;
  return c;
}

// ---------------------------------------------------------------------------
// Successor enumeration in the canonical order: threads in declaration order;
// within a thread loads, stores, flush, fences, assigns, assumes; instructions
// in declaration order.

inline void for_each_successor(const Program& p, const MachineState& s, Mode mode,
                               const std::function<void(const Step&)>& fn) {
  for (int t = 0; t < p.n_threads(); ++t) {
    const Thread& th = p.threads[t];
    int pc = s.pc[t];
    auto each_kind = [&](Command::Kind k, Step::Kind sk) {
      for (int i = 0; i < static_cast<int>(th.instrs.size()); ++i)
        if (th.instrs[i].src == pc && th.instrs[i].cmd.kind == k) fn({sk, t, i});
    };
    each_kind(Command::Kind::Load, Step::Kind::Instr);
    each_kind(Command::Kind::Store,
              mode == Mode::SC ? Step::Kind::ScStore : Step::Kind::Instr);
    if (mode == Mode::TSO && !s.buf[t].empty()) fn({Step::Kind::Flush, t, -1});
    each_kind(Command::Kind::Mfence, Step::Kind::Instr);
    each_kind(Command::Kind::Assign, Step::Kind::Instr);
    each_kind(Command::Kind::Assume, Step::Kind::Instr);
  }
}

// Spec-facing step functions. step_sc requires all-empty buffers and emits the
// store/flush pair atomically.
inline std::vector<std::pair<std::vector<Event>, MachineState>> step_tso(const Program& p,
                                                                         const MachineState& s) {
  std::vector<std::pair<std::vector<Event>, MachineState>> out;
  for_each_successor(p, s, Mode::TSO, [&](const Step& st) {
    MachineState nxt = s;
    std::vector<Event> ev;
    if (apply_step(p, nxt, st, &ev)) out.push_back({std::move(ev), std::move(nxt)});
  });
  return out;
}

inline std::vector<std::pair<std::vector<Event>, MachineState>> step_sc(const Program& p,
                                                                        const MachineState& s) {
  assert(s.buffers_empty());
  std::vector<std::pair<std::vector<Event>, MachineState>> out;
  for_each_successor(p, s, Mode::SC, [&](const Step& st) {
    MachineState nxt = s;
    std::vector<Event> ev;
    if (apply_step(p, nxt, st, &ev)) out.push_back({std::move(ev), std::move(nxt)});
  });
  return out;
}

// ---------------------------------------------------------------------------
// Goal test: user constraints plus all buffers empty.

inline bool goal_satisfied(const Program& p, const MachineState& s) {
  if (!s.buffers_empty()) return false;
  for (int t = 0; t < static_cast<int>(p.goal.pc.size()); ++t) {
    if (!p.goal.pc[t]) continue;
    const auto& allowed = *p.goal.pc[t];
    if (std::find(allowed.begin(), allowed.end(), s.pc[t]) == allowed.end()) return false;
  }
  for (auto [loc, v] : p.goal.val)
    if (s.val[loc] != v) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Explicit-state reachability

struct ReachOptions {
  std::optional<std::uint64_t> state_budget;
  std::optional<int> buffer_bound;  // required for TSO exploration of cyclic programs
  bool por = false;                 // ample-set reduction for local steps (acyclic inputs)
};

struct ReachResult {
  enum class Status { Reachable, Unreachable, BudgetExhausted };
  Status status = Status::Unreachable;
  std::optional<Computation> trace;
  std::uint64_t states_explored = 0;
  Mode mode = Mode::SC;
  bool buffer_truncated = false;

  bool reachable() const { return status == Status::Reachable; }
};

namespace detail_sem {

// Visited-set key: pc, val and buffered (addr, value) pairs. Event counters
// and buffer entry ids are excluded; they are reconstructed on the trace path.
inline std::string state_key(const MachineState& s) {
  std::string k;
  k.reserve(s.pc.size() * 2 + s.val.size() + 8);
  for (int pc : s.pc) {
    k.push_back(static_cast<char>(pc & 0xff));
    k.push_back(static_cast<char>((pc >> 8) & 0xff));
  }
  for (Value v : s.val) k.push_back(static_cast<char>(v));
  for (const auto& b : s.buf) {
    for (const auto& e : b) {
      k.push_back(static_cast<char>(e.addr));
      k.push_back(static_cast<char>(e.val));
    }
    k.push_back('\x01');
  }
  return k;
}

// A thread is POR-eligible when every instruction at its pc is an enabled or
// guard-disabled local command whose registers stay out of the goal and whose
// pc is not goal-constrained.
inline bool por_eligible(const Program& p, const MachineState& s, int t,
                         const std::vector<char>& goal_regs) {
  if (t < static_cast<int>(p.goal.pc.size()) && p.goal.pc[t]) return false;
  bool any = false;
  for (const auto& ins : p.threads[t].instrs) {
    if (ins.src != s.pc[t]) continue;
    if (ins.cmd.kind == Command::Kind::Assign) {
      if (goal_regs[ins.cmd.reg]) return false;
      any = true;
    } else if (ins.cmd.kind == Command::Kind::Assume) {
      if (eval_expr(s.val, ins.cmd.expr, p.domain.size) != 0) any = true;
    } else {
      return false;
    }
  }
  return any;
}

}  // namespace detail_sem

inline ReachResult reach(const Program& p, Mode mode, const ReachOptions& opts = {}) {
  if (mode == Mode::TSO && !opts.buffer_bound && !is_acyclic(p))
    throw std::invalid_argument("TSO exploration of a cyclic program needs a buffer bound");

  ReachResult res;
  res.mode = mode;
  // The ample-set argument relies on local chains terminating; cyclic inputs
  // fall back to full expansion.
  const bool use_por = opts.por && is_acyclic(p);

  std::vector<char> goal_regs(p.reg_names.size(), 0);
  for (auto [loc, v] : p.goal.val)
    if (loc >= p.domain.size) goal_regs[loc - p.domain.size] = 1;

  struct Node {
    MachineState state;
    int parent;
    Step step;
  };
  std::vector<Node> nodes;
  std::unordered_set<std::string> visited;
  std::deque<int> queue;

  auto enqueue = [&](MachineState st, int parent, Step step) {
    std::string key = detail_sem::state_key(st);
    if (!visited.insert(std::move(key)).second) return;
    nodes.push_back({std::move(st), parent, step});
    queue.push_back(static_cast<int>(nodes.size()) - 1);
  };
  enqueue(initial_state(p), -1, {});

  auto build_trace = [&](int idx) {
    std::vector<Step> steps;
    for (int i = idx; nodes[i].parent >= 0; i = nodes[i].parent) steps.push_back(nodes[i].step);
    std::reverse(steps.begin(), steps.end());
    return replay(p, steps);
  };

  while (!queue.empty()) {
    int idx = queue.front();
    queue.pop_front();
    res.states_explored++;
    MachineState s = nodes[idx].state;  // copy: enqueue may grow nodes
    if (goal_satisfied(p, s)) {
      res.status = ReachResult::Status::Reachable;
      res.trace = build_trace(idx);
      return res;
    }
    if (opts.state_budget && res.states_explored >= *opts.state_budget) {
      res.status = ReachResult::Status::BudgetExhausted;
      return res;
    }

    int por_thread = -1;
    if (use_por) {
      for (int t = 0; t < p.n_threads() && por_thread < 0; ++t)
        if (detail_sem::por_eligible(p, s, t, goal_regs)) por_thread = t;
    }

    for_each_successor(p, s, mode, [&](const Step& st) {
      if (por_thread >= 0 && st.thread != por_thread) return;
      MachineState nxt = s;
      if (!apply_step(p, nxt, st)) return;
      if (opts.buffer_bound && st.kind == Step::Kind::Instr && st.instr >= 0 &&
          p.threads[st.thread].instrs[st.instr].cmd.kind == Command::Kind::Store &&
          static_cast<int>(nxt.buf[st.thread].size()) > *opts.buffer_bound) {
        res.buffer_truncated = true;
        return;
      }
      enqueue(std::move(nxt), idx, st);
    });
  }
  res.status = ReachResult::Status::Unreachable;
  return res;
}

// All (pc, val) pairs of reachable final (empty-buffer) states. Used by the
// brute-force cross-checks; the projection is done by callers.
inline std::vector<MachineState> reach_final_states(const Program& p, Mode mode,
                                                    const ReachOptions& opts = {}) {
  if (mode == Mode::TSO && !opts.buffer_bound && !is_acyclic(p))
    throw std::invalid_argument("TSO exploration of a cyclic program needs a buffer bound");
  std::vector<MachineState> out;
  std::unordered_set<std::string> visited;
  std::deque<MachineState> queue;
  MachineState init = initial_state(p);
  visited.insert(detail_sem::state_key(init));
  queue.push_back(init);
  while (!queue.empty()) {
    MachineState s = std::move(queue.front());
    queue.pop_front();
    if (s.buffers_empty()) out.push_back(s);
    for_each_successor(p, s, mode, [&](const Step& st) {
      MachineState nxt = s;
      if (!apply_step(p, nxt, st)) return;
      if (opts.buffer_bound && st.kind == Step::Kind::Instr && st.instr >= 0 &&
          p.threads[st.thread].instrs[st.instr].cmd.kind == Command::Kind::Store &&
          static_cast<int>(nxt.buf[st.thread].size()) > *opts.buffer_bound)
        return;
      if (visited.insert(detail_sem::state_key(nxt)).second) queue.push_back(std::move(nxt));
    });
  }
  return out;
}

}  // namespace lazytso
