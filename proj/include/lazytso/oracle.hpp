#pragma once

#include <bitset>
#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "lazytso/hb.hpp"
#include "lazytso/program.hpp"
#include "lazytso/semantics.hpp"

namespace lazytso {

// An oracle answer: instruction ids of one thread, chained src->dst, starting
// with a store and ending with a load, fence-free. Empty means "no witness".
using InstructionSeq = std::vector<std::string>;

inline void check_sigma(const Program& p, const InstructionSeq& sigma) {
  if (sigma.empty()) return;
  int thread = p.thread_of_instruction(sigma.front());
  if (thread < 0) throw std::invalid_argument("sigma: unknown instruction " + sigma.front());
  const Instruction* prev = nullptr;
  for (const auto& id : sigma) {
    const Instruction* ins = p.find_instruction(id);
    if (!ins || p.thread_of_instruction(id) != thread)
      throw std::invalid_argument("sigma: instruction " + id + " not in attacker thread");
    if (ins->cmd.kind == Command::Kind::Mfence)
      throw std::invalid_argument("sigma: contains a fence");
    if (prev && prev->dst != ins->src)
      throw std::invalid_argument("sigma: instructions do not chain");
    prev = ins;
  }
  if (p.find_instruction(sigma.front())->cmd.kind != Command::Kind::Store)
    throw std::invalid_argument("sigma: must start with a store");
  if (p.find_instruction(sigma.back())->cmd.kind != Command::Kind::Load)
    throw std::invalid_argument("sigma: must end with a load");
}

// ---------------------------------------------------------------------------
// Projection back to the pre-extension program (ws-proj). Surviving
// instructions map to themselves, the first instruction on each simulated-path
// segment maps to the simulated instruction, everything else vanishes.

struct ProjectionMap {
  std::unordered_map<std::string, std::string> map;  // "" = deleted

  const std::string& apply(const std::string& id) const {
    auto it = map.find(id);
    if (it == map.end()) throw std::invalid_argument("projection: unknown instruction " + id);
    return it->second;
  }
};

inline InstructionSeq project(const ProjectionMap& m, const InstructionSeq& seq) {
  InstructionSeq out;
  for (const auto& id : seq) {
    const std::string& r = m.apply(id);
    if (!r.empty()) out.push_back(r);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Attacks and witnesses

struct AttackTriple {
  int thread = -1;
  int store_instr = -1;  // local instruction indices
  int load_instr = -1;
};

// All (thread, store, load) triples with a fence-free control path from
// dst(store) to src(load), in canonical declaration order.
inline std::vector<AttackTriple> enumerate_attacks(const Program& p) {
  std::vector<AttackTriple> out;
  for (int t = 0; t < p.n_threads(); ++t) {
    const Thread& th = p.threads[t];
    std::unordered_map<int, std::vector<int>> succ;
    for (const Instruction& i : th.instrs)
      if (i.cmd.kind != Command::Kind::Mfence) succ[i.src].push_back(i.dst);
    auto reaches = [&](int from) {
      std::unordered_set<int> seen{from};
      std::vector<int> stack{from};
      while (!stack.empty()) {
        int q = stack.back();
        stack.pop_back();
        for (int nxt : succ[q])
          if (seen.insert(nxt).second) stack.push_back(nxt);
      }
      return seen;
    };
    for (int s = 0; s < static_cast<int>(th.instrs.size()); ++s) {
      if (th.instrs[s].cmd.kind != Command::Kind::Store) continue;
      auto reach_set = reaches(th.instrs[s].dst);
      for (int l = 0; l < static_cast<int>(th.instrs.size()); ++l) {
        if (th.instrs[l].cmd.kind != Command::Kind::Load) continue;
        if (reach_set.count(th.instrs[l].src)) out.push_back({t, s, l});
      }
    }
  }
  return out;
}

// A witness computation split as tau1 . st . tau2 . ld . tau3 . fl . tau4:
// the attacker buffers every store from st on, performs ld as its last step,
// and flushes only after tau3.
struct Witness {
  AttackTriple attack;
  Computation computation;
  int st_pos = -1;
  int ld_pos = -1;
  int fl_pos = -1;
  InstructionSeq sigma;  // attacker instructions of st..ld

  std::string dump(const Program& p) const {
    auto ev = [&](int i) {
      const Event& e = computation.events[i];
      std::string s = "(" + p.threads[e.thread].name + "," + std::to_string(e.id) + ",";
      s += e.flush ? "flush" : e.instr;
      if (e.addr >= 0) s += "," + location_name(p, e.addr);
      return s + ")";
    };
    std::string out;
    auto seg = [&](int from, int to) {
      for (int i = from; i < to; ++i) out += " " + ev(i);
      out += " |";
    };
    out += "tau1:";
    seg(0, st_pos);
    out += " st:" + ev(st_pos) + " | tau2:";
    seg(st_pos + 1, ld_pos);
    out += " ld:" + ev(ld_pos) + " | tau3:";
    seg(ld_pos + 1, fl_pos);
    out += " fl:" + ev(fl_pos) + " | tau4:";
    for (int i = fl_pos + 1; i < static_cast<int>(computation.events.size()); ++i)
      out += " " + ev(i);
    return out;
  }
};

struct WitnessSearchOptions {
  std::optional<int> bound;  // cap on computation length; required for cyclic programs
};

struct WitnessSearchOutcome {
  std::optional<Witness> witness;
  bool bound_hit = false;
  bool stale_witness = false;  // a witness passed W5 but was rejected by the filter
};

// Accepts or rejects a fully checked witness by its sigma; the search then
// keeps going. Used to skip sequences whose emulation already exists.
using SigmaFilter = std::function<bool(const InstructionSeq&)>;

// ---------------------------------------------------------------------------
// Witness search: exhaustive exploration of witness-shaped computations.
//
// Stage A: every thread steps under SC. Stage B opens when the attacker
// buffers the attack store; the attacker keeps buffering (no flushes, fences
// are stuck) while the others stay SC. Executing the attack load as a memory
// read enters stage C, where only non-attacker threads move. Every stage-C
// point yields a candidate: append the attacker's buffered flushes and check
// W5 on the happens-before graph (W1-W4 hold by construction).
//
// Stages A and B deduplicate on machine state (B additionally on the set of
// addresses the attacker has read from memory since the attack store, which
// is the only part of tau2 that can carry hb paths into tau3). Stage C is
// path-accurate but prunes extensions whose last event can never be reached
// from the attack load, tracked by a monotone per-thread / per-address
// coverability flow.

class WitnessSearch {
public:
  static constexpr int kMaxDomain = 256;
  using AddrSet = std::bitset<kMaxDomain>;

  WitnessSearch(const Program& p, WitnessSearchOptions opts)
      : p_(p), opts_(opts), acyclic_(is_acyclic(p)) {
    if (!acyclic_ && !opts_.bound)
      throw std::invalid_argument("witness search on a cyclic program needs a bound");
    build_stage_a();
  }

  bool bound_hit() const { return bound_hit_; }

  WitnessSearchOutcome search(const AttackTriple& a, const SigmaFilter& accept = {}) {
    const Instruction& st_ins = p_.threads[a.thread].instrs[a.store_instr];
    const Instruction& ld_ins = p_.threads[a.thread].instrs[a.load_instr];

    nodes_.clear();
    bool stale = false;
    std::deque<int> queue;
    std::unordered_set<std::string> visited_b;

    // Seed stage B from every SC state sitting at the attack store.
    for (size_t i = 0; i < a_nodes_.size(); ++i) {
      const ANode& an = a_nodes_[i];
      if (an.state.pc[a.thread] != st_ins.src) continue;
      MachineState nxt = an.state;
      if (!apply_step(p_, nxt, {Step::Kind::Instr, a.thread, a.store_instr})) continue;
      if (over_bound(an.ev_count + 1 + buffered(nxt, a.thread))) continue;
      Node n;
      n.state = std::move(nxt);
      n.stage = Stage::B;
      n.a_parent = static_cast<int>(i);
      n.parent = -1;
      n.step = {Step::Kind::Instr, a.thread, a.store_instr};
      n.ev_count = an.ev_count + 1;
      if (!visited_b.insert(b_key(n)).second) continue;
      nodes_.push_back(std::move(n));
      queue.push_back(static_cast<int>(nodes_.size()) - 1);
    }

    while (!queue.empty()) {
      int idx = queue.front();
      queue.pop_front();
      if (nodes_[idx].stage == Stage::C) {
        if (auto w = try_candidate(a, idx)) {
          if (!accept || accept(w->sigma)) return {std::move(w), bound_hit_, stale};
          stale = true;
        }
      }
      expand(a, idx, queue, visited_b);
    }
    return {std::nullopt, bound_hit_, stale};
  }

private:
  enum class Stage { B, C };

  struct ANode {
    MachineState state;
    int parent = -1;
    Step step;
    int ev_count = 0;
  };

  struct Node {
    MachineState state;
    Stage stage = Stage::B;
    int a_parent = -1;  // stage-A seed (valid on the chain root)
    int parent = -1;    // previous Node, -1 if rooted in stage A
    Step step;
    int ev_count = 0;
    AddrSet springboard;     // attacker memory reads since st with no later flush
    // stage-C coverability accumulators
    AddrSet flush_seen;
    AddrSet covered_flush;
    AddrSet loads_since;
    std::uint64_t thread_covered = 0;
    int ld_addr = -1;
  };

  const Program& p_;
  WitnessSearchOptions opts_;
  bool acyclic_;
  bool bound_hit_ = false;
  std::vector<ANode> a_nodes_;
  std::vector<Node> nodes_;

  bool over_bound(int events) {
    if (opts_.bound && events > *opts_.bound) {
      bound_hit_ = true;
      return true;
    }
    return false;
  }

  static int buffered(const MachineState& s, int t) {
    return static_cast<int>(s.buf[t].size());
  }

  // Full SC exploration, shared by every triple of this program.
  void build_stage_a() {
    std::unordered_set<std::string> visited;
    MachineState init = initial_state(p_);
    visited.insert(detail_sem::state_key(init));
    a_nodes_.push_back({std::move(init), -1, {}, 0});
    for (size_t i = 0; i < a_nodes_.size(); ++i) {
      MachineState cur = a_nodes_[i].state;  // copy: vector may reallocate
      int ev = a_nodes_[i].ev_count;
      for_each_successor(p_, cur, Mode::SC, [&](const Step& st) {
        MachineState nxt = cur;
        if (!apply_step(p_, nxt, st)) return;
        int cost = st.kind == Step::Kind::ScStore ? 2 : 1;
        if (over_bound(ev + cost)) return;
        if (!visited.insert(detail_sem::state_key(nxt)).second) return;
        a_nodes_.push_back({std::move(nxt), static_cast<int>(i), st, ev + cost});
      });
    }
  }

  std::string b_key(const Node& n) const {
    std::string k = detail_sem::state_key(n.state);
    k.push_back('|');
    for (int i = 0; i < p_.domain.size; ++i) k.push_back(n.springboard[i] ? '1' : '0');
    return k;
  }

  void expand(const AttackTriple& a, int idx, std::deque<int>& queue,
              std::unordered_set<std::string>& visited_b) {
    const Node cur = nodes_[idx];  // copy: nodes_ may reallocate
    const int ta = a.thread;
    const int remaining_flushes = buffered(cur.state, ta);

    for_each_successor(p_, cur.state, Mode::SC, [&](const Step& st) {
      if (cur.stage == Stage::C && st.thread == ta) return;  // W3
      Node nxt = cur;
      nxt.parent = idx;
      nxt.a_parent = -1;
      nxt.step = st;

      if (st.thread == ta) {
        // Attacker steps run under TSO with flushing disabled (W1/W2).
        Step tso_step = st;
        if (tso_step.kind == Step::Kind::ScStore) tso_step.kind = Step::Kind::Instr;
        nxt.step = tso_step;
        const Instruction& ins = p_.threads[ta].instrs[st.instr];
        if (!apply_step(p_, nxt.state, tso_step)) return;
        nxt.ev_count = cur.ev_count + 1;
        if (over_bound(nxt.ev_count + buffered(nxt.state, ta))) return;

        bool memory_read = false;
        if (ins.cmd.kind == Command::Kind::Load) {
          Value addr = eval_expr(cur.state.val, ins.cmd.addr, p_.domain.size);
          memory_read = detail_sem::newest_to(cur.state, ta, addr) == nullptr;
          if (memory_read) nxt.springboard[addr] = 1;
          // The designated load ends tau2; a buffered read can never satisfy
          // W5 (an early read has no outgoing hb edge), so only the memory
          // read enters stage C.
          if (st.instr == a.load_instr && memory_read) {
            Node c = nxt;
            c.stage = Stage::C;
            c.flush_seen.reset();
            c.covered_flush.reset();
            c.loads_since.reset();
            c.thread_covered = 0;
            c.ld_addr = addr;
            nodes_.push_back(std::move(c));
            queue.push_back(static_cast<int>(nodes_.size()) - 1);
          }
        }
        if (!visited_b.insert(b_key(nxt)).second) return;
        nodes_.push_back(std::move(nxt));
        queue.push_back(static_cast<int>(nodes_.size()) - 1);
        return;
      }

      // Non-attacker: plain SC step in both stages.
      if (!apply_step(p_, nxt.state, st)) return;
      nxt.ev_count = cur.ev_count + (st.kind == Step::Kind::ScStore ? 2 : 1);
      if (over_bound(nxt.ev_count + remaining_flushes)) return;

      const Instruction& ins = p_.threads[st.thread].instrs[st.instr];
      if (cur.stage == Stage::B) {
        if (ins.cmd.kind == Command::Kind::Store) {
          Value addr = eval_expr(cur.state.val, ins.cmd.addr, p_.domain.size);
          nxt.springboard[addr] = 0;  // the adjacent flush consumes pending reads
        }
        if (!visited_b.insert(b_key(nxt)).second) return;
        nodes_.push_back(std::move(nxt));
        queue.push_back(static_cast<int>(nodes_.size()) - 1);
        return;
      }

      // Stage C: prune steps whose events can never be hb-reachable from ld.
      std::uint64_t tbit = 1ull << st.thread;
      bool covered = (cur.thread_covered & tbit) != 0;
      switch (ins.cmd.kind) {
      case Command::Kind::Load: {
        Value addr = eval_expr(cur.state.val, ins.cmd.addr, p_.domain.size);
        covered = covered || (cur.flush_seen[addr] && cur.covered_flush[addr]);
        if (!covered) return;
        nxt.loads_since[addr] = 1;
        break;
      }
      case Command::Kind::Store: {
        Value addr = eval_expr(cur.state.val, ins.cmd.addr, p_.domain.size);
        bool cf_into_flush =
            (cur.flush_seen[addr] && cur.covered_flush[addr]) ||  // flush chain
            cur.loads_since[addr] ||                              // covered read since last flush
            (addr == cur.ld_addr && !cur.flush_seen[addr]) ||     // first flush after ld
            (cur.springboard[addr] && !cur.flush_seen[addr]);     // first flush after a tau2 read
        covered = covered || cf_into_flush;
        if (!covered) return;
        nxt.flush_seen[addr] = 1;
        nxt.covered_flush[addr] = 1;
        nxt.loads_since[addr] = 0;
        break;
      }
      default:
        if (!covered) return;
        break;
      }
      nxt.thread_covered = cur.thread_covered | tbit;
      nodes_.push_back(std::move(nxt));
      queue.push_back(static_cast<int>(nodes_.size()) - 1);
    });
  }

  // Rebuild the full step list for a node: stage-A prefix, then the B/C chain.
  std::vector<Step> steps_for(int idx) const {
    std::vector<Step> steps;
    int i = idx;
    int a_seed = -1;
    while (i >= 0) {
      steps.push_back(nodes_[i].step);
      a_seed = nodes_[i].a_parent;
      i = nodes_[i].parent;
    }
    for (int j = a_seed; j >= 0 && a_nodes_[j].parent >= 0; j = a_nodes_[j].parent)
      steps.push_back(a_nodes_[j].step);
    std::reverse(steps.begin(), steps.end());
    return steps;
  }

  std::optional<Witness> try_candidate(const AttackTriple& a, int idx) {
    const Node& node = nodes_[idx];
    std::vector<Step> steps = steps_for(idx);
    int flushes = buffered(node.state, a.thread);
    if (over_bound(node.ev_count + flushes)) return std::nullopt;
    for (int k = 0; k < flushes; ++k) steps.push_back({Step::Kind::Flush, a.thread, -1});

    Computation comp = replay(p_, steps);
    const auto& ev = comp.events;
    int n = static_cast<int>(ev.size());
    int fl_pos = n - flushes;

    // Locate st (first attacker store event that stays buffered: the first
    // event of the B chain) and ld (the stage-C entry load).
    const std::string& st_id = p_.threads[a.thread].instrs[a.store_instr].id;
    const std::string& ld_id = p_.threads[a.thread].instrs[a.load_instr].id;
    int st_pos = -1, ld_pos = -1;
    for (int i = 0; i < n; ++i) {
      if (ev[i].flush || ev[i].thread != a.thread) continue;
      if (ev[i].id == ev[fl_pos].id && ev[i].instr == st_id) st_pos = i;
      ld_pos = i;  // last attacker non-flush event
    }
    if (st_pos < 0 || ld_pos < 0 || ev[ld_pos].instr != ld_id) return std::nullopt;

    // W4: tau4 flushes must avoid the load's address (holds by construction:
    // a memory read implies no buffered store to that address).
    for (int i = fl_pos + 1; i < n; ++i)
      if (ev[i].addr == ev[ld_pos].addr) return std::nullopt;

    // W5: ld reaches every event of tau3 . fl under hb+ (eq bidirectional).
    HbGraph g = build_hb(comp);
    std::vector<char> reach = g.reachable_from(ld_pos);
    for (int i = ld_pos + 1; i <= fl_pos; ++i)
      if (!reach[i]) return std::nullopt;

    Witness w;
    w.attack = a;
    w.st_pos = st_pos;
    w.ld_pos = ld_pos;
    w.fl_pos = fl_pos;
    for (int i = st_pos; i <= ld_pos; ++i)
      if (!ev[i].flush && ev[i].thread == a.thread) w.sigma.push_back(ev[i].instr);
    w.computation = std::move(comp);
    return w;
  }
};

// ---------------------------------------------------------------------------
// Entry points

inline WitnessSearchOutcome find_witness(const Program& p, WitnessSearchOptions opts = {}) {
  WitnessSearch search(p, opts);
  for (const AttackTriple& a : enumerate_attacks(p)) {
    auto out = search.search(a);
    if (out.witness) return out;
  }
  return {std::nullopt, search.bound_hit()};
}

struct BoundExhausted : std::runtime_error {
  BoundExhausted() : std::runtime_error("witness search exhausted its bound inconclusively") {}
};

// The robustness oracle: sigma of the canonical witness, or empty if no
// witness exists. Empty certifies equal SC/TSO reach sets; an inconclusive
// bounded search on a cyclic program raises instead.
inline InstructionSeq oracle(const Program& p, WitnessSearchOptions opts = {}) {
  auto out = find_witness(p, opts);
  if (out.witness) return out.witness->sigma;
  if (out.bound_hit) throw BoundExhausted();
  return {};
}

}  // namespace lazytso
