#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "lazytso/oracle.hpp"
#include "lazytso/program.hpp"

namespace lazytso {

struct ExtensionAux {
  int round = 0;
  int max_count = 0;  // number of store instructions in sigma
  std::vector<std::string> added_registers;
  std::vector<std::string> added_states;
};

struct ExtensionResult {
  Program program;
  ProjectionMap projection;
  ExtensionAux aux;
};

// Extension of the attacker thread by sigma: a fresh control path through
// q^_0..q^_n emulates, under SC, the TSO run that buffers every sigma store
// until after the final load. Stores become address/value bookkeeping in
// auxiliary registers, loads check the simulated buffer before memory, and a
// closing chain of stores out of q^_n replays the buffer. Exit paths cover the
// runs that leave sigma early: alternative instructions flush the simulated
// buffer first, and each intermediate load (plus q^_1) gets a flush+fence path
// back into the original control flow. With delete_first_store the original
// first store is removed so the oracle cannot propose sigma again.
inline ExtensionResult extend(const Program& r, const InstructionSeq& sigma,
                              bool delete_first_store, int round = 0) {
  check_sigma(r, sigma);
  if (sigma.empty()) throw std::invalid_argument("extend: sigma must be nonempty");

  ExtensionResult res;
  res.program = r;
  res.aux.round = round;
  Program& p = res.program;

  const int ta = p.thread_of_instruction(sigma.front());
  Thread& th = p.threads[ta];
  const std::vector<Instruction> originals = th.instrs;

  // Resolve sigma to local instruction copies.
  std::vector<Instruction> chain;
  for (const auto& id : sigma) chain.push_back(*p.find_instruction(id));
  const int n = static_cast<int>(chain.size());
  int max_count = 0;
  for (const auto& i : chain)
    if (i.cmd.kind == Command::Kind::Store) ++max_count;
  res.aux.max_count = max_count;

  const std::string suffix = "__" + std::to_string(round);
  std::vector<int> ar(max_count + 1, -1), vr(max_count + 1, -1);
  for (int j = 1; j <= max_count; ++j) {
    ar[j] = p.add_register(ta, "__ar" + std::to_string(j) + suffix);
    vr[j] = p.add_register(ta, "__vr" + std::to_string(j) + suffix);
    res.aux.added_registers.push_back(p.reg_names[ar[j]]);
    res.aux.added_registers.push_back(p.reg_names[vr[j]]);
  }

  std::unordered_set<std::string> state_taken(p.state_names.begin(), p.state_names.end());
  auto fresh_state = [&](const std::string& base) {
    std::string name = "__r" + std::to_string(round) + "_" + base;
    while (!state_taken.insert(name).second) name += "_";
    int id = p.add_state(ta, name);
    res.aux.added_states.push_back(name);
    return id;
  };

  // Instruction ids continue the thread.src.dst.N scheme of the host program.
  std::unordered_map<std::string, int> id_count;
  for (const auto& i : th.instrs) {
    std::string base = th.name + "." + p.state_names[i.src] + "." + p.state_names[i.dst];
    int& c = id_count[base];
    c = std::max(c, std::stoi(i.id.substr(i.id.rfind('.') + 1)) + 1);
  }
  auto add_instr = [&](int src, int dst, Command cmd, const std::string& maps_to) {
    std::string base = th.name + "." + p.state_names[src] + "." + p.state_names[dst];
    std::string id = base + "." + std::to_string(id_count[base]++);
    th.instrs.push_back({id, src, dst, std::move(cmd), ""});
    res.projection.map[id] = maps_to;
    return id;
  };

  // Simulated path q^_0 .. q^_n.
  std::vector<int> qh(n + 1);
  qh[0] = chain[0].src;
  for (int i = 1; i <= n; ++i) qh[i] = fresh_state("q" + std::to_string(i));
  std::vector<int> count_at(n + 1, 0);  // stores processed after inst_i

  int count = 0;
  for (int i = 1; i <= n; ++i) {
    const Instruction& ins = chain[i - 1];
    switch (ins.cmd.kind) {
    case Command::Kind::Store: {
      ++count;
      int mid = fresh_state("q" + std::to_string(i) + "v");
      add_instr(qh[i - 1], mid, Command::assign(ar[count], ins.cmd.addr), ins.id);
      add_instr(mid, qh[i], Command::assign(vr[count], ins.cmd.expr), "");
      break;
    }
    case Command::Kind::Load: {
      int cur = qh[i - 1];
      for (int j = count; j >= 1; --j) {
        bool first = (cur == qh[i - 1]);
        ExprPtr match = Expr::bin(BinOp::Eq, Expr::reg(ar[j]), ins.cmd.addr);
        ExprPtr differ = Expr::bin(BinOp::Ne, Expr::reg(ar[j]), ins.cmd.addr);
        int hit = fresh_state("q" + std::to_string(i) + "b" + std::to_string(j));
        add_instr(cur, hit, Command::assume(match), first ? ins.id : "");
        add_instr(hit, qh[i], Command::assign(ins.cmd.reg, Expr::reg(vr[j])), "");
        int next = (j == 1) ? fresh_state("q" + std::to_string(i) + "m")
                            : fresh_state("q" + std::to_string(i) + "c" + std::to_string(j - 1));
        add_instr(cur, next, Command::assume(differ), first ? ins.id : "");
        cur = next;
      }
      add_instr(cur, qh[i], Command::load(ins.cmd.reg, ins.cmd.addr),
                count == 0 ? ins.id : "");
      break;
    }
    case Command::Kind::Assign:
    case Command::Kind::Assume:
      add_instr(qh[i - 1], qh[i], ins.cmd, ins.id);
      break;
    case Command::Kind::Mfence:
      throw std::invalid_argument("extend: sigma contains a fence");
    }
    count_at[i] = count;
  }

  // Closing chain: replay the remembered stores and rejoin at dst(inst_n).
  {
    int cur = qh[n];
    for (int j = 1; j <= max_count; ++j) {
      int dst = (j == max_count) ? chain[n - 1].dst : fresh_state("f" + std::to_string(j));
      add_instr(cur, dst, Command::store(Expr::reg(ar[j]), Expr::reg(vr[j])), "");
      cur = dst;
    }
  }

  // Alternative-instruction exits: at q^_i the run may leave sigma through any
  // original instruction competing with inst_{i+1}; flush the simulated buffer
  // first.
  for (int i = 1; i < n; ++i) {
    for (const Instruction& alt : originals) {
      if (alt.src != chain[i].src || alt.id == chain[i].id) continue;
      if (delete_first_store && alt.id == chain[0].id) continue;
      int cur = qh[i];
      for (int j = 1; j <= count_at[i]; ++j) {
        int dst = fresh_state("a" + std::to_string(i) + "_" + std::to_string(j));
        add_instr(cur, dst, Command::store(Expr::reg(ar[j]), Expr::reg(vr[j])), "");
        cur = dst;
      }
      add_instr(cur, alt.dst, alt.cmd, "");
    }
  }

  // Flush+fence exits out of q^_1 and out of every intermediate load.
  for (int i = 1; i < n; ++i) {
    bool is_load = chain[i - 1].cmd.kind == Command::Kind::Load;
    if (i != 1 && !is_load) continue;
    int rejoin = is_load ? chain[i - 1].src : chain[0].dst;
    int cur = fresh_state("e" + std::to_string(i));
    add_instr(qh[i], cur, Command::store(Expr::reg(ar[1]), Expr::reg(vr[1])), "");
    int after_fence = (count_at[i] == 1) ? rejoin : fresh_state("e" + std::to_string(i) + "_m");
    add_instr(cur, after_fence, Command::mfence(), "");
    cur = after_fence;
    for (int j = 2; j <= count_at[i]; ++j) {
      int dst = (j == count_at[i]) ? rejoin : fresh_state("e" + std::to_string(i) + "_" + std::to_string(j));
      add_instr(cur, dst, Command::store(Expr::reg(ar[j]), Expr::reg(vr[j])), "");
      cur = dst;
    }
  }

  if (delete_first_store) {
    for (auto it = th.instrs.begin(); it != th.instrs.end(); ++it) {
      if (it->id == chain[0].id) {
        th.instrs.erase(it);
        break;
      }
    }
  }

  // Identity entries for everything that survived, across all threads.
  for (const auto& t : p.threads)
    for (const auto& ins : t.instrs)
      if (!res.projection.map.count(ins.id)) res.projection.map[ins.id] = ins.id;

  return res;
}

}  // namespace lazytso
