#pragma once

#include <string>
#include <unordered_set>
#include <vector>

#include "lazytso/program.hpp"

namespace lazytso {

// Per-thread DAG unrolling: state (q, j) means "at q having executed j
// instructions", j <= k. Computations of length <= k are preserved both ways.
// Goal control states are lifted to all copies; each copied instruction keeps
// an `origin` reference to the instruction it unrolls.
inline Program unroll(const Program& p, int k) {
  if (k < 1) throw std::invalid_argument("unroll bound must be positive");

  Program out;
  out.domain = p.domain;
  out.addr_names = p.addr_names;
  out.reg_names = p.reg_names;
  out.reg_owner = p.reg_owner;
  out.goal.pc.resize(p.n_threads());
  out.goal.val = p.goal.val;

  std::unordered_set<std::string> taken(p.state_names.begin(), p.state_names.end());
  auto fresh_name = [&](const std::string& base, int j) {
    std::string name = base + "_u" + std::to_string(j);
    while (!taken.insert(name).second) name = "_" + name;
    return name;
  };

  for (int t = 0; t < p.n_threads(); ++t) {
    const Thread& th = p.threads[t];
    Thread nt;
    nt.name = th.name;
    nt.registers = th.registers;
    out.threads.push_back(nt);

    // copy[j] maps original state id -> copy at level j; levels materialize
    // lazily since level j is only entered by executing j instructions.
    std::vector<std::unordered_map<int, int>> copy(k + 1);
    auto state_copy = [&](int q, int j) {
      auto it = copy[j].find(q);
      if (it != copy[j].end()) return it->second;
      int id = out.add_state(t, fresh_name(p.state_names[q], j));
      copy[j].emplace(q, id);
      return id;
    };
    out.threads[t].initial = state_copy(th.initial, 0);
    for (int j = 0; j < k; ++j) {
      // Instructions extend only from already-materialized states of level j.
      std::vector<std::pair<int, int>> level(copy[j].begin(), copy[j].end());
      std::sort(level.begin(), level.end());
      for (auto [q, src_id] : level) {
        for (const Instruction& i : th.instrs) {
          if (i.src != q) continue;
          int dst_id = state_copy(i.dst, j + 1);
          std::string origin = i.origin.empty() ? i.id : i.origin;
          out.threads[t].instrs.push_back({"", src_id, dst_id, i.cmd, origin});
        }
      }
    }

    if (t < static_cast<int>(p.goal.pc.size()) && p.goal.pc[t]) {
      std::vector<int> lifted;
      for (int q : *p.goal.pc[t])
        for (int j = 0; j <= k; ++j) {
          auto it = copy[j].find(q);
          if (it != copy[j].end()) lifted.push_back(it->second);
        }
      std::sort(lifted.begin(), lifted.end());
      // No copy within k levels leaves the constraint unsatisfiable (empty set).
      out.goal.pc[t] = std::move(lifted);
    }
  }

  out.assign_instruction_ids();
  return out;
}

}  // namespace lazytso
