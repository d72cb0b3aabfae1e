#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "lazytso/extension.hpp"
#include "lazytso/oracle.hpp"
#include "lazytso/program.hpp"
#include "lazytso/semantics.hpp"
#include "lazytso/unroll.hpp"

namespace lazytso {

struct LazyConfig {
  bool delete_first_store = false;    // remove inst_1 (termination mode); forces one witness/round
  std::optional<int> max_iterations;
  int witnesses_per_round = 8;
  std::vector<int> unroll_bounds;     // semi_decide schedule
  std::optional<std::uint64_t> state_budget;
  std::optional<int> witness_bound;   // oracle bound for cyclic programs
  bool por = false;
};

struct IterationRecord {
  int index = 0;
  std::vector<InstructionSeq> sigmas;  // projected to the input program
  bool sc_reachable = false;
  std::uint64_t states_explored = 0;
};

struct LazyResult {
  enum class Outcome { Reachable, Unreachable, Inconclusive };
  Outcome outcome = Outcome::Inconclusive;
  std::optional<Computation> trace;          // in the program it was found in
  std::vector<std::string> trace_original;   // instruction skeleton in the input program
  int iterations = 0;
  std::vector<InstructionSeq> sigmas_original;
  std::uint64_t sc_queries = 0;
  std::uint64_t states_total = 0;
  std::vector<IterationRecord> progress;
  std::string note;  // set when inconclusive
};

namespace detail_lazy {

inline std::string sigma_key(const InstructionSeq& s) {
  std::string k;
  for (const auto& id : s) {
    k += id;
    k += ' ';
  }
  return k;
}

inline InstructionSeq project_chain(const std::vector<ProjectionMap>& rounds,
                                    InstructionSeq seq) {
  for (auto it = rounds.rbegin(); it != rounds.rend(); ++it) seq = project(*it, seq);
  return seq;
}

inline std::vector<std::string> skeleton(const std::vector<ProjectionMap>& rounds,
                                         const Computation& c) {
  InstructionSeq ids;
  for (const Event& e : c.events)
    if (!e.flush) ids.push_back(e.instr);
  return project_chain(rounds, ids);
}

// The first fresh witness per attack triple, interleaved round-robin across
// attacker threads.
//
// In keep-first-store mode the original instructions survive every extension,
// so every witness headed by an auxiliary store has a real-headed counterpart
// covering the same delay pattern of the input program. Attack stores are
// therefore restricted to instructions that project to themselves, and the
// used-sequence filter runs inside the search so a triple can surface its
// later routes once the canonical one is emulated. A round that finds only
// stale witnesses proves every remaining delay pattern already emulated.
//
// Delete-first-store mode keeps the full attack set: there the deleted store
// lives on only through the auxiliary paths, which consequently must remain
// attackable.
inline std::vector<Witness> collect_witnesses(const Program& r,
                                              const std::vector<ProjectionMap>& rounds,
                                              const std::set<std::string>& used,
                                              const LazyConfig& cfg, bool& bound_hit,
                                              bool& stale_seen) {
  WitnessSearch search(r, {cfg.witness_bound});
  std::vector<Witness> found;
  std::set<std::string> this_round;
  auto projects_to_self = [&](const std::string& id) {
    InstructionSeq one{id};
    InstructionSeq proj = project_chain(rounds, one);
    return proj.size() == 1 && proj[0] == id;
  };
  for (const AttackTriple& a : enumerate_attacks(r)) {
    if (!cfg.delete_first_store &&
        !projects_to_self(r.threads[a.thread].instrs[a.store_instr].id))
      continue;
    SigmaFilter fresh;
    if (!cfg.delete_first_store) {
      fresh = [&](const InstructionSeq& sigma) {
        std::string key = sigma_key(project_chain(rounds, sigma));
        return !used.count(key) && !this_round.count(key);
      };
    }
    auto out = search.search(a, fresh);
    stale_seen |= out.stale_witness;
    if (!out.witness) continue;
    InstructionSeq orig = project_chain(rounds, out.witness->sigma);
    if (!this_round.insert(sigma_key(orig)).second) continue;
    found.push_back(std::move(*out.witness));
  }
  bound_hit = search.bound_hit();

  int limit = cfg.delete_first_store ? 1 : std::max(1, cfg.witnesses_per_round);
  std::vector<Witness> selected;
  std::vector<std::vector<Witness>> per_thread(r.n_threads());
  for (auto& w : found) per_thread[w.attack.thread].push_back(std::move(w));
  for (size_t lane = 0; static_cast<int>(selected.size()) < limit; ++lane) {
    bool any = false;
    for (auto& lane_list : per_thread) {
      if (lane < lane_list.size() && static_cast<int>(selected.size()) < limit) {
        selected.push_back(std::move(lane_list[lane]));
        any = true;
      }
    }
    if (!any) break;
  }
  return selected;
}

}  // namespace detail_lazy

// Algorithm: check SC reachability; when unreachable, ask the oracle for
// instruction sequences and extend the program to emulate their store
// buffering under SC; repeat until the goal is SC-reachable or the oracle has
// nothing left. Candidate extensions of one round are checked individually in
// canonical order before being merged.
inline LazyResult lazy_reach_once(const Program& p, const LazyConfig& cfg = {}) {
  if (!is_acyclic(p) && !cfg.witness_bound)
    throw std::invalid_argument("lazy_reach needs an acyclic program (use semi_decide)");

  LazyResult res;
  Program r = p;
  std::vector<ProjectionMap> rounds;
  std::set<std::string> used;
  ReachOptions ropts{cfg.state_budget, std::nullopt, cfg.por};

  for (int iter = 0;; ++iter) {
    if (cfg.max_iterations && iter >= *cfg.max_iterations) {
      res.outcome = LazyResult::Outcome::Inconclusive;
      res.note = "max iterations exceeded";
      return res;
    }

    ReachResult sc = reach(r, Mode::SC, ropts);
    res.sc_queries++;
    res.states_total += sc.states_explored;
    res.iterations = iter + 1;
    IterationRecord rec;
    rec.index = iter;
    rec.sc_reachable = sc.reachable();
    rec.states_explored = sc.states_explored;

    if (sc.status == ReachResult::Status::BudgetExhausted) {
      res.outcome = LazyResult::Outcome::Inconclusive;
      res.note = "state budget exhausted";
      res.progress.push_back(rec);
      return res;
    }
    if (sc.reachable()) {
      res.outcome = LazyResult::Outcome::Reachable;
      res.trace_original = detail_lazy::skeleton(rounds, *sc.trace);
      res.trace = std::move(sc.trace);
      res.progress.push_back(rec);
      return res;
    }

    bool bound_hit = false;
    bool stale_seen = false;
    std::vector<Witness> sigmas =
        detail_lazy::collect_witnesses(r, rounds, used, cfg, bound_hit, stale_seen);
    for (const auto& w : sigmas) rec.sigmas.push_back(detail_lazy::project_chain(rounds, w.sigma));
    res.progress.push_back(rec);

    if (sigmas.empty()) {
      if (bound_hit) {
        res.outcome = LazyResult::Outcome::Inconclusive;
        res.note = "oracle bound exhausted";
      } else {
        // Either no witness at all (the program is robust), or every witness
        // matches a delay pattern whose emulation was already merged in; both
        // certify that SC covers the TSO-reachable goal states.
        res.outcome = LazyResult::Outcome::Unreachable;
        if (stale_seen) res.note = "all witness supports emulated";
      }
      return res;
    }

    // With several witnesses per round, check each candidate extension first;
    // the first SC-reachable one wins. A single witness merges directly (the
    // next top-of-loop query covers it).
    std::vector<InstructionSeq> round_sigmas;
    for (const Witness& w : sigmas) {
      InstructionSeq orig = detail_lazy::project_chain(rounds, w.sigma);
      // Distinctness is guaranteed (and asserted) only while the projected
      // sequence keeps its store head; sequences opened by an auxiliary store
      // project to a load-headed remainder and may legitimately recur.
      if (cfg.delete_first_store && used.count(detail_lazy::sigma_key(orig)) && !orig.empty()) {
        const Instruction* head = p.find_instruction(orig.front());
        if (head && head->cmd.kind == Command::Kind::Store)
          throw std::logic_error("oracle repeated a projected sequence in delete mode");
      }
      round_sigmas.push_back(orig);
      res.sigmas_original.push_back(orig);
      if (sigmas.size() == 1) break;

      ExtensionResult ext = extend(r, w.sigma, cfg.delete_first_store, iter);
      ReachResult v = reach(ext.program, Mode::SC, ropts);
      res.sc_queries++;
      res.states_total += v.states_explored;
      if (v.reachable()) {
        res.outcome = LazyResult::Outcome::Reachable;
        res.iterations = iter + 2;
        std::vector<ProjectionMap> all = rounds;
        all.push_back(ext.projection);
        res.trace_original = detail_lazy::skeleton(all, *v.trace);
        res.trace = std::move(v.trace);
        return res;
      }
    }

    // Merge all candidates into the next program.
    for (size_t i = 0; i < sigmas.size(); ++i) {
      ExtensionResult ext = extend(r, sigmas[i].sigma, cfg.delete_first_store, iter);
      r = std::move(ext.program);
      rounds.push_back(std::move(ext.projection));
      used.insert(detail_lazy::sigma_key(round_sigmas[i]));
    }
  }
}

inline LazyResult lazy_reach(const Program& p, const LazyConfig& cfg = {}) {
  return lazy_reach_once(p, cfg);
}

// ---------------------------------------------------------------------------
// Bounded-unrolling wrapper: decides acyclic programs outright and otherwise
// walks the unroll schedule, reporting "safe up to k" when it runs out.

struct SemiDecideResult {
  enum class Outcome { Reachable, Unreachable, SafeUpToK, Inconclusive };
  Outcome outcome = Outcome::Inconclusive;
  int k = 0;  // bound that decided (reachable) or the largest bound tried
  LazyResult inner;
  std::vector<std::string> trace_original;  // skeleton in the input program
};

inline SemiDecideResult semi_decide(const Program& p, const LazyConfig& cfg = {}) {
  SemiDecideResult res;
  if (is_acyclic(p)) {
    res.inner = lazy_reach(p, cfg);
    res.trace_original = res.inner.trace_original;
    switch (res.inner.outcome) {
    case LazyResult::Outcome::Reachable: res.outcome = SemiDecideResult::Outcome::Reachable; break;
    case LazyResult::Outcome::Unreachable: res.outcome = SemiDecideResult::Outcome::Unreachable; break;
    default: res.outcome = SemiDecideResult::Outcome::Inconclusive; break;
    }
    return res;
  }

  if (cfg.unroll_bounds.empty())
    throw std::invalid_argument("semi_decide on a cyclic program needs an unroll schedule");

  for (int k : cfg.unroll_bounds) {
    Program pk = unroll(p, k);
    LazyResult inner = lazy_reach(pk, cfg);
    res.k = k;
    res.inner = inner;
    if (inner.outcome == LazyResult::Outcome::Reachable) {
      res.outcome = SemiDecideResult::Outcome::Reachable;
      // Map the skeleton once more, through the unroll provenance.
      for (const std::string& id : inner.trace_original) {
        const Instruction* ins = pk.find_instruction(id);
        res.trace_original.push_back(ins && !ins->origin.empty() ? ins->origin : id);
      }
      return res;
    }
    if (inner.outcome == LazyResult::Outcome::Inconclusive) {
      res.outcome = SemiDecideResult::Outcome::Inconclusive;
      return res;
    }
  }
  res.outcome = SemiDecideResult::Outcome::SafeUpToK;
  return res;
}

}  // namespace lazytso
