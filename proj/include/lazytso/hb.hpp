#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "lazytso/program.hpp"
#include "lazytso/semantics.hpp"

namespace lazytso {

// Happens-before relation of a computation: hb = po ∪ eq ∪ cf.
//  - po: per-thread precedence over non-flush events (stored as all ordered pairs)
//  - eq: each flush paired with its matching same-thread store (symmetric)
//  - cf: same-address conflict edges, including early reads
// Nodes are indices into the computation's event list.
struct HbGraph {
  size_t n_events = 0;
  std::vector<std::pair<int, int>> po;
  std::vector<std::pair<int, int>> eq;  // (store, flush)
  std::vector<std::pair<int, int>> cf;
  std::vector<char> early_read;  // per event

  // Forward reachability over hb with eq treated as bidirectional.
  std::vector<char> reachable_from(int node) const {
    std::vector<std::vector<int>> succ(n_events);
    for (auto [a, b] : po) succ[a].push_back(b);
    for (auto [a, b] : cf) succ[a].push_back(b);
    for (auto [a, b] : eq) {
      succ[a].push_back(b);
      succ[b].push_back(a);
    }
    std::vector<char> seen(n_events, 0);
    std::vector<int> stack{node};
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (int w : succ[v])
        if (!seen[w]) {
          seen[w] = 1;
          stack.push_back(w);
        }
    }
    return seen;
  }
};

inline HbGraph build_hb(const Computation& c) {
  const auto& ev = c.events;
  HbGraph g;
  g.n_events = ev.size();
  g.early_read.assign(ev.size(), 0);

  // po: all ordered pairs of same-thread non-flush events.
  std::map<int, std::vector<int>> per_thread;
  for (int i = 0; i < static_cast<int>(ev.size()); ++i)
    if (!ev[i].flush) per_thread[ev[i].thread].push_back(i);
  for (const auto& [t, seq] : per_thread)
    for (size_t a = 0; a < seq.size(); ++a)
      for (size_t b = a + 1; b < seq.size(); ++b) g.po.push_back({seq[a], seq[b]});

  // eq: flush -> same-thread store with the same event id.
  std::map<std::pair<int, int>, int> store_at;  // (thread, id) -> index
  for (int i = 0; i < static_cast<int>(ev.size()); ++i)
    if (!ev[i].flush) store_at[{ev[i].thread, ev[i].id}] = i;
  for (int i = 0; i < static_cast<int>(ev.size()); ++i) {
    if (!ev[i].flush) continue;
    auto it = store_at.find({ev[i].thread, ev[i].id});
    if (it == store_at.end()) throw std::invalid_argument("flush without matching store");
    g.eq.push_back({it->second, i});
  }
  std::map<int, int> flush_of;  // store index -> flush index
  for (auto [s, f] : g.eq) flush_of[s] = f;

  // Early reads: a load is an early read of the newest preceding same-thread
  // store to its address whose flush is still pending at the load.
  auto is_load = [&](int i) { return !ev[i].flush && ev[i].op == Command::Kind::Load; };
  auto is_store = [&](int i) { return !ev[i].flush && ev[i].op == Command::Kind::Store; };
  for (int l = 0; l < static_cast<int>(ev.size()); ++l) {
    if (!is_load(l)) continue;
    for (int s = l - 1; s >= 0; --s) {
      if (!is_store(s) || ev[s].thread != ev[l].thread || ev[s].addr != ev[l].addr) continue;
      auto fit = flush_of.find(s);  // missing flush = still pending at the end
      if (fit == flush_of.end() || fit->second > l) {
        g.early_read[l] = 1;
        g.cf.push_back({s, l});
      }
      break;  // nearer stores shadow older ones either way
    }
  }

  // Ordinary cf: loads (non-early) and flushes on the same address, ordered,
  // at least one flush in the pair, no intervening flush to that address.
  std::map<int, std::vector<int>> accesses;  // addr -> event indices
  for (int i = 0; i < static_cast<int>(ev.size()); ++i) {
    if (ev[i].addr < 0) continue;
    if (ev[i].flush || (is_load(i) && !g.early_read[i])) accesses[ev[i].addr].push_back(i);
  }
  for (const auto& [addr, seq] : accesses) {
    for (size_t a = 0; a < seq.size(); ++a) {
      for (size_t b = a + 1; b < seq.size(); ++b) {
        bool blocked = false;
        for (size_t m = a + 1; m < b; ++m)
          if (ev[seq[m]].flush) {
            blocked = true;
            break;
          }
        if (blocked) break;
        if (ev[seq[a]].flush || ev[seq[b]].flush) g.cf.push_back({seq[a], seq[b]});
      }
    }
  }

  auto tidy = [](std::vector<std::pair<int, int>>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  };
  tidy(g.po);
  tidy(g.eq);
  tidy(g.cf);
  return g;
}

// Event identity across computations: (thread, per-thread event id,
// instruction id, kind).
namespace detail_hb {
using EventKey = std::tuple<int, int, std::string, bool>;
inline EventKey key(const Event& e) { return {e.thread, e.id, e.instr, e.flush}; }
}  // namespace detail_hb

inline bool hb_equal(const Computation& c1, const Computation& c2) {
  if (c1.events.size() != c2.events.size()) return false;
  std::map<detail_hb::EventKey, int> pos2;
  for (int i = 0; i < static_cast<int>(c2.events.size()); ++i) {
    if (!pos2.emplace(detail_hb::key(c2.events[i]), i).second) return false;
  }
  std::vector<int> to2(c1.events.size());
  for (int i = 0; i < static_cast<int>(c1.events.size()); ++i) {
    auto it = pos2.find(detail_hb::key(c1.events[i]));
    if (it == pos2.end()) return false;
    to2[i] = it->second;
  }
  HbGraph g1 = build_hb(c1);
  HbGraph g2 = build_hb(c2);
  auto translate = [&](std::vector<std::pair<int, int>> edges, bool sym) {
    for (auto& [a, b] : edges) {
      a = to2[a];
      b = to2[b];
      if (sym && a > b) std::swap(a, b);
    }
    std::sort(edges.begin(), edges.end());
    return edges;
  };
  auto canon = [&](std::vector<std::pair<int, int>> edges, bool sym) {
    for (auto& [a, b] : edges)
      if (sym && a > b) std::swap(a, b);
    std::sort(edges.begin(), edges.end());
    return edges;
  };
  return translate(g1.po, false) == canon(g2.po, false) &&
         translate(g1.eq, true) == canon(g2.eq, true) &&
         translate(g1.cf, false) == canon(g2.cf, false);
}

// Debug export: one `kind src dst` line per edge, nodes as thread/id with an
// `f` suffix on flushes.
inline std::string hb_edge_list(const Program& p, const Computation& c) {
  HbGraph g = build_hb(c);
  auto node = [&](int i) {
    const Event& e = c.events[i];
    std::string s = p.threads[e.thread].name + "/" + std::to_string(e.id);
    if (e.flush) s += "f";
    return s;
  };
  std::string out;
  auto dump = [&](const char* kind, const std::vector<std::pair<int, int>>& edges) {
    std::vector<std::string> lines;
    for (auto [a, b] : edges) lines.push_back(std::string(kind) + " " + node(a) + " " + node(b));
    std::sort(lines.begin(), lines.end());
    for (auto& l : lines) out += l + "\n";
  };
  dump("po", g.po);
  dump("eq", g.eq);
  dump("cf", g.cf);
  return out;
}

}  // namespace lazytso
