#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "lazytso/lazy.hpp"
#include "lazytso/parser.hpp"
#include "lazytso/report.hpp"

namespace lazytso {

struct CheckOptions {
  std::string mode = "lazy";  // sc | tso-brute | lazy | robust
  std::optional<std::pair<int, int>> unroll;
  bool delete_first_store = false;
  int witnesses_per_round = 8;
  std::optional<std::uint64_t> state_budget;
  bool por = false;
};

namespace detail_cli {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::vector<int> schedule_of(const std::pair<int, int>& range) {
  std::vector<int> ks;
  for (int k = range.first; k <= range.second; ++k) ks.push_back(k);
  return ks;
}

inline std::vector<std::string> plain_skeleton(const Computation& c) {
  std::vector<std::string> ids;
  for (const Event& e : c.events)
    if (!e.flush) ids.push_back(e.instr);
  return ids;
}

}  // namespace detail_cli

inline RunReport run_check(const std::string& path, const CheckOptions& opt) {
  RunReport rep;
  rep.program = std::filesystem::path(path).stem().string();
  rep.mode = opt.mode;
  auto t0 = std::chrono::steady_clock::now();
  auto finish = [&](RunReport& r) {
    r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
  };

  Program p;
  try {
    p = parse(detail_cli::read_file(path));
  } catch (const std::exception& e) {
    rep.verdict = "error";
    rep.note = e.what();
    return finish(rep);
  }

  try {
    ReachOptions ropts{opt.state_budget, std::nullopt, opt.por};
    if (opt.mode == "sc" || opt.mode == "tso-brute") {
      Mode m = opt.mode == "sc" ? Mode::SC : Mode::TSO;
      if (m == Mode::TSO && !is_acyclic(p)) {
        rep.verdict = "error";
        rep.note = "tso-brute handles acyclic programs only";
        return finish(rep);
      }
      ReachResult v = reach(p, m, ropts);
      rep.states_explored = v.states_explored;
      rep.iterations = 1;
      rep.sc_queries = m == Mode::SC ? 1 : 0;
      switch (v.status) {
      case ReachResult::Status::Reachable:
        rep.verdict = "reachable";
        rep.trace = detail_cli::plain_skeleton(*v.trace);
        break;
      case ReachResult::Status::Unreachable: rep.verdict = "unreachable"; break;
      case ReachResult::Status::BudgetExhausted:
        rep.verdict = "inconclusive";
        rep.note = "state budget exhausted";
        break;
      }
      return finish(rep);
    }

    if (opt.mode == "robust") {
      WitnessSearchOptions wo;
      if (!is_acyclic(p)) {
        if (!opt.unroll) {
          rep.verdict = "error";
          rep.note = "robustness check on a cyclic program needs --unroll for a search bound";
          return finish(rep);
        }
        wo.bound = opt.unroll->second;
      }
      try {
        InstructionSeq sigma = oracle(p, wo);
        if (sigma.empty()) {
          rep.verdict = "unreachable";
          rep.note = "robust: no witness";
        } else {
          rep.verdict = "reachable";
          rep.note = "non-robust: witness found";
          rep.sigma_list.push_back(sigma);
        }
      } catch (const BoundExhausted&) {
        rep.verdict = "inconclusive";
        rep.note = "witness search bound exhausted";
      }
      return finish(rep);
    }

    if (opt.mode != "lazy") {
      rep.verdict = "error";
      rep.note = "unknown mode " + opt.mode;
      return finish(rep);
    }

    LazyConfig cfg;
    cfg.delete_first_store = opt.delete_first_store;
    cfg.witnesses_per_round = opt.witnesses_per_round;
    cfg.state_budget = opt.state_budget;
    cfg.por = opt.por;
    if (opt.unroll) cfg.unroll_bounds = detail_cli::schedule_of(*opt.unroll);

    if (is_acyclic(p)) {
      LazyResult v = lazy_reach(p, cfg);
      rep.iterations = v.iterations;
      rep.sc_queries = v.sc_queries;
      rep.states_explored = v.states_total;
      rep.trace = v.trace_original;
      for (const auto& s : v.sigmas_original) rep.sigma_list.push_back(s);
      rep.note = v.note;
      switch (v.outcome) {
      case LazyResult::Outcome::Reachable: rep.verdict = "reachable"; break;
      case LazyResult::Outcome::Unreachable: rep.verdict = "unreachable"; break;
      case LazyResult::Outcome::Inconclusive: rep.verdict = "inconclusive"; break;
      }
      return finish(rep);
    }

    if (cfg.unroll_bounds.empty()) {
      rep.verdict = "error";
      rep.note = "cyclic program: lazy mode needs --unroll LO:HI";
      return finish(rep);
    }
    SemiDecideResult v = semi_decide(p, cfg);
    rep.iterations = v.inner.iterations;
    rep.sc_queries = v.inner.sc_queries;
    rep.states_explored = v.inner.states_total;
    rep.trace = v.trace_original;
    for (const auto& s : v.inner.sigmas_original) rep.sigma_list.push_back(s);
    rep.note = v.inner.note;
    switch (v.outcome) {
    case SemiDecideResult::Outcome::Reachable: rep.verdict = "reachable"; break;
    case SemiDecideResult::Outcome::Unreachable: rep.verdict = "unreachable"; break;
    case SemiDecideResult::Outcome::SafeUpToK:
      rep.verdict = "safe-up-to-k";
      rep.note = "safe up to k=" + std::to_string(v.k);
      break;
    case SemiDecideResult::Outcome::Inconclusive: rep.verdict = "inconclusive"; break;
    }
    return finish(rep);
  } catch (const std::exception& e) {
    rep.verdict = "error";
    rep.note = e.what();
    return finish(rep);
  }
}

// ---------------------------------------------------------------------------
// Benchmark driver: every corpus entry is FILE.prog next to FILE.expect.json
// holding the expected verdict and run options.

struct BenchRow {
  RunReport report;
  int threads = 0;
  int states = 0;
  int transitions = 0;
  std::string expected;
  bool ok = false;
};

inline BenchRow run_bench_entry(const std::string& prog_path) {
  std::string expect_path = prog_path.substr(0, prog_path.size() - 5) + ".expect.json";
  if (!std::filesystem::exists(expect_path))
    throw std::runtime_error("missing sidecar " + expect_path);
  nlohmann::json j = nlohmann::json::parse(detail_cli::read_file(expect_path));

  CheckOptions opt;
  opt.mode = j.value("mode", "lazy");
  opt.delete_first_store = j.value("delete_first_store", false);
  opt.witnesses_per_round = j.value("witnesses_per_round", 8);
  if (j.contains("unroll")) {
    std::string u = j["unroll"].get<std::string>();
    auto colon = u.find(':');
    int lo = std::stoi(u.substr(0, colon));
    int hi = colon == std::string::npos ? lo : std::stoi(u.substr(colon + 1));
    opt.unroll = {lo, hi};
  }

  BenchRow row;
  row.expected = j.at("expect").get<std::string>();
  row.report = run_check(prog_path, opt);
  row.ok = row.report.verdict == row.expected;

  Program p = parse(detail_cli::read_file(prog_path));
  row.threads = p.n_threads();
  row.states = static_cast<int>(p.state_names.size());
  for (const auto& t : p.threads) row.transitions += static_cast<int>(t.instrs.size());
  return row;
}

inline int run_bench(const std::string& dir, std::ostream& out,
                     const std::string& json_path = "") {
  std::vector<std::string> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.path().extension() == ".prog") files.push_back(e.path().string());
  std::sort(files.begin(), files.end());
  if (files.empty()) {
    out << "no .prog files in " << dir << "\n";
    return 3;
  }

  out << std::left << std::setw(18) << "program" << std::right << std::setw(3) << "T"
      << std::setw(5) << "St" << std::setw(5) << "Tr" << std::setw(5) << "RQ" << "  "
      << std::left << std::setw(14) << "verdict" << std::right << std::setw(9) << "time(s)"
      << "  result\n";
  bool all_ok = true;
  nlohmann::json jrows = nlohmann::json::array();
  for (const auto& f : files) {
    BenchRow row = run_bench_entry(f);
    all_ok &= row.ok;
    out << std::left << std::setw(18) << row.report.program << std::right << std::setw(3)
        << row.threads << std::setw(5) << row.states << std::setw(5) << row.transitions
        << std::setw(5) << row.report.sc_queries << "  " << std::left << std::setw(14)
        << row.report.verdict << std::right << std::setw(9) << std::fixed
        << std::setprecision(3) << row.report.wall_time << (row.ok ? "  ok" : "  MISMATCH")
        << "\n";
    nlohmann::json jr = to_json(row.report);
    jr["threads"] = row.threads;
    jr["states"] = row.states;
    jr["transitions"] = row.transitions;
    jr["expected"] = row.expected;
    jr["ok"] = row.ok;
    jrows.push_back(jr);
  }
  if (!json_path.empty()) {
    std::ofstream js(json_path);
    js << jrows.dump(2) << "\n";
  }
  return all_ok ? 0 : 1;
}

}  // namespace lazytso
