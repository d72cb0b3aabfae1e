#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace lazytso {

// One analysis run, as printed and serialized by the CLI.
// verdict: reachable | unreachable | safe-up-to-k | inconclusive | error
struct RunReport {
  std::string program;
  std::string mode;
  std::string verdict;
  std::vector<std::string> trace;  // original-instruction skeleton
  int iterations = 0;
  std::vector<std::vector<std::string>> sigma_list;
  std::uint64_t sc_queries = 0;  // Fig.-6-style RQ column
  std::uint64_t states_explored = 0;
  double wall_time = 0.0;  // seconds
  std::string note;

  int exit_code() const {
    if (verdict == "reachable") return 1;
    if (verdict == "unreachable" || verdict == "safe-up-to-k") return 0;
    if (verdict == "inconclusive") return 2;
    return 3;
  }
};

inline bool operator==(const RunReport& a, const RunReport& b) {
  return a.program == b.program && a.mode == b.mode && a.verdict == b.verdict &&
         a.trace == b.trace && a.iterations == b.iterations && a.sigma_list == b.sigma_list &&
         a.sc_queries == b.sc_queries && a.states_explored == b.states_explored &&
         a.wall_time == b.wall_time && a.note == b.note;
}

inline nlohmann::json to_json(const RunReport& r) {
  return nlohmann::json{{"program", r.program},
                        {"mode", r.mode},
                        {"verdict", r.verdict},
                        {"trace", r.trace},
                        {"iterations", r.iterations},
                        {"sigma_list", r.sigma_list},
                        {"sc_queries", r.sc_queries},
                        {"states_explored", r.states_explored},
                        {"wall_time", r.wall_time},
                        {"note", r.note}};
}

inline RunReport report_from_json(const nlohmann::json& j) {
  RunReport r;
  r.program = j.at("program").get<std::string>();
  r.mode = j.at("mode").get<std::string>();
  r.verdict = j.at("verdict").get<std::string>();
  r.trace = j.at("trace").get<std::vector<std::string>>();
  r.iterations = j.at("iterations").get<int>();
  r.sigma_list = j.at("sigma_list").get<std::vector<std::vector<std::string>>>();
  r.sc_queries = j.at("sc_queries").get<std::uint64_t>();
  r.states_explored = j.at("states_explored").get<std::uint64_t>();
  r.wall_time = j.at("wall_time").get<double>();
  r.note = j.at("note").get<std::string>();
  return r;
}

}  // namespace lazytso
