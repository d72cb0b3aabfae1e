#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "lazytso/cli.hpp"

namespace {

void print_report(const lazytso::RunReport& r, std::ostream& out) {
  out << r.program << " [" << r.mode << "]: " << r.verdict;
  if (!r.note.empty()) out << " (" << r.note << ")";
  out << "\n";
  if (r.iterations) out << "  iterations: " << r.iterations << "\n";
  if (r.sc_queries) out << "  sc queries: " << r.sc_queries << "\n";
  if (r.states_explored) out << "  states explored: " << r.states_explored << "\n";
  for (const auto& sigma : r.sigma_list) {
    out << "  sigma:";
    for (const auto& id : sigma) out << " " << id;
    out << "\n";
  }
  if (!r.trace.empty()) {
    out << "  trace:";
    for (const auto& id : r.trace) out << " " << id;
    out << "\n";
  }
  out << "  wall time: " << r.wall_time << "s\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lazy TSO reachability checker"};
  app.require_subcommand(1);

  std::string file;
  std::string json_path;
  std::string unroll_spec;
  lazytso::CheckOptions opt;
  std::uint64_t budget = 0;

  CLI::App* check = app.add_subcommand("check", "analyze one program file");
  check->add_option("file", file, "program file")->required();
  check->add_option("--mode", opt.mode, "sc | tso-brute | lazy | robust")
      ->check(CLI::IsMember({"sc", "tso-brute", "lazy", "robust"}));
  check->add_option("--unroll", unroll_spec, "unroll schedule LO:HI (cyclic programs)");
  check->add_flag("--delete-first-store", opt.delete_first_store,
                  "remove the extended store (termination mode)");
  check->add_option("--witnesses-per-round", opt.witnesses_per_round,
                    "extensions merged per iteration");
  check->add_option("--state-budget", budget, "abort exploration after this many states");
  check->add_flag("--por", opt.por, "partial-order reduction for local steps");
  check->add_option("--json", json_path, "write the report as JSON");

  std::string bench_dir;
  std::string bench_json;
  CLI::App* bench = app.add_subcommand("bench", "run a corpus directory");
  bench->add_option("dir", bench_dir, "directory of .prog files with .expect.json sidecars")
      ->required();
  bench->add_option("--json", bench_json, "write all reports as JSON");

  CLI11_PARSE(app, argc, argv);

  if (check->parsed()) {
    if (!unroll_spec.empty()) {
      auto colon = unroll_spec.find(':');
      try {
        int lo = std::stoi(unroll_spec.substr(0, colon));
        int hi = colon == std::string::npos ? lo : std::stoi(unroll_spec.substr(colon + 1));
        opt.unroll = {lo, hi};
      } catch (const std::exception&) {
        std::cerr << "bad --unroll value: " << unroll_spec << "\n";
        return 3;
      }
    }
    if (budget) opt.state_budget = budget;
    lazytso::RunReport rep = lazytso::run_check(file, opt);
    print_report(rep, std::cout);
    if (!json_path.empty()) {
      std::ofstream js(json_path);
      js << lazytso::to_json(rep).dump(2) << "\n";
    }
    return rep.exit_code();
  }

  try {
    return lazytso::run_bench(bench_dir, std::cout, bench_json);
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 3;
  }
}
