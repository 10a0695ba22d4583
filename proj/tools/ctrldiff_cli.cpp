// Command-line surface: one subcommand per experiment kind plus `replay`.
// Runs the experiment, appends the record to the output files and exits
// nonzero when any pass/fail flag fails (or on warnings under --strict).

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "ctrldiff/harness.hpp"
#include "ctrldiff/version.hpp"

namespace {

using ctrldiff::harness::ExperimentConfig;
using ctrldiff::harness::ResultRecord;

struct CommonArgs {
  std::string config_path;
  std::string out = "ctrldiff_results";
  std::uint64_t seed = 0;
  bool seed_set = false;
  int workers = 0;
  bool strict = false;
  std::string fixture;
  long n_paths = 0;
  int macro_steps = 0;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "experiment config file (JSON)");
  cmd->add_option("--seed", args.seed, "master seed")->each([&](const std::string&) {
    args.seed_set = true;
  });
  cmd->add_option("--workers", args.workers, "worker threads");
  cmd->add_option("--out", args.out, "output path prefix (.jsonl / .csv)");
  cmd->add_option("--fixture", args.fixture, "fixture name override");
  cmd->add_option("--paths", args.n_paths, "Monte Carlo path count override");
  cmd->add_option("--macro-steps", args.macro_steps, "macro step count override");
  cmd->add_flag("--strict", args.strict, "fail on warnings as well");
}

ExperimentConfig load_config(const std::string& kind, const CommonArgs& args) {
  ExperimentConfig cfg;
  if (!args.config_path.empty()) {
    std::ifstream in(args.config_path);
    if (!in) throw std::runtime_error("cannot open config " + args.config_path);
    std::stringstream ss;
    ss << in.rdbuf();
    cfg = ExperimentConfig::from_json(nlohmann::json::parse(ss.str()));
  }
  cfg.kind = kind;
  if (args.seed_set) cfg.seed = args.seed;
  if (args.workers > 0) cfg.workers = args.workers;
  if (!args.fixture.empty()) cfg.fixture = args.fixture;
  if (args.n_paths > 0) cfg.n_paths = args.n_paths;
  if (args.macro_steps > 0) cfg.macro_steps = args.macro_steps;
  return cfg;
}

int emit(const ResultRecord& record, const CommonArgs& args) {
  ctrldiff::harness::append_record(record, args.out + ".jsonl", args.out + ".csv");
  for (const auto& f : record.flags)
    std::cout << record.kind << " " << f.name << ": " << (f.pass ? "PASS" : "FAIL") << "\n";
  for (const auto& w : record.warnings) std::cout << "warning: " << w << "\n";
  std::cout << record.kind << (record.pass() ? " PASS" : " FAIL") << " ("
            << record.duration_seconds << " s) -> " << args.out << ".jsonl\n";
  if (!record.pass()) return 1;
  if (args.strict && !record.warnings.empty()) return 1;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo toolkit for continuous-time stochastic control via sampled "
               "discrete-time models"};
  app.set_version_flag("--version", ctrldiff::kVersion);
  app.require_subcommand(1);

  std::map<std::string, CommonArgs> args;
  for (const auto& kind : ctrldiff::harness::experiment_kinds()) {
    auto* cmd = app.add_subcommand(kind, "run the '" + kind + "' experiment");
    add_common(cmd, args[kind]);
  }

  CommonArgs replay_args;
  std::string record_path;
  int record_index = -1;
  auto* rep = app.add_subcommand("replay", "re-run a stored record and compare bit-exactly");
  rep->add_option("record", record_path, "record file (.jsonl)")->required();
  rep->add_option("--index", record_index, "record index within the file (default: last)");
  add_common(rep, replay_args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (rep->parsed()) {
      const auto res = ctrldiff::harness::replay(
          record_path, record_index, replay_args.workers > 0 ? replay_args.workers : -1,
          replay_args.seed_set ? static_cast<std::int64_t>(replay_args.seed) : -1);
      std::cout << "replay of " << record_path << ": "
                << (res.bit_identical ? "bit-identical" : "DIFFERS") << "\n";
      for (const auto& w : res.rerun.warnings) std::cout << "warning: " << w << "\n";
      if (!replay_args.out.empty())
        ctrldiff::harness::append_record(res.rerun, replay_args.out + ".jsonl",
                                         replay_args.out + ".csv");
      if (res.seed_overridden) return 0;  // comparison run, not a replay
      return res.bit_identical ? 0 : 1;
    }
    for (const auto& kind : ctrldiff::harness::experiment_kinds()) {
      if (app.get_subcommand(kind)->parsed()) {
        const auto cfg = load_config(kind, args[kind]);
        return emit(ctrldiff::harness::run_experiment(cfg), args[kind]);
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
