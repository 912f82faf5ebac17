#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "opaque/cli.hpp"
#include "opaque/parallel.hpp"

namespace {

void add_source_options(CLI::App* cmd, opaque::ModelSource& source, std::optional<int>& horizon,
                        std::optional<std::string>& dfa, std::optional<std::string>& policy) {
  cmd->add_option("--model", source.name,
                  "builtin name (example-finite-memory, graph-example, gridworld, random) or model JSON path")
      ->required();
  cmd->add_option("--dfa", dfa, "DFA JSON path; makes the secret language membership");
  cmd->add_option("--policy", policy, "policy JSON path");
  cmd->add_option("--horizon", horizon, "horizon T");
  cmd->add_flag("--initial-state", source.initial_state, "use the initial-state secret");
  cmd->add_option("--seed", source.seed, "seed for random models and the check point");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Entropy-based opacity synthesis for MDPs"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "worker threads (0 = hardware concurrency)");

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::string mode;
  auto* run = app.add_subcommand("run", "run an experiment described by a JSON config");
  run->add_option("--config", config_path, "experiment config")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "override the config seed");
  run->add_option("--out", out_dir, "override the output directory");
  run->add_option("--mode", mode, "override the optimizer gradient mode")
      ->check(CLI::IsMember({"exact", "sampled"}));
  run->add_option("--threads", threads, "worker threads (0 = hardware concurrency)");

  opaque::ModelSource verify_source;
  std::optional<int> verify_horizon;
  std::optional<std::string> verify_dfa;
  std::optional<std::string> verify_policy;
  int order = 2;
  auto* verify = app.add_subcommand("verify", "check derivatives against brute force and finite differences");
  add_source_options(verify, verify_source, verify_horizon, verify_dfa, verify_policy);
  verify->add_option("--order", order, "highest derivative order to check")->check(CLI::Range(1, 2));

  opaque::ModelSource enum_source;
  std::optional<int> enum_horizon;
  std::optional<std::string> enum_dfa;
  std::optional<std::string> enum_policy;
  auto* enumerate = app.add_subcommand("enumerate", "print every observation sequence with its posterior");
  add_source_options(enumerate, enum_source, enum_horizon, enum_dfa, enum_policy);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(opaque::ExitCode::input_error);
  }
  if (threads > 0) opaque::set_thread_count(threads);

  opaque::ExitCode code = opaque::ExitCode::success;
  if (*run) {
    opaque::RunOverrides overrides;
    overrides.seed = seed;
    overrides.output_dir = out_dir;
    if (mode == "exact") overrides.mode = opaque::EstimationMode::exact;
    if (mode == "sampled") overrides.mode = opaque::EstimationMode::sampled;
    code = opaque::cmd_run(config_path, overrides, std::cout, std::cerr);
  } else if (*verify) {
    verify_source.horizon = verify_horizon;
    verify_source.dfa_path = verify_dfa;
    verify_source.policy_path = verify_policy;
    code = opaque::cmd_verify(verify_source, order, std::cout, std::cerr);
  } else if (*enumerate) {
    enum_source.horizon = enum_horizon;
    enum_source.dfa_path = enum_dfa;
    enum_source.policy_path = enum_policy;
    code = opaque::cmd_enumerate(enum_source, std::cout, std::cerr);
  }
  return static_cast<int>(code);
}
