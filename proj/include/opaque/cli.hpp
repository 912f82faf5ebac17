#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "opaque/evaluation.hpp"
#include "opaque/optimizer.hpp"

namespace opaque {

enum class ExitCode : int { success = 0, input_error = 1, infeasible = 2 };

/// A JSON experiment description. Relative model paths resolve against the
/// directory of the config file.
struct ExperimentConfig {
  enum class Kind { last_state, initial_state, language, baseline_sweep };

  Kind kind = Kind::last_state;
  std::string builtin;
  std::string mdp_path;
  std::string dfa_path;
  int horizon = 0;
  double zeta = -std::numeric_limits<double>::infinity();
  std::uint64_t seed = 0;
  std::optional<double> discount;
  /// Size of a saturating step-counter memory; 1 keeps the policy Markov.
  int memory_states = 1;
  PrimalDualConfig optimizer;
  EstimationMode evaluation_mode = EstimationMode::exact;
  std::size_t evaluation_samples = 100000;
  std::vector<double> taus;
  BaselineConfig baseline;
  std::string output_dir = "out";
};

const char* to_string(ExperimentConfig::Kind kind);

/// Parses a config document. Errors name the offending line where possible.
ExperimentConfig parse_experiment_config(const std::string& text, const std::string& source,
                                         const std::string& base_dir = ".");
ExperimentConfig load_experiment_config(const std::string& path);

/// The opacity problem a config describes, plus the automaton product for language tasks.
struct ResolvedProblem {
  OpacityProblem problem;
  std::string description;
};

ResolvedProblem resolve_problem(const ExperimentConfig& config);

/// Flag values that override the config file.
struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
  std::optional<EstimationMode> mode;
};

/// Runs the experiment and writes iterates.csv, summary.json and policy.json
/// (or baseline.csv and summary.json for a baseline sweep).
ExitCode cmd_run(const std::string& config_path, const RunOverrides& overrides, std::ostream& out,
                 std::ostream& err);

/// Model source for verify / enumerate: a builtin name (example-finite-memory,
/// graph-example, gridworld, random) or the path of a model JSON file.
struct ModelSource {
  std::string name;
  std::optional<std::string> dfa_path;
  std::optional<std::string> policy_path;
  std::optional<int> horizon;
  bool initial_state = false;
  std::uint64_t seed = 0;
};

ResolvedProblem resolve_source(const ModelSource& source, SoftmaxPolicy* policy);

/// Operator-vs-enumeration, gradient-vs-finite-difference and (order 2)
/// Hessian-vs-finite-difference checks. Exit 1 if any tolerance is violated.
ExitCode cmd_verify(const ModelSource& source, int order, std::ostream& out, std::ostream& err);

/// CSV rows y, P(y), posterior, entropy contribution, guess error, plus totals.
ExitCode cmd_enumerate(const ModelSource& source, std::ostream& out, std::ostream& err);

}  // namespace opaque
