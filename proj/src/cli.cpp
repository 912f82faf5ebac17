#include "opaque/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <set>

#include "opaque/envlib.hpp"
#include "opaque/memory.hpp"
#include "opaque/model_io.hpp"
#include "opaque/random.hpp"

namespace opaque {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Line (1-based) of the first occurrence of "key" in the raw text, or 0.
std::size_t line_of_key(const std::string& text, const std::string& key) {
  const std::string quoted = "\"" + key + "\"";
  const auto pos = text.find(quoted);
  if (pos == std::string::npos) return 0;
  return static_cast<std::size_t>(std::count(text.begin(), text.begin() + pos, '\n')) + 1;
}

class ConfigReader {
 public:
  ConfigReader(const std::string& text, const std::string& source) : text_(text), source_(source) {}

  [[noreturn]] void fail(const std::string& key, const std::string& message) const {
    const std::size_t line = line_of_key(text_, key);
    throw InputError(source_ + (line ? ":" + std::to_string(line) : std::string()) + ": " + message);
  }

  void allow_only(const json& obj, const std::set<std::string>& keys, const std::string& where) const {
    if (!obj.is_object()) fail(where, "'" + where + "' must be an object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      if (!keys.count(it.key())) fail(it.key(), "unknown key '" + it.key() + "' in " + where);
    }
  }

  double number(const json& obj, const std::string& key, double fallback) const {
    auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    if (it->is_string()) {
      const std::string s = it->get<std::string>();
      if (s == "-inf") return -std::numeric_limits<double>::infinity();
      if (s == "inf") return std::numeric_limits<double>::infinity();
    }
    if (it->is_null() && key == "zeta") return -std::numeric_limits<double>::infinity();
    if (!it->is_number()) fail(key, "'" + key + "' must be a number");
    return it->get<double>();
  }

  long integer(const json& obj, const std::string& key, long fallback) const {
    auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    if (!it->is_number_integer()) fail(key, "'" + key + "' must be an integer");
    return it->get<long>();
  }

  std::uint64_t unsigned_integer(const json& obj, const std::string& key) const {
    auto it = obj.find(key);
    if (it == obj.end()) fail(key, "missing mandatory field '" + key + "'");
    if (!it->is_number_unsigned() && !(it->is_number_integer() && it->get<long long>() >= 0)) {
      fail(key, "'" + key + "' must be a nonnegative integer");
    }
    return it->get<std::uint64_t>();
  }

  std::string string(const json& obj, const std::string& key, const std::string& fallback) const {
    auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    if (!it->is_string()) fail(key, "'" + key + "' must be a string");
    return it->get<std::string>();
  }

  bool boolean(const json& obj, const std::string& key, bool fallback) const {
    auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    if (!it->is_boolean()) fail(key, "'" + key + "' must be true or false");
    return it->get<bool>();
  }

  EstimationMode mode(const json& obj, const std::string& key, EstimationMode fallback) const {
    const std::string s = string(obj, key, to_string(fallback));
    if (s == "exact") return EstimationMode::exact;
    if (s == "sampled") return EstimationMode::sampled;
    fail(key, "'" + key + "' must be \"exact\" or \"sampled\"");
  }

 private:
  const std::string& text_;
  std::string source_;
};

EstimationMode parse_mode(const std::string& s) {
  if (s == "exact") return EstimationMode::exact;
  if (s == "sampled") return EstimationMode::sampled;
  throw InputError("mode must be exact or sampled");
}

std::string resolve_path(const std::string& base_dir, const std::string& path) {
  if (path.empty() || fs::path(path).is_absolute()) return path;
  return (fs::path(base_dir) / path).lexically_normal().string();
}

OpacityProblem with_memory(const OpacityProblem& problem, int memory_states) {
  if (memory_states <= 1) return problem;
  const MemoryTransducer counter = MemoryTransducer::time_counter(
      memory_states, problem.mdp.num_states(), problem.mdp.num_actions());
  const AugmentedMdp aug = augment_with_memory(problem.mdp, counter);
  return {aug.mdp, aug.lift(problem.observation), aug.lift(problem.secret), problem.horizon};
}

OpacityProblem problem_from_document(const ModelDocument& doc, int horizon, bool initial_state,
                                     const std::string& source) {
  if (!doc.observation) throw InputError(source + ": model has no sensor block");
  OpacityProblem p;
  p.mdp = doc.lmdp.base;
  p.observation = *doc.observation;
  p.horizon = horizon;
  if (initial_state) {
    p.secret = initial_state_secret(p.mdp.state_names);
  } else {
    if (doc.secret_states.empty()) throw InputError(source + ": model lists no secret_states");
    p.secret = terminal_membership(p.mdp.num_states(), doc.secret_states);
  }
  return p;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << text;
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

struct Evaluation {
  double entropy = 0.0;
  EstimationMode entropy_mode = EstimationMode::exact;
  double guess_error = 0.0;
  EstimationMode guess_mode = EstimationMode::exact;
  double value = 0.0;
};

Evaluation evaluate(const OpacityProblem& problem, const SoftmaxPolicy& policy,
                    EstimationMode mode, std::size_t samples, std::uint64_t seed, double cap) {
  Evaluation e;
  e.value = finite_horizon_value(problem.mdp, policy, problem.horizon);
  if (mode == EstimationMode::exact) {
    try {
      e.entropy = exact_conditional_entropy(problem, policy, cap).entropy;
      e.guess_error = guess_error_exact(problem, policy, cap).error;
      return e;
    } catch (const CapExceeded&) {
      // fall through to sampling
    }
  }
  const std::uint64_t eval_seed = stream_seed(seed, 0xe7a1ULL);
  e.entropy_mode = e.guess_mode = EstimationMode::sampled;
  const TrajectoryBatch batch =
      sample_batch(problem.mdp, policy, problem.observation, problem.horizon, samples, eval_seed);
  e.entropy = sampled_entropy_and_gradient(problem, policy, batch).entropy;
  e.guess_error = guess_error_sampled(problem, policy, samples, eval_seed).error;
  return e;
}

ExitCode run_baseline_sweep(const ExperimentConfig& config, const ResolvedProblem& resolved,
                            const fs::path& out_dir, std::ostream& out) {
  const OpacityProblem& problem = resolved.problem;
  std::vector<double> taus = config.taus;
  if (taus.empty()) {
    for (int i = 0; i < 11; ++i) taus.push_back(1.0 + 19.0 * i / 10.0);
  }
  std::string csv = "tau,guess_error,entropy,value,regularized_objective\n";
  json rows = json::array();
  double worst = 0.0;
  char line[256];
  for (std::size_t i = 0; i < taus.size(); ++i) {
    BaselineConfig bc = config.baseline;
    bc.tau = taus[i];
    bc.horizon = problem.horizon;
    bc.seed = stream_seed(config.seed, i);
    const SoftmaxPolicy policy = entropy_regularized_solve(problem.mdp, bc);
    const Evaluation e = evaluate(problem, policy, config.evaluation_mode, config.evaluation_samples,
                                  bc.seed, config.optimizer.enumeration_cap);
    const double objective = regularized_objective(problem.mdp, policy, problem.horizon, bc.tau);
    std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%.17g,%.17g\n", bc.tau, e.guess_error,
                  e.entropy, e.value, objective);
    csv += line;
    rows.push_back({{"tau", bc.tau}, {"guess_error", e.guess_error}, {"entropy", e.entropy},
                    {"value", e.value}, {"guess_error_mode", to_string(e.guess_mode)}});
    worst = std::max(worst, e.guess_error);
    out << "tau " << bc.tau << ": guess error " << e.guess_error << ", entropy " << e.entropy
        << ", value " << e.value << "\n";
  }
  write_text(out_dir / "baseline.csv", csv);
  json summary = {{"schema_version", kSchemaVersion},
                  {"kind", to_string(config.kind)},
                  {"model", resolved.description},
                  {"horizon", problem.horizon},
                  {"seed", config.seed},
                  {"max_guess_error", worst},
                  {"rows", rows}};
  write_text(out_dir / "summary.json", summary.dump(2) + "\n");
  return ExitCode::success;
}

// Central finite differences of a vector-valued function.
template <typename F>
Mat finite_difference_jacobian(const Vec& theta, F f, double h) {
  Vec base = f(theta);
  Mat jac(base.size(), theta.size());
  for (Index k = 0; k < theta.size(); ++k) {
    Vec plus = theta, minus = theta;
    plus(k) += h;
    minus(k) -= h;
    jac.col(k) = (f(plus) - f(minus)) / (2.0 * h);
  }
  return jac;
}

double relative_error(const Mat& a, const Mat& b) {
  return (a - b).norm() / std::max(b.norm(), 1e-8);
}

// P(y) by summing over every state path; never touches the operators.
double brute_force_probability(const OpacityProblem& problem, const Mat& chain,
                               const ObservationSequence& y) {
  const Index n = problem.mdp.num_states();
  std::vector<Index> path(y.size(), 0);
  double total = 0.0;
  while (true) {
    double p = problem.mdp.initial(path[0]) * problem.observation.emission(path[0], y[0]);
    for (std::size_t t = 1; t < y.size() && p != 0.0; ++t) {
      p *= chain(path[t], path[t - 1]) * problem.observation.emission(path[t], y[t]);
    }
    total += p;
    std::size_t t = 0;
    while (t < path.size() && ++path[t] == n) path[t++] = 0;
    if (t == path.size()) break;
  }
  return total;
}

}  // namespace

const char* to_string(ExperimentConfig::Kind kind) {
  switch (kind) {
    case ExperimentConfig::Kind::last_state: return "last-state";
    case ExperimentConfig::Kind::initial_state: return "initial-state";
    case ExperimentConfig::Kind::language: return "language";
    case ExperimentConfig::Kind::baseline_sweep: return "baseline-sweep";
  }
  return "unknown";
}

ExperimentConfig parse_experiment_config(const std::string& text, const std::string& source,
                                         const std::string& base_dir) {
  const json doc = parse_json(text, source);
  const ConfigReader r(text, source);
  r.allow_only(doc,
               {"schema_version", "kind", "model", "horizon", "zeta", "seed", "discount",
                "memory_states", "optimizer", "evaluation", "baseline", "output_dir"},
               "config");
  if (doc.contains("schema_version") &&
      (!doc["schema_version"].is_number_integer() || doc["schema_version"].get<int>() != kSchemaVersion)) {
    r.fail("schema_version", "unsupported schema_version");
  }
  ExperimentConfig c;
  const std::string kind = r.string(doc, "kind", "");
  if (kind == "last-state") c.kind = ExperimentConfig::Kind::last_state;
  else if (kind == "initial-state") c.kind = ExperimentConfig::Kind::initial_state;
  else if (kind == "language") c.kind = ExperimentConfig::Kind::language;
  else if (kind == "baseline-sweep") c.kind = ExperimentConfig::Kind::baseline_sweep;
  else r.fail("kind", "'kind' must be last-state, initial-state, language or baseline-sweep");

  if (!doc.contains("model")) r.fail("model", "missing mandatory field 'model'");
  const json& model = doc["model"];
  r.allow_only(model, {"builtin", "mdp", "dfa"}, "model");
  c.builtin = r.string(model, "builtin", "");
  c.mdp_path = resolve_path(base_dir, r.string(model, "mdp", ""));
  c.dfa_path = resolve_path(base_dir, r.string(model, "dfa", ""));
  if (c.builtin.empty() == c.mdp_path.empty()) r.fail("model", "model needs exactly one of 'builtin' or 'mdp'");
  if (c.kind == ExperimentConfig::Kind::language && c.builtin.empty() && c.dfa_path.empty()) {
    r.fail("model", "language opacity needs a 'dfa' path");
  }
  for (const auto& path : {c.mdp_path, c.dfa_path}) {
    if (!path.empty() && !fs::exists(path)) r.fail("model", "file '" + path + "' does not exist");
  }

  if (!doc.contains("horizon")) r.fail("horizon", "missing mandatory field 'horizon'");
  c.horizon = static_cast<int>(r.integer(doc, "horizon", 0));
  if (c.horizon < 0) r.fail("horizon", "'horizon' must be nonnegative");
  c.zeta = r.number(doc, "zeta", c.zeta);
  c.seed = r.unsigned_integer(doc, "seed");
  if (doc.contains("discount")) c.discount = r.number(doc, "discount", 1.0);
  c.memory_states = static_cast<int>(r.integer(doc, "memory_states", 1));
  if (c.memory_states < 1) r.fail("memory_states", "'memory_states' must be at least 1");
  c.output_dir = resolve_path(base_dir, r.string(doc, "output_dir", "out"));

  PrimalDualConfig& o = c.optimizer;
  if (doc.contains("optimizer")) {
    const json& opt = doc["optimizer"];
    r.allow_only(opt,
                 {"iterations", "xi", "eta_scale", "kappa_scale", "theta_min", "theta_max",
                  "lambda_max", "lambda_init", "samples", "mode", "enumeration_cap", "record_time"},
                 "optimizer");
    o.iterations = static_cast<int>(r.integer(opt, "iterations", o.iterations));
    o.xi = r.number(opt, "xi", o.xi);
    o.eta_scale = r.number(opt, "eta_scale", o.eta_scale);
    o.kappa_scale = r.number(opt, "kappa_scale", o.kappa_scale);
    o.theta_min = r.number(opt, "theta_min", o.theta_min);
    o.theta_max = r.number(opt, "theta_max", o.theta_max);
    o.lambda_max = r.number(opt, "lambda_max", o.lambda_max);
    o.lambda_init = r.number(opt, "lambda_init", o.lambda_init);
    o.samples = static_cast<std::size_t>(r.integer(opt, "samples", static_cast<long>(o.samples)));
    o.mode = r.mode(opt, "mode", o.mode);
    o.enumeration_cap = r.number(opt, "enumeration_cap", o.enumeration_cap);
    o.record_time = r.boolean(opt, "record_time", o.record_time);
  }
  o.zeta = c.zeta;
  o.seed = c.seed;
  try {
    o.validate();
  } catch (const InputError& e) {
    r.fail("optimizer", e.what());
  }

  if (doc.contains("evaluation")) {
    const json& ev = doc["evaluation"];
    r.allow_only(ev, {"mode", "samples"}, "evaluation");
    c.evaluation_mode = r.mode(ev, "mode", c.evaluation_mode);
    c.evaluation_samples =
        static_cast<std::size_t>(r.integer(ev, "samples", static_cast<long>(c.evaluation_samples)));
  }
  if (doc.contains("baseline")) {
    const json& b = doc["baseline"];
    r.allow_only(b, {"taus", "iterations", "learning_rate", "xi", "samples"}, "baseline");
    if (b.contains("taus")) {
      if (!b["taus"].is_array()) r.fail("taus", "'taus' must be a list of numbers");
      for (const auto& t : b["taus"]) {
        if (!t.is_number() || t.get<double>() < 0.0) r.fail("taus", "'taus' must be nonnegative numbers");
        c.taus.push_back(t.get<double>());
      }
    }
    c.baseline.iterations = static_cast<int>(r.integer(b, "iterations", c.baseline.iterations));
    c.baseline.learning_rate = r.number(b, "learning_rate", c.baseline.learning_rate);
    c.baseline.xi = r.number(b, "xi", c.baseline.xi);
    c.baseline.samples = static_cast<std::size_t>(r.integer(b, "samples", static_cast<long>(c.baseline.samples)));
  }
  c.baseline.horizon = c.horizon;
  c.baseline.seed = c.seed;
  return c;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  const std::string text = read_text_file(path);
  return parse_experiment_config(text, path, fs::path(path).parent_path().string());
}

ResolvedProblem resolve_problem(const ExperimentConfig& config) {
  using Kind = ExperimentConfig::Kind;
  ResolvedProblem out;
  const bool initial = config.kind == Kind::initial_state;
  const bool language = config.kind == Kind::language ||
                        (config.kind == Kind::baseline_sweep && (config.builtin == "graph-example" || !config.dfa_path.empty()));
  if (!config.builtin.empty()) {
    out.description = config.builtin;
    if (config.builtin == "example-finite-memory") {
      if (language) throw InputError("example-finite-memory has no automaton secret");
      const FiniteMemoryExample ex = example_finite_memory();
      out.problem = ex.problem();
      out.problem.horizon = config.horizon;
      if (initial) out.problem.secret = initial_state_secret(ex.mdp.state_names);
    } else if (config.builtin == "graph-example") {
      const GraphExample ex = graph_example(config.discount.value_or(1.0));
      if (language) {
        out.problem = language_problem(ex, config.horizon).problem;
      } else {
        out.problem.mdp = ex.lmdp.base;
        out.problem.observation = ex.observation;
        out.problem.horizon = config.horizon;
        out.problem.secret = initial ? initial_state_secret(ex.lmdp.base.state_names)
                                     : terminal_membership(7, {ex.lmdp.base.state_index("h1"),
                                                               ex.lmdp.base.state_index("h2")});
      }
    } else if (config.builtin == "gridworld") {
      if (language) throw InputError("gridworld has no automaton secret");
      const GridWorld grid = gridworld(default_gridworld_config());
      out.problem = initial ? grid.initial_state_problem(config.horizon)
                            : grid.last_state_problem(config.horizon);
    } else {
      throw InputError("unknown builtin model '" + config.builtin + "'");
    }
  } else {
    out.description = config.mdp_path;
    const ModelDocument doc = load_model(config.mdp_path);
    if (language) {
      if (!doc.observation) throw InputError(config.mdp_path + ": model has no sensor block");
      const Dfa dfa = load_dfa(config.dfa_path);
      const ProductMdp product = build_product(doc.lmdp, dfa);
      out.problem = {product.mdp, product.lift(*doc.observation),
                     automaton_classifier(product, dfa, config.horizon), config.horizon};
      out.description += " x " + config.dfa_path;
    } else {
      out.problem = problem_from_document(doc, config.horizon, initial, config.mdp_path);
    }
  }
  if (config.discount) out.problem.mdp.discount = *config.discount;
  out.problem = with_memory(out.problem, config.memory_states);
  out.problem.validate();
  return out;
}

ExitCode cmd_run(const std::string& config_path, const RunOverrides& overrides, std::ostream& out,
                 std::ostream& err) {
  try {
    ExperimentConfig config = load_experiment_config(config_path);
    if (overrides.seed) {
      config.seed = *overrides.seed;
      config.optimizer.seed = *overrides.seed;
      config.baseline.seed = *overrides.seed;
    }
    if (overrides.output_dir) config.output_dir = *overrides.output_dir;
    if (overrides.mode) config.optimizer.mode = *overrides.mode;
    const ResolvedProblem resolved = resolve_problem(config);
    const OpacityProblem& problem = resolved.problem;
    const fs::path out_dir(config.output_dir);
    fs::create_directories(out_dir);

    if (config.kind == ExperimentConfig::Kind::baseline_sweep) {
      return run_baseline_sweep(config, resolved, out_dir, out);
    }

    const double best = optimal_finite_horizon_value(problem.mdp, problem.horizon);
    json summary = {{"schema_version", kSchemaVersion},
                    {"iterates_schema_version", kSchemaVersion},
                    {"kind", to_string(config.kind)},
                    {"model", resolved.description},
                    {"horizon", problem.horizon},
                    {"zeta", number_or_null(config.zeta)},
                    {"seed", config.seed},
                    {"mode", to_string(config.optimizer.mode)},
                    {"iterations", config.optimizer.iterations},
                    {"optimal_value", best}};
    if (std::isfinite(config.zeta) && config.zeta > best + 1e-12) {
      summary["infeasible"] = true;
      summary["diagnostic"] = "zeta exceeds the best achievable value " + std::to_string(best);
      write_text(out_dir / "summary.json", summary.dump(2) + "\n");
      err << "constraint infeasible: zeta = " << config.zeta << " exceeds the optimal value " << best
          << "\n";
      return ExitCode::infeasible;
    }

    const IterateLog log = run_primal_dual(problem, config.optimizer);
    {
      std::ofstream csv(out_dir / "iterates.csv", std::ios::binary);
      if (!csv) throw InputError("cannot write iterates.csv");
      log.write_csv(csv);
    }
    SoftmaxPolicy policy(problem.mdp.num_states(), problem.mdp.num_actions(), log.final_theta,
                         config.optimizer.theta_min, config.optimizer.theta_max);
    write_text(out_dir / "policy.json", policy_to_json(problem.mdp, policy).dump(2) + "\n");

    const Evaluation e = evaluate(problem, policy, config.evaluation_mode, config.evaluation_samples,
                                  config.seed, config.optimizer.enumeration_cap);
    const IterateRecord last = log.records.empty() ? IterateRecord{} : log.records.back();
    summary["final_entropy_estimate"] = last.entropy;
    summary["final_value_estimate"] = last.value;
    summary["entropy"] = e.entropy;
    summary["entropy_mode"] = to_string(e.entropy_mode);
    summary["value"] = e.value;
    summary["lambda"] = log.final_lambda;
    summary["guess_error"] = e.guess_error;
    summary["guess_error_mode"] = to_string(e.guess_mode);
    summary["wall_seconds"] = log.wall_seconds;
    summary["infeasible"] = log.infeasible;
    summary["diagnostic"] = log.diagnostic;
    write_text(out_dir / "summary.json", summary.dump(2) + "\n");
    out << "entropy " << e.entropy << " (" << to_string(e.entropy_mode) << "), value " << e.value
        << ", lambda " << log.final_lambda << ", guess error " << e.guess_error << "\n";
    if (log.infeasible) {
      err << log.diagnostic << "\n";
      return ExitCode::infeasible;
    }
    return ExitCode::success;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return ExitCode::input_error;
  }
}

ResolvedProblem resolve_source(const ModelSource& source, SoftmaxPolicy* policy) {
  ResolvedProblem out;
  out.description = source.name;
  std::optional<SoftmaxPolicy> chosen;
  if (source.name == "example-finite-memory") {
    FiniteMemoryRealization r = example_finite_memory_policy();
    out.problem = r.problem;
    if (source.initial_state) out.problem.secret = initial_state_secret(out.problem.mdp.state_names);
    chosen = r.policy;
  } else if (source.name == "graph-example") {
    const GraphExample ex = graph_example();
    out.problem = language_problem(ex, source.horizon.value_or(5)).problem;
  } else if (source.name == "gridworld") {
    const GridWorld grid = gridworld(default_gridworld_config());
    out.problem = source.initial_state ? grid.initial_state_problem(source.horizon.value_or(3))
                                       : grid.last_state_problem(source.horizon.value_or(3));
  } else if (source.name == "random") {
    out.problem = random_problem(3, 2, 3, source.horizon.value_or(3), source.seed, source.initial_state);
  } else {
    const ModelDocument doc = load_model(source.name);
    if (source.dfa_path) {
      if (!doc.observation) throw InputError(source.name + ": model has no sensor block");
      const Dfa dfa = load_dfa(*source.dfa_path);
      const ProductMdp product = build_product(doc.lmdp, dfa);
      const int horizon = source.horizon.value_or(3);
      out.problem = {product.mdp, product.lift(*doc.observation),
                     automaton_classifier(product, dfa, horizon), horizon};
    } else {
      out.problem = problem_from_document(doc, source.horizon.value_or(3), source.initial_state, source.name);
    }
  }
  if (source.horizon) out.problem.horizon = *source.horizon;
  out.problem.validate();
  if (policy) {
    const Mdp& mdp = out.problem.mdp;
    if (source.policy_path) {
      *policy = policy_from_json(parse_json(read_text_file(*source.policy_path), *source.policy_path), mdp);
    } else if (chosen) {
      *policy = *chosen;
    } else {
      *policy = SoftmaxPolicy(mdp.num_states(), mdp.num_actions());
    }
  }
  return out;
}

ExitCode cmd_verify(const ModelSource& source, int order, std::ostream& out, std::ostream& err) {
  try {
    if (order != 1 && order != 2) throw InputError("verify order must be 1 or 2");
    SoftmaxPolicy fixed(1, 1);
    ResolvedProblem resolved = resolve_source(source, &fixed);
    const OpacityProblem& problem = resolved.problem;
    const Mdp& mdp = problem.mdp;
    // Derivatives are checked at a random interior point unless a policy file is given.
    SoftmaxPolicy policy = fixed;
    if (!source.policy_path) {
      RandomStream rng(source.seed, 7);
      Vec theta(policy.num_parameters());
      for (Index k = 0; k < theta.size(); ++k) theta(k) = rng.normal();
      policy.set_theta(theta);
    }
    const auto ops = build_operators(mdp, policy, problem.observation, order);
    const auto sequences = enumerate_sequences(ops, mdp.initial, problem.horizon);
    const double h = 1e-6;
    bool ok = true;
    auto report = [&](const std::string& name, double value, double tolerance) {
      const bool pass = value <= tolerance;
      ok = ok && pass;
      char line[200];
      std::snprintf(line, sizeof line, "%-40s worst %.3e  tol %.0e  %s\n", name.c_str(), value,
                    tolerance, pass ? "PASS" : "FAIL");
      out << line;
    };

    double mass = 0.0;
    for (const auto& y : sequences) mass += observation_probability(ops, mdp.initial, y);
    report("sum of P(y) equals one", std::abs(mass - 1.0), 1e-12);

    // A deterministic subset of sequences keeps the check fast on larger models.
    std::vector<ObservationSequence> subset;
    const std::size_t stride = std::max<std::size_t>(1, sequences.size() / 20);
    for (std::size_t i = 0; i < sequences.size(); i += stride) subset.push_back(sequences[i]);

    const double paths = std::pow(static_cast<double>(mdp.num_states()), problem.horizon + 1.0);
    if (paths <= 1e6) {
      double worst = 0.0;
      for (const auto& y : subset) {
        const double brute = brute_force_probability(problem, ops.chain(), y);
        worst = std::max(worst, std::abs(observation_probability(ops, mdp.initial, y) - brute));
      }
      report("operator P(y) vs path enumeration", worst, 1e-12);
    } else {
      out << "operator P(y) vs path enumeration      skipped (too many state paths)\n";
    }

    double worst_fb = 0.0;
    double worst_grad = 0.0;
    double worst_routes = 0.0;
    double worst_hess = 0.0;
    for (const auto& y : subset) {
      const auto msg = differentiated_messages(ops, mdp.initial, y, order);
      worst_fb = std::max(worst_fb, std::abs(msg.probability() - mdp.initial.dot(msg.beta.front())));
      const Vec grad = msg.gradient();
      worst_routes = std::max(worst_routes,
                              relative_error(grad, gradient_by_operator_products(ops, mdp.initial, y)));
      auto prob = [&](const Vec& theta) {
        SoftmaxPolicy p = policy;
        p.set_theta(theta);
        const auto o = build_operators(mdp, p, problem.observation, 0);
        return Vec::Constant(1, observation_probability(o, mdp.initial, y));
      };
      worst_grad = std::max(worst_grad, relative_error(grad.transpose(),
                                                       finite_difference_jacobian(policy.theta(), prob, h)));
      if (order == 2) {
        auto gradient = [&](const Vec& theta) {
          SoftmaxPolicy p = policy;
          p.set_theta(theta);
          const auto o = build_operators(mdp, p, problem.observation, 1);
          return Vec(forward_messages(o, mdp.initial, y, 1).gradient());
        };
        worst_hess = std::max(worst_hess, relative_error(msg.hessian(),
                                                         finite_difference_jacobian(policy.theta(), gradient, h)));
      }
    }
    report("forward vs backward P(y)", worst_fb, 1e-12);
    report("grad P(y): messages vs operator products", worst_routes, 1e-10);
    report("grad P(y): messages vs finite differences", worst_grad, 1e-5);
    if (order == 2) report("hess P(y): messages vs finite differences", worst_hess, 1e-4);

    const EntropyReport exact = order == 2 ? entropy_hessian(problem, policy) : exact_entropy_gradient(problem, policy);
    auto entropy = [&](const Vec& theta) {
      SoftmaxPolicy p = policy;
      p.set_theta(theta);
      return Vec::Constant(1, exact_conditional_entropy(problem, p).entropy);
    };
    report("grad H: exact vs finite differences",
           relative_error(exact.gradient->transpose(), finite_difference_jacobian(policy.theta(), entropy, h)), 1e-5);
    if (order == 2) {
      auto entropy_gradient = [&](const Vec& theta) {
        SoftmaxPolicy p = policy;
        p.set_theta(theta);
        return Vec(*exact_entropy_gradient(problem, p).gradient);
      };
      const Mat& hess = *exact.hessian;
      report("hess H: exact vs finite differences",
             relative_error(hess, finite_difference_jacobian(policy.theta(), entropy_gradient, h)), 1e-4);
    }
    out << (ok ? "all checks passed\n" : "some checks failed\n");
    return ok ? ExitCode::success : ExitCode::input_error;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return ExitCode::input_error;
  }
}

ExitCode cmd_enumerate(const ModelSource& source, std::ostream& out, std::ostream& err) {
  try {
    SoftmaxPolicy policy(1, 1);
    const ResolvedProblem resolved = resolve_source(source, &policy);
    const OpacityProblem& problem = resolved.problem;
    const auto rows = enumerate_posteriors(problem, policy);
    out << "y,probability";
    for (const auto& name : problem.secret.label_names) out << ",posterior_" << name;
    out << ",entropy_contribution,guess_error_contribution\n";
    double mass = 0.0;
    double entropy = 0.0;
    double guess = 0.0;
    char buffer[64];
    auto num = [&](double v) {
      std::snprintf(buffer, sizeof buffer, "%.17g", v);
      return std::string(buffer);
    };
    for (const auto& r : rows) {
      if (!(r.probability > kNegligibleProbability)) continue;
      const Vec post = r.posterior();
      double contribution = 0.0;
      for (Index z = 0; z < r.joint.size(); ++z) {
        if (r.joint(z) > 0.0) contribution -= r.joint(z) * std::log2(post(z));
      }
      const double miss = r.probability - r.joint(map_estimate(r.joint));
      mass += r.probability;
      entropy += contribution;
      guess += miss;
      out << problem.observation.format(r.y) << "," << num(r.probability);
      for (Index z = 0; z < post.size(); ++z) out << "," << num(post(z));
      out << "," << num(contribution) << "," << num(miss) << "\n";
    }
    out << "total," << num(mass);
    for (Index z = 0; z < problem.secret.num_labels(); ++z) out << ",";
    out << "," << num(entropy) << "," << num(guess) << "\n";
    return ExitCode::success;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return ExitCode::input_error;
  }
}

}  // namespace opaque
