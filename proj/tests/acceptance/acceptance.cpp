// Acceptance checks. Run with criterion numbers as arguments (default: all);
// prints one PASS/FAIL line per criterion and exits nonzero on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "opaque/cli.hpp"
#include "opaque/envlib.hpp"
#include "opaque/evaluation.hpp"
#include "opaque/optimizer.hpp"
#include "oracles.hpp"

using namespace opaque;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* format, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, a, b, c, d);
  return buf;
}

std::string config_path(const std::string& name) { return std::string(OPAQUE_CONFIG_DIR) + "/" + name; }

// 1. Finite-memory example: exact numbers.
Outcome example_regression() {
  const auto start = std::chrono::steady_clock::now();
  const auto r = example_finite_memory_policy();
  const double h = exact_conditional_entropy(r.problem, r.policy).entropy;
  std::map<std::string, std::pair<double, double>> rows;
  for (const auto& row : enumerate_posteriors(r.problem, r.policy)) {
    rows[r.problem.observation.format(row.y)] = {row.probability, row.posterior()(1)};
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  double worst = std::abs(h - 0.5);
  const std::map<std::string, std::pair<double, double>> expected = {
      {"NNN", {0.5, 0.5}}, {"NNR", {0.25, 1.0}}, {"NNB", {0.25, 0.0}}};
  bool shape = rows.size() == expected.size();
  for (const auto& [y, pq] : expected) {
    auto it = rows.find(y);
    if (it == rows.end()) {
      shape = false;
      continue;
    }
    worst = std::max({worst, std::abs(it->second.first - pq.first), std::abs(it->second.second - pq.second)});
  }
  return {shape && worst <= 1e-12 && seconds < 1.0,
          fmt("H = %.15f, worst deviation %.2e, %.3f s", h, worst, seconds)};
}

// 2. Markov family against the closed form, and the ordering against 0.5.
Outcome markov_sweep() {
  const auto ex = example_finite_memory();
  const OpacityProblem problem = ex.problem();
  auto closed = [](double a) {
    auto f = [](double p) { return p > 0.0 ? p * std::log2(p) : 0.0; };
    return -(f(-0.25 * a * a + 0.125 * a + 0.125) + f(0.75 * a * a + 0.125 * a + 0.125) -
             f(0.5 * a * a + 0.25 * a + 0.25));
  };
  double worst = 0.0;
  double best = 0.0;
  for (int i = 0; i <= 100; ++i) {
    const double a = i / 100.0;
    const double h = exact_conditional_entropy(problem, example_markov_policy(a)).entropy;
    worst = std::max(worst, std::abs(h - closed(a)));
    best = std::max(best, h);
  }
  return {worst <= 1e-10 && best < 0.5, fmt("worst |H - closed form| %.2e, max over alpha %.6f < 0.5", worst, best)};
}

// 3 and 5. Operator quantities against brute-force enumeration on 50 instances.
Outcome oracle_equivalence(bool forward_backward_only) {
  double worst = 0.0;
  double worst_fb = 0.0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const auto inst = oracle::random_instance(seed);
    const OpacityProblem& pr = inst.problem;
    const auto ops = build_operators(pr.mdp, inst.policy, pr.observation, 0);
    const auto joint = oracle::brute_force_joint(pr, inst.policy.probabilities());
    for (Index code = 0; code < joint.secret.rows(); ++code) {
      const auto y = oracle::decode(code, joint.num_observations, joint.length);
      const double py = observation_probability(ops, pr.mdp.initial, y);
      worst = std::max(worst, std::abs(py - joint.probability(code)));
      for (Index s0 = 0; s0 < pr.mdp.num_states(); ++s0) {
        worst = std::max(worst, std::abs(probability_given_initial(ops, y, s0) - joint.given_initial(code, s0)));
      }
      if (py > kNegligibleProbability) {
        const Vec post = secret_joint(pr, ops, y) / py;
        const Vec ref = joint.secret.row(code).transpose() / joint.probability(code);
        worst = std::max(worst, (post - ref).cwiseAbs().maxCoeff());
        const auto fwd = forward_messages(ops, pr.mdp.initial, y, 0);
        const auto bwd = backward_messages(ops, y, 0);
        worst_fb = std::max({worst_fb, std::abs(fwd.alpha.back().sum() - py),
                             std::abs(pr.mdp.initial.dot(bwd.beta.front()) - py)});
      }
    }
    worst = std::max(worst, std::abs(exact_conditional_entropy(pr, inst.policy).entropy - oracle::entropy(joint)));
    worst = std::max(worst, std::abs(guess_error_exact(pr, inst.policy).error - oracle::guess_error(joint)));
  }
  if (forward_backward_only) {
    return {worst_fb <= 1e-12, fmt("worst |sum alpha_T - P(y)|, |mu0.beta_0 - P(y)| = %.2e over 50 instances", worst_fb)};
  }
  return {worst <= 1e-12, fmt("worst deviation from path enumeration %.2e over 50 instances", worst)};
}

// 4. Derivatives against central differences on 20 instances.
Outcome derivatives() {
  double g_p = 0.0, g_last = 0.0, g_init = 0.0, h_p = 0.0, h_h = 0.0, sym = 0.0;
  for (std::uint64_t seed = 101; seed <= 120; ++seed) {
    const auto inst = oracle::random_instance(seed);
    const Index n = inst.problem.mdp.num_states(), m = inst.problem.mdp.num_actions();
    const Vec theta = inst.policy.theta();
    OpacityProblem last = inst.problem;
    last.secret = terminal_membership(n, {0});
    OpacityProblem init = inst.problem;
    init.secret = initial_state_secret(init.mdp.state_names);

    const auto ops = build_operators(last.mdp, inst.policy, last.observation, 2);
    const auto seqs = enumerate_sequences(ops, last.mdp.initial, last.horizon);
    for (std::size_t i = 0; i < seqs.size(); i += std::max<std::size_t>(1, seqs.size() / 4)) {
      const auto& y = seqs[i];
      const auto msg = forward_messages(ops, last.mdp.initial, y, 2);
      const Mat fd = oracle::jacobian(
          [&](const Vec& th) {
            return oracle::scalar(observation_probability(
                build_operators(last.mdp, SoftmaxPolicy(n, m, th), last.observation, 0), last.mdp.initial, y));
          },
          theta);
      g_p = std::max(g_p, oracle::relative_error(msg.gradient().transpose(), fd));
      const Mat fd2 = oracle::jacobian(
          [&](const Vec& th) {
            const auto o = build_operators(last.mdp, SoftmaxPolicy(n, m, th), last.observation, 1);
            return Vec(forward_messages(o, last.mdp.initial, y, 1).gradient());
          },
          theta);
      const Mat hess = msg.hessian();
      h_p = std::max(h_p, oracle::relative_error(hess, fd2));
      sym = std::max(sym, (hess - hess.transpose()).cwiseAbs().maxCoeff());
    }
    for (const OpacityProblem* pr : {&last, &init}) {
      const auto report = entropy_hessian(*pr, inst.policy);
      const Mat fd = oracle::jacobian(
          [&](const Vec& th) { return oracle::scalar(exact_conditional_entropy(*pr, SoftmaxPolicy(n, m, th)).entropy); },
          theta);
      const double err = oracle::relative_error(report.gradient->transpose(), fd);
      (pr == &last ? g_last : g_init) = std::max(pr == &last ? g_last : g_init, err);
      const Mat fd2 = oracle::jacobian(
          [&](const Vec& th) { return Vec(*exact_entropy_gradient(*pr, SoftmaxPolicy(n, m, th)).gradient); }, theta);
      h_h = std::max(h_h, oracle::relative_error(*report.hessian, fd2));
      sym = std::max(sym, (*report.hessian - report.hessian->transpose()).cwiseAbs().maxCoeff());
    }
  }
  const bool pass = g_p <= 1e-5 && g_last <= 1e-5 && g_init <= 1e-5 && h_p <= 1e-4 && h_h <= 1e-4 && sym <= 1e-9;
  std::ostringstream s;
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "rel. err grad P %.1e, grad H(Z_T|Y) %.1e, grad H(S_0|Y) %.1e, hess P %.1e, hess H %.1e, asymmetry %.1e",
                g_p, g_last, g_init, h_p, h_h, sym);
  return {pass, buf};
}

struct GraphRun {
  double entropy = 0.0;
  double value = 0.0;
  double guess_error = 0.0;
  double max_logged_entropy = 0.0;
};

std::vector<GraphRun> graph_runs() {
  static std::vector<GraphRun> runs;
  if (!runs.empty()) return runs;
  const ExperimentConfig config = load_experiment_config(config_path("graph_language.json"));
  const ResolvedProblem resolved = resolve_problem(config);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    PrimalDualConfig opt = config.optimizer;
    opt.seed = seed;
    const IterateLog log = run_primal_dual(resolved.problem, opt);
    const SoftmaxPolicy policy(resolved.problem.mdp.num_states(), resolved.problem.mdp.num_actions(),
                               log.final_theta, opt.theta_min, opt.theta_max);
    GraphRun r;
    r.entropy = exact_conditional_entropy(resolved.problem, policy).entropy;
    r.value = finite_horizon_value(resolved.problem.mdp, policy, resolved.problem.horizon);
    r.guess_error = guess_error_exact(resolved.problem, policy).error;
    for (const auto& rec : log.records) r.max_logged_entropy = std::max(r.max_logged_entropy, rec.entropy);
    runs.push_back(r);
  }
  return runs;
}

// 6. Graph example, primal-dual from five seeds.
Outcome graph_end_to_end() {
  const auto runs = graph_runs();
  double h = 0.0, v = 0.0, top = 0.0;
  for (const auto& r : runs) {
    h += r.entropy / runs.size();
    v += r.value / runs.size();
    top = std::max({top, r.entropy, r.max_logged_entropy});
  }
  const double bound = std::log2(3.0);
  return {h >= 0.95 && h <= 1.30 && v >= 0.19 && top <= bound,
          fmt("mean exact H %.4f in [0.95, 1.30], mean exact V %.4f >= 0.19, largest entropy seen %.4f <= %.4f", h, v,
              top, bound)};
}

// 7. Guess error of the optimized policy against the entropy-regularized baseline.
Outcome baseline_dominance() {
  const auto runs = graph_runs();
  double pe = 0.0;
  for (const auto& r : runs) pe += r.guess_error / runs.size();
  const ExperimentConfig config = load_experiment_config(config_path("graph_baseline.json"));
  const ResolvedProblem resolved = resolve_problem(config);
  double worst = 0.0;
  for (std::size_t i = 0; i < config.taus.size(); ++i) {
    BaselineConfig bc = config.baseline;
    bc.tau = config.taus[i];
    bc.seed = stream_seed(config.seed, i);
    const SoftmaxPolicy policy = entropy_regularized_solve(resolved.problem.mdp, bc);
    worst = std::max(worst, guess_error_exact(resolved.problem, policy).error);
  }
  return {config.taus.size() == 11 && pe >= 0.30 && worst <= 0.27,
          fmt("optimized P_E %.4f >= 0.30, baseline max P_E over %.0f taus %.4f <= 0.27", pe,
              static_cast<double>(config.taus.size()), worst)};
}

// 8. Grid world: constraint met, last-state entropy raised, initial-state entropy bounded.
Outcome gridworld_properties() {
  const ExperimentConfig last_cfg = load_experiment_config(config_path("gridworld_last_state.json"));
  const ResolvedProblem last = resolve_problem(last_cfg);
  const IterateLog log = run_primal_dual(last.problem, last_cfg.optimizer);
  const Index n = last.problem.mdp.num_states(), m = last.problem.mdp.num_actions();
  const SoftmaxPolicy final_policy(n, m, log.final_theta);
  const SoftmaxPolicy start_policy(n, m, log.initial_theta);
  const std::uint64_t eval_seed = stream_seed(last_cfg.seed, 0xe7a1ULL);
  const std::size_t samples = last_cfg.evaluation_samples;
  const TrajectoryBatch batch = sample_batch(last.problem.mdp, final_policy, last.problem.observation,
                                             last.problem.horizon, samples, eval_seed);
  const double value = batch.mean_return();
  const double h_final = sampled_entropy_and_gradient(last.problem, final_policy, batch).entropy;
  const double h_start = sampled_entropy_and_gradient(last.problem, start_policy, samples, eval_seed).entropy;

  const ExperimentConfig init_cfg = load_experiment_config(config_path("gridworld_initial_state.json"));
  const ResolvedProblem init = resolve_problem(init_cfg);
  const IterateLog init_log = run_primal_dual(init.problem, init_cfg.optimizer);
  const SoftmaxPolicy init_policy(n, m, init_log.final_theta);
  const TrajectoryBatch init_batch = sample_batch(init.problem.mdp, init_policy, init.problem.observation,
                                                  init.problem.horizon, samples, eval_seed);
  const double h_init = sampled_entropy_and_gradient(init.problem, init_policy, init_batch).entropy;
  const double zeta = last_cfg.zeta;
  const bool pass = value >= zeta - 0.02 && h_final >= 0.6 && h_final > h_start - 0.05 &&
                    h_init <= std::log2(3.0) + 1e-12;
  std::string detail = fmt("last-state: V %.4f >= %.2f, H %.4f >= 0.6, initial-policy H %.4f; ", value, zeta - 0.02,
                           h_final, h_start);
  detail += fmt("initial-state: H %.4f <= log2 3, V %.4f", h_init, init_batch.mean_return());
  return {pass, detail};
}

// 9. Optimizer invariants.
Outcome optimizer_behaviour() {
  const auto ex = graph_example();
  const LanguageProblem lp = language_problem(ex, 4);
  PrimalDualConfig config;
  config.iterations = 150;
  config.samples = 300;
  config.seed = 21;
  config.zeta = 1.5;
  config.lambda_max = 5.0;
  config.kappa_scale = 20.0;
  config.theta_min = -3.0;
  config.theta_max = 3.0;
  config.eta_scale = 20.0;
  const IterateLog a = run_primal_dual(lp.problem, config);
  const IterateLog b = run_primal_dual(lp.problem, config);
  std::ostringstream ca, cb;
  a.write_csv(ca);
  b.write_csv(cb);
  const bool identical = ca.str() == cb.str() && a.final_theta == b.final_theta && a.final_lambda == b.final_lambda;
  bool lambda_ok = true;
  bool hit_cap = false;
  for (const auto& r : a.records) {
    lambda_ok = lambda_ok && r.lambda >= 0.0 && r.lambda <= config.lambda_max;
    hit_cap = hit_cap || r.lambda == config.lambda_max;
  }
  const bool theta_ok = a.final_theta.minCoeff() >= config.theta_min && a.final_theta.maxCoeff() <= config.theta_max;

  PrimalDualConfig free = config;
  free.zeta = -std::numeric_limits<double>::infinity();
  free.lambda_init = 4.0;
  const IterateLog u = run_primal_dual(lp.problem, free);
  const bool unconstrained_zero = u.final_lambda == 0.0 && u.records.back().lambda == 0.0;
  return {identical && lambda_ok && theta_ok && unconstrained_zero,
          fmt("lambda in [0, %.0f] (cap reached: %.0f), theta in box: %.0f, unconstrained final lambda %.1f, ",
              config.lambda_max, hit_cap ? 1.0 : 0.0, theta_ok ? 1.0 : 0.0, u.final_lambda) +
              (identical ? "repeat run bit-identical" : "repeat run differs")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<int, std::pair<std::string, std::function<Outcome()>>> criteria = {
      {1, {"finite-memory example regression", example_regression}},
      {2, {"Markov closed-form sweep", markov_sweep}},
      {3, {"operator quantities equal path enumeration", [] { return oracle_equivalence(false); }}},
      {4, {"derivatives match finite differences", derivatives}},
      {5, {"forward/backward consistency", [] { return oracle_equivalence(true); }}},
      {6, {"graph example end-to-end", graph_end_to_end}},
      {7, {"optimized policy beats entropy-regularized baseline", baseline_dominance}},
      {8, {"grid-world properties", gridworld_properties}},
      {9, {"optimizer invariants", optimizer_behaviour}},
  };
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
  if (selected.empty()) {
    for (const auto& [k, v] : criteria) selected.push_back(k);
  }
  bool all = true;
  for (int k : selected) {
    auto it = criteria.find(k);
    if (it == criteria.end()) {
      std::printf("unknown criterion %d\n", k);
      return 1;
    }
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = it->second.second();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("[%s] criterion %d: %s | %s | %.1f s\n", outcome.pass ? "PASS" : "FAIL", k,
                it->second.first.c_str(), outcome.detail.c_str(), seconds);
    std::fflush(stdout);
    all = all && outcome.pass;
  }
  return all ? 0 : 1;
}
