#include "opaque/optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "opaque/random.hpp"
#include "opaque/sampling.hpp"

namespace opaque {

namespace {

// Stream index reserved for the initial parameters; iteration k uses index k.
constexpr std::uint64_t kInitStream = 0xffffffffffffffffULL;

}  // namespace

void PrimalDualConfig::validate() const {
  if (!(xi > 0.5 && xi < 1.0)) throw InputError("step exponent xi must lie in (0.5, 1)");
  if (!(lambda_max > 0.0)) throw InputError("lambda_max must be positive");
  if (!(lambda_init >= 0.0 && lambda_init <= lambda_max)) {
    throw InputError("initial lambda must lie in [0, lambda_max]");
  }
  if (iterations < 0) throw InputError("iteration count must be nonnegative");
  if (!(theta_min < theta_max)) throw InputError("theta bounds are empty");
  if (!(eta_scale > 0.0) || !(kappa_scale > 0.0)) throw InputError("step scales must be positive");
  if (mode == EstimationMode::sampled && samples == 0) throw InputError("sample size must be positive");
  if (std::isnan(zeta)) throw InputError("zeta is not a number");
}

StepSizes schedule(long k, double xi) {
  if (k < 1) throw InputError("iteration index starts at 1");
  if (!(xi > 0.5 && xi < 1.0)) throw InputError("step exponent xi must lie in (0.5, 1)");
  const double kd = static_cast<double>(k);
  return {std::pow(kd, -xi), 1.0 / kd};
}

PrimalDualIterate primal_dual_step(const Vec& theta, double lambda, const Vec& grad_entropy,
                                   const Vec& grad_value, double value,
                                   const PrimalDualConfig& config, long k) {
  if (grad_entropy.size() != theta.size() || grad_value.size() != theta.size()) {
    throw InputError("gradient dimension differs from theta");
  }
  if (!grad_entropy.allFinite() || !grad_value.allFinite() || !std::isfinite(value) ||
      !std::isfinite(lambda)) {
    throw NumericalError("non-finite gradient or value at iteration " + std::to_string(k));
  }
  const StepSizes step = schedule(k, config.xi);
  const double eta = config.eta_scale * step.eta;
  const double kappa = config.kappa_scale * step.kappa;
  PrimalDualIterate next;
  next.theta = (theta + eta * (grad_entropy + lambda * grad_value))
                   .cwiseMax(config.theta_min)
                   .cwiseMin(config.theta_max);
  // With zeta = -inf the constraint never binds and lambda is pushed to zero.
  const bool unconstrained = std::isinf(config.zeta) && config.zeta < 0;
  next.lambda =
      unconstrained ? 0.0 : std::clamp(lambda - kappa * (value - config.zeta), 0.0, config.lambda_max);
  return next;
}

void IterateLog::write_csv(std::ostream& out) const {
  out << "iter,entropy,value,lambda,grad_norm_H,grad_norm_V,seconds\n";
  char line[256];
  for (const auto& r : records) {
    std::snprintf(line, sizeof line, "%ld,%.17g,%.17g,%.17g,%.17g,%.17g,%.6f\n", r.iter, r.entropy,
                  r.value, r.lambda, r.grad_norm_entropy, r.grad_norm_value, r.seconds);
    out << line;
  }
}

Vec initial_theta(Index size, std::uint64_t seed, const PrimalDualConfig& config) {
  RandomStream rng(seed, kInitStream);
  Vec theta(size);
  for (Index i = 0; i < size; ++i) theta(i) = rng.normal();
  return theta.cwiseMax(config.theta_min).cwiseMin(config.theta_max);
}

bool looks_infeasible(const std::vector<IterateRecord>& records, const PrimalDualConfig& config) {
  if (records.empty() || std::isinf(config.zeta)) return false;
  const std::size_t window = std::max<std::size_t>(1, (records.size() + 9) / 10);
  for (std::size_t i = records.size() - window; i < records.size(); ++i) {
    if (!(records[i].value < config.zeta) || records[i].lambda < config.lambda_max) return false;
  }
  return true;
}

IterateLog run_primal_dual(const OpacityProblem& problem, const PrimalDualConfig& config,
                           std::optional<Vec> theta0) {
  problem.validate();
  config.validate();
  const Mdp& mdp = problem.mdp;
  const Index d = mdp.num_states() * mdp.num_actions();
  SoftmaxPolicy policy(mdp.num_states(), mdp.num_actions(), config.theta_min, config.theta_max);
  policy.set_theta(theta0 ? *theta0 : initial_theta(d, config.seed, config));

  IterateLog log;
  log.initial_theta = policy.theta();
  log.records.reserve(config.iterations);
  double lambda = config.lambda_init;
  const auto clock_start = std::chrono::steady_clock::now();

  for (long k = 1; k <= config.iterations; ++k) {
    EntropyReport entropy;
    double value = 0.0;
    Vec grad_value;
    if (config.mode == EstimationMode::exact) {
      entropy = exact_entropy_gradient(problem, policy, config.enumeration_cap);
      value = finite_horizon_value(mdp, policy, problem.horizon);
      grad_value = finite_horizon_value_gradient(mdp, policy, problem.horizon);
    } else {
      const TrajectoryBatch batch =
          sample_batch(mdp, policy, problem.observation, problem.horizon, config.samples,
                       stream_seed(config.seed, static_cast<std::uint64_t>(k)));
      entropy = sampled_entropy_and_gradient(problem, policy, batch);
      value = batch.mean_return();
      grad_value = reinforce_value_gradient(batch, policy);
    }
    const Vec& grad_entropy = *entropy.gradient;
    IterateRecord record;
    record.iter = k;
    record.entropy = entropy.entropy;
    record.value = value;
    record.lambda = lambda;
    record.grad_norm_entropy = grad_entropy.norm();
    record.grad_norm_value = grad_value.norm();

    const PrimalDualIterate next =
        primal_dual_step(policy.theta(), lambda, grad_entropy, grad_value, value, config, k);
    policy.set_theta(next.theta);
    lambda = next.lambda;
    if (config.record_time) {
      record.seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_start).count();
    }
    log.records.push_back(record);
  }
  log.final_theta = policy.theta();
  log.final_lambda = lambda;
  log.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_start).count();
  log.infeasible = looks_infeasible(log.records, config);
  if (log.infeasible) log.diagnostic = "constraint likely infeasible";
  return log;
}

}  // namespace opaque
