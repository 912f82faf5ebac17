#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "opaque/mdp.hpp"
#include "opaque/opacity.hpp"

namespace opaque {

struct PrimalDualConfig {
  double zeta = -std::numeric_limits<double>::infinity();
  int iterations = 1000;
  double xi = 0.6;
  /// Multipliers on the schedules: eta_k = eta_scale * k^-xi, kappa_k = kappa_scale / k.
  double eta_scale = 1.0;
  double kappa_scale = 1.0;
  double theta_min = SoftmaxPolicy::kDefaultThetaMin;
  double theta_max = SoftmaxPolicy::kDefaultThetaMax;
  double lambda_max = 1e4;
  double lambda_init = 0.0;
  std::size_t samples = 1000;
  std::uint64_t seed = 0;
  EstimationMode mode = EstimationMode::sampled;
  double enumeration_cap = kDefaultEnumerationCap;
  /// Fill the seconds column of the log; off by default so logs are reproducible byte for byte.
  bool record_time = false;

  /// Throws InputError on an invalid configuration.
  void validate() const;
};

struct StepSizes {
  double eta = 0.0;
  double kappa = 0.0;
};

/// eta_k = k^-xi, kappa_k = 1/k. Requires k >= 1 and xi in (0.5, 1).
StepSizes schedule(long k, double xi);

struct PrimalDualIterate {
  Vec theta;
  double lambda = 0.0;
};

/// theta' = clip(theta + eta_k (grad_H + lambda grad_V)),
/// lambda' = clip(lambda - kappa_k (V - zeta), [0, lambda_max]).
/// Throws NumericalError on non-finite input.
PrimalDualIterate primal_dual_step(const Vec& theta, double lambda, const Vec& grad_entropy,
                                   const Vec& grad_value, double value,
                                   const PrimalDualConfig& config, long k);

struct IterateRecord {
  long iter = 0;
  double entropy = 0.0;
  double value = 0.0;
  double lambda = 0.0;
  double grad_norm_entropy = 0.0;
  double grad_norm_value = 0.0;
  double seconds = 0.0;
};

struct IterateLog {
  std::vector<IterateRecord> records;
  Vec initial_theta;
  Vec final_theta;
  double final_lambda = 0.0;
  bool infeasible = false;
  std::string diagnostic;
  double wall_seconds = 0.0;

  /// Columns iter,entropy,value,lambda,grad_norm_H,grad_norm_V,seconds.
  void write_csv(std::ostream& out) const;
};

/// Initial parameters: i.i.d. standard normal from the master seed, clipped to the box.
Vec initial_theta(Index size, std::uint64_t seed, const PrimalDualConfig& config);

/// Runs the primal-dual loop for `config.iterations` steps. Each iteration
/// estimates H, grad H, V and grad V at the current iterate (one shared batch
/// in sampled mode, seeded from (seed, k)), logs them and takes one step.
IterateLog run_primal_dual(const OpacityProblem& problem, const PrimalDualConfig& config,
                           std::optional<Vec> theta0 = std::nullopt);

/// The infeasibility heuristic on a finished log: over the last 10% of
/// iterations every value estimate is below zeta and lambda sits at lambda_max.
bool looks_infeasible(const std::vector<IterateRecord>& records, const PrimalDualConfig& config);

}  // namespace opaque
