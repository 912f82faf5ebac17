#pragma once

#include <cstdint>
#include <vector>

#include "opaque/mdp.hpp"
#include "opaque/opacity.hpp"

namespace opaque {

/// Index of the largest posterior entry; ties go to the smallest index.
Index map_estimate(const Vec& posterior);

struct GuessErrorReport {
  /// Probability that the MAP guess of the secret is wrong.
  double error = 0.0;
  EstimationMode mode = EstimationMode::exact;
  std::size_t sequences = 0;
  double standard_error = 0.0;
  /// Exact mode: one entry per sequence with P(y) and 1 - max_z P(z | y).
  struct Row {
    ObservationSequence y;
    double probability = 0.0;
    double miss = 0.0;
  };
  std::vector<Row> breakdown;
};

/// P_E = sum_y P(y) (1 - max_z P(z | y)) by enumeration.
GuessErrorReport guess_error_exact(const OpacityProblem& problem, const SoftmaxPolicy& policy,
                                   double cap = kDefaultEnumerationCap);

/// Average of 1 - max_z P(z | y) over sampled sequences.
GuessErrorReport guess_error_sampled(const OpacityProblem& problem, const SoftmaxPolicy& policy,
                                     std::size_t samples, std::uint64_t seed);

GuessErrorReport guess_error(const OpacityProblem& problem, const SoftmaxPolicy& policy,
                             EstimationMode mode, std::size_t samples = 10000,
                             std::uint64_t seed = 0, double cap = kDefaultEnumerationCap);

struct BaselineConfig {
  double tau = 1.0;
  int horizon = 0;
  int iterations = 1000;
  /// Step k uses learning_rate * k^-xi / (1 + tau).
  double learning_rate = 1.0;
  double xi = 0.6;
  std::size_t samples = 1000;
  std::uint64_t seed = 0;
  double theta_min = SoftmaxPolicy::kDefaultThetaMin;
  double theta_max = SoftmaxPolicy::kDefaultThetaMax;

  void validate() const;
};

/// E[sum_{t<=T} gamma^t (R(S_t, A_t) + tau H(pi(.|S_t)))], policy entropy in bits.
double regularized_objective(const Mdp& mdp, const SoftmaxPolicy& policy, int horizon, double tau);

/// Sampled gradient of regularized_objective: REINFORCE on the entropy-augmented
/// return plus the direct derivative of the per-state entropy terms.
Vec regularized_gradient(const Mdp& mdp, const SoftmaxPolicy& policy, const TrajectoryBatch& batch,
                         double tau);

/// Gradient ascent on regularized_objective from the uniform policy.
SoftmaxPolicy entropy_regularized_solve(const Mdp& mdp, const BaselineConfig& config);

}  // namespace opaque
