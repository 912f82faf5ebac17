#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "opaque/mdp.hpp"
#include "opaque/observation.hpp"
#include "opaque/obsop.hpp"
#include "opaque/sampling.hpp"

namespace opaque {

/// Everything the observer knows: plant, sensor, secret and horizon.
struct OpacityProblem {
  Mdp mdp;
  ObservationModel observation;
  SecretClassifier secret;
  int horizon = 0;

  void validate() const;
};

enum class EstimationMode { exact, sampled };

const char* to_string(EstimationMode mode);

/// Conditional entropy H(Z | Y) in bits with optional derivatives.
struct EntropyReport {
  double entropy = 0.0;
  std::optional<Vec> gradient;
  std::optional<Mat> hessian;
  EstimationMode mode = EstimationMode::exact;
  /// Exact: sequences with positive probability. Sampled: batch size.
  std::size_t sequences = 0;
  /// Exact: total probability of the enumerated sequences (should be 1).
  double probability_mass = 0.0;
  /// Sampled: standard error of the entropy estimate; 0 in exact mode.
  double standard_error = 0.0;
  std::uint64_t seed = 0;
};

/// Throws CapExceeded if |O|^(T+1) exceeds `cap`.
void check_enumeration_cap(Index num_observations, int horizon, double cap);

/// One observation sequence with P(y) and the joint P(Z = z, y) over secret labels.
struct SequencePosterior {
  ObservationSequence y;
  double probability = 0.0;
  Vec joint;

  Vec posterior() const { return joint / probability; }
};

/// All sequences of length T+1 with P(y) > 1e-300, in lexicographic order.
std::vector<ObservationSequence> enumerate_sequences(const ObservableOperators<double>& ops,
                                                     const Vec& mu0, int horizon,
                                                     double cap = kDefaultEnumerationCap);

/// P(Z = ., y) for one sequence: terminal labels use alpha_T, the initial-state
/// secret uses Bayes' rule with the prior mu0 and P(y | s0).
Vec secret_joint(const OpacityProblem& problem, const ObservableOperators<double>& ops,
                 const ObservationSequence& y);

std::vector<SequencePosterior> enumerate_posteriors(const OpacityProblem& problem,
                                                    const SoftmaxPolicy& policy,
                                                    double cap = kDefaultEnumerationCap);

/// -sum_y sum_z P(z, y) log2 P(z | y) by exhaustive enumeration.
EntropyReport exact_conditional_entropy(const OpacityProblem& problem, const SoftmaxPolicy& policy,
                                        double cap = kDefaultEnumerationCap);

/// Entropy and exact gradient by enumeration.
EntropyReport exact_entropy_gradient(const OpacityProblem& problem, const SoftmaxPolicy& policy,
                                     double cap = kDefaultEnumerationCap);

/// Entropy, gradient and Hessian by enumeration with second-order messages.
EntropyReport entropy_hessian(const OpacityProblem& problem, const SoftmaxPolicy& policy,
                              double cap = kDefaultEnumerationCap);

/// Monte-Carlo estimates from `samples` observation sequences of the true process:
///   H ~ -(1/M) sum_m sum_z p_z log2 p_z,
///   grad H ~ -(1/M) sum_m sum_z [ grad p_z log2 p_z + p_z log2 p_z grad ln P(y_m) + grad p_z / ln 2 ]
/// with p_z = P(z | y_m).
EntropyReport sampled_entropy_and_gradient(const OpacityProblem& problem,
                                           const SoftmaxPolicy& policy, std::size_t samples,
                                           std::uint64_t seed);

/// Same estimator over an existing batch (which must carry observations).
EntropyReport sampled_entropy_and_gradient(const OpacityProblem& problem,
                                           const SoftmaxPolicy& policy,
                                           const TrajectoryBatch& batch);

}  // namespace opaque
