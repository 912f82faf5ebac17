#pragma once

#include <cstdint>
#include <vector>

#include "opaque/mdp.hpp"
#include "opaque/observation.hpp"
#include "opaque/random.hpp"

namespace opaque {

/// One rollout of horizon T: states s_0..s_T, actions a_0..a_T (the last one
/// only collects R(s_T, a_T)), observations o_0..o_T.
struct Trajectory {
  std::vector<Index> states;
  std::vector<Index> actions;
  ObservationSequence observations;
  double discounted_return = 0.0;
};

struct TrajectoryBatch {
  std::vector<Trajectory> trajectories;
  std::uint64_t seed = 0;
  int horizon = 0;

  std::size_t size() const { return trajectories.size(); }
  /// Throws InputError unless lengths agree and stored returns match the rewards.
  void validate(const Mdp& mdp) const;
  double mean_return() const;
};

/// Draws `count` trajectories. Trajectory k uses its own stream derived from
/// (seed, k), so the batch does not depend on the thread schedule.
TrajectoryBatch sample_batch(const Mdp& mdp, const SoftmaxPolicy& policy,
                             const ObservationModel* obs, int horizon, std::size_t count,
                             std::uint64_t seed);

inline TrajectoryBatch sample_batch(const Mdp& mdp, const SoftmaxPolicy& policy,
                                    const ObservationModel& obs, int horizon, std::size_t count,
                                    std::uint64_t seed) {
  return sample_batch(mdp, policy, &obs, horizon, count, seed);
}

/// Draws one trajectory; `action_probabilities` is policy.probabilities().
Trajectory sample_trajectory(const Mdp& mdp, const Mat& action_probabilities,
                             const ObservationModel* obs, int horizon, RandomStream& rng);

/// sum_t grad log pi(a_t | s_t) for one trajectory.
Vec score_function(const Trajectory& trajectory, const SoftmaxPolicy& policy);

/// (1/M) sum_k G^(k) sum_t grad log pi(a_t^(k) | s_t^(k)).
Vec reinforce_value_gradient(const TrajectoryBatch& batch, const SoftmaxPolicy& policy);

}  // namespace opaque
