#include "opaque/sampling.hpp"

#include <cmath>

#include "opaque/parallel.hpp"

namespace opaque {

void TrajectoryBatch::validate(const Mdp& mdp) const {
  const std::size_t length = static_cast<std::size_t>(horizon) + 1;
  for (const auto& tr : trajectories) {
    if (tr.states.size() != length || tr.actions.size() != length ||
        (!tr.observations.empty() && tr.observations.size() != length)) {
      throw InputError("trajectory lengths disagree with the horizon");
    }
    double g = 0.0;
    double weight = 1.0;
    for (std::size_t t = 0; t < length; ++t) {
      g += weight * mdp.reward(tr.states[t], tr.actions[t]);
      weight *= mdp.discount;
    }
    if (std::abs(g - tr.discounted_return) > 1e-12) {
      throw InputError("stored return disagrees with the reward sequence");
    }
  }
}

double TrajectoryBatch::mean_return() const {
  if (trajectories.empty()) return 0.0;
  double total = 0.0;
  for (const auto& tr : trajectories) total += tr.discounted_return;
  return total / static_cast<double>(trajectories.size());
}

Trajectory sample_trajectory(const Mdp& mdp, const Mat& action_probabilities,
                             const ObservationModel* obs, int horizon, RandomStream& rng) {
  const std::size_t length = static_cast<std::size_t>(horizon) + 1;
  Trajectory tr;
  tr.states.resize(length);
  tr.actions.resize(length);
  if (obs) tr.observations.resize(length);
  Index s = rng.categorical(mdp.initial);
  double weight = 1.0;
  for (std::size_t t = 0; t < length; ++t) {
    tr.states[t] = s;
    if (obs) tr.observations[t] = rng.categorical(obs->emission.row(s));
    const Index a = rng.categorical(action_probabilities.row(s));
    tr.actions[t] = a;
    tr.discounted_return += weight * mdp.reward(s, a);
    weight *= mdp.discount;
    if (t + 1 < length) s = rng.categorical(mdp.transition[a].col(s));
  }
  return tr;
}

TrajectoryBatch sample_batch(const Mdp& mdp, const SoftmaxPolicy& policy,
                             const ObservationModel* obs, int horizon, std::size_t count,
                             std::uint64_t seed) {
  if (horizon < 0) throw InputError("horizon must be nonnegative");
  if (count == 0) throw InputError("batch size must be at least one");
  const Mat pi = policy.probabilities();
  TrajectoryBatch batch;
  batch.seed = seed;
  batch.horizon = horizon;
  batch.trajectories.resize(count);
  parallel_for(count, [&](std::size_t begin, std::size_t end, std::size_t) {
    for (std::size_t k = begin; k < end; ++k) {
      RandomStream rng(seed, k);
      batch.trajectories[k] = sample_trajectory(mdp, pi, obs, horizon, rng);
    }
  });
  return batch;
}

Vec score_function(const Trajectory& trajectory, const SoftmaxPolicy& policy) {
  const Index m = policy.num_actions();
  Vec score = Vec::Zero(policy.num_parameters());
  for (std::size_t t = 0; t < trajectory.actions.size(); ++t) {
    const Index s = trajectory.states[t];
    // d/dtheta_{s,b} log pi(a|s) = 1{a=b} - pi(b|s)
    score.segment(s * m, m) -= policy.action_distribution(s);
    score(policy.parameter_index(s, trajectory.actions[t])) += 1.0;
  }
  return score;
}

Vec reinforce_value_gradient(const TrajectoryBatch& batch, const SoftmaxPolicy& policy) {
  Vec grad = Vec::Zero(policy.num_parameters());
  if (batch.trajectories.empty()) return grad;
  for (const auto& tr : batch.trajectories) {
    if (tr.discounted_return != 0.0) grad += tr.discounted_return * score_function(tr, policy);
  }
  return grad / static_cast<double>(batch.trajectories.size());
}

}  // namespace opaque
