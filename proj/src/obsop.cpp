#include "opaque/obsop.hpp"

namespace opaque {

ObservableOperators<double> build_operators(const Mdp& mdp, const SoftmaxPolicy& policy,
                                            const ObservationModel& obs, int order) {
  if (policy.num_states() != mdp.num_states() || policy.num_actions() != mdp.num_actions()) {
    throw InputError("policy dimensions differ from the MDP");
  }
  if (obs.num_states() != mdp.num_states()) {
    throw InputError("observation model covers " + std::to_string(obs.num_states()) +
                     " states, MDP has " + std::to_string(mdp.num_states()));
  }
  return ObservableOperators<double>(mdp.transition, policy.probabilities(), obs.emission, order);
}

ObservableOperators<double> build_operators(const Mat& chain, const ObservationModel& obs) {
  return ObservableOperators<double>(chain, obs.emission);
}

}  // namespace opaque
