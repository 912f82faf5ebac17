#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "opaque/automata.hpp"
#include "opaque/memory.hpp"
#include "opaque/mdp.hpp"
#include "opaque/observation.hpp"
#include "opaque/opacity.hpp"

namespace opaque {

/// Three-state example: q0 stays under a, moves to q1 or q2 (0.5 each) under b;
/// q1 and q2 are absorbing. q0 always emits N, q1 emits R or N, q2 emits B or N
/// (0.5 each). Entering q1 or q2 pays 1 once (gamma = 1).
struct FiniteMemoryExample {
  Mdp mdp;
  ObservationModel observation;
  SecretClassifier secret;  // W = {q1}
  int horizon = 2;

  OpacityProblem problem() const { return {mdp, observation, secret, horizon}; }
};

FiniteMemoryExample example_finite_memory();

/// Markov policy on the example with pi(a|q0) = alpha; other states uniform.
SoftmaxPolicy example_markov_policy(double alpha);

/// The example lifted to a saturating three-step time counter, with the
/// Markov policy on the augmentation that plays a at (q0, m0) and b at
/// (q0, m1) (uniform elsewhere).
struct FiniteMemoryRealization {
  AugmentedMdp augmented;
  OpacityProblem problem;
  SoftmaxPolicy policy;
};

FiniteMemoryRealization example_finite_memory_policy();

/// Closed-form H(Z_T | Y) of the example under the Markov policy alpha (bits).
double example_markov_entropy(double alpha);

struct GridCell {
  int row = 0;
  int col = 0;
  bool operator==(const GridCell& o) const { return row == o.row && col == o.col; }
};

struct GridSensor {
  std::string symbol;
  std::vector<GridCell> cells;
};

struct GridWorldConfig {
  int width = 6;
  int height = 6;
  std::vector<GridCell> walls;
  std::vector<GridCell> danger;
  std::vector<GridSensor> sensors;
  double detection_probability = 0.7;
  std::string null_symbol = "N0";
  std::vector<GridCell> goals;
  std::vector<GridCell> secrets;
  double goal_reward = 1.0;
  double slip = 0.1;  // per adjacent direction
  double discount = 1.0;
  std::vector<GridCell> initial_last_state;
  std::vector<GridCell> initial_initial_state;

  /// Throws ModelError for out-of-range cells, probabilities or overlaps with walls.
  void validate() const;
};

/// 6 x 6 layout in the spirit of the paper's grid figure. The exact geometry
/// there is not recoverable; this layout is approximate.
GridWorldConfig default_gridworld_config();

struct GridWorld {
  Mdp mdp;  // initial distribution: uniform over initial_last_state
  ObservationModel observation;
  SecretClassifier last_state_secret;
  std::vector<GridCell> cells;  // state index -> cell
  Vec initial_state_prior;      // uniform over initial_initial_state

  Index state_of(const GridCell& cell) const;
  OpacityProblem last_state_problem(int horizon) const;
  /// Uses initial_state_prior as the initial distribution and S_0 as the secret.
  OpacityProblem initial_state_problem(int horizon) const;
};

/// Actions N, S, E, W, stay. Moves succeed with probability 1 - 2 * slip and
/// veer to each perpendicular direction with probability slip; blocked moves
/// stay put; danger cells are absorbing; stay is deterministic.
GridWorld gridworld(const GridWorldConfig& config);

struct GraphExample {
  LabeledMdp lmdp;
  ObservationModel observation;
  Dfa dfa;
};

/// Seven-state graph with goals 2 (reward 1) and 4 (reward 0.1), secrets h1, h2,
/// and the four-state DFA tracking "secret then goal" versus "goal".
GraphExample graph_example(double discount = 1.0);

/// The language-opacity problem on the product of the graph and its DFA.
struct LanguageProblem {
  ProductMdp product;
  OpacityProblem problem;
};

LanguageProblem language_problem(const GraphExample& example, int horizon);

/// Random dense instance for testing: transitions, emissions and mu0 drawn
/// from (seed), some entries zeroed so that impossible sequences occur.
/// The secret is membership of state 0 at the horizon (or S_0 if `initial_state`).
OpacityProblem random_problem(Index num_states, Index num_actions, Index num_observations,
                              int horizon, std::uint64_t seed, bool initial_state = false);

}  // namespace opaque
