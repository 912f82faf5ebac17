#include "opaque/envlib.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "opaque/random.hpp"

namespace opaque {

namespace {

double plogp(double p) { return p > 0.0 ? p * std::log2(p) : 0.0; }

}  // namespace

FiniteMemoryExample example_finite_memory() {
  FiniteMemoryExample ex;
  Mdp& mdp = ex.mdp;
  mdp.state_names = {"q0", "q1", "q2"};
  mdp.action_names = {"a", "b"};
  mdp.transition.assign(2, Mat::Zero(3, 3));
  mdp.transition[0](0, 0) = 1.0;
  mdp.transition[1](1, 0) = 0.5;
  mdp.transition[1](2, 0) = 0.5;
  for (Index a = 0; a < 2; ++a) {
    mdp.transition[a](1, 1) = 1.0;
    mdp.transition[a](2, 2) = 1.0;
  }
  mdp.initial = Vec::Unit(3, 0);
  // q1 and q2 are absorbing and only reachable from q0 under b, so paying on
  // (q0, b) pays exactly once on entry.
  mdp.reward = Mat::Zero(3, 2);
  mdp.reward(0, 1) = 1.0;
  mdp.discount = 1.0;

  ex.observation.observation_names = {"N", "R", "B"};
  ex.observation.emission.resize(3, 3);
  ex.observation.emission << 1.0, 0.0, 0.0,
                             0.5, 0.5, 0.0,
                             0.5, 0.0, 0.5;
  ex.secret = terminal_membership(3, {1});
  ex.horizon = 2;
  return ex;
}

SoftmaxPolicy example_markov_policy(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InputError("alpha must lie in [0, 1]");
  SoftmaxPolicy policy(3, 2);
  Vec theta = policy.theta();
  theta(0) = alpha > 0.0 ? std::log(alpha) : -std::numeric_limits<double>::infinity();
  theta(1) = alpha < 1.0 ? std::log1p(-alpha) : -std::numeric_limits<double>::infinity();
  policy.set_theta(theta);
  return policy;
}

FiniteMemoryRealization example_finite_memory_policy() {
  const FiniteMemoryExample ex = example_finite_memory();
  const MemoryTransducer counter = MemoryTransducer::time_counter(3, 3, 2);
  AugmentedMdp aug = augment_with_memory(ex.mdp, counter);
  SoftmaxPolicy policy(aug.mdp.num_states(), 2);
  const double hi = policy.theta_max();
  const double lo = policy.theta_min();
  policy.logit(aug.index(0, 0), 0) = hi;
  policy.logit(aug.index(0, 0), 1) = lo;
  policy.logit(aug.index(0, 1), 0) = lo;
  policy.logit(aug.index(0, 1), 1) = hi;
  OpacityProblem problem{aug.mdp, aug.lift(ex.observation), aug.lift(ex.secret), ex.horizon};
  return {std::move(aug), std::move(problem), std::move(policy)};
}

double example_markov_entropy(double alpha) {
  const double a2 = alpha * alpha;
  const double secret = -0.25 * a2 + 0.125 * alpha + 0.125;
  const double other = 0.75 * a2 + 0.125 * alpha + 0.125;
  const double total = 0.5 * a2 + 0.25 * alpha + 0.25;
  return -(plogp(secret) + plogp(other) - plogp(total));
}

void GridWorldConfig::validate() const {
  if (width <= 0 || height <= 0) throw ModelError("grid needs positive width and height");
  auto inside = [&](const GridCell& c) {
    return c.row >= 0 && c.row < height && c.col >= 0 && c.col < width;
  };
  auto is_wall = [&](const GridCell& c) {
    return std::find(walls.begin(), walls.end(), c) != walls.end();
  };
  auto check = [&](const std::vector<GridCell>& cells, const char* what, bool allow_wall) {
    for (const auto& c : cells) {
      if (!inside(c)) {
        throw ModelError(std::string(what) + " cell (" + std::to_string(c.row) + "," +
                         std::to_string(c.col) + ") is outside the grid");
      }
      if (!allow_wall && is_wall(c)) {
        throw ModelError(std::string(what) + " cell (" + std::to_string(c.row) + "," +
                         std::to_string(c.col) + ") is a wall");
      }
    }
  };
  check(walls, "wall", true);
  check(danger, "danger", false);
  check(goals, "goal", false);
  check(secrets, "secret", false);
  check(initial_last_state, "initial", false);
  check(initial_initial_state, "initial", false);
  for (const auto& s : sensors) {
    check(s.cells, "sensor", true);
    if (s.symbol.empty() || s.symbol == null_symbol) throw ModelError("sensor symbol is invalid");
  }
  if (!(detection_probability >= 0.0 && detection_probability <= 1.0)) {
    throw ModelError("detection probability must lie in [0, 1]");
  }
  if (!(slip >= 0.0 && slip <= 0.5)) throw ModelError("slip must lie in [0, 0.5]");
  if (!(discount >= 0.0 && discount <= 1.0)) throw ModelError("discount must lie in [0, 1]");
  if (initial_last_state.empty() || initial_initial_state.empty()) {
    throw ModelError("initial cell sets must be nonempty");
  }
}

GridWorldConfig default_gridworld_config() {
  GridWorldConfig c;
  c.width = 6;
  c.height = 6;
  c.walls = {{2, 2}, {3, 2}};
  c.danger = {{1, 4}, {4, 1}};
  c.sensors = {
      {"A", {{0, 2}, {0, 3}, {1, 2}, {1, 3}}},
      {"B", {{2, 4}, {2, 5}, {3, 5}}},
      {"C", {{4, 2}, {5, 2}}},
      {"D", {{2, 0}, {3, 0}, {2, 1}}},
      {"E", {{4, 4}, {5, 4}, {4, 5}}},
  };
  c.goals = {{5, 3}, {3, 4}};
  c.secrets = {{1, 1}, {4, 3}};
  c.discount = 0.9;
  for (int r = 0; r < c.height; ++r) c.initial_last_state.push_back({r, 0});
  c.initial_initial_state = {{0, 0}, {0, 5}, {5, 5}};
  return c;
}

Index GridWorld::state_of(const GridCell& cell) const {
  auto it = std::find(cells.begin(), cells.end(), cell);
  if (it == cells.end()) throw InputError("cell is not a state of the grid");
  return it - cells.begin();
}

OpacityProblem GridWorld::last_state_problem(int horizon) const {
  return {mdp, observation, last_state_secret, horizon};
}

OpacityProblem GridWorld::initial_state_problem(int horizon) const {
  OpacityProblem p{mdp, observation, initial_state_secret(mdp.state_names), horizon};
  p.mdp.initial = initial_state_prior;
  return p;
}

GridWorld gridworld(const GridWorldConfig& config) {
  config.validate();
  auto contains = [](const std::vector<GridCell>& v, const GridCell& c) {
    return std::find(v.begin(), v.end(), c) != v.end();
  };
  GridWorld grid;
  for (int r = 0; r < config.height; ++r) {
    for (int col = 0; col < config.width; ++col) {
      if (!contains(config.walls, {r, col})) grid.cells.push_back({r, col});
    }
  }
  const Index n = static_cast<Index>(grid.cells.size());
  Mdp& mdp = grid.mdp;
  for (const auto& c : grid.cells) {
    mdp.state_names.push_back("(" + std::to_string(c.row) + "," + std::to_string(c.col) + ")");
  }
  mdp.action_names = {"N", "S", "E", "W", "stay"};
  // Row offsets for N, S, E, W; perpendicular pairs share an axis.
  const int dr[4] = {-1, 1, 0, 0};
  const int dc[4] = {0, 0, 1, -1};
  const int perpendicular[4][2] = {{2, 3}, {2, 3}, {0, 1}, {0, 1}};
  auto move = [&](Index s, int dir) -> Index {
    const GridCell next{grid.cells[s].row + dr[dir], grid.cells[s].col + dc[dir]};
    if (next.row < 0 || next.row >= config.height || next.col < 0 || next.col >= config.width ||
        contains(config.walls, next)) {
      return s;
    }
    return grid.state_of(next);
  };
  mdp.transition.assign(5, Mat::Zero(n, n));
  for (Index s = 0; s < n; ++s) {
    if (contains(config.danger, grid.cells[s])) {
      for (auto& p : mdp.transition) p(s, s) = 1.0;
      continue;
    }
    for (int dir = 0; dir < 4; ++dir) {
      mdp.transition[dir](move(s, dir), s) += 1.0 - 2.0 * config.slip;
      for (int side : perpendicular[dir]) mdp.transition[dir](move(s, side), s) += config.slip;
    }
    mdp.transition[4](s, s) = 1.0;
  }
  mdp.reward = Mat::Zero(n, 5);
  for (const auto& g : config.goals) mdp.reward.row(grid.state_of(g)).setConstant(config.goal_reward);
  mdp.discount = config.discount;
  mdp.initial = Vec::Zero(n);
  for (const auto& c : config.initial_last_state) mdp.initial(grid.state_of(c)) += 1.0;
  mdp.initial /= mdp.initial.sum();
  grid.initial_state_prior = Vec::Zero(n);
  for (const auto& c : config.initial_initial_state) grid.initial_state_prior(grid.state_of(c)) += 1.0;
  grid.initial_state_prior /= grid.initial_state_prior.sum();

  ObservationModel& obs = grid.observation;
  obs.observation_names.push_back(config.null_symbol);
  for (const auto& sensor : config.sensors) obs.observation_names.push_back(sensor.symbol);
  obs.emission = Mat::Zero(n, obs.num_observations());
  for (Index s = 0; s < n; ++s) {
    Index covering = -1;
    for (std::size_t k = 0; k < config.sensors.size(); ++k) {
      if (contains(config.sensors[k].cells, grid.cells[s])) {
        if (covering >= 0) throw ModelError("sensor ranges overlap");
        covering = static_cast<Index>(k) + 1;
      }
    }
    if (covering < 0) {
      obs.emission(s, 0) = 1.0;
    } else {
      obs.emission(s, covering) = config.detection_probability;
      obs.emission(s, 0) = 1.0 - config.detection_probability;
    }
  }
  std::vector<Index> secret_states;
  for (const auto& c : config.secrets) secret_states.push_back(grid.state_of(c));
  grid.last_state_secret = terminal_membership(n, secret_states);
  mdp.validate();
  obs.validate();
  return grid;
}

GraphExample graph_example(double discount) {
  GraphExample ex;
  LabeledMdp& lmdp = ex.lmdp;
  Mdp& mdp = lmdp.base;
  mdp.state_names = {"0", "1", "2", "3", "4", "h1", "h2"};
  mdp.action_names = {"a1", "a2"};
  const Index n = 7;
  auto id = [&](const char* name) { return mdp.state_index(name); };
  mdp.transition.assign(2, Mat::Zero(n, n));
  auto edge = [&](const char* from, Index a, const char* to, double p) {
    mdp.transition[a](id(to), id(from)) += p;
  };
  edge("0", 0, "h1", 1.0);
  edge("0", 1, "1", 1.0);
  edge("h1", 0, "2", 1.0);
  edge("h1", 1, "2", 1.0);
  edge("1", 0, "3", 0.5);
  edge("1", 0, "4", 0.5);
  edge("1", 1, "h2", 1.0);
  edge("2", 0, "3", 1.0);
  edge("2", 1, "h1", 1.0);
  edge("3", 0, "1", 0.5);
  edge("3", 0, "h2", 0.5);
  edge("3", 1, "2", 1.0);
  for (Index a = 0; a < 2; ++a) {
    edge("h2", a, "3", 0.5);
    edge("h2", a, "4", 0.5);
  }
  edge("4", 0, "1", 0.5);
  edge("4", 0, "h2", 0.5);
  edge("4", 1, "3", 1.0);
  mdp.initial = Vec::Unit(n, id("0"));
  mdp.reward = Mat::Zero(n, 2);
  mdp.reward.row(id("2")).setConstant(1.0);
  mdp.reward.row(id("4")).setConstant(0.1);
  mdp.discount = discount;

  lmdp.atomic_props = {"p_s", "p_g"};
  const PropositionSet secret = lmdp.proposition_mask({"p_s"});
  const PropositionSet goal = lmdp.proposition_mask({"p_g"});
  lmdp.labels.assign(n, 0);
  lmdp.labels[id("h1")] = secret;
  lmdp.labels[id("h2")] = secret;
  lmdp.labels[id("2")] = goal;
  lmdp.labels[id("4")] = goal;

  ObservationModel& obs = ex.observation;
  obs.observation_names = {"o0", "oh1", "o2", "r", "b", "null"};
  obs.emission = Mat::Zero(n, 6);
  obs.emission(id("0"), 0) = 1.0;
  obs.emission(id("h1"), 1) = 1.0;
  obs.emission(id("2"), 2) = 1.0;
  for (const char* s : {"1", "4"}) {
    obs.emission(id(s), 3) = 0.5;
    obs.emission(id(s), 5) = 0.5;
  }
  for (const char* s : {"3", "h2"}) {
    obs.emission(id(s), 4) = 0.5;
    obs.emission(id(s), 5) = 0.5;
  }

  Dfa& dfa = ex.dfa;
  dfa.state_names = {"q0", "q1", "q2", "q3"};
  dfa.atomic_props = {"p_s", "p_g"};
  const PropositionSet none = 0;
  const PropositionSet s_only = 1;
  const PropositionSet g_only = 2;
  const PropositionSet both = 3;
  dfa.alphabet = {none, s_only, g_only, both};
  // Rows: q0, q1, q2, q3; columns follow the alphabet order above. A label
  // carrying both propositions never occurs in the graph; it completes the
  // transition function as "secret and goal at once".
  dfa.delta = {0, 2, 1, 3,
               1, 1, 1, 1,
               2, 2, 3, 3,
               3, 3, 3, 3};
  dfa.initial = 0;
  dfa.accepting = {false, true, false, true};
  lmdp.validate();
  obs.validate();
  dfa.validate();
  return ex;
}

LanguageProblem language_problem(const GraphExample& example, int horizon) {
  ProductMdp product = build_product(example.lmdp, example.dfa);
  OpacityProblem problem{product.mdp, product.lift(example.observation),
                         automaton_classifier(product, example.dfa, horizon), horizon};
  return {std::move(product), std::move(problem)};
}

OpacityProblem random_problem(Index num_states, Index num_actions, Index num_observations,
                              int horizon, std::uint64_t seed, bool initial_state) {
  RandomStream rng(seed);
  auto draw_distribution = [&](Index size, double sparsity) {
    Vec p(size);
    for (Index i = 0; i < size; ++i) p(i) = rng.uniform() < sparsity ? 0.0 : rng.uniform() + 0.05;
    if (p.sum() == 0.0) p(static_cast<Index>(rng.uniform() * size)) = 1.0;
    return Vec(p / p.sum());
  };
  OpacityProblem problem;
  Mdp& mdp = problem.mdp;
  for (Index s = 0; s < num_states; ++s) mdp.state_names.push_back("s" + std::to_string(s));
  for (Index a = 0; a < num_actions; ++a) mdp.action_names.push_back("a" + std::to_string(a));
  mdp.transition.assign(num_actions, Mat::Zero(num_states, num_states));
  for (Index a = 0; a < num_actions; ++a) {
    for (Index s = 0; s < num_states; ++s) mdp.transition[a].col(s) = draw_distribution(num_states, 0.3);
  }
  mdp.initial = draw_distribution(num_states, 0.2);
  mdp.reward = Mat::Zero(num_states, num_actions);
  for (Index s = 0; s < num_states; ++s) {
    for (Index a = 0; a < num_actions; ++a) mdp.reward(s, a) = rng.uniform();
  }
  mdp.discount = 0.9;
  ObservationModel& obs = problem.observation;
  for (Index o = 0; o < num_observations; ++o) obs.observation_names.push_back("o" + std::to_string(o));
  obs.emission.resize(num_states, num_observations);
  for (Index s = 0; s < num_states; ++s) obs.emission.row(s) = draw_distribution(num_observations, 0.3).transpose();
  problem.secret = initial_state ? initial_state_secret(mdp.state_names) : terminal_membership(num_states, {0});
  problem.horizon = horizon;
  problem.validate();
  return problem;
}

}  // namespace opaque
