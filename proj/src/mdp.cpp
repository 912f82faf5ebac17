#include "opaque/mdp.hpp"

#include <algorithm>
#include <cmath>

namespace opaque {

namespace {

void check_distribution(const Vec& p, const std::string& what) {
  if (!p.allFinite() || (p.array() < 0.0).any()) {
    throw ModelError(what + " has negative or non-finite entries");
  }
  if (std::abs(p.sum() - 1.0) > kStochasticTolerance) {
    throw ModelError(what + " does not sum to one");
  }
}

// Per-state expected immediate reward under the policy.
Vec expected_reward(const Mdp& mdp, const Mat& pi) {
  return (pi.array() * mdp.reward.array()).rowwise().sum().matrix();
}

// Q_t(s, a) = R(s, a) + gamma * sum_s' P(s'|s, a) V(s').
Mat action_values(const Mdp& mdp, const Vec& next_value) {
  Mat q = mdp.reward;
  for (Index a = 0; a < mdp.num_actions(); ++a) {
    q.col(a).noalias() += mdp.discount * mdp.transition[a].transpose() * next_value;
  }
  return q;
}

}  // namespace

void Mdp::validate() const {
  const Index n = num_states();
  const Index m = num_actions();
  if (n == 0 || m == 0) throw ModelError("MDP needs at least one state and one action");
  if (static_cast<Index>(transition.size()) != m) {
    throw ModelError("expected one transition matrix per action");
  }
  for (Index a = 0; a < m; ++a) {
    const Mat& p = transition[a];
    if (p.rows() != n || p.cols() != n) throw ModelError("transition matrix has wrong shape");
    for (Index j = 0; j < n; ++j) {
      check_distribution(p.col(j),
                         "transition from '" + state_names[j] + "' under '" + action_names[a] + "'");
    }
  }
  if (initial.size() != n) throw ModelError("initial distribution has wrong size");
  check_distribution(initial, "initial distribution");
  if (reward.rows() != n || reward.cols() != m) throw ModelError("reward table has wrong shape");
  if (!reward.allFinite()) throw ModelError("reward table has non-finite entries");
  if (!(discount >= 0.0 && discount <= 1.0)) throw ModelError("discount must lie in [0, 1]");
}

Index Mdp::state_index(const std::string& name) const {
  auto it = std::find(state_names.begin(), state_names.end(), name);
  if (it == state_names.end()) throw InputError("unknown state '" + name + "'");
  return it - state_names.begin();
}

Index Mdp::action_index(const std::string& name) const {
  auto it = std::find(action_names.begin(), action_names.end(), name);
  if (it == action_names.end()) throw InputError("unknown action '" + name + "'");
  return it - action_names.begin();
}

void LabeledMdp::validate() const {
  base.validate();
  if (static_cast<Index>(labels.size()) != base.num_states()) {
    throw ModelError("labeling must cover every state");
  }
  if (atomic_props.size() > 64) throw ModelError("at most 64 atomic propositions are supported");
  const PropositionSet allowed =
      atomic_props.size() == 64 ? ~PropositionSet{0} : (PropositionSet{1} << atomic_props.size()) - 1;
  for (PropositionSet l : labels) {
    if (l & ~allowed) throw ModelError("label uses an undeclared atomic proposition");
  }
}

PropositionSet LabeledMdp::proposition_mask(const std::vector<std::string>& names) const {
  PropositionSet mask = 0;
  for (const auto& name : names) {
    auto it = std::find(atomic_props.begin(), atomic_props.end(), name);
    if (it == atomic_props.end()) throw InputError("unknown atomic proposition '" + name + "'");
    mask |= PropositionSet{1} << (it - atomic_props.begin());
  }
  return mask;
}

SoftmaxPolicy::SoftmaxPolicy(Index num_states, Index num_actions, double theta_min,
                             double theta_max)
    : SoftmaxPolicy(num_states, num_actions, Vec::Zero(num_states * num_actions), theta_min,
                    theta_max) {}

SoftmaxPolicy::SoftmaxPolicy(Index num_states, Index num_actions, Vec theta, double theta_min,
                             double theta_max)
    : num_states_(num_states),
      num_actions_(num_actions),
      theta_(std::move(theta)),
      theta_min_(theta_min),
      theta_max_(theta_max) {
  if (num_states <= 0 || num_actions <= 0) throw InputError("policy needs states and actions");
  if (theta_.size() != num_states * num_actions) throw InputError("theta has wrong dimension");
  if (!(theta_min < theta_max)) throw InputError("theta bounds are empty");
  project();
}

SoftmaxPolicy SoftmaxPolicy::uniform(const Mdp& mdp) {
  return SoftmaxPolicy(mdp.num_states(), mdp.num_actions());
}

void SoftmaxPolicy::set_theta(const Vec& theta) {
  if (theta.size() != theta_.size()) throw InputError("theta has wrong dimension");
  theta_ = theta;
  project();
}

void SoftmaxPolicy::project() { theta_ = theta_.cwiseMax(theta_min_).cwiseMin(theta_max_); }

Vec SoftmaxPolicy::action_distribution(Index s) const {
  return softmax(theta_.segment(s * num_actions_, num_actions_));
}

Mat SoftmaxPolicy::probabilities() const {
  Mat pi(num_states_, num_actions_);
  for (Index s = 0; s < num_states_; ++s) pi.row(s) = action_distribution(s).transpose();
  return pi;
}

Vec action_distribution(const SoftmaxPolicy& policy, Index s) {
  if (s < 0 || s >= policy.num_states()) throw InputError("state index out of range");
  return policy.action_distribution(s);
}

Mat induced_chain(const Mdp& mdp, const SoftmaxPolicy& policy) {
  const Mat pi = policy.probabilities();
  Mat t = Mat::Zero(mdp.num_states(), mdp.num_states());
  for (Index a = 0; a < mdp.num_actions(); ++a) {
    t.noalias() += mdp.transition[a] * pi.col(a).asDiagonal();
  }
  return t;
}

double finite_horizon_value(const Mdp& mdp, const SoftmaxPolicy& policy, int horizon) {
  if (horizon < 0) throw InputError("horizon must be nonnegative");
  const Mat pi = policy.probabilities();
  Vec v = expected_reward(mdp, pi);
  for (int t = horizon - 1; t >= 0; --t) {
    v = (pi.array() * action_values(mdp, v).array()).rowwise().sum().matrix();
  }
  return mdp.initial.dot(v);
}

Vec finite_horizon_value_gradient(const Mdp& mdp, const SoftmaxPolicy& policy, int horizon) {
  if (horizon < 0) throw InputError("horizon must be nonnegative");
  const Index n = mdp.num_states();
  const Index m = mdp.num_actions();
  const Mat pi = policy.probabilities();
  const Mat chain = induced_chain(mdp, policy);

  // Backward pass keeps Q_t for every t; forward pass accumulates
  // sum_t gamma^t d_t(s) pi(b|s) (Q_t(s,b) - V_t(s)).
  std::vector<Mat> q(horizon + 1);
  q[horizon] = mdp.reward;
  for (int t = horizon - 1; t >= 0; --t) {
    Vec v_next = (pi.array() * q[t + 1].array()).rowwise().sum().matrix();
    q[t] = action_values(mdp, v_next);
  }

  Mat grad = Mat::Zero(n, m);
  Vec d = mdp.initial;
  double weight = 1.0;
  for (int t = 0; t <= horizon; ++t) {
    Vec v = (pi.array() * q[t].array()).rowwise().sum().matrix();
    Mat advantage = q[t].colwise() - v;
    grad.array() += weight * ((pi.array() * advantage.array()).colwise() * d.array());
    d = chain * d;
    weight *= mdp.discount;
  }
  // Flatten row-major so entry s * m + a matches the policy's layout.
  Vec flat(n * m);
  for (Index s = 0; s < n; ++s) flat.segment(s * m, m) = grad.row(s).transpose();
  return flat;
}

double optimal_finite_horizon_value(const Mdp& mdp, int horizon) {
  if (horizon < 0) throw InputError("horizon must be nonnegative");
  Vec v = mdp.reward.rowwise().maxCoeff();
  for (int t = horizon - 1; t >= 0; --t) v = action_values(mdp, v).rowwise().maxCoeff();
  return mdp.initial.dot(v);
}

double discounted_policy_entropy(const Mdp& mdp, const SoftmaxPolicy& policy, int horizon) {
  if (horizon < 0) throw InputError("horizon must be nonnegative");
  const Mat pi = policy.probabilities();
  Vec h = Vec::Zero(mdp.num_states());
  for (Index s = 0; s < mdp.num_states(); ++s) {
    for (Index a = 0; a < mdp.num_actions(); ++a) {
      if (pi(s, a) > 0.0) h(s) -= pi(s, a) * std::log2(pi(s, a));
    }
  }
  const Mat chain = induced_chain(mdp, policy);
  Vec d = mdp.initial;
  double total = 0.0;
  double weight = 1.0;
  for (int t = 0; t <= horizon; ++t) {
    total += weight * d.dot(h);
    d = chain * d;
    weight *= mdp.discount;
  }
  return total;
}

}  // namespace opaque
