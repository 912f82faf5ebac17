#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "opaque/types.hpp"

namespace opaque {

/// Finite MDP. transition[a](i, j) = P(i | j, a): each per-action matrix is
/// column-stochastic, matching the flipped convention of the induced chain.
struct Mdp {
  std::vector<std::string> state_names;
  std::vector<std::string> action_names;
  std::vector<Mat> transition;
  Vec initial;
  Mat reward;  // num_states x num_actions
  double discount = 1.0;

  Index num_states() const { return static_cast<Index>(state_names.size()); }
  Index num_actions() const { return static_cast<Index>(action_names.size()); }

  /// Throws ModelError if any invariant is violated: stochastic columns,
  /// nonnegative entries, initial distribution summing to one, discount in [0, 1].
  void validate() const;

  Index state_index(const std::string& name) const;
  Index action_index(const std::string& name) const;
};

/// Bit mask over a set of at most 64 atomic propositions.
using PropositionSet = std::uint64_t;

struct LabeledMdp {
  Mdp base;
  std::vector<std::string> atomic_props;
  std::vector<PropositionSet> labels;  // one per state

  void validate() const;
  PropositionSet proposition_mask(const std::vector<std::string>& names) const;
};

/// Numerically stable softmax (max-subtracted).
template <typename Derived>
VectorX<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  const Scalar shift = logits.maxCoeff();
  VectorX<Scalar> p = (logits.array() - shift).exp().matrix();
  return p / p.sum();
}

/// Softmax policy with one logit per (state, action). Parameters are stored
/// flat with index s * num_actions + a.
class SoftmaxPolicy {
 public:
  static constexpr double kDefaultThetaMin = -700.0;
  static constexpr double kDefaultThetaMax = 700.0;

  SoftmaxPolicy(Index num_states, Index num_actions, double theta_min = kDefaultThetaMin,
                double theta_max = kDefaultThetaMax);
  SoftmaxPolicy(Index num_states, Index num_actions, Vec theta,
                double theta_min = kDefaultThetaMin, double theta_max = kDefaultThetaMax);

  /// Uniform policy (all logits zero) sized for `mdp`.
  static SoftmaxPolicy uniform(const Mdp& mdp);

  Index num_states() const { return num_states_; }
  Index num_actions() const { return num_actions_; }
  Index num_parameters() const { return theta_.size(); }
  Index parameter_index(Index s, Index a) const { return s * num_actions_ + a; }

  const Vec& theta() const { return theta_; }
  double theta_min() const { return theta_min_; }
  double theta_max() const { return theta_max_; }
  double& logit(Index s, Index a) { return theta_(parameter_index(s, a)); }
  double logit(Index s, Index a) const { return theta_(parameter_index(s, a)); }

  /// Replaces the parameter vector after clipping it into the box.
  void set_theta(const Vec& theta);
  /// Clip every entry into [theta_min, theta_max].
  void project();

  Vec action_distribution(Index s) const;
  /// num_states x num_actions matrix of pi(a|s).
  Mat probabilities() const;

 private:
  Index num_states_;
  Index num_actions_;
  Vec theta_;
  double theta_min_;
  double theta_max_;
};

/// pi(.|s) as a probability vector.
Vec action_distribution(const SoftmaxPolicy& policy, Index s);

/// T(i, j) = sum_a P(i|j, a) pi(a|j); column-stochastic.
Mat induced_chain(const Mdp& mdp, const SoftmaxPolicy& policy);

/// E[sum_{t=0}^{T} gamma^t R(S_t, A_t)] by backward induction.
double finite_horizon_value(const Mdp& mdp, const SoftmaxPolicy& policy, int horizon);

/// Exact gradient of finite_horizon_value w.r.t. theta (forward-mode over the
/// state occupancy).
Vec finite_horizon_value_gradient(const Mdp& mdp, const SoftmaxPolicy& policy, int horizon);

/// Best achievable finite-horizon value over all (history-dependent) policies.
double optimal_finite_horizon_value(const Mdp& mdp, int horizon);

/// Expected discounted policy entropy sum_{t=0}^{T} gamma^t E[H(pi(.|S_t))] in bits.
double discounted_policy_entropy(const Mdp& mdp, const SoftmaxPolicy& policy, int horizon);

}  // namespace opaque
