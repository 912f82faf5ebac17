#pragma once

#include <functional>
#include <string>
#include <vector>

#include "opaque/mdp.hpp"
#include "opaque/observation.hpp"

namespace opaque {

/// Finite-memory controller state update. The general form is a distribution
/// delta(m' | m, s, a, s') over next memory states; the two common special
/// cases (memory driven by the current state-action pair, and deterministic
/// memory driven by the successor state) have dedicated constructors.
class MemoryTransducer {
 public:
  using ActionUpdate = std::function<Vec(Index m, Index s, Index a)>;
  using StateUpdate = std::function<Index(Index m, Index s_next)>;

  /// delta(m' | m, s, a); the initial memory at s_0 is `initial_memory(s_0)` (a distribution).
  static MemoryTransducer from_action_update(std::vector<std::string> memory_names,
                                             Index num_states, Index num_actions,
                                             const ActionUpdate& update,
                                             const std::function<Vec(Index s0)>& initial_memory);

  /// Deterministic m' = delta_f(m, s'); the memory at s_0 is delta_f(m0, s_0).
  static MemoryTransducer from_state_update(std::vector<std::string> memory_names,
                                            Index num_states, Index num_actions,
                                            const StateUpdate& update, Index m0);

  /// Saturating step counter m_0 -> m_1 -> ... -> m_{k-1} -> m_{k-1}, starting at m_0.
  static MemoryTransducer time_counter(Index num_memory, Index num_states, Index num_actions);

  /// A single memory state: the augmentation is isomorphic to the input MDP.
  static MemoryTransducer trivial(Index num_states, Index num_actions);

  Index num_memory() const { return static_cast<Index>(memory_names_.size()); }
  Index num_states() const { return num_states_; }
  Index num_actions() const { return num_actions_; }
  const std::vector<std::string>& memory_names() const { return memory_names_; }

  /// Distribution over the memory state paired with s_0.
  const Vec& initial(Index s0) const { return initial_[s0]; }
  /// delta(. | m, s, a, s_next).
  const Vec& update(Index m, Index s, Index a, Index s_next) const;

  /// Throws ModelError if some update is not a distribution.
  void validate() const;

 private:
  MemoryTransducer(std::vector<std::string> names, Index num_states, Index num_actions);
  std::size_t slot(Index m, Index s, Index a, Index s_next) const;

  std::vector<std::string> memory_names_;
  Index num_states_ = 0;
  Index num_actions_ = 0;
  std::vector<Vec> initial_;
  std::vector<Vec> update_;
};

/// An MDP over S x M. Augmented state (s, m) has index s * |M| + m.
struct AugmentedMdp {
  Mdp mdp;
  std::vector<Index> base_state;
  std::vector<Index> memory;
  Index num_memory = 1;

  Index index(Index s, Index m) const { return s * num_memory + m; }
  /// Emissions depend on the base state only.
  ObservationModel lift(const ObservationModel& obs) const;
  /// Secret label of (s, m) is the label of s.
  SecretClassifier lift(const SecretClassifier& secret) const;
};

inline constexpr Index kDefaultAugmentationCap = 1 << 20;

/// P((s',m') | (s,m), a) = P(s'|s,a) delta(m'|m,s,a,s'); R((s,m),a) = R(s,a);
/// mu0(s,m) = mu0(s) * initial(s)(m). Throws ModelError above `size_cap` states.
AugmentedMdp augment_with_memory(const Mdp& mdp, const MemoryTransducer& transducer,
                                 Index size_cap = kDefaultAugmentationCap);

}  // namespace opaque
