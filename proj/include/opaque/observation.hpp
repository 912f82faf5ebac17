#pragma once

#include <string>
#include <vector>

#include "opaque/types.hpp"

namespace opaque {

/// Memoryless sensor: emission(s, o) = E(o | s). Actions are not observed.
struct ObservationModel {
  std::vector<std::string> observation_names;
  Mat emission;  // num_states x num_observations, rows sum to one

  Index num_states() const { return emission.rows(); }
  Index num_observations() const { return static_cast<Index>(observation_names.size()); }

  void validate() const;
  Index observation_index(const std::string& name) const;
  ObservationSequence parse(const std::vector<std::string>& names) const;
  /// Concatenated symbol names, separated by `separator` when any name is longer than one character.
  std::string format(const ObservationSequence& y) const;
};

/// Constant sensor that reveals nothing.
ObservationModel blind_observer(Index num_states);

/// The random variable whose posterior entropy is measured: a label of the
/// terminal state S_T or of the initial state S_0.
struct SecretClassifier {
  enum class Kind { terminal_membership, terminal_label, initial_state };

  Kind kind = Kind::terminal_membership;
  std::vector<Index> label_of_state;
  std::vector<std::string> label_names;

  Index num_labels() const { return static_cast<Index>(label_names.size()); }
  Index num_states() const { return static_cast<Index>(label_of_state.size()); }
  bool conditions_on_initial_state() const { return kind == Kind::initial_state; }
  /// num_states x num_labels 0/1 indicator matrix.
  Mat indicator() const;

  void validate(Index num_states) const;
};

/// Z_T = 1 iff S_T lies in `secret_states`; labels {0, 1}.
SecretClassifier terminal_membership(Index num_states, const std::vector<Index>& secret_states);

/// Z_T = label_of_state[S_T].
SecretClassifier terminal_labels(std::vector<Index> label_of_state,
                                 std::vector<std::string> label_names);

/// Z = S_0 itself; one label per state.
SecretClassifier initial_state_secret(const std::vector<std::string>& state_names);

}  // namespace opaque
