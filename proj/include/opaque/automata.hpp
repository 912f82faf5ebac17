#pragma once

#include <string>
#include <vector>

#include "opaque/mdp.hpp"
#include "opaque/observation.hpp"

namespace opaque {

/// Complete DFA whose symbols are sets of atomic propositions.
struct Dfa {
  std::vector<std::string> state_names;
  std::vector<std::string> atomic_props;
  std::vector<PropositionSet> alphabet;  // bit masks over atomic_props
  std::vector<Index> delta;              // delta[q * |alphabet| + symbol]
  Index initial = 0;
  std::vector<bool> accepting;

  Index num_states() const { return static_cast<Index>(state_names.size()); }
  Index num_symbols() const { return static_cast<Index>(alphabet.size()); }

  /// Throws ModelError unless delta is total and targets are valid states.
  void validate() const;
  Index state_index(const std::string& name) const;
  /// Throws InputError for a set outside the alphabet.
  Index symbol_index(PropositionSet symbol) const;
  PropositionSet symbol_from_names(const std::vector<std::string>& names) const;
  std::string symbol_name(PropositionSet symbol) const;
  Index next(Index q, PropositionSet symbol) const { return delta[q * num_symbols() + symbol_index(symbol)]; }
};

/// State reached from the initial state after reading `word`.
Index dfa_run(const Dfa& dfa, const std::vector<PropositionSet>& word);

/// Product of a labeled MDP and a DFA over states (s, q). Only product states
/// reachable from the initial distribution are kept.
struct ProductMdp {
  Mdp mdp;
  std::vector<Index> base_state;
  std::vector<Index> automaton_state;
  /// Size of S x Q before pruning and the pairs (s, q) that were dropped.
  Index full_size = 0;
  std::vector<std::pair<Index, Index>> pruned;

  /// Emissions depend on the base state only.
  ObservationModel lift(const ObservationModel& obs) const;
  /// Index of (s, q), or -1 if it was pruned.
  Index index(Index s, Index q) const;
};

/// Delta((s', q') | (s, q), a) = P(s'|s, a) if q' = delta(q, L(s')); R((s, q), a) = R(s, a);
/// chi0(s, q) = mu0(s) if q = delta(q0, L(s)).
ProductMdp build_product(const LabeledMdp& lmdp, const Dfa& dfa);

/// Automaton states that some product state can occupy at exactly step `horizon`.
std::vector<Index> reachable_automaton_states(const ProductMdp& product, int horizon);

/// Secret Z = q of the terminal product state (s, q). The label set is the
/// automaton states reachable at `horizon`; product states whose automaton
/// component cannot occur at the horizon are mapped to the first label.
SecretClassifier automaton_classifier(const ProductMdp& product, const Dfa& dfa, int horizon);

}  // namespace opaque
