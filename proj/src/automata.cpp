#include "opaque/automata.hpp"

#include <algorithm>
#include <deque>

namespace opaque {

void Dfa::validate() const {
  if (state_names.empty()) throw ModelError("DFA has no states");
  if (alphabet.empty()) throw ModelError("DFA alphabet is empty");
  if (initial < 0 || initial >= num_states()) throw ModelError("DFA initial state out of range");
  if (static_cast<Index>(delta.size()) != num_states() * num_symbols()) {
    throw ModelError("DFA transition function is not total");
  }
  for (Index q : delta) {
    if (q < 0 || q >= num_states()) throw ModelError("DFA transition function is not total");
  }
  if (static_cast<Index>(accepting.size()) != num_states()) {
    throw ModelError("accepting flags must cover every DFA state");
  }
  for (std::size_t i = 0; i < alphabet.size(); ++i) {
    for (std::size_t j = i + 1; j < alphabet.size(); ++j) {
      if (alphabet[i] == alphabet[j]) throw ModelError("DFA alphabet lists a symbol twice");
    }
  }
}

Index Dfa::state_index(const std::string& name) const {
  auto it = std::find(state_names.begin(), state_names.end(), name);
  if (it == state_names.end()) throw InputError("unknown DFA state '" + name + "'");
  return it - state_names.begin();
}

Index Dfa::symbol_index(PropositionSet symbol) const {
  auto it = std::find(alphabet.begin(), alphabet.end(), symbol);
  if (it == alphabet.end()) {
    throw InputError("symbol " + symbol_name(symbol) + " is not in the DFA alphabet");
  }
  return it - alphabet.begin();
}

PropositionSet Dfa::symbol_from_names(const std::vector<std::string>& names) const {
  PropositionSet mask = 0;
  for (const auto& n : names) {
    auto it = std::find(atomic_props.begin(), atomic_props.end(), n);
    if (it == atomic_props.end()) throw InputError("unknown atomic proposition '" + n + "'");
    mask |= PropositionSet{1} << (it - atomic_props.begin());
  }
  return mask;
}

std::string Dfa::symbol_name(PropositionSet symbol) const {
  std::string out = "{";
  bool first = true;
  for (std::size_t i = 0; i < 64; ++i) {
    if (!(symbol & (PropositionSet{1} << i))) continue;
    if (!first) out += ",";
    out += i < atomic_props.size() ? atomic_props[i] : "#" + std::to_string(i);
    first = false;
  }
  return out + "}";
}

Index dfa_run(const Dfa& dfa, const std::vector<PropositionSet>& word) {
  Index q = dfa.initial;
  for (PropositionSet symbol : word) q = dfa.next(q, symbol);
  return q;
}

ObservationModel ProductMdp::lift(const ObservationModel& obs) const {
  ObservationModel out;
  out.observation_names = obs.observation_names;
  out.emission.resize(mdp.num_states(), obs.num_observations());
  for (Index v = 0; v < mdp.num_states(); ++v) out.emission.row(v) = obs.emission.row(base_state[v]);
  return out;
}

Index ProductMdp::index(Index s, Index q) const {
  for (Index v = 0; v < mdp.num_states(); ++v) {
    if (base_state[v] == s && automaton_state[v] == q) return v;
  }
  return -1;
}

ProductMdp build_product(const LabeledMdp& lmdp, const Dfa& dfa) {
  lmdp.validate();
  dfa.validate();
  const Mdp& base = lmdp.base;
  const Index n = base.num_states();
  const Index nq = dfa.num_states();
  const Index na = base.num_actions();

  // Translate each state label into the DFA's proposition numbering.
  std::vector<Index> symbol(n);
  for (Index s = 0; s < n; ++s) {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < lmdp.atomic_props.size(); ++i) {
      if (lmdp.labels[s] & (PropositionSet{1} << i)) names.push_back(lmdp.atomic_props[i]);
    }
    PropositionSet mask = 0;
    for (const auto& name : names) {
      auto it = std::find(dfa.atomic_props.begin(), dfa.atomic_props.end(), name);
      if (it == dfa.atomic_props.end()) {
        throw InputError("label of state '" + base.state_names[s] + "' uses proposition '" + name +
                         "' unknown to the DFA");
      }
      mask |= PropositionSet{1} << (it - dfa.atomic_props.begin());
    }
    symbol[s] = dfa.symbol_index(mask);
  }
  auto step = [&](Index q, Index s_next) { return dfa.delta[q * dfa.num_symbols() + symbol[s_next]]; };

  // Breadth-first search over (s, q) from the initial support.
  std::vector<Index> id(n * nq, -1);
  std::vector<std::pair<Index, Index>> order;
  std::deque<std::pair<Index, Index>> queue;
  auto visit = [&](Index s, Index q) {
    if (id[s * nq + q] >= 0) return;
    id[s * nq + q] = static_cast<Index>(order.size());
    order.emplace_back(s, q);
    queue.emplace_back(s, q);
  };
  for (Index s = 0; s < n; ++s) {
    if (base.initial(s) > 0.0) visit(s, step(dfa.initial, s));
  }
  while (!queue.empty()) {
    auto [s, q] = queue.front();
    queue.pop_front();
    for (Index a = 0; a < na; ++a) {
      for (Index s2 = 0; s2 < n; ++s2) {
        if (base.transition[a](s2, s) > 0.0) visit(s2, step(q, s2));
      }
    }
  }
  // Keep the product states in (s, q) order so indices are stable.
  std::sort(order.begin(), order.end());
  for (std::size_t v = 0; v < order.size(); ++v) {
    id[order[v].first * nq + order[v].second] = static_cast<Index>(v);
  }

  ProductMdp out;
  out.full_size = n * nq;
  const Index size = static_cast<Index>(order.size());
  Mdp& mdp = out.mdp;
  mdp.action_names = base.action_names;
  mdp.discount = base.discount;
  mdp.initial = Vec::Zero(size);
  mdp.reward = Mat::Zero(size, na);
  mdp.transition.assign(na, Mat::Zero(size, size));
  for (Index v = 0; v < size; ++v) {
    auto [s, q] = order[v];
    mdp.state_names.push_back("(" + base.state_names[s] + "," + dfa.state_names[q] + ")");
    out.base_state.push_back(s);
    out.automaton_state.push_back(q);
    if (q == step(dfa.initial, s)) mdp.initial(v) = base.initial(s);
    mdp.reward.row(v) = base.reward.row(s);
    for (Index a = 0; a < na; ++a) {
      for (Index s2 = 0; s2 < n; ++s2) {
        const double p = base.transition[a](s2, s);
        if (p > 0.0) mdp.transition[a](id[s2 * nq + step(q, s2)], v) += p;
      }
    }
  }
  for (Index s = 0; s < n; ++s) {
    for (Index q = 0; q < nq; ++q) {
      if (id[s * nq + q] < 0) out.pruned.emplace_back(s, q);
    }
  }
  return out;
}

std::vector<Index> reachable_automaton_states(const ProductMdp& product, int horizon) {
  const Mdp& mdp = product.mdp;
  std::vector<bool> current(mdp.num_states());
  for (Index v = 0; v < mdp.num_states(); ++v) current[v] = mdp.initial(v) > 0.0;
  for (int t = 0; t < horizon; ++t) {
    std::vector<bool> next(mdp.num_states(), false);
    for (Index v = 0; v < mdp.num_states(); ++v) {
      if (!current[v]) continue;
      for (const Mat& p : mdp.transition) {
        for (Index w = 0; w < mdp.num_states(); ++w) {
          if (p(w, v) > 0.0) next[w] = true;
        }
      }
    }
    current.swap(next);
  }
  std::vector<Index> states;
  for (Index v = 0; v < mdp.num_states(); ++v) {
    if (current[v]) states.push_back(product.automaton_state[v]);
  }
  std::sort(states.begin(), states.end());
  states.erase(std::unique(states.begin(), states.end()), states.end());
  return states;
}

SecretClassifier automaton_classifier(const ProductMdp& product, const Dfa& dfa, int horizon) {
  const std::vector<Index> reachable = reachable_automaton_states(product, horizon);
  std::vector<Index> label_of_q(dfa.num_states(), 0);
  std::vector<std::string> names;
  for (std::size_t l = 0; l < reachable.size(); ++l) {
    label_of_q[reachable[l]] = static_cast<Index>(l);
    names.push_back(dfa.state_names[reachable[l]]);
  }
  std::vector<Index> label_of_state(product.mdp.num_states());
  for (Index v = 0; v < product.mdp.num_states(); ++v) {
    label_of_state[v] = label_of_q[product.automaton_state[v]];
  }
  return terminal_labels(std::move(label_of_state), std::move(names));
}

}  // namespace opaque
