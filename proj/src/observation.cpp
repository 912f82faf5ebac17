#include "opaque/observation.hpp"

#include <algorithm>
#include <cmath>

namespace opaque {

void ObservationModel::validate() const {
  if (emission.cols() != num_observations()) {
    throw ModelError("emission table width differs from the observation alphabet");
  }
  if (num_observations() == 0) throw ModelError("observation alphabet is empty");
  for (Index s = 0; s < emission.rows(); ++s) {
    auto row = emission.row(s);
    if (!row.allFinite() || (row.array() < 0.0).any()) {
      throw ModelError("emission row has negative or non-finite entries");
    }
    if (std::abs(row.sum() - 1.0) > kStochasticTolerance) {
      throw ModelError("emission row " + std::to_string(s) + " does not sum to one");
    }
  }
}

Index ObservationModel::observation_index(const std::string& name) const {
  auto it = std::find(observation_names.begin(), observation_names.end(), name);
  if (it == observation_names.end()) throw InputError("unknown observation '" + name + "'");
  return it - observation_names.begin();
}

ObservationSequence ObservationModel::parse(const std::vector<std::string>& names) const {
  ObservationSequence y;
  y.reserve(names.size());
  for (const auto& n : names) y.push_back(observation_index(n));
  return y;
}

std::string ObservationModel::format(const ObservationSequence& y) const {
  const bool short_names = std::all_of(observation_names.begin(), observation_names.end(),
                                       [](const std::string& n) { return n.size() == 1; });
  std::string out;
  for (std::size_t t = 0; t < y.size(); ++t) {
    if (!short_names && t > 0) out += ' ';
    out += observation_names.at(y[t]);
  }
  return out;
}

ObservationModel blind_observer(Index num_states) {
  ObservationModel obs;
  obs.observation_names = {"_"};
  obs.emission = Mat::Ones(num_states, 1);
  return obs;
}

Mat SecretClassifier::indicator() const {
  Mat c = Mat::Zero(num_states(), num_labels());
  for (Index s = 0; s < num_states(); ++s) c(s, label_of_state[s]) = 1.0;
  return c;
}

void SecretClassifier::validate(Index num_states) const {
  if (this->num_states() != num_states) throw ModelError("classifier does not cover every state");
  if (num_labels() == 0) throw ModelError("classifier has no labels");
  for (Index l : label_of_state) {
    if (l < 0 || l >= num_labels()) throw ModelError("classifier label out of range");
  }
  if (kind == Kind::terminal_membership && num_labels() != 2) {
    throw ModelError("membership secrets are binary");
  }
}

SecretClassifier terminal_membership(Index num_states, const std::vector<Index>& secret_states) {
  SecretClassifier c;
  c.kind = SecretClassifier::Kind::terminal_membership;
  c.label_of_state.assign(num_states, 0);
  c.label_names = {"0", "1"};
  for (Index s : secret_states) {
    if (s < 0 || s >= num_states) throw InputError("secret state out of range");
    c.label_of_state[s] = 1;
  }
  return c;
}

SecretClassifier terminal_labels(std::vector<Index> label_of_state,
                                 std::vector<std::string> label_names) {
  SecretClassifier c;
  c.kind = SecretClassifier::Kind::terminal_label;
  c.label_of_state = std::move(label_of_state);
  c.label_names = std::move(label_names);
  c.validate(c.num_states());
  return c;
}

SecretClassifier initial_state_secret(const std::vector<std::string>& state_names) {
  SecretClassifier c;
  c.kind = SecretClassifier::Kind::initial_state;
  c.label_names = state_names;
  c.label_of_state.resize(state_names.size());
  for (std::size_t s = 0; s < state_names.size(); ++s) c.label_of_state[s] = static_cast<Index>(s);
  return c;
}

}  // namespace opaque
