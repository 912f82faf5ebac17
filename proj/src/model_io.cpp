#include "opaque/model_io.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace opaque {

using nlohmann::json;

namespace {

const json& field(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) throw InputError(where + " must be an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw InputError(where + ": missing field '" + key + "'");
  return *it;
}

std::vector<std::string> string_list(const json& v, const std::string& where) {
  if (!v.is_array()) throw InputError(where + " must be a list of strings");
  std::vector<std::string> out;
  for (const auto& e : v) {
    if (!e.is_string()) throw InputError(where + " must be a list of strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

std::string string_value(const json& v, const std::string& where) {
  if (!v.is_string()) throw InputError(where + " must be a string");
  return v.get<std::string>();
}

double number_value(const json& v, const std::string& where) {
  if (!v.is_number()) throw InputError(where + " must be a number");
  return v.get<double>();
}

void check_schema(const json& doc, const std::string& what) {
  if (!doc.is_object()) throw InputError(what + " document must be a JSON object");
  auto it = doc.find("schema_version");
  if (it != doc.end() && (!it->is_number_integer() || it->get<int>() != kSchemaVersion)) {
    throw InputError(what + ": unsupported schema_version");
  }
}

Index lookup(const std::vector<std::string>& names, const std::string& name,
             const std::string& where) {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return static_cast<Index>(i);
  }
  throw InputError(where + ": unknown name '" + name + "'");
}

void check_unique(const std::vector<std::string>& names, const std::string& where) {
  std::set<std::string> seen;
  for (const auto& n : names) {
    if (!seen.insert(n).second) throw InputError(where + ": duplicate name '" + n + "'");
  }
}

}  // namespace

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

json parse_json(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1;
    std::size_t column = 1;
    const std::size_t end = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    for (std::size_t i = 0; i < end; ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    std::string message = e.what();
    const auto pos = message.find("syntax error");
    if (pos != std::string::npos) message = message.substr(pos);
    throw InputError(source + ":" + std::to_string(line) + ":" + std::to_string(column) + ": " +
                     message);
  }
}

ModelDocument model_from_json(const json& doc) {
  check_schema(doc, "model");
  ModelDocument model;
  Mdp& mdp = model.lmdp.base;
  mdp.state_names = string_list(field(doc, "states", "model"), "states");
  mdp.action_names = string_list(field(doc, "actions", "model"), "actions");
  check_unique(mdp.state_names, "states");
  check_unique(mdp.action_names, "actions");
  const Index n = mdp.num_states();
  const Index m = mdp.num_actions();
  if (n == 0 || m == 0) throw InputError("model needs at least one state and one action");

  mdp.transition.assign(m, Mat::Zero(n, n));
  std::set<std::tuple<Index, Index, Index>> seen;
  const json& transitions = field(doc, "transitions", "model");
  if (!transitions.is_array()) throw InputError("transitions must be a list");
  for (std::size_t k = 0; k < transitions.size(); ++k) {
    const std::string where = "transitions[" + std::to_string(k) + "]";
    const json& t = transitions[k];
    const Index from = lookup(mdp.state_names, string_value(field(t, "from", where), where + ".from"), where);
    const Index a = lookup(mdp.action_names, string_value(field(t, "action", where), where + ".action"), where);
    const Index to = lookup(mdp.state_names, string_value(field(t, "to", where), where + ".to"), where);
    const double p = number_value(field(t, "prob", where), where + ".prob");
    if (!seen.insert({from, a, to}).second) throw InputError(where + ": duplicate transition");
    mdp.transition[a](to, from) = p;
  }

  mdp.initial = Vec::Zero(n);
  const json& initial = field(doc, "initial", "model");
  if (initial.is_string()) {
    mdp.initial(lookup(mdp.state_names, initial.get<std::string>(), "initial")) = 1.0;
  } else if (initial.is_object()) {
    for (auto it = initial.begin(); it != initial.end(); ++it) {
      mdp.initial(lookup(mdp.state_names, it.key(), "initial")) =
          number_value(it.value(), "initial." + it.key());
    }
  } else {
    throw InputError("initial must be a state name or an object of probabilities");
  }

  mdp.reward = Mat::Zero(n, m);
  if (auto it = doc.find("rewards"); it != doc.end()) {
    if (!it->is_array()) throw InputError("rewards must be a list");
    for (std::size_t k = 0; k < it->size(); ++k) {
      const std::string where = "rewards[" + std::to_string(k) + "]";
      const json& r = (*it)[k];
      const Index s = lookup(mdp.state_names, string_value(field(r, "state", where), where + ".state"), where);
      const double v = number_value(field(r, "value", where), where + ".value");
      if (auto a = r.find("action"); a != r.end()) {
        mdp.reward(s, lookup(mdp.action_names, string_value(*a, where + ".action"), where)) = v;
      } else {
        mdp.reward.row(s).setConstant(v);
      }
    }
  }
  mdp.discount = doc.contains("discount") ? number_value(doc["discount"], "discount") : 1.0;

  if (auto it = doc.find("atomic_props"); it != doc.end()) {
    model.lmdp.atomic_props = string_list(*it, "atomic_props");
  }
  model.lmdp.labels.assign(n, 0);
  if (auto it = doc.find("labels"); it != doc.end()) {
    if (!it->is_object()) throw InputError("labels must map state names to proposition lists");
    for (auto l = it->begin(); l != it->end(); ++l) {
      const Index s = lookup(mdp.state_names, l.key(), "labels");
      const auto props = string_list(l.value(), "labels." + l.key());
      for (const auto& p : props) {
        if (std::find(model.lmdp.atomic_props.begin(), model.lmdp.atomic_props.end(), p) ==
            model.lmdp.atomic_props.end()) {
          model.lmdp.atomic_props.push_back(p);
        }
      }
      model.lmdp.labels[s] = model.lmdp.proposition_mask(props);
    }
  }

  if (auto it = doc.find("sensor"); it != doc.end()) {
    ObservationModel obs;
    obs.observation_names = string_list(field(*it, "observations", "sensor"), "sensor.observations");
    check_unique(obs.observation_names, "sensor.observations");
    obs.emission = Mat::Zero(n, obs.num_observations());
    const json& emissions = field(*it, "emissions", "sensor");
    if (!emissions.is_array()) throw InputError("sensor.emissions must be a list");
    for (std::size_t k = 0; k < emissions.size(); ++k) {
      const std::string where = "sensor.emissions[" + std::to_string(k) + "]";
      const json& e = emissions[k];
      const Index s = lookup(mdp.state_names, string_value(field(e, "state", where), where + ".state"), where);
      const Index o = lookup(obs.observation_names,
                             string_value(field(e, "observation", where), where + ".observation"), where);
      obs.emission(s, o) = number_value(field(e, "prob", where), where + ".prob");
    }
    obs.validate();
    model.observation = std::move(obs);
  }
  if (auto it = doc.find("secret_states"); it != doc.end()) {
    for (const auto& s : string_list(*it, "secret_states")) {
      model.secret_states.push_back(lookup(mdp.state_names, s, "secret_states"));
    }
  }
  model.lmdp.validate();
  return model;
}

json model_to_json(const ModelDocument& model) {
  const Mdp& mdp = model.lmdp.base;
  json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["states"] = mdp.state_names;
  doc["actions"] = mdp.action_names;
  json transitions = json::array();
  for (Index s = 0; s < mdp.num_states(); ++s) {
    for (Index a = 0; a < mdp.num_actions(); ++a) {
      for (Index to = 0; to < mdp.num_states(); ++to) {
        const double p = mdp.transition[a](to, s);
        if (p != 0.0) {
          transitions.push_back({{"from", mdp.state_names[s]},
                                 {"action", mdp.action_names[a]},
                                 {"to", mdp.state_names[to]},
                                 {"prob", p}});
        }
      }
    }
  }
  doc["transitions"] = transitions;
  json initial = json::object();
  for (Index s = 0; s < mdp.num_states(); ++s) {
    if (mdp.initial(s) != 0.0) initial[mdp.state_names[s]] = mdp.initial(s);
  }
  doc["initial"] = initial;
  json rewards = json::array();
  for (Index s = 0; s < mdp.num_states(); ++s) {
    const auto row = mdp.reward.row(s);
    if ((row.array() == 0.0).all()) continue;
    if ((row.array() == row(0)).all()) {
      rewards.push_back({{"state", mdp.state_names[s]}, {"value", row(0)}});
      continue;
    }
    for (Index a = 0; a < mdp.num_actions(); ++a) {
      if (row(a) != 0.0) {
        rewards.push_back(
            {{"state", mdp.state_names[s]}, {"action", mdp.action_names[a]}, {"value", row(a)}});
      }
    }
  }
  doc["rewards"] = rewards;
  doc["discount"] = mdp.discount;
  doc["atomic_props"] = model.lmdp.atomic_props;
  json labels = json::object();
  for (Index s = 0; s < mdp.num_states(); ++s) {
    if (s >= static_cast<Index>(model.lmdp.labels.size()) || model.lmdp.labels[s] == 0) continue;
    json props = json::array();
    for (std::size_t i = 0; i < model.lmdp.atomic_props.size(); ++i) {
      if (model.lmdp.labels[s] & (PropositionSet{1} << i)) props.push_back(model.lmdp.atomic_props[i]);
    }
    labels[mdp.state_names[s]] = props;
  }
  doc["labels"] = labels;
  if (model.observation) {
    const ObservationModel& obs = *model.observation;
    json emissions = json::array();
    for (Index s = 0; s < obs.num_states(); ++s) {
      for (Index o = 0; o < obs.num_observations(); ++o) {
        if (obs.emission(s, o) != 0.0) {
          emissions.push_back({{"state", mdp.state_names[s]},
                               {"observation", obs.observation_names[o]},
                               {"prob", obs.emission(s, o)}});
        }
      }
    }
    doc["sensor"] = {{"observations", obs.observation_names}, {"emissions", emissions}};
  }
  if (!model.secret_states.empty()) {
    json secrets = json::array();
    for (Index s : model.secret_states) secrets.push_back(mdp.state_names[s]);
    doc["secret_states"] = secrets;
  }
  return doc;
}

ModelDocument load_model(const std::string& path) {
  const json doc = parse_json(read_text_file(path), path);
  try {
    return model_from_json(doc);
  } catch (const Error& e) {
    throw InputError(path + ": " + e.what());
  }
}

Dfa dfa_from_json(const json& doc) {
  check_schema(doc, "dfa");
  Dfa dfa;
  dfa.state_names = string_list(field(doc, "states", "dfa"), "states");
  check_unique(dfa.state_names, "dfa states");
  const json& alphabet = field(doc, "alphabet", "dfa");
  if (!alphabet.is_array()) throw InputError("alphabet must be a list of proposition lists");
  std::vector<std::vector<std::string>> symbols;
  for (std::size_t k = 0; k < alphabet.size(); ++k) {
    symbols.push_back(string_list(alphabet[k], "alphabet[" + std::to_string(k) + "]"));
    for (const auto& p : symbols.back()) {
      if (std::find(dfa.atomic_props.begin(), dfa.atomic_props.end(), p) == dfa.atomic_props.end()) {
        dfa.atomic_props.push_back(p);
      }
    }
  }
  if (auto it = doc.find("atomic_props"); it != doc.end()) {
    std::vector<std::string> declared = string_list(*it, "atomic_props");
    for (const auto& p : dfa.atomic_props) {
      if (std::find(declared.begin(), declared.end(), p) == declared.end()) declared.push_back(p);
    }
    dfa.atomic_props = declared;
  }
  for (const auto& s : symbols) dfa.alphabet.push_back(dfa.symbol_from_names(s));

  dfa.delta.assign(dfa.num_states() * dfa.num_symbols(), -1);
  const json& transitions = field(doc, "transitions", "dfa");
  if (!transitions.is_array()) throw InputError("dfa transitions must be a list");
  for (std::size_t k = 0; k < transitions.size(); ++k) {
    const std::string where = "dfa transitions[" + std::to_string(k) + "]";
    const json& t = transitions[k];
    const Index from = lookup(dfa.state_names, string_value(field(t, "from", where), where), where);
    const Index to = lookup(dfa.state_names, string_value(field(t, "to", where), where), where);
    const Index sym = dfa.symbol_index(dfa.symbol_from_names(string_list(field(t, "symbol", where), where)));
    Index& slot = dfa.delta[from * dfa.num_symbols() + sym];
    if (slot >= 0 && slot != to) throw InputError(where + ": nondeterministic transition");
    slot = to;
  }
  dfa.initial = lookup(dfa.state_names, string_value(field(doc, "initial", "dfa"), "initial"), "initial");
  dfa.accepting.assign(dfa.num_states(), false);
  if (auto it = doc.find("accepting"); it != doc.end()) {
    for (const auto& q : string_list(*it, "accepting")) dfa.accepting[lookup(dfa.state_names, q, "accepting")] = true;
  }
  dfa.validate();
  return dfa;
}

json dfa_to_json(const Dfa& dfa) {
  auto names = [&](PropositionSet symbol) {
    json props = json::array();
    for (std::size_t i = 0; i < dfa.atomic_props.size(); ++i) {
      if (symbol & (PropositionSet{1} << i)) props.push_back(dfa.atomic_props[i]);
    }
    return props;
  };
  json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["states"] = dfa.state_names;
  doc["atomic_props"] = dfa.atomic_props;
  json alphabet = json::array();
  for (PropositionSet s : dfa.alphabet) alphabet.push_back(names(s));
  doc["alphabet"] = alphabet;
  json transitions = json::array();
  for (Index q = 0; q < dfa.num_states(); ++q) {
    for (Index k = 0; k < dfa.num_symbols(); ++k) {
      transitions.push_back({{"from", dfa.state_names[q]},
                             {"symbol", names(dfa.alphabet[k])},
                             {"to", dfa.state_names[dfa.delta[q * dfa.num_symbols() + k]]}});
    }
  }
  doc["transitions"] = transitions;
  doc["initial"] = dfa.state_names[dfa.initial];
  json accepting = json::array();
  for (Index q = 0; q < dfa.num_states(); ++q) {
    if (dfa.accepting[q]) accepting.push_back(dfa.state_names[q]);
  }
  doc["accepting"] = accepting;
  return doc;
}

Dfa load_dfa(const std::string& path) {
  const json doc = parse_json(read_text_file(path), path);
  try {
    return dfa_from_json(doc);
  } catch (const Error& e) {
    throw InputError(path + ": " + e.what());
  }
}

json policy_to_json(const Mdp& mdp, const SoftmaxPolicy& policy) {
  json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["states"] = mdp.state_names;
  doc["actions"] = mdp.action_names;
  doc["theta_bounds"] = {policy.theta_min(), policy.theta_max()};
  json theta = json::array();
  for (Index s = 0; s < policy.num_states(); ++s) {
    json row = json::array();
    for (Index a = 0; a < policy.num_actions(); ++a) row.push_back(policy.logit(s, a));
    theta.push_back(row);
  }
  doc["theta"] = theta;
  return doc;
}

SoftmaxPolicy policy_from_json(const json& doc, const Mdp& mdp) {
  check_schema(doc, "policy");
  const auto states = string_list(field(doc, "states", "policy"), "states");
  const auto actions = string_list(field(doc, "actions", "policy"), "actions");
  if (states != mdp.state_names || actions != mdp.action_names) {
    throw InputError("policy states or actions differ from the model");
  }
  double lo = SoftmaxPolicy::kDefaultThetaMin;
  double hi = SoftmaxPolicy::kDefaultThetaMax;
  if (auto it = doc.find("theta_bounds"); it != doc.end()) {
    if (!it->is_array() || it->size() != 2) throw InputError("theta_bounds must be [min, max]");
    lo = number_value((*it)[0], "theta_bounds[0]");
    hi = number_value((*it)[1], "theta_bounds[1]");
  }
  const json& theta = field(doc, "theta", "policy");
  if (!theta.is_array() || static_cast<Index>(theta.size()) != mdp.num_states()) {
    throw InputError("theta must have one row per state");
  }
  Vec flat(mdp.num_states() * mdp.num_actions());
  for (Index s = 0; s < mdp.num_states(); ++s) {
    const json& row = theta[s];
    if (!row.is_array() || static_cast<Index>(row.size()) != mdp.num_actions()) {
      throw InputError("theta row " + std::to_string(s) + " must have one entry per action");
    }
    for (Index a = 0; a < mdp.num_actions(); ++a) {
      flat(s * mdp.num_actions() + a) = number_value(row[a], "theta");
    }
  }
  return SoftmaxPolicy(mdp.num_states(), mdp.num_actions(), flat, lo, hi);
}

}  // namespace opaque
