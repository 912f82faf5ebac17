#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "opaque/automata.hpp"
#include "opaque/mdp.hpp"
#include "opaque/observation.hpp"

namespace opaque {

inline constexpr int kSchemaVersion = 1;

/// Contents of an MDP document: the labeled plant, an optional sensor block
/// and an optional list of secret states.
struct ModelDocument {
  LabeledMdp lmdp;
  std::optional<ObservationModel> observation;
  std::vector<Index> secret_states;
};

/// Reads a whole file; throws InputError if it cannot be opened.
std::string read_text_file(const std::string& path);

/// Parses JSON text. Syntax errors become InputError naming `source`, line and column.
nlohmann::json parse_json(const std::string& text, const std::string& source);

ModelDocument model_from_json(const nlohmann::json& doc);
nlohmann::json model_to_json(const ModelDocument& model);
ModelDocument load_model(const std::string& path);

Dfa dfa_from_json(const nlohmann::json& doc);
nlohmann::json dfa_to_json(const Dfa& dfa);
Dfa load_dfa(const std::string& path);

/// {schema_version, states, actions, theta: [[...] per state]}.
nlohmann::json policy_to_json(const Mdp& mdp, const SoftmaxPolicy& policy);
SoftmaxPolicy policy_from_json(const nlohmann::json& doc, const Mdp& mdp);

}  // namespace opaque
