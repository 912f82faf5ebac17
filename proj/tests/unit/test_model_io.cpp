#include <doctest.h>

#include "opaque/envlib.hpp"
#include "opaque/model_io.hpp"
#include "oracles.hpp"

using namespace opaque;
using nlohmann::json;

TEST_CASE("model documents round trip") {
  const auto ex = graph_example();
  ModelDocument doc{ex.lmdp, ex.observation, {ex.lmdp.base.state_index("h1")}};
  const json text = model_to_json(doc);
  const ModelDocument back = model_from_json(parse_json(text.dump(), "mem"));
  const Mdp& a = doc.lmdp.base;
  const Mdp& b = back.lmdp.base;
  CHECK(a.state_names == b.state_names);
  CHECK(a.action_names == b.action_names);
  for (Index k = 0; k < a.num_actions(); ++k) CHECK(a.transition[k] == b.transition[k]);
  CHECK(a.initial == b.initial);
  CHECK(a.reward == b.reward);
  CHECK(a.discount == b.discount);
  CHECK(back.lmdp.labels == doc.lmdp.labels);
  REQUIRE(back.observation.has_value());
  CHECK(back.observation->emission == ex.observation.emission);
  CHECK(back.secret_states == doc.secret_states);
  CHECK(model_to_json(back) == text);
}

TEST_CASE("dfa and policy documents round trip") {
  const auto ex = graph_example();
  const Dfa back = dfa_from_json(dfa_to_json(ex.dfa));
  CHECK(back.delta == ex.dfa.delta);
  CHECK(back.alphabet == ex.dfa.alphabet);
  CHECK(back.accepting == ex.dfa.accepting);
  const auto policy = oracle::random_policy(7, 2, 3);
  const SoftmaxPolicy p2 = policy_from_json(policy_to_json(ex.lmdp.base, policy), ex.lmdp.base);
  CHECK(p2.theta() == policy.theta());
}

TEST_CASE("syntax errors name the line") {
  const std::string text = "{\n  \"states\": [\"a\"],\n  \"actions\": [\"x\" \"y\"]\n}";
  try {
    parse_json(text, "bad.json");
    FAIL("expected an error");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("bad.json:3:") != std::string::npos);
  }
}

TEST_CASE("semantic errors are reported") {
  ModelDocument plain;
  plain.lmdp.base = example_finite_memory().mdp;
  plain.lmdp.labels.assign(3, 0);
  json doc = model_to_json(plain);
  json missing = doc;
  missing.erase("transitions");
  CHECK_THROWS_AS(model_from_json(missing), InputError);
  json unknown_state = doc;
  unknown_state["transitions"][0]["to"] = "nowhere";
  CHECK_THROWS_AS(model_from_json(unknown_state), InputError);
  json leaky = doc;
  leaky["transitions"][0]["prob"] = 0.25;
  CHECK_THROWS_AS(model_from_json(leaky), ModelError);
  json future = doc;
  future["schema_version"] = 99;
  CHECK_THROWS_AS(model_from_json(future), InputError);
  CHECK_THROWS_AS(read_text_file("/nonexistent/model.json"), InputError);
}
