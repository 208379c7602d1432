#include "fixtures.hpp"

#include <json.hpp>

#include "taps/util.hpp"

namespace taps::testing {

namespace {

using nlohmann::json;

Instance make_instance(std::string id, std::string utterance,
                       std::vector<std::string> instructions, std::string type) {
  Instance instance;
  instance.id = std::move(id);
  instance.dialogue = {{"User", std::move(utterance)}};
  instance.applicable_instructions = std::move(instructions);
  instance.reasoning_type = std::move(type);
  return instance;
}

}  // namespace

FixtureSet pipeline_fixtures(const ApiSchema& schema) {
  FixtureSet fx;

  fx.instances.push_back(make_instance(
      "fx-001", "I want to find an apartment in Hayward.",
      {"Request a home with one bed."}, "Plain"));
  fx.tagged_texts["fx-001"] = {
      "<a:GetHomes> Request a home with <sl:number_of_beds> one </sl> bed. </a>"};

  fx.instances.push_back(make_instance(
      "fx-002", "What's going on tonight?",
      {"Request Blues as the category for Events.",
       "Request Weather for Portland when I go out."},
      "MultiDomain"));
  fx.tagged_texts["fx-002"] = {
      "<a:GetEvents> Request <sl:category> Blues </sl> as the category for Events. </a>",
      "<a:GetWeather> Request Weather for <sl:city> Portland </sl> when I go out. </a>"};

  fx.instances.push_back(make_instance(
      "fx-003", "I want to find a new restaurant.",
      {"Request Restaurants with Oriental cuisine.",
       "Prefer the city San Francisco for Restaurants."},
      "MultiPreference"));
  fx.tagged_texts["fx-003"] = {
      "<a:GetRestaurants> Request Restaurants with <sl:cuisine> Oriental </sl> cuisine. </a>",
      "<a:GetRestaurants> Prefer the city <sl:city> San Francisco </sl> for Restaurants. </a>"};

  Instance multi_turn = make_instance(
      "fx-004", "Book me a flight to Denver.",
      {"Request Economy as the seating class for Flights."}, "Conflict");
  multi_turn.dialogue.push_back({"Agent", "Which seating class do you prefer?"});
  multi_turn.dialogue.push_back({"User", "Economy, please."});
  fx.instances.push_back(std::move(multi_turn));
  fx.tagged_texts["fx-004"] = {
      "<a:GetFlights> Request <sl:seating_class> Economy </sl> as the seating class for "
      "Flights. </a>"};

  for (auto& instance : fx.instances) {
    std::vector<TaggedInstruction> parsed;
    for (const auto& text : fx.tagged_texts[instance.id]) {
      parsed.push_back(canonicalize_names(parse_tagged_or_throw(text), schema));
    }
    instance.gold_calls = calls_from_tags(parsed, schema);
    fx.tags[instance.id] = std::move(parsed);
  }
  return fx;
}

StubProfile faithful_profile(const FixtureSet& fixtures, double confidence) {
  StubProfile profile;
  profile.confidence = confidence;
  for (const auto& instance : fixtures.instances) {
    std::vector<std::string> answers;
    for (const auto& call : instance.gold_calls) answers.push_back(render_call(call));
    profile.answers[render_dialogue(instance)] = answers;
    auto it = fixtures.tagged_texts.find(instance.id);
    if (it == fixtures.tagged_texts.end()) continue;
    for (std::size_t i = 0; i < it->second.size(); ++i) {
      profile.tags[instance.applicable_instructions[i]] = it->second[i];
    }
  }
  return profile;
}

ModelConfig faithful_stub_config(const FixtureSet& fixtures, double confidence) {
  ModelConfig cfg;
  cfg.kind = "stub";
  cfg.stub = faithful_profile(fixtures, confidence);
  return cfg;
}

FixtureSet corruption_fixtures(const ApiSchema& schema, std::size_t count) {
  FixtureSet fx;
  const auto& functions = schema.functions();
  for (std::size_t i = 0; i < count; ++i) {
    const FunctionSpec& fn = functions[i % functions.size()];
    std::size_t slot_count = 1 + i % 3;

    // Layout per slot: one filler token, then a 1-2 token value span.
    TaggedInstruction tagged;
    ActionSpan action;
    action.api = fn.name;
    tagged.tokens.push_back("Set" + std::to_string(i));
    for (std::size_t s = 0; s < slot_count && s < fn.slots.size(); ++s) {
      tagged.tokens.push_back("given" + std::to_string(i) + "x" + std::to_string(s));
      SlotSpan slot;
      slot.slot = fn.slots[s].name;
      slot.range.begin = tagged.tokens.size();
      tagged.tokens.push_back("v" + std::to_string(i) + "s" + std::to_string(s));
      if (s % 2 == 1) tagged.tokens.push_back("w" + std::to_string(i) + "s" + std::to_string(s));
      slot.range.end = tagged.tokens.size();
      action.slots.push_back(slot);
    }
    tagged.tokens.push_back("done" + std::to_string(i));
    action.range = {0, tagged.tokens.size()};
    tagged.actions.push_back(action);

    std::string id = "crp-" + std::to_string(100 + i);
    Instance instance = make_instance(id, "Corruption case " + std::to_string(i),
                                      {strip_tags(render_tagged(tagged))}, "Plain");
    instance.gold_calls = calls_from_tags({tagged}, schema);
    fx.tagged_texts[id] = {render_tagged(tagged)};
    fx.tags[id] = {tagged};
    fx.instances.push_back(std::move(instance));
  }
  return fx;
}

std::string fixture_dataset_json(const std::vector<Instance>& instances) {
  std::string out;
  for (const auto& instance : instances) {
    json j;
    j["id"] = instance.id;
    json turns = json::array();
    for (const auto& turn : instance.dialogue) {
      turns.push_back(json{{"speaker", turn.speaker}, {"text", turn.text}});
    }
    j["dialogue"] = turns;
    j["applicable_instructions"] = instance.applicable_instructions;
    json calls = json::array();
    for (const auto& call : instance.gold_calls) calls.push_back(render_call(call));
    j["gold_calls"] = calls;
    j["reasoning_type"] = instance.reasoning_type;
    out += j.dump();
    out += "\n";
  }
  return out;
}

std::string write_temp_dataset(const std::vector<Instance>& instances,
                               const std::string& path) {
  write_file(path, fixture_dataset_json(instances));
  return path;
}

}  // namespace taps::testing
