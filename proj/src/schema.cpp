#include "taps/schema.hpp"

#include <set>

#include <json.hpp>

#include "taps/assets.hpp"
#include "taps/calls.hpp"
#include "taps/util.hpp"

namespace taps {

namespace {

using nlohmann::json;

const std::string* match_categorical(const SlotSpec& spec, std::string_view value) {
  std::string probe = to_lower(trim(value));
  for (const auto& allowed : spec.allowed_values) {
    if (to_lower(allowed) == probe) return &allowed;
  }
  return nullptr;
}

bool is_boolean_text(std::string_view value) {
  std::string v = trim(value);
  return v == "True" || v == "False" || v == "true" || v == "false";
}

}  // namespace

std::string_view to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::UnknownFunction: return "unknown-function";
    case ViolationKind::UnknownSlot: return "unknown-slot";
    case ViolationKind::IllegalCategoricalValue: return "illegal-categorical-value";
    case ViolationKind::IllegalBooleanValue: return "illegal-boolean-value";
  }
  return "?";
}

const SlotSpec* FunctionSpec::find_slot(std::string_view slot_name) const {
  for (const auto& s : slots) {
    if (iequals(s.name, slot_name)) return &s;
  }
  return nullptr;
}

ApiSchema ApiSchema::from_json_text(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(std::string("malformed schema document: ") + e.what());
  }
  if (!doc.is_object()) throw Error("malformed schema document: expected object");

  ApiSchema schema;
  schema.special_values_ = {"?", "any"};
  if (doc.contains("special_values")) {
    schema.special_values_ = doc.at("special_values").get<std::vector<std::string>>();
  }

  if (!doc.contains("functions") || !doc.at("functions").is_array() || doc.at("functions").empty()) {
    throw Error("schema document defines no functions");
  }

  struct RawCategorical {
    std::string slot;
    std::optional<std::string> function;
    std::vector<std::string> values;
  };
  std::vector<RawCategorical> categorical;
  for (const auto& entry : doc.value("categorical", json::array())) {
    RawCategorical rc;
    rc.slot = entry.at("slot").get<std::string>();
    if (entry.contains("function")) rc.function = entry.at("function").get<std::string>();
    rc.values = entry.at("values").get<std::vector<std::string>>();
    if (rc.values.empty()) throw Error("categorical slot with empty value list: " + rc.slot);
    categorical.push_back(std::move(rc));
  }
  std::vector<std::string> boolean = doc.value("boolean", std::vector<std::string>{});

  auto kind_of = [&](const std::string& function, const std::string& slot)
      -> std::pair<SlotKind, std::vector<std::string>> {
    for (const auto& rc : categorical) {
      if (!iequals(rc.slot, slot)) continue;
      if (rc.function && !iequals(*rc.function, function)) continue;
      return {SlotKind::Categorical, rc.values};
    }
    for (const auto& b : boolean) {
      if (iequals(b, slot)) return {SlotKind::Boolean, {}};
    }
    return {SlotKind::FreeText, {}};
  };

  for (const auto& fn : doc.at("functions")) {
    FunctionSpec spec;
    spec.name = fn.at("name").get<std::string>();
    spec.description = fn.value("description", "");
    if (spec.name.size() < 4 || spec.name.substr(0, 3) != "Get") {
      throw Error("function name must have the shape GetX: " + spec.name);
    }
    std::set<std::string> seen_slots;
    for (const auto& slot_name : fn.at("slots").get<std::vector<std::string>>()) {
      if (slot_name.empty()) throw Error("empty slot name in " + spec.name);
      if (!seen_slots.insert(to_lower(slot_name)).second) {
        throw Error("duplicate slot " + slot_name + " in " + spec.name);
      }
      SlotSpec s;
      s.name = slot_name;
      auto [kind, values] = kind_of(spec.name, slot_name);
      s.kind = kind;
      s.allowed_values = std::move(values);
      spec.slots.push_back(std::move(s));
    }
    std::string key = loose_name_key(spec.name);
    if (schema.by_loose_name_.count(key)) {
      throw Error("duplicate function name: " + spec.name);
    }
    schema.by_loose_name_[key] = schema.functions_.size();
    schema.functions_.push_back(std::move(spec));
  }

  for (auto& rc : categorical) {
    schema.categorical_.push_back({rc.slot, rc.function, std::move(rc.values)});
  }
  schema.boolean_ = std::move(boolean);
  schema.digest_ = sha256_hex(text);
  return schema;
}

ApiSchema ApiSchema::from_file(const std::string& path) {
  return from_json_text(read_file(path));
}

ApiSchema ApiSchema::bundled_default() {
  return from_json_text(assets::default_schema_json());
}

const FunctionSpec* ApiSchema::find_function(std::string_view name) const {
  auto it = by_loose_name_.find(loose_name_key(name));
  if (it == by_loose_name_.end()) return nullptr;
  return &functions_[it->second];
}

bool ApiSchema::is_special_value(std::string_view value) const {
  std::string v = trim(value);
  for (const auto& sv : special_values_) {
    if (v == sv) return true;
  }
  return false;
}

std::vector<std::string> ApiSchema::all_slot_names() const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& fn : functions_) {
    for (const auto& s : fn.slots) {
      if (seen.insert(to_lower(s.name)).second) out.push_back(s.name);
    }
  }
  return out;
}

std::string ApiSchema::digest() const { return digest_; }

std::vector<Violation> validate_call(const ApiSchema& schema, const ApiCall& call) {
  std::vector<Violation> out;
  const FunctionSpec* fn = schema.find_function(call.function);
  if (!fn) {
    out.push_back({ViolationKind::UnknownFunction, call.function});
    return out;
  }
  for (const auto& [arg, value] : call.arguments) {
    const SlotSpec* slot = fn->find_slot(arg);
    if (!slot) {
      out.push_back({ViolationKind::UnknownSlot, fn->name + "." + arg});
      continue;
    }
    if (schema.is_special_value(value)) continue;
    switch (slot->kind) {
      case SlotKind::FreeText:
        break;
      case SlotKind::Categorical:
        if (!match_categorical(*slot, value)) {
          out.push_back({ViolationKind::IllegalCategoricalValue,
                         fn->name + "." + arg + "=" + value});
        }
        break;
      case SlotKind::Boolean:
        if (!is_boolean_text(value)) {
          out.push_back({ViolationKind::IllegalBooleanValue,
                         fn->name + "." + arg + "=" + value});
        }
        break;
    }
  }
  return out;
}

}  // namespace taps
