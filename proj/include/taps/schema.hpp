#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace taps {

struct ApiCall;

enum class SlotKind { FreeText, Categorical, Boolean };

struct SlotSpec {
  std::string name;
  SlotKind kind = SlotKind::FreeText;
  std::vector<std::string> allowed_values;  // categorical only
};

struct FunctionSpec {
  std::string name;  // canonical "GetX" casing
  std::string description;
  std::vector<SlotSpec> slots;

  // Domain name, i.e. the name without the "Get" prefix.
  std::string domain() const { return name.substr(3); }

  const SlotSpec* find_slot(std::string_view slot_name) const;
};

// An ordered entry of the categorical-values listing, kept for rendering
// the schema blocks in their published order.
struct CategoricalEntry {
  std::string slot;
  std::optional<std::string> function;  // qualifier, e.g. category applies to GetTravel only
  std::vector<std::string> values;
};

enum class ViolationKind {
  UnknownFunction,
  UnknownSlot,
  IllegalCategoricalValue,
  IllegalBooleanValue,
};

struct Violation {
  ViolationKind kind;
  std::string detail;
};

std::string_view to_string(ViolationKind kind);

class ApiSchema {
 public:
  static ApiSchema from_json_text(std::string_view text);
  static ApiSchema from_file(const std::string& path);
  static ApiSchema bundled_default();

  const std::vector<FunctionSpec>& functions() const { return functions_; }
  const std::vector<CategoricalEntry>& categorical_entries() const { return categorical_; }
  const std::vector<std::string>& boolean_slots() const { return boolean_; }
  const std::vector<std::string>& special_values() const { return special_values_; }

  // Case-insensitive lookup; also accepts underscore forms like GET_FLIGHTS.
  const FunctionSpec* find_function(std::string_view name) const;

  bool is_special_value(std::string_view value) const;

  // All distinct slot names across functions, in first-seen order.
  std::vector<std::string> all_slot_names() const;

  std::string digest() const;

 private:
  std::vector<FunctionSpec> functions_;
  std::vector<CategoricalEntry> categorical_;
  std::vector<std::string> boolean_;
  std::vector<std::string> special_values_;
  std::map<std::string, std::size_t> by_loose_name_;
  std::string digest_;
};

// Checks one parsed call against the schema. Violations are data, not
// errors: an empty result means the call is schema-conformant.
std::vector<Violation> validate_call(const ApiSchema& schema, const ApiCall& call);

}  // namespace taps
