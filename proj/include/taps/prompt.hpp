#pragma once

#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "taps/schema.hpp"

namespace taps {

// Template variables are either scalar text or a list that must go through
// a join filter.
using PromptValue = std::variant<std::string, std::vector<std::string>>;
using PromptVars = std::map<std::string, PromptValue>;

// Minimal renderer for the template dialect used by the bundled prompts:
// {{ name }}, {{ name | join("sep") }}, and
// {% if name == "lit" and ... %} ... {% else %} ... {% endif %}.
std::string render_template(std::string_view text, const PromptVars& vars);

struct PromptTemplate {
  std::string id;
  std::string system;
  std::string schema_style;  // plain | described | described_plain | markdown | none
  std::string input;         // optional format section
  std::string example;
  std::string target;

  static PromptTemplate bundled(std::string_view id);
  static PromptTemplate from_text(std::string_view id, std::string_view text);
  static PromptTemplate from_file(std::string_view id, const std::string& path);

  bool wants_tags() const;
};

std::string render_schema_block(const ApiSchema& schema, std::string_view style);

struct Demo {
  PromptVars fields;
  std::string provenance;  // labeled | bootstrapped
};

struct DemoSet {
  std::vector<Demo> demos;
};

std::string demo_set_to_json(const DemoSet& demos);
DemoSet demo_set_from_json(std::string_view text);

struct RenderContext {
  std::string model_name = "other";  // conditional key used by the templates
  std::string split = "test";
};

// Byte-reproducible prompt assembly: system text, schema block, format
// section, worked demos, then the query instance. Demos render with
// split="train"; the query uses the context split.
std::string build_prompt(const PromptTemplate& tmpl, const ApiSchema& schema,
                         const PromptVars& query, const DemoSet& demos,
                         const RenderContext& ctx);

}  // namespace taps
