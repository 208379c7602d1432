#include "taps/prompt.hpp"

#include <json.hpp>

#include "taps/assets.hpp"
#include "taps/util.hpp"

namespace taps {

namespace {

using nlohmann::json;

std::string unescape(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size()) {
      ++i;
      switch (s[i]) {
        case 'n': out.push_back('\n'); break;
        case 't': out.push_back('\t'); break;
        case '\\': out.push_back('\\'); break;
        case '"': out.push_back('"'); break;
        default: out.push_back(s[i]);
      }
    } else {
      out.push_back(s[i]);
    }
  }
  return out;
}

const std::string* scalar(const PromptVars& vars, const std::string& name) {
  auto it = vars.find(name);
  if (it == vars.end()) return nullptr;
  return std::get_if<std::string>(&it->second);
}

// Evaluates `name == "lit"` terms joined by `and`.
bool eval_condition(std::string_view expr, const PromptVars& vars) {
  std::string text = trim(expr);
  std::size_t pos = 0;
  bool result = true;
  while (pos < text.size()) {
    std::size_t and_pos = text.find(" and ", pos);
    std::string term = trim(text.substr(pos, and_pos == std::string::npos
                                                 ? std::string::npos
                                                 : and_pos - pos));
    std::size_t eq = term.find("==");
    if (eq == std::string::npos) throw Error("unsupported template condition: " + term);
    std::string name = trim(term.substr(0, eq));
    std::string lit = trim(term.substr(eq + 2));
    if (lit.size() < 2 || lit.front() != '"' || lit.back() != '"') {
      throw Error("template condition needs a quoted literal: " + term);
    }
    lit = lit.substr(1, lit.size() - 2);
    const std::string* value = scalar(vars, name);
    result = result && value && *value == lit;
    if (and_pos == std::string::npos) break;
    pos = and_pos + 5;
  }
  return result;
}

std::string render_expression(std::string_view expr, const PromptVars& vars) {
  std::string text = trim(expr);
  std::size_t pipe = text.find('|');
  std::string name = trim(pipe == std::string::npos ? text : text.substr(0, pipe));
  auto it = vars.find(name);
  if (it == vars.end()) throw Error("unknown template variable: " + name);

  if (pipe == std::string::npos) {
    if (const auto* s = std::get_if<std::string>(&it->second)) return *s;
    throw Error("list variable needs a join filter: " + name);
  }
  std::string filter = trim(text.substr(pipe + 1));
  if (filter.rfind("join(", 0) != 0 || filter.back() != ')') {
    throw Error("unsupported template filter: " + filter);
  }
  std::string arg = trim(filter.substr(5, filter.size() - 6));
  if (arg.size() < 2 || arg.front() != '"' || arg.back() != '"') {
    throw Error("join needs a quoted separator: " + filter);
  }
  std::string sep = unescape(arg.substr(1, arg.size() - 2));
  if (const auto* list = std::get_if<std::vector<std::string>>(&it->second)) {
    return join(*list, sep);
  }
  throw Error("join applied to a scalar variable: " + name);
}

}  // namespace

std::string render_template(std::string_view text, const PromptVars& vars) {
  std::string out;
  // if-stack: each frame remembers whether the current branch emits and
  // whether any branch of the frame has matched.
  struct Frame {
    bool emitting;
    bool matched;
  };
  std::vector<Frame> stack;
  auto active = [&]() {
    for (const auto& f : stack) {
      if (!f.emitting) return false;
    }
    return true;
  };

  std::size_t i = 0;
  while (i < text.size()) {
    if (text.substr(i, 2) == "{{") {
      std::size_t end = text.find("}}", i + 2);
      if (end == std::string::npos) throw Error("unterminated {{ in template");
      if (active()) out += render_expression(text.substr(i + 2, end - i - 2), vars);
      i = end + 2;
      continue;
    }
    if (text.substr(i, 2) == "{%") {
      std::size_t end = text.find("%}", i + 2);
      if (end == std::string::npos) throw Error("unterminated {% in template");
      std::string tag = trim(text.substr(i + 2, end - i - 2));
      if (tag.rfind("if ", 0) == 0) {
        bool cond = active() && eval_condition(tag.substr(3), vars);
        stack.push_back({cond, cond});
      } else if (tag == "else") {
        if (stack.empty()) throw Error("else without if in template");
        stack.back().emitting = !stack.back().matched;
        stack.back().matched = true;
      } else if (tag == "endif") {
        if (stack.empty()) throw Error("endif without if in template");
        stack.pop_back();
      } else {
        throw Error("unsupported template tag: " + tag);
      }
      i = end + 2;
      continue;
    }
    if (active()) out.push_back(text[i]);
    ++i;
  }
  if (!stack.empty()) throw Error("unclosed if in template");
  return out;
}

PromptTemplate PromptTemplate::from_text(std::string_view id, std::string_view text) {
  PromptTemplate tmpl;
  tmpl.id = std::string(id);
  tmpl.schema_style = "none";

  std::string* section = nullptr;
  std::map<std::string, std::string*> sections = {
      {"<<<system>>>", &tmpl.system},     {"<<<schema>>>", &tmpl.schema_style},
      {"<<<input>>>", &tmpl.input},       {"<<<example>>>", &tmpl.example},
      {"<<<target>>>", &tmpl.target},
  };
  for (const auto& line : split_lines(text)) {
    auto it = sections.find(trim(line));
    if (it != sections.end()) {
      section = it->second;
      section->clear();
      continue;
    }
    if (!section) {
      if (trim(line).empty()) continue;
      throw Error("template text before first section marker: " + tmpl.id);
    }
    if (!section->empty()) section->push_back('\n');
    *section += line;
  }
  tmpl.schema_style = trim(tmpl.schema_style);
  if (tmpl.example.empty()) throw Error("template has no example section: " + tmpl.id);
  return tmpl;
}

PromptTemplate PromptTemplate::bundled(std::string_view id) {
  return from_text(id, assets::prompt_template_text(id));
}

PromptTemplate PromptTemplate::from_file(std::string_view id, const std::string& path) {
  return from_text(id, read_file(path));
}

bool PromptTemplate::wants_tags() const {
  return example.find("tagged_applicable_instructions") != std::string::npos ||
         target.find("tagged_applicable_instructions") != std::string::npos;
}

namespace {

void append_plain_block(std::string& out, const ApiSchema& schema, bool with_values) {
  out += "Schema:";
  for (const auto& fn : schema.functions()) {
    out += "\n" + fn.domain() + ": ";
    std::vector<std::string> names;
    for (const auto& s : fn.slots) names.push_back(s.name);
    out += join(names, ", ");
  }
  if (!with_values) return;
  out += "\n\nFurther, following slots have categorical values:";
  for (const auto& entry : schema.categorical_entries()) {
    out += "\n";
    if (entry.function) {
      const FunctionSpec* fn = schema.find_function(*entry.function);
      out += "(" + (fn ? fn->domain() : *entry.function) + ") ";
    }
    out += entry.slot + ": " + join(entry.values, ", ");
  }
  out += "\n\nFurther, following slots are boolean:\n";
  out += join(schema.boolean_slots(), ", ");
}

void append_described_list(std::string& out, const ApiSchema& schema) {
  out += "The list of the available function names is presented below, followed by possible "
         "slot names.\nSome of the possible API calls include functions:";
  for (const auto& fn : schema.functions()) {
    std::vector<std::string> names;
    for (const auto& s : fn.slots) names.push_back(s.name);
    out += "\n" + fn.name + ": " + fn.description + " (" + join(names, ", ") + ")";
  }
}

void append_described_values(std::string& out, const ApiSchema& schema) {
  out += "\n\nFurther, following slots have categorical values:";
  for (const auto& entry : schema.categorical_entries()) {
    out += "\n";
    if (entry.function) {
      const FunctionSpec* fn = schema.find_function(*entry.function);
      out += "(" + (fn ? fn->domain() : *entry.function) + ") ";
    }
    out += entry.slot + ": " + join(entry.values, ", ");
  }
  out += "\n\nFurther, following slots are boolean:\n";
  out += join(schema.boolean_slots(), ", ");
}

void append_markdown_block(std::string& out, const ApiSchema& schema) {
  out += "**Schema:**\nUse valid functions and slots as listed:\n\n";
  out += "#### **Functions and Slots**\n";
  out += "Each function corresponds to a specific domain and has associated slots. "
         "Use only the listed slots for each function.\n";
  for (const auto& fn : schema.functions()) {
    std::vector<std::string> names;
    for (const auto& s : fn.slots) names.push_back("`" + s.name + "`");
    out += "\n- **" + fn.name + "**\n  - Slots: " + join(names, ", ") + "\n";
  }
  out += "\n---\n\n### **Slot Value Types**\n\n#### **Categorical Slots**\n";
  for (const auto& entry : schema.categorical_entries()) {
    std::vector<std::string> values;
    for (const auto& v : entry.values) values.push_back("`" + v + "`");
    out += "- `" + entry.slot + "`";
    if (entry.function) {
      const FunctionSpec* fn = schema.find_function(*entry.function);
      out += " (" + (fn ? fn->domain() : *entry.function) + ")";
    }
    out += ": " + join(values, ", ") + "\n";
  }
  out += "\n#### **Boolean Slots**\n- ";
  std::vector<std::string> booleans;
  for (const auto& b : schema.boolean_slots()) booleans.push_back("`" + b + "`");
  out += join(booleans, ", ");
  out += "\n\n---\n\nEnsure all outputs strictly adhere to the required format and schema. "
         "Generate only API calls.";
}

}  // namespace

std::string render_schema_block(const ApiSchema& schema, std::string_view style) {
  std::string out;
  if (style == "plain") {
    append_plain_block(out, schema, true);
  } else if (style == "described") {
    append_described_list(out, schema);
    append_described_values(out, schema);
  } else if (style == "described_plain") {
    append_described_list(out, schema);
  } else if (style == "markdown") {
    append_markdown_block(out, schema);
  } else if (style == "none") {
    // no schema block
  } else {
    throw Error("unknown schema block style: " + std::string(style));
  }
  return out;
}

std::string demo_set_to_json(const DemoSet& demos) {
  json arr = json::array();
  for (const auto& demo : demos.demos) {
    json fields = json::object();
    for (const auto& [name, value] : demo.fields) {
      if (const auto* s = std::get_if<std::string>(&value)) {
        fields[name] = *s;
      } else {
        fields[name] = std::get<std::vector<std::string>>(value);
      }
    }
    arr.push_back(json{{"fields", fields}, {"provenance", demo.provenance}});
  }
  return json{{"demos", arr}}.dump(2) + "\n";
}

DemoSet demo_set_from_json(std::string_view text) {
  json doc = json::parse(text);
  DemoSet out;
  for (const auto& entry : doc.at("demos")) {
    Demo demo;
    demo.provenance = entry.value("provenance", "labeled");
    for (const auto& [name, value] : entry.at("fields").items()) {
      if (value.is_string()) {
        demo.fields[name] = value.get<std::string>();
      } else {
        demo.fields[name] = value.get<std::vector<std::string>>();
      }
    }
    out.demos.push_back(std::move(demo));
  }
  return out;
}

std::string build_prompt(const PromptTemplate& tmpl, const ApiSchema& schema,
                         const PromptVars& query, const DemoSet& demos,
                         const RenderContext& ctx) {
  std::vector<std::string> blocks;
  auto add = [&](std::string block) {
    if (!block.empty()) blocks.push_back(std::move(block));
  };

  PromptVars base;
  base["model_name"] = ctx.model_name;

  add(render_template(tmpl.system, base));
  add(render_schema_block(schema, tmpl.schema_style));
  if (!tmpl.input.empty()) {
    PromptVars input_vars = base;
    std::string rendered = render_template(tmpl.input, input_vars);
    // Conditional trailers can leave dangling blank lines behind.
    while (!rendered.empty() && (rendered.back() == '\n' || rendered.back() == ' ')) {
      rendered.pop_back();
    }
    add(std::move(rendered));
  }

  for (const auto& demo : demos.demos) {
    PromptVars vars = demo.fields;
    vars["model_name"] = ctx.model_name;
    vars["split"] = std::string("train");
    std::string block = render_template(tmpl.example, vars);
    block += "\n";
    block += render_template(tmpl.target, vars);
    add(std::move(block));
  }

  PromptVars vars = query;
  vars["model_name"] = ctx.model_name;
  vars["split"] = ctx.split;
  add(render_template(tmpl.example, vars));

  return join(blocks, "\n\n");
}

}  // namespace taps
