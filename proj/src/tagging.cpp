#include "taps/tagging.hpp"

#include <algorithm>
#include <map>
#include <optional>

#include "taps/util.hpp"

namespace taps {

namespace {

bool is_ws(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

enum class MarkKind {
  Text,
  ActionOpen,   // <a:NAME>
  ActionClose,  // </a>
  SlotOpen,     // <sl:NAME>
  SlotClose,    // </sl>
  BrActionOpen,  // [IN:NAME
  BrSlotOpen,    // [SL:NAME
  BrClose,       // ]
};

struct Mark {
  MarkKind kind;
  std::string payload;  // tag name or token text
};

// Matches <a:NAME>, <sl:NAME>, </a>, </sl> at position i; returns length or 0.
std::size_t match_angle(std::string_view s, std::size_t i, Mark& out) {
  if (s[i] != '<') return 0;
  auto starts = [&](std::string_view prefix) {
    return s.substr(i, prefix.size()) == prefix;
  };
  if (starts("</a>")) {
    out = {MarkKind::ActionClose, ""};
    return 4;
  }
  if (starts("</sl>")) {
    out = {MarkKind::SlotClose, ""};
    return 5;
  }
  std::size_t name_start = 0;
  MarkKind kind{};
  if (starts("<a:")) {
    name_start = i + 3;
    kind = MarkKind::ActionOpen;
  } else if (starts("<sl:")) {
    name_start = i + 4;
    kind = MarkKind::SlotOpen;
  } else {
    return 0;
  }
  std::size_t j = name_start;
  while (j < s.size() && s[j] != '>' && s[j] != '<' && !is_ws(s[j])) ++j;
  if (j >= s.size() || s[j] != '>' || j == name_start) return 0;
  out = {kind, std::string(s.substr(name_start, j - name_start))};
  return j + 1 - i;
}

// Matches [IN:NAME or [SL:NAME at position i; returns length or 0.
std::size_t match_bracket_open(std::string_view s, std::size_t i, Mark& out) {
  if (s[i] != '[') return 0;
  auto starts = [&](std::string_view prefix) {
    return s.substr(i, prefix.size()) == prefix;
  };
  std::size_t name_start = 0;
  MarkKind kind{};
  if (starts("[IN:")) {
    name_start = i + 4;
    kind = MarkKind::BrActionOpen;
  } else if (starts("[SL:")) {
    name_start = i + 4;
    kind = MarkKind::BrSlotOpen;
  } else {
    return 0;
  }
  std::size_t j = name_start;
  while (j < s.size() && s[j] != ']' && s[j] != '[' && !is_ws(s[j])) ++j;
  if (j == name_start) return 0;
  out = {kind, std::string(s.substr(name_start, j - name_start))};
  return j - i;
}

// Single pass over the surface text. Bracket closes are only markers while a
// bracket tag is open, so stray ']' in plain prose stays token text.
std::vector<Mark> lex(std::string_view text) {
  std::vector<Mark> marks;
  std::size_t bracket_depth = 0;
  std::string token;
  auto flush = [&]() {
    if (!token.empty()) {
      marks.push_back({MarkKind::Text, token});
      token.clear();
    }
  };
  std::size_t i = 0;
  while (i < text.size()) {
    if (is_ws(text[i])) {
      flush();
      ++i;
      continue;
    }
    Mark mark;
    std::size_t len = match_angle(text, i, mark);
    if (len == 0) len = match_bracket_open(text, i, mark);
    if (len == 0 && text[i] == ']' && bracket_depth > 0) {
      mark = {MarkKind::BrClose, ""};
      len = 1;
    }
    if (len > 0) {
      flush();
      if (mark.kind == MarkKind::BrActionOpen || mark.kind == MarkKind::BrSlotOpen) {
        ++bracket_depth;
      }
      if (mark.kind == MarkKind::BrClose) --bracket_depth;
      marks.push_back(std::move(mark));
      i += len;
      continue;
    }
    token.push_back(text[i]);
    ++i;
  }
  flush();
  return marks;
}

struct OpenTag {
  bool is_slot = false;
  bool bracket = false;
  std::string name;
  std::size_t start = 0;  // token index
};

void check_structure(const TaggedInstruction& t) {
  const std::size_t n = t.tokens.size();
  for (const auto& tok : t.tokens) {
    if (tok.empty()) throw Error("tagged instruction has an empty token");
  }
  for (std::size_t i = 0; i < t.actions.size(); ++i) {
    const auto& a = t.actions[i];
    if (a.api.empty()) throw Error("action with empty api name");
    if (a.range.begin >= a.range.end || a.range.end > n) {
      throw Error("action range out of bounds");
    }
    if (i > 0 && t.actions[i - 1].range.end > a.range.begin) {
      throw Error("action ranges overlap or are unsorted");
    }
    for (std::size_t j = 0; j < a.slots.size(); ++j) {
      const auto& s = a.slots[j];
      if (s.slot.empty()) throw Error("slot with empty name");
      if (s.range.begin >= s.range.end) throw Error("empty slot range");
      if (!a.range.contains(s.range)) throw Error("slot range escapes its action");
      if (j > 0 && a.slots[j - 1].range.end > s.range.begin) {
        throw Error("slot ranges overlap or are unsorted");
      }
    }
  }
}

}  // namespace

std::string_view to_string(TagViolationKind kind) {
  switch (kind) {
    case TagViolationKind::UnknownApi: return "unknown-api";
    case TagViolationKind::SlotNotInApi: return "slot-not-in-api";
    case TagViolationKind::Nesting: return "nesting";
    case TagViolationKind::TokenMismatch: return "token-mismatch";
    case TagViolationKind::Malformed: return "malformed";
  }
  return "?";
}

TagParseResult parse_tagged(std::string_view text) {
  std::vector<Mark> marks = lex(text);

  TaggedInstruction out;
  std::vector<TagViolation> violations;
  std::optional<OpenTag> action;
  std::optional<OpenTag> slot;
  ActionSpan current_action;

  auto open_action = [&](const Mark& m, bool bracket) {
    if (action) {
      violations.push_back({TagViolationKind::Nesting, "action " + m.payload +
                                                           " opened inside action " +
                                                           action->name});
      return;
    }
    action = OpenTag{false, bracket, m.payload, out.tokens.size()};
    current_action = ActionSpan{m.payload, {out.tokens.size(), out.tokens.size()}, {}};
  };
  auto open_slot = [&](const Mark& m, bool bracket) {
    if (!action) {
      violations.push_back({TagViolationKind::Nesting,
                            "slot " + m.payload + " outside any action"});
      return;
    }
    if (slot) {
      violations.push_back({TagViolationKind::Nesting, "slot " + m.payload +
                                                           " opened inside slot " + slot->name});
      return;
    }
    slot = OpenTag{true, bracket, m.payload, out.tokens.size()};
  };
  auto close_slot = [&]() {
    if (!slot) return;
    if (out.tokens.size() == slot->start) {
      violations.push_back({TagViolationKind::Malformed, "empty slot span: " + slot->name});
    } else if (action) {
      current_action.slots.push_back({slot->name, {slot->start, out.tokens.size()}});
    }
    slot.reset();
  };
  auto close_action = [&]() {
    if (!action) return;
    if (slot) {
      violations.push_back(
          {TagViolationKind::Malformed, "slot " + slot->name + " left open at action close"});
      close_slot();
    }
    if (out.tokens.size() == action->start) {
      violations.push_back({TagViolationKind::Malformed, "empty action span: " + action->name});
    } else {
      current_action.range.end = out.tokens.size();
      out.actions.push_back(std::move(current_action));
    }
    action.reset();
    current_action = {};
  };

  for (const auto& m : marks) {
    switch (m.kind) {
      case MarkKind::Text:
        out.tokens.push_back(m.payload);
        break;
      case MarkKind::ActionOpen:
        open_action(m, false);
        break;
      case MarkKind::BrActionOpen:
        open_action(m, true);
        break;
      case MarkKind::SlotOpen:
        open_slot(m, false);
        break;
      case MarkKind::BrSlotOpen:
        open_slot(m, true);
        break;
      case MarkKind::SlotClose:
        if (!slot) {
          violations.push_back({TagViolationKind::Malformed, "</sl> without open slot"});
        } else {
          close_slot();
        }
        break;
      case MarkKind::ActionClose:
        if (!action) {
          violations.push_back({TagViolationKind::Malformed, "</a> without open action"});
        } else {
          close_action();
        }
        break;
      case MarkKind::BrClose:
        // Closes the innermost open bracket tag.
        if (slot && slot->bracket) {
          close_slot();
        } else if (action && action->bracket) {
          close_action();
        } else {
          violations.push_back({TagViolationKind::Malformed, "] without open bracket tag"});
        }
        break;
    }
  }
  if (slot) {
    violations.push_back({TagViolationKind::Malformed, "unclosed slot: " + slot->name});
  }
  if (action) {
    violations.push_back({TagViolationKind::Malformed, "unclosed action: " + action->name});
  }

  if (!violations.empty()) return violations;
  return out;
}

TaggedInstruction parse_tagged_or_throw(std::string_view text) {
  TagParseResult result = parse_tagged(text);
  if (auto* t = std::get_if<TaggedInstruction>(&result)) return std::move(*t);
  const auto& violations = std::get<std::vector<TagViolation>>(result);
  std::string msg = "tag parse failed:";
  for (const auto& v : violations) {
    msg += " [";
    msg += to_string(v.kind);
    msg += "] ";
    msg += v.detail;
    msg += ";";
  }
  throw Error(msg);
}

std::string render_tagged(const TaggedInstruction& t) {
  check_structure(t);
  std::vector<std::string> pieces;
  std::size_t next_action = 0;
  const ActionSpan* open_action = nullptr;
  std::size_t next_slot = 0;
  const SlotSpan* open_slot = nullptr;

  for (std::size_t i = 0; i <= t.tokens.size(); ++i) {
    if (open_slot && open_slot->range.end == i) {
      pieces.push_back("</sl>");
      open_slot = nullptr;
    }
    if (open_action && open_action->range.end == i) {
      pieces.push_back("</a>");
      open_action = nullptr;
    }
    if (i == t.tokens.size()) break;
    if (!open_action && next_action < t.actions.size() &&
        t.actions[next_action].range.begin == i) {
      open_action = &t.actions[next_action++];
      next_slot = 0;
      pieces.push_back("<a:" + open_action->api + ">");
    }
    if (open_action && !open_slot && next_slot < open_action->slots.size() &&
        open_action->slots[next_slot].range.begin == i) {
      open_slot = &open_action->slots[next_slot++];
      pieces.push_back("<sl:" + open_slot->slot + ">");
    }
    pieces.push_back(t.tokens[i]);
  }
  return join(pieces, " ");
}

std::string strip_tags(std::string_view text) {
  std::vector<Mark> marks = lex(text);
  std::vector<std::string> tokens;
  for (auto& m : marks) {
    if (m.kind == MarkKind::Text) tokens.push_back(std::move(m.payload));
  }
  return join(tokens, " ");
}

TaggedInstruction canonicalize_names(const TaggedInstruction& t, const ApiSchema& schema) {
  TaggedInstruction out = t;
  for (auto& action : out.actions) {
    const FunctionSpec* fn = schema.find_function(action.api);
    if (!fn) continue;
    action.api = fn->name;
    for (auto& slot : action.slots) {
      if (const SlotSpec* spec = fn->find_slot(slot.slot)) slot.slot = spec->name;
    }
  }
  return out;
}

std::vector<TagViolation> validate_tags(const TaggedInstruction& t, const ApiSchema& schema) {
  std::vector<TagViolation> out;
  for (const auto& action : t.actions) {
    const FunctionSpec* fn = schema.find_function(action.api);
    if (!fn) {
      out.push_back({TagViolationKind::UnknownApi, action.api});
      continue;
    }
    for (const auto& slot : action.slots) {
      if (!fn->find_slot(slot.slot)) {
        out.push_back({TagViolationKind::SlotNotInApi, fn->name + "." + slot.slot});
      }
    }
  }
  return out;
}

std::vector<SlotTriplet> triplets_from_tags(const TaggedInstruction& t) {
  std::vector<SlotTriplet> out;
  for (const auto& action : t.actions) {
    if (action.slots.empty()) {
      out.push_back({action.api, "", ""});
      continue;
    }
    for (const auto& slot : action.slots) {
      std::vector<std::string> covered(t.tokens.begin() + static_cast<long>(slot.range.begin),
                                       t.tokens.begin() + static_cast<long>(slot.range.end));
      out.push_back({action.api, slot.slot, join(covered, " ")});
    }
  }
  return out;
}

std::vector<ApiCall> calls_from_tags(const std::vector<TaggedInstruction>& tags,
                                     const ApiSchema& schema) {
  std::vector<ApiCall> calls;
  std::vector<std::string> keys;  // loose api keys, aligned with calls
  for (const auto& raw : tags) {
    TaggedInstruction t = canonicalize_names(raw, schema);
    for (const auto& action : t.actions) {
      std::string key = loose_name_key(action.api);
      std::size_t idx = 0;
      while (idx < keys.size() && keys[idx] != key) ++idx;
      if (idx == keys.size()) {
        keys.push_back(key);
        calls.push_back(ApiCall{action.api, {}});
      }
      ApiCall& call = calls[idx];
      for (const auto& slot : action.slots) {
        bool present = false;
        for (const auto& [name, _] : call.arguments) {
          if (iequals(name, slot.slot)) {
            present = true;
            break;
          }
        }
        if (present) continue;
        std::vector<std::string> covered(t.tokens.begin() + static_cast<long>(slot.range.begin),
                                         t.tokens.begin() + static_cast<long>(slot.range.end));
        call.arguments.emplace_back(slot.slot, join(covered, " "));
      }
    }
  }
  return calls;
}

TaggingScores tagging_metrics(const std::vector<TaggedInstruction>& pred,
                              const std::vector<TaggedInstruction>& gold) {
  if (pred.size() != gold.size()) {
    throw Error("tagging_metrics: corpus size mismatch (" + std::to_string(pred.size()) +
                " vs " + std::to_string(gold.size()) + ")");
  }

  // Layered labels: each token classifies once in the action layer and once
  // in the slot layer, with O for uncovered tokens in either.
  auto labels_of = [](const TaggedInstruction& t, bool slot_layer) {
    std::vector<std::string> labels(t.tokens.size(), "O");
    for (const auto& action : t.actions) {
      if (!slot_layer) {
        for (std::size_t i = action.range.begin; i < action.range.end; ++i) {
          labels[i] = action.api;
        }
      } else {
        for (const auto& slot : action.slots) {
          for (std::size_t i = slot.range.begin; i < slot.range.end; ++i) {
            labels[i] = slot.slot;
          }
        }
      }
    }
    return labels;
  };

  struct Counts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
  };
  std::map<std::string, Counts> per_class;

  for (std::size_t idx = 0; idx < pred.size(); ++idx) {
    if (pred[idx].tokens != gold[idx].tokens) {
      throw Error("tagging_metrics: token sequence mismatch at pair " + std::to_string(idx));
    }
    for (bool slot_layer : {false, true}) {
      auto pl = labels_of(pred[idx], slot_layer);
      auto gl = labels_of(gold[idx], slot_layer);
      const char* prefix = slot_layer ? "slot:" : "action:";
      for (std::size_t i = 0; i < pl.size(); ++i) {
        if (pl[i] == gl[i]) {
          per_class[prefix + pl[i]].tp++;
        } else {
          per_class[prefix + pl[i]].fp++;
          per_class[prefix + gl[i]].fn++;
        }
      }
    }
  }

  TaggingScores scores;
  scores.classes = per_class.size();
  if (per_class.empty()) return scores;
  double sum_p = 0.0;
  double sum_r = 0.0;
  double sum_f1 = 0.0;
  for (const auto& [_, c] : per_class) {
    double p = (c.tp + c.fp) ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
    double r = (c.tp + c.fn) ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
    double f1 = (p + r > 0.0) ? 2.0 * p * r / (p + r) : 0.0;
    sum_p += p;
    sum_r += r;
    sum_f1 += f1;
  }
  double n = static_cast<double>(per_class.size());
  scores.precision = 100.0 * sum_p / n;
  scores.recall = 100.0 * sum_r / n;
  scores.f1 = 100.0 * sum_f1 / n;
  return scores;
}

}  // namespace taps
