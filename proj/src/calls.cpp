#include "taps/calls.hpp"

#include <cctype>

#include "taps/util.hpp"

namespace taps {

namespace {

bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

// Reason label for a chunk of text that is not part of any call.
std::string classify_discard(std::string_view text) {
  std::string t = trim(text);
  if (t.rfind("```", 0) == 0 || t == "`") return "markdown-fence";
  if (!t.empty() && (t[0] == '-' || t[0] == '*' || t[0] == '>')) return "list-marker";
  if (!t.empty() && std::isdigit(static_cast<unsigned char>(t[0]))) {
    std::size_t i = 0;
    while (i < t.size() && std::isdigit(static_cast<unsigned char>(t[i]))) ++i;
    if (i < t.size() && (t[i] == '.' || t[i] == ')')) return "list-marker";
  }
  return "prose";
}

struct Scanner {
  std::string_view text;
  std::size_t pos = 0;

  bool done() const { return pos >= text.size(); }
  char peek() const { return text[pos]; }

  void skip_spaces() {
    while (!done() && (peek() == ' ' || peek() == '\t')) ++pos;
  }
};

// Attempts to parse one call starting at s.pos (which points at the first
// character of the function name). On success returns the call and leaves
// s.pos one past the closing parenthesis. On failure returns the reason and
// restores nothing; the caller decides how much text to discard.
struct CallAttempt {
  bool ok = false;
  ApiCall call;
  std::string reason;
  std::size_t end = 0;  // one past the consumed span
};

CallAttempt try_parse_call(std::string_view text, std::size_t start) {
  CallAttempt result;
  Scanner s{text, start};

  std::size_t name_start = s.pos;
  while (!s.done() && is_alpha(s.peek())) ++s.pos;
  std::string name(text.substr(name_start, s.pos - name_start));

  s.skip_spaces();
  if (s.done() || s.peek() != '(') {
    result.reason = "missing-parenthesis";
    result.end = s.pos;
    return result;
  }
  ++s.pos;  // '('

  ApiCall call;
  call.function = name;

  auto fail = [&](std::string reason) {
    result.ok = false;
    result.reason = std::move(reason);
    result.end = s.pos;
    return result;
  };

  while (true) {
    s.skip_spaces();
    if (s.done()) return fail("unterminated-call");
    if (s.peek() == ')') {
      ++s.pos;
      break;
    }
    if (!call.arguments.empty()) {
      if (s.peek() != ',') return fail("expected-comma");
      ++s.pos;
      s.skip_spaces();
      if (!s.done() && s.peek() == ')') {  // tolerate trailing comma
        ++s.pos;
        break;
      }
    }
    if (s.done() || !(is_alpha(s.peek()) || s.peek() == '_')) return fail("expected-argument-name");
    std::size_t arg_start = s.pos;
    while (!s.done() && is_ident_char(s.peek())) ++s.pos;
    std::string arg(text.substr(arg_start, s.pos - arg_start));
    s.skip_spaces();
    if (s.done() || s.peek() != '=') return fail("expected-equals");
    ++s.pos;
    s.skip_spaces();
    if (s.done()) return fail("missing-value");

    std::string value;
    char c = s.peek();
    if (c == '"' || c == '\'') {
      char quote = c;
      ++s.pos;
      // Quoted values never span lines; an unbalanced quote aborts at the
      // line end so the rest of the output still gets scanned.
      while (!s.done() && s.peek() != quote && s.peek() != '\n') {
        if (s.peek() == '\\' && s.pos + 1 < text.size()) ++s.pos;
        value.push_back(text[s.pos]);
        ++s.pos;
      }
      if (s.done() || s.peek() == '\n') return fail("unbalanced-quote");
      ++s.pos;  // closing quote
    } else if (c == '[') {
      // List-shaped value kept verbatim, brackets included; the gold format
      // never uses lists, so exploding would hide the model error.
      std::size_t depth = 0;
      std::size_t val_start = s.pos;
      while (!s.done()) {
        if (s.peek() == '[') ++depth;
        if (s.peek() == ']') {
          --depth;
          if (depth == 0) {
            ++s.pos;
            break;
          }
        }
        if (s.peek() == '\n') break;
        ++s.pos;
      }
      if (depth != 0) return fail("unbalanced-bracket");
      value = std::string(text.substr(val_start, s.pos - val_start));
    } else {
      // Bare value up to ',' or ')' on the same line.
      std::size_t val_start = s.pos;
      while (!s.done() && s.peek() != ',' && s.peek() != ')' && s.peek() != '\n') ++s.pos;
      if (s.done() || s.peek() == '\n') return fail("unterminated-call");
      value = trim(text.substr(val_start, s.pos - val_start));
      if (value.empty()) return fail("missing-value");
    }

    for (const auto& [existing, _] : call.arguments) {
      if (existing == arg) return fail("duplicate-argument");
    }
    call.arguments.emplace_back(std::move(arg), std::move(value));
  }

  result.ok = true;
  result.call = std::move(call);
  result.end = s.pos;
  return result;
}

bool looks_like_call_start(std::string_view text, std::size_t i) {
  if (i + 3 >= text.size()) return false;
  if (i > 0 && is_ident_char(text[i - 1])) return false;
  return (text[i] == 'G' || text[i] == 'g') && (text[i + 1] == 'e' || text[i + 1] == 'E') &&
         (text[i + 2] == 't' || text[i + 2] == 'T') && is_alpha(text[i + 3]);
}

}  // namespace

ParseReport parse_calls(std::string_view text) {
  ParseReport report;
  std::string pending;  // unattributed text accumulated so far

  auto flush_pending = [&]() {
    if (pending.empty()) return;
    std::string reason = trim(pending).empty() ? "whitespace" : classify_discard(pending);
    report.discarded_spans.push_back({pending, reason});
    pending.clear();
  };

  std::size_t i = 0;
  while (i < text.size()) {
    if (looks_like_call_start(text, i)) {
      CallAttempt attempt = try_parse_call(text, i);
      if (attempt.ok) {
        flush_pending();
        report.calls.push_back(std::move(attempt.call));
        report.call_spans.emplace_back(i, attempt.end);
        i = attempt.end;
        continue;
      }
      // Near-miss: attribute the attempted span with its failure reason and
      // resume after it.
      flush_pending();
      std::size_t end = std::max(attempt.end, i + 1);
      report.discarded_spans.push_back(
          {std::string(text.substr(i, end - i)), "malformed-call: " + attempt.reason});
      i = end;
      continue;
    }
    pending.push_back(text[i]);
    if (text[i] == '\n') flush_pending();
    ++i;
  }
  flush_pending();
  return report;
}

std::string render_call(const ApiCall& call) {
  std::string out = call.function;
  out.push_back('(');
  bool first = true;
  for (const auto& [name, value] : call.arguments) {
    if (!first) out += ", ";
    first = false;
    out += name;
    out += "=\"";
    for (char c : value) {
      if (c == '"' || c == '\\') out.push_back('\\');
      out.push_back(c);
    }
    out.push_back('"');
  }
  out.push_back(')');
  return out;
}

std::string render_calls(const std::vector<ApiCall>& calls) {
  std::vector<std::string> lines;
  lines.reserve(calls.size());
  for (const auto& c : calls) lines.push_back(render_call(c));
  return join(lines, "\n");
}

std::vector<SlotTriplet> to_triplets(const std::vector<ApiCall>& calls) {
  std::vector<SlotTriplet> out;
  for (const auto& call : calls) {
    if (call.arguments.empty()) {
      out.push_back({call.function, "", ""});
      continue;
    }
    for (const auto& [name, value] : call.arguments) {
      out.push_back({call.function, name, value});
    }
  }
  return out;
}

SlotTriplet normalize_triplet(const SlotTriplet& t) {
  return {to_lower(trim(t.function)), to_lower(trim(t.argument)),
          to_lower(collapse_ws(t.value))};
}

std::string normalized_key(const SlotTriplet& t) {
  SlotTriplet n = normalize_triplet(t);
  // \x1f never occurs in call text; safe field separator.
  return n.function + "\x1f" + n.argument + "\x1f" + n.value;
}

}  // namespace taps
