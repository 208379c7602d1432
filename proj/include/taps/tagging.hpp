#pragma once

#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "taps/calls.hpp"
#include "taps/schema.hpp"

namespace taps {

// Token index interval [begin, end), over the whitespace tokens of the
// untagged instruction.
struct TokenRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool contains(const TokenRange& inner) const {
    return begin <= inner.begin && inner.end <= end;
  }
  bool overlaps(const TokenRange& other) const {
    return begin < other.end && other.begin < end;
  }
  bool operator==(const TokenRange&) const = default;
};

struct SlotSpan {
  std::string slot;
  TokenRange range;

  bool operator==(const SlotSpan&) const = default;
};

struct ActionSpan {
  std::string api;
  TokenRange range;
  std::vector<SlotSpan> slots;

  bool operator==(const ActionSpan&) const = default;
};

// A standing instruction annotated with nested action/slot spans. Stripping
// the tags always reproduces the original token sequence.
struct TaggedInstruction {
  std::vector<std::string> tokens;
  std::vector<ActionSpan> actions;

  bool operator==(const TaggedInstruction&) const = default;
};

enum class TagViolationKind { UnknownApi, SlotNotInApi, Nesting, TokenMismatch, Malformed };

struct TagViolation {
  TagViolationKind kind;
  std::string detail;
};

std::string_view to_string(TagViolationKind kind);

using TagParseResult = std::variant<TaggedInstruction, std::vector<TagViolation>>;

// Parses the canonical angle-bracket syntax <a:NAME> ... </a> with nested
// <sl:NAME> ... </sl>, plus the bracket form [IN:NAME ...]/[SL:NAME ...]
// which is normalized into the same structure. Malformed input yields the
// full violation list, never a partial structure.
TagParseResult parse_tagged(std::string_view text);

// Convenience wrapper that throws taps::Error on violations.
TaggedInstruction parse_tagged_or_throw(std::string_view text);

// Deterministic inverse of parse_tagged on valid structures.
std::string render_tagged(const TaggedInstruction& t);

// Removes all tag markup; the whitespace-normalized result equals the
// original instruction.
std::string strip_tags(std::string_view text);

// Maps surface names onto canonical schema casing (case-insensitive, also
// resolving SCREAMING_SNAKE forms like GET_FLIGHTS). Unresolvable names are
// left as written for validate_tags to flag.
TaggedInstruction canonicalize_names(const TaggedInstruction& t, const ApiSchema& schema);

std::vector<TagViolation> validate_tags(const TaggedInstruction& t, const ApiSchema& schema);

// One triplet per slot span; a slot-less action contributes the sentinel
// (api, "", "") so function presence still scores.
std::vector<SlotTriplet> triplets_from_tags(const TaggedInstruction& t);

// Deterministic call reconstruction from tagged instructions: one call per
// distinct api (first-seen order), arguments merged across actions in span
// order, first value winning on duplicate slot names.
std::vector<ApiCall> calls_from_tags(const std::vector<TaggedInstruction>& tags,
                                     const ApiSchema& schema);

struct TaggingScores {
  double precision = 0.0;  // percent, macro over label classes
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t classes = 0;
};

// Token-classification scoring: every token carries an action-layer label
// (api name or O) and a slot-layer label (slot name or O); per-class P/R/F1
// are macro-averaged over the classes present in pred or gold.
TaggingScores tagging_metrics(const std::vector<TaggedInstruction>& pred,
                              const std::vector<TaggedInstruction>& gold);

}  // namespace taps
