#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace taps {

struct ApiCall {
  std::string function;
  // Ordered (name, value) pairs; names unique within the call. Values are
  // raw text, uninterpreted.
  std::vector<std::pair<std::string, std::string>> arguments;

  bool operator==(const ApiCall&) const = default;
};

// The (function, argument, value) unit of evaluation. An argumentless call
// contributes a sentinel triplet (function, "", "").
struct SlotTriplet {
  std::string function;
  std::string argument;
  std::string value;

  bool operator==(const SlotTriplet&) const = default;
};

struct DiscardedSpan {
  std::string text;
  std::string reason;  // prose | markdown-fence | list-marker | whitespace | malformed-call: ...
};

struct ParseReport {
  std::vector<ApiCall> calls;
  // Byte interval of the input each call was parsed from, aligned with calls.
  std::vector<std::pair<std::size_t, std::size_t>> call_spans;
  std::vector<DiscardedSpan> discarded_spans;
};

// Extracts every maximal call-shaped span from arbitrary model output.
// All input text is attributed either to a call or to a discarded span.
ParseReport parse_calls(std::string_view text);

// Canonical text form: Function(arg1="v1", arg2="v2").
std::string render_call(const ApiCall& call);

// One call per line.
std::string render_calls(const std::vector<ApiCall>& calls);

std::vector<SlotTriplet> to_triplets(const std::vector<ApiCall>& calls);

// Normalization used for triplet equality: names case-folded, values
// whitespace-collapsed and case-folded.
SlotTriplet normalize_triplet(const SlotTriplet& t);
std::string normalized_key(const SlotTriplet& t);

}  // namespace taps
