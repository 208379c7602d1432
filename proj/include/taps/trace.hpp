#pragma once

#include <optional>
#include <string>
#include <vector>

namespace taps {

struct TokenAlt {
  std::string token;
  double logprob = 0.0;  // natural log, <= 0
};

struct TraceStep {
  TokenAlt chosen;
  std::vector<TokenAlt> topk;  // sorted by logprob descending; contains chosen
};

struct SequenceCandidate {
  std::string text;
  double sequence_logprob = 0.0;
};

// Model output plus the per-token alternatives and optional whole-sequence
// candidates the uncertainty estimators consume.
struct GenerationTrace {
  std::string text;
  std::vector<TraceStep> steps;
  // Sorted by sequence_logprob descending when present.
  std::vector<SequenceCandidate> candidates;

  bool has_logprobs() const { return !steps.empty(); }
};

}  // namespace taps
