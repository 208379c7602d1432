#pragma once

#include <optional>
#include <string>
#include <vector>

#include "taps/calls.hpp"

namespace taps {

struct DialogueTurn {
  std::string speaker;
  std::string text;
};

// One dataset record: the dialogue, the gold-selected standing instructions,
// and the target calls. The selection subtask is upstream of this harness.
struct Instance {
  std::string id;
  std::vector<DialogueTurn> dialogue;
  std::vector<std::string> applicable_instructions;
  std::optional<std::vector<std::string>> all_instructions;
  std::vector<ApiCall> gold_calls;
  std::string reasoning_type;
};

// "Speaker: text" lines joined by newlines; the prompt's user_utterance field.
std::string render_dialogue(const Instance& instance);

}  // namespace taps
