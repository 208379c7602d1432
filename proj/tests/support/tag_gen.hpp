#pragma once

#include "taps/tagging.hpp"
#include "taps/util.hpp"

namespace taps::testing {

// Random structurally-valid tagged instruction for round-trip properties:
// non-overlapping actions over plausible word tokens, nested non-overlapping
// slots, names drawn from identifier characters.
inline TaggedInstruction random_tagged(Rng& rng) {
  static const std::string word_chars = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ";
  static const std::string tail_chars = ".,!?';:";

  auto word = [&]() {
    std::string w;
    std::size_t len = 1 + rng.uniform_int(9);
    for (std::size_t i = 0; i < len; ++i) w += word_chars[rng.uniform_int(word_chars.size())];
    if (rng.uniform_int(5) == 0) w += tail_chars[rng.uniform_int(tail_chars.size())];
    return w;
  };
  auto name = [&]() {
    std::string n = "Get";
    std::size_t len = 2 + rng.uniform_int(8);
    for (std::size_t i = 0; i < len; ++i) n += word_chars[rng.uniform_int(word_chars.size())];
    return n;
  };
  auto slot_name = [&]() {
    std::string n;
    std::size_t parts = 1 + rng.uniform_int(3);
    for (std::size_t p = 0; p < parts; ++p) {
      if (p) n += "_";
      std::size_t len = 1 + rng.uniform_int(6);
      for (std::size_t i = 0; i < len; ++i) {
        n += static_cast<char>(std::tolower(word_chars[rng.uniform_int(26)]));
      }
    }
    return n;
  };

  TaggedInstruction t;
  std::size_t token_count = 1 + rng.uniform_int(20);
  for (std::size_t i = 0; i < token_count; ++i) t.tokens.push_back(word());

  std::size_t cursor = 0;
  while (cursor < token_count && t.actions.size() < 3) {
    if (rng.uniform_int(3) == 0) {  // gap
      cursor += 1 + rng.uniform_int(3);
      continue;
    }
    std::size_t remaining = token_count - cursor;
    std::size_t span = 1 + rng.uniform_int(remaining);
    ActionSpan action;
    action.api = name();
    action.range = {cursor, cursor + span};

    std::size_t slot_cursor = cursor;
    while (slot_cursor < action.range.end && action.slots.size() < 3) {
      if (rng.uniform_int(2) == 0) {
        ++slot_cursor;
        continue;
      }
      std::size_t slot_span = 1 + rng.uniform_int(action.range.end - slot_cursor);
      if (slot_span > 4) slot_span = 4;
      action.slots.push_back({slot_name(), {slot_cursor, slot_cursor + slot_span}});
      slot_cursor += slot_span;
    }
    t.actions.push_back(std::move(action));
    cursor += span;
  }
  return t;
}

}  // namespace taps::testing
