#include "taps/corruption.hpp"

#include <algorithm>
#include <tuple>

#include "taps/util.hpp"

namespace taps {

namespace {

struct UnitRef {
  std::size_t instruction;
  std::size_t action;
  // Slot index within the action, or npos for the action span itself.
  std::size_t slot;
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  bool is_slot() const { return slot != npos; }

  std::string stable_id() const {
    return std::to_string(instruction) + ":" + std::to_string(action) + ":" +
           (is_slot() ? std::to_string(slot) : "a");
  }
};

// A boundary move: which edge, and the signed token delta applied to it.
struct Shift {
  bool left_edge;
  long delta;
};

std::vector<Shift> feasible_shifts(const ActionSpan& action, std::size_t slot_idx,
                                   std::size_t magnitude) {
  const SlotSpan& slot = action.slots[slot_idx];
  long m = static_cast<long>(magnitude);
  long begin = static_cast<long>(slot.range.begin);
  long end = static_cast<long>(slot.range.end);
  long lo = static_cast<long>(action.range.begin);
  long hi = static_cast<long>(action.range.end);
  if (slot_idx > 0) lo = static_cast<long>(action.slots[slot_idx - 1].range.end);
  if (slot_idx + 1 < action.slots.size()) {
    hi = static_cast<long>(action.slots[slot_idx + 1].range.begin);
  }

  std::vector<Shift> out;
  auto valid = [&](long b, long e) { return lo <= b && b < e && e <= hi; };
  if (valid(begin - m, end)) out.push_back({true, -m});   // grow left
  if (valid(begin + m, end)) out.push_back({true, m});    // shrink left
  if (valid(begin, end - m)) out.push_back({false, -m});  // shrink right
  if (valid(begin, end + m)) out.push_back({false, m});   // grow right
  return out;
}

}  // namespace

std::string_view to_string(CorruptionOp op) {
  switch (op) {
    case CorruptionOp::SlotDeletion: return "slot-deletion";
    case CorruptionOp::BoundaryShift: return "boundary-shift";
    case CorruptionOp::NameSubstitution: return "name-substitution";
  }
  return "?";
}

CorruptionOutcome corrupt(const std::vector<TaggedInstruction>& tags,
                          const ApiSchema& schema,
                          const CorruptionConfig& cfg) {
  if (cfg.rate < 0 || cfg.rate > 100) throw Error("corruption rate must be in [0, 100]");
  if (cfg.operators.empty()) throw Error("corruption needs at least one operator");
  if (cfg.shift_magnitude == 0) throw Error("shift magnitude must be >= 1");

  CorruptionOutcome outcome;
  outcome.tags = tags;

  auto span_units_of = [&](std::size_t i) {
    std::vector<UnitRef> units;
    for (std::size_t a = 0; a < tags[i].actions.size(); ++a) {
      units.push_back({i, a, UnitRef::npos});
      for (std::size_t s = 0; s < tags[i].actions[a].slots.size(); ++s) {
        units.push_back({i, a, s});
      }
    }
    return units;
  };

  // The shuffled order depends only on the seed, so for a fixed seed a
  // higher rate corrupts a strict superset of a lower rate's units, and
  // per-unit draws are keyed by the unit's stable id rather than draw order.
  // Slot deletions are deferred past the loop to keep slot indices valid.
  std::vector<UnitRef> units;
  Rng selector(cfg.seed);
  if (cfg.instruction_level) {
    std::vector<std::size_t> tagged_instructions;
    for (std::size_t i = 0; i < tags.size(); ++i) {
      if (!tags[i].actions.empty()) tagged_instructions.push_back(i);
    }
    outcome.units = tagged_instructions.size();
    std::size_t pick = (static_cast<std::size_t>(cfg.rate) * outcome.units + 99) / 100;
    outcome.selected = pick;
    selector.shuffle(tagged_instructions);
    for (std::size_t k = 0; k < pick; ++k) {
      for (const auto& unit : span_units_of(tagged_instructions[k])) units.push_back(unit);
    }
  } else {
    for (std::size_t i = 0; i < tags.size(); ++i) {
      for (const auto& unit : span_units_of(i)) units.push_back(unit);
    }
    outcome.units = units.size();
    outcome.selected = (static_cast<std::size_t>(cfg.rate) * units.size() + 99) / 100;
    selector.shuffle(units);
    units.resize(outcome.selected);
  }
  if (units.empty()) return outcome;

  std::vector<std::string> function_pool;
  for (const auto& fn : schema.functions()) function_pool.push_back(fn.name);
  std::vector<std::string> slot_pool = schema.all_slot_names();

  std::vector<CorruptionOp> enabled(cfg.operators.begin(), cfg.operators.end());
  std::sort(enabled.begin(), enabled.end());

  std::vector<std::tuple<std::size_t, std::size_t, std::size_t>> deletions;

  for (std::size_t k = 0; k < units.size(); ++k) {
    const UnitRef& unit = units[k];
    Rng rng(fnv1a64(unit.stable_id(), cfg.seed ^ 0x9e3779b97f4a7c15ULL));
    ActionSpan& action = outcome.tags[unit.instruction].actions[unit.action];

    std::vector<CorruptionOp> candidates = enabled;
    bool done = false;
    while (!candidates.empty() && !done) {
      std::size_t pick = static_cast<std::size_t>(rng.uniform_int(candidates.size()));
      CorruptionOp op = candidates[pick];
      candidates.erase(candidates.begin() + static_cast<long>(pick));

      switch (op) {
        case CorruptionOp::SlotDeletion: {
          if (!unit.is_slot()) break;
          deletions.emplace_back(unit.instruction, unit.action, unit.slot);
          outcome.deletions++;
          done = true;
          break;
        }
        case CorruptionOp::BoundaryShift: {
          if (!unit.is_slot()) break;
          auto shifts = feasible_shifts(action, unit.slot, cfg.shift_magnitude);
          if (shifts.empty()) break;
          Shift shift = shifts[static_cast<std::size_t>(rng.uniform_int(shifts.size()))];
          SlotSpan& slot = action.slots[unit.slot];
          if (shift.left_edge) {
            slot.range.begin =
                static_cast<std::size_t>(static_cast<long>(slot.range.begin) + shift.delta);
          } else {
            slot.range.end =
                static_cast<std::size_t>(static_cast<long>(slot.range.end) + shift.delta);
          }
          outcome.shifts++;
          done = true;
          break;
        }
        case CorruptionOp::NameSubstitution: {
          const std::vector<std::string>& pool = unit.is_slot() ? slot_pool : function_pool;
          const std::string& current =
              unit.is_slot() ? action.slots[unit.slot].slot : action.api;
          std::vector<std::string> options;
          for (const auto& name : pool) {
            if (!iequals(name, current)) options.push_back(name);
          }
          if (options.empty()) break;
          const std::string& replacement =
              options[static_cast<std::size_t>(rng.uniform_int(options.size()))];
          if (unit.is_slot()) {
            action.slots[unit.slot].slot = replacement;
          } else {
            action.api = replacement;
          }
          outcome.substitutions++;
          done = true;
          break;
        }
      }
    }
    if (done) {
      outcome.corrupted++;
    } else {
      outcome.skipped++;
    }
  }

  std::sort(deletions.rbegin(), deletions.rend());
  for (const auto& [i, a, s] : deletions) {
    auto& slots = outcome.tags[i].actions[a].slots;
    slots.erase(slots.begin() + static_cast<long>(s));
  }

  return outcome;
}

}  // namespace taps
