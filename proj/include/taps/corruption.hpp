#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "taps/schema.hpp"
#include "taps/tagging.hpp"

namespace taps {

enum class CorruptionOp { SlotDeletion, BoundaryShift, NameSubstitution };

std::string_view to_string(CorruptionOp op);

struct CorruptionConfig {
  int rate = 0;  // percent of taggable units, 0..100
  std::set<CorruptionOp> operators = {CorruptionOp::SlotDeletion, CorruptionOp::BoundaryShift,
                                      CorruptionOp::NameSubstitution};
  std::size_t shift_magnitude = 1;
  std::uint64_t seed = 0;
  // Default granularity is one tag span per unit; instruction granularity
  // instead selects whole instructions and perturbs every span they contain.
  bool instruction_level = false;
};

struct CorruptionOutcome {
  std::vector<TaggedInstruction> tags;
  std::size_t units = 0;      // taggable units seen (slot spans + action spans)
  std::size_t selected = 0;   // ceil(rate% of units)
  std::size_t corrupted = 0;  // units actually altered
  std::size_t skipped = 0;    // selected units with no applicable operator
  std::size_t deletions = 0;
  std::size_t shifts = 0;
  std::size_t substitutions = 0;
};

// Perturbs the given share of tag spans with the enabled error operators.
// Deterministic in (tags, cfg); the stripped token sequence of every
// instruction is preserved. For a fixed seed the selected unit set at a
// lower rate is a subset of the set at any higher rate, so metric curves
// over a rate grid degrade monotonically per seed.
CorruptionOutcome corrupt(const std::vector<TaggedInstruction>& tags,
                          const ApiSchema& schema,
                          const CorruptionConfig& cfg);

}  // namespace taps

#include "taps/pipeline.hpp"

namespace taps {

struct CorruptionStudyConfig {
  std::vector<int> rates = {0, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
  std::set<CorruptionOp> operators = {CorruptionOp::SlotDeletion, CorruptionOp::BoundaryShift,
                                      CorruptionOp::NameSubstitution};
  std::size_t shift_magnitude = 1;
  std::uint64_t seed = 0;
  std::size_t parallelism = 1;
  bool instruction_level = false;
};

struct CorruptionCurvePoint {
  int rate = 0;
  Report report;
  std::size_t units = 0;
  std::size_t selected = 0;
  std::size_t corrupted = 0;
  std::size_t skipped = 0;
};

struct CorruptionStudy {
  std::vector<CorruptionCurvePoint> points;
};

// Runs the generation pipeline with corrupted gold tags injected in place of
// a live tagger, once per rate, and scores against the gold calls. One seed
// is derived from cfg.seed and shared across rates so the corrupted unit
// sets nest and the resulting curve degrades monotonically.
CorruptionStudy corruption_study(const std::vector<Instance>& dataset,
                                 const std::map<std::string, std::vector<TaggedInstruction>>& gold_tags,
                                 const ModelConfig& model, const ApiSchema& schema,
                                 const CorruptionStudyConfig& cfg,
                                 std::optional<std::string> cache_dir = std::nullopt);

// Flat tabular export (rate, EM, F1, P, R) for external plotting.
std::string curve_to_tsv(const CorruptionStudy& study);

}  // namespace taps
