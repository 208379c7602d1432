#include <sstream>

#include "taps/corruption.hpp"
#include "taps/util.hpp"

namespace taps {

CorruptionStudy corruption_study(
    const std::vector<Instance>& dataset,
    const std::map<std::string, std::vector<TaggedInstruction>>& gold_tags,
    const ModelConfig& model, const ApiSchema& schema, const CorruptionStudyConfig& cfg,
    std::optional<std::string> cache_dir) {
  // Flatten instance tags in dataset order so unit identities are stable.
  std::vector<TaggedInstruction> flat;
  std::vector<std::pair<std::string, std::size_t>> layout;  // (instance id, tag count)
  for (const auto& instance : dataset) {
    auto it = gold_tags.find(instance.id);
    if (it == gold_tags.end()) {
      throw Error("missing gold tags for instance " + instance.id);
    }
    layout.emplace_back(instance.id, it->second.size());
    for (const auto& t : it->second) flat.push_back(t);
  }

  std::uint64_t derived_seed = fnv1a64("corruption-study", cfg.seed);

  CorruptionStudy study;
  for (int rate : cfg.rates) {
    CorruptionConfig corruption_cfg;
    corruption_cfg.rate = rate;
    corruption_cfg.operators = cfg.operators;
    corruption_cfg.shift_magnitude = cfg.shift_magnitude;
    corruption_cfg.seed = derived_seed;
    corruption_cfg.instruction_level = cfg.instruction_level;
    CorruptionOutcome outcome = corrupt(flat, schema, corruption_cfg);

    std::map<std::string, std::vector<TaggedInstruction>> injected;
    std::size_t cursor = 0;
    for (const auto& [id, count] : layout) {
      injected[id] = std::vector<TaggedInstruction>(
          outcome.tags.begin() + static_cast<long>(cursor),
          outcome.tags.begin() + static_cast<long>(cursor + count));
      cursor += count;
    }

    RunConfig run_cfg;
    run_cfg.mode = RunMode::ExtTag;
    run_cfg.base_model = model;
    run_cfg.preset_tags = std::move(injected);
    run_cfg.seed = cfg.seed;
    Pipeline pipeline(run_cfg, schema, cache_dir);
    RunResult result = pipeline.run_dataset(dataset, cfg.parallelism);

    CorruptionCurvePoint point;
    point.rate = rate;
    point.report = std::move(result.report);
    point.units = outcome.units;
    point.selected = outcome.selected;
    point.corrupted = outcome.corrupted;
    point.skipped = outcome.skipped;
    study.points.push_back(std::move(point));
  }
  return study;
}

std::string curve_to_tsv(const CorruptionStudy& study) {
  std::ostringstream ss;
  ss << "rate\tem\tf1\tprecision\trecall\tunits\tselected\tcorrupted\tskipped\n";
  for (const auto& point : study.points) {
    ss << point.rate << '\t' << point.report.overall.exact_match << '\t'
       << point.report.overall.f1 << '\t' << point.report.overall.precision << '\t'
       << point.report.overall.recall << '\t' << point.units << '\t' << point.selected << '\t'
       << point.corrupted << '\t' << point.skipped << '\n';
  }
  return ss.str();
}

}  // namespace taps
