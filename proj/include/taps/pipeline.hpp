#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "taps/gateway.hpp"
#include "taps/instance.hpp"
#include "taps/metrics.hpp"
#include "taps/uncertainty.hpp"

namespace taps {

enum class RunMode {
  Default,
  ExtTag,
  ExtTagOpt,
  JointTag,
  Taps,
  TapsOpt,
  TapsOracle,
  TapsOracleOpt,
};

RunMode run_mode_from_string(std::string_view name);
std::string_view to_string(RunMode mode);

struct RunConfig {
  RunMode mode = RunMode::Default;
  ModelConfig base_model;
  std::optional<ModelConfig> tagger_model;  // required for the *Opt modes
  std::optional<Threshold> threshold;       // required for Taps/TapsOpt
  std::string default_template = "default_v1";
  std::string ext_template = "ext_tag_v1";
  std::string joint_template = "joint_tag";
  std::string tagger_template = "tagger";
  std::string split = "test";
  DemoSet demos_default;
  DemoSet demos_ext;
  DemoSet demos_joint;
  std::optional<DemoSet> demos_tagger;  // defaults to the built-in static demo
  std::uint64_t seed = 0;
  ScoreOptions scoring;
  // When set, these tags replace the live tagger (used by the corruption
  // study to inject perturbed gold tags).
  std::optional<std::map<std::string, std::vector<TaggedInstruction>>> preset_tags;

  void validate() const;
  static RunConfig from_json_text(std::string_view text);
  std::string to_json() const;
};

struct TraceSummary {
  std::size_t steps = 0;
  std::optional<double> least_confidence;
  std::vector<double> margin_gaps;  // per-step top-1/top-2 probability gaps
  std::optional<double> sequence_margin;
};

struct PredictionRecord {
  std::string instance_id;
  std::vector<ApiCall> first_answer;
  TraceSummary first_trace;
  std::optional<double> uncertainty;
  bool tool_invoked = false;
  std::optional<std::vector<std::string>> tags_used;  // canonical tagged texts
  std::vector<ApiCall> final_answer;
  InstanceScore score;
  std::string failure;  // empty when the instance ran clean
};

std::string record_to_json(const PredictionRecord& record);
PredictionRecord record_from_json(std::string_view text);

struct LoadedDataset {
  std::vector<Instance> instances;
  std::vector<std::string> warnings;
};

// Line-delimited records; gold calls are validated against the schema with
// violations logged as warnings, never rejected.
LoadedDataset load_dataset(const std::string& path, const ApiSchema& schema);

struct RunResult {
  std::vector<PredictionRecord> records;  // sorted by instance id
  Report report;
  std::vector<GenerationTrace> first_traces;  // aligned with records
};

class Pipeline {
 public:
  Pipeline(RunConfig cfg, const ApiSchema& schema,
           std::optional<std::string> cache_dir = std::nullopt);

  PredictionRecord run_instance(const Instance& instance);
  RunResult run_dataset(const std::vector<Instance>& instances, std::size_t parallelism = 1);

  const RunConfig& config() const { return cfg_; }

 private:
  struct PathOutcome {
    std::vector<ApiCall> calls;
    GenerationTrace trace;
    std::optional<std::vector<std::string>> tags;
  };

  PathOutcome default_path(const Instance& instance);
  PathOutcome ext_tag_path(const Instance& instance);
  PathOutcome joint_path(const Instance& instance);
  std::vector<TaggedInstruction> tags_for(const Instance& instance);

  PredictionRecord run_guarded(const Instance& instance, GenerationTrace* trace_out);

  RunConfig cfg_;
  const ApiSchema& schema_;
  std::unique_ptr<Gateway> base_;
  std::unique_ptr<Gateway> tagger_;  // null when the base model tags
  PromptTemplate tmpl_default_;
  PromptTemplate tmpl_ext_;
  PromptTemplate tmpl_joint_;
  PromptTemplate tmpl_tagger_;
  DemoSet tagger_demos_;
};

TraceSummary summarize_trace(const GenerationTrace& trace);

}  // namespace taps
