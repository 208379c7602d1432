#include "taps/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "taps/util.hpp"

namespace taps {

namespace {

using nlohmann::json;

constexpr std::string_view kJointMarker = "API Calls:";

const std::map<std::string, RunMode>& mode_names() {
  static const std::map<std::string, RunMode> names = {
      {"default", RunMode::Default},
      {"ext-tag", RunMode::ExtTag},
      {"ext-tag-opt", RunMode::ExtTagOpt},
      {"joint-tag", RunMode::JointTag},
      {"taps", RunMode::Taps},
      {"taps-opt", RunMode::TapsOpt},
      {"taps-oracle", RunMode::TapsOracle},
      {"taps-oracle-opt", RunMode::TapsOracleOpt},
  };
  return names;
}

bool mode_uses_tagger_model(RunMode mode) {
  return mode == RunMode::ExtTagOpt || mode == RunMode::TapsOpt ||
         mode == RunMode::TapsOracleOpt;
}

bool mode_needs_threshold(RunMode mode) {
  return mode == RunMode::Taps || mode == RunMode::TapsOpt;
}

json demo_set_json(const DemoSet& demos) { return json::parse(demo_set_to_json(demos)); }

}  // namespace

RunMode run_mode_from_string(std::string_view name) {
  auto it = mode_names().find(to_lower(name));
  if (it == mode_names().end()) throw Error("unknown run mode: " + std::string(name));
  return it->second;
}

std::string_view to_string(RunMode mode) {
  for (const auto& [name, value] : mode_names()) {
    if (value == mode) return name;
  }
  return "?";
}

void RunConfig::validate() const {
  if (mode_uses_tagger_model(mode) && !tagger_model) {
    throw Error(std::string(to_string(mode)) + " requires a tagger model");
  }
  if (mode_needs_threshold(mode) && !threshold) {
    throw Error(std::string(to_string(mode)) + " requires a threshold");
  }
}

RunConfig RunConfig::from_json_text(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(std::string("malformed run config: ") + e.what());
  }
  RunConfig cfg;
  cfg.mode = run_mode_from_string(j.value("mode", "default"));
  if (j.contains("base_model")) cfg.base_model = ModelConfig::from_json_text(j.at("base_model").dump());
  if (j.contains("tagger_model")) {
    cfg.tagger_model = ModelConfig::from_json_text(j.at("tagger_model").dump());
  }
  if (j.contains("threshold")) {
    Threshold t;
    t.value = j.at("threshold").get<double>();
    cfg.threshold = t;
  }
  cfg.default_template = j.value("default_template", "default_v1");
  cfg.ext_template = j.value("ext_template", "ext_tag_v1");
  cfg.joint_template = j.value("joint_template", "joint_tag");
  cfg.tagger_template = j.value("tagger_template", "tagger");
  cfg.split = j.value("split", "test");
  if (j.contains("demos_default")) cfg.demos_default = demo_set_from_json(j.at("demos_default").dump());
  if (j.contains("demos_ext")) cfg.demos_ext = demo_set_from_json(j.at("demos_ext").dump());
  if (j.contains("demos_joint")) cfg.demos_joint = demo_set_from_json(j.at("demos_joint").dump());
  if (j.contains("demos_tagger")) cfg.demos_tagger = demo_set_from_json(j.at("demos_tagger").dump());
  cfg.seed = j.value("seed", std::uint64_t{0});
  cfg.scoring.set_mode = j.value("set_mode", false);
  return cfg;
}

std::string RunConfig::to_json() const {
  json j;
  j["mode"] = std::string(to_string(mode));
  j["base_model"] = json::parse(base_model.to_json());
  if (tagger_model) j["tagger_model"] = json::parse(tagger_model->to_json());
  if (threshold) j["threshold"] = threshold->value;
  j["default_template"] = default_template;
  j["ext_template"] = ext_template;
  j["joint_template"] = joint_template;
  j["tagger_template"] = tagger_template;
  j["split"] = split;
  if (!demos_default.demos.empty()) j["demos_default"] = demo_set_json(demos_default);
  if (!demos_ext.demos.empty()) j["demos_ext"] = demo_set_json(demos_ext);
  if (!demos_joint.demos.empty()) j["demos_joint"] = demo_set_json(demos_joint);
  if (demos_tagger) j["demos_tagger"] = demo_set_json(*demos_tagger);
  j["seed"] = seed;
  j["set_mode"] = scoring.set_mode;
  return j.dump(2);
}

TraceSummary summarize_trace(const GenerationTrace& trace) {
  TraceSummary summary;
  summary.steps = trace.steps.size();
  if (trace.has_logprobs()) {
    summary.least_confidence = least_confidence(trace);
    bool have_top2 = true;
    for (const auto& step : trace.steps) have_top2 = have_top2 && step.topk.size() >= 2;
    if (have_top2) {
      for (const auto& step : trace.steps) {
        summary.margin_gaps.push_back(std::exp(step.topk[0].logprob) -
                                      std::exp(step.topk[1].logprob));
      }
    }
  }
  if (trace.candidates.size() >= 2) summary.sequence_margin = sequence_margin(trace);
  return summary;
}

std::string record_to_json(const PredictionRecord& record) {
  json j;
  j["id"] = record.instance_id;
  auto calls_json = [](const std::vector<ApiCall>& calls) {
    json arr = json::array();
    for (const auto& call : calls) arr.push_back(render_call(call));
    return arr;
  };
  j["first_answer"] = calls_json(record.first_answer);
  j["final_answer"] = calls_json(record.final_answer);
  json trace;
  trace["steps"] = record.first_trace.steps;
  if (record.first_trace.least_confidence) {
    trace["least_confidence"] = *record.first_trace.least_confidence;
  }
  if (!record.first_trace.margin_gaps.empty()) {
    trace["margin_gaps"] = record.first_trace.margin_gaps;
  }
  if (record.first_trace.sequence_margin) {
    trace["sequence_margin"] = *record.first_trace.sequence_margin;
  }
  j["trace"] = trace;
  if (record.uncertainty) j["uncertainty"] = *record.uncertainty;
  j["tool_invoked"] = record.tool_invoked;
  if (record.tags_used) j["tags_used"] = *record.tags_used;
  j["score"] = json{{"em", record.score.exact_match},
                    {"precision", record.score.precision},
                    {"recall", record.score.recall},
                    {"f1", record.score.f1}};
  if (!record.failure.empty()) j["failure"] = record.failure;
  return j.dump();
}

PredictionRecord record_from_json(std::string_view text) {
  json j = json::parse(text);
  PredictionRecord record;
  record.instance_id = j.at("id").get<std::string>();
  auto parse_list = [](const json& arr) {
    std::vector<ApiCall> calls;
    for (const auto& line : arr) {
      ParseReport report = parse_calls(line.get<std::string>());
      for (auto& call : report.calls) calls.push_back(std::move(call));
    }
    return calls;
  };
  record.first_answer = parse_list(j.at("first_answer"));
  record.final_answer = parse_list(j.at("final_answer"));
  if (j.contains("trace")) {
    const json& trace = j.at("trace");
    record.first_trace.steps = trace.value("steps", std::size_t{0});
    if (trace.contains("least_confidence")) {
      record.first_trace.least_confidence = trace.at("least_confidence").get<double>();
    }
    if (trace.contains("margin_gaps")) {
      record.first_trace.margin_gaps = trace.at("margin_gaps").get<std::vector<double>>();
    }
    if (trace.contains("sequence_margin")) {
      record.first_trace.sequence_margin = trace.at("sequence_margin").get<double>();
    }
  }
  if (j.contains("uncertainty")) record.uncertainty = j.at("uncertainty").get<double>();
  record.tool_invoked = j.value("tool_invoked", false);
  if (j.contains("tags_used")) {
    record.tags_used = j.at("tags_used").get<std::vector<std::string>>();
  }
  if (j.contains("score")) {
    record.score.exact_match = j.at("score").value("em", 0.0);
    record.score.precision = j.at("score").value("precision", 0.0);
    record.score.recall = j.at("score").value("recall", 0.0);
    record.score.f1 = j.at("score").value("f1", 0.0);
  }
  record.failure = j.value("failure", "");
  return record;
}

LoadedDataset load_dataset(const std::string& path, const ApiSchema& schema) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dataset: " + path);

  LoadedDataset out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error("dataset line " + std::to_string(line_no) + ": " + e.what());
    }
    Instance instance;
    try {
      instance.id = j.at("id").get<std::string>();
      for (const auto& turn : j.at("dialogue")) {
        instance.dialogue.push_back(
            {turn.at("speaker").get<std::string>(), turn.at("text").get<std::string>()});
      }
      instance.applicable_instructions =
          j.at("applicable_instructions").get<std::vector<std::string>>();
      if (j.contains("all_instructions")) {
        instance.all_instructions = j.at("all_instructions").get<std::vector<std::string>>();
      }
      for (const auto& call_text : j.at("gold_calls")) {
        ParseReport report = parse_calls(call_text.get<std::string>());
        if (report.calls.empty()) {
          out.warnings.push_back("line " + std::to_string(line_no) +
                                 ": unparseable gold call: " + call_text.get<std::string>());
          continue;
        }
        for (auto& call : report.calls) instance.gold_calls.push_back(std::move(call));
      }
      instance.reasoning_type = j.value("reasoning_type", "Plain");
    } catch (const json::exception& e) {
      throw Error("dataset line " + std::to_string(line_no) + ": missing field: " + e.what());
    }
    if (instance.gold_calls.size() > 3) {
      out.warnings.push_back("line " + std::to_string(line_no) + ": instance " + instance.id +
                             " has " + std::to_string(instance.gold_calls.size()) +
                             " gold calls (dataset allows up to 3)");
    }
    if (std::find(kReasoningTypes.begin(), kReasoningTypes.end(), instance.reasoning_type) ==
        kReasoningTypes.end()) {
      out.warnings.push_back("line " + std::to_string(line_no) + ": unknown reasoning type " +
                             instance.reasoning_type);
    }
    for (const auto& call : instance.gold_calls) {
      for (const auto& violation : validate_call(schema, call)) {
        out.warnings.push_back("line " + std::to_string(line_no) + ": gold call violation [" +
                               std::string(to_string(violation.kind)) + "] " + violation.detail);
      }
    }
    out.instances.push_back(std::move(instance));
  }
  return out;
}

Pipeline::Pipeline(RunConfig cfg, const ApiSchema& schema, std::optional<std::string> cache_dir)
    : cfg_(std::move(cfg)),
      schema_(schema),
      tmpl_default_(PromptTemplate::bundled(cfg_.default_template)),
      tmpl_ext_(PromptTemplate::bundled(cfg_.ext_template)),
      tmpl_joint_(PromptTemplate::bundled(cfg_.joint_template)),
      tmpl_tagger_(PromptTemplate::bundled(cfg_.tagger_template)) {
  cfg_.validate();
  base_ = std::make_unique<Gateway>(cfg_.base_model, schema_, cache_dir);
  if (mode_uses_tagger_model(cfg_.mode)) {
    tagger_ = std::make_unique<Gateway>(*cfg_.tagger_model, schema_, cache_dir);
  }
  tagger_demos_ = cfg_.demos_tagger ? *cfg_.demos_tagger : default_tagger_demos();
}

std::vector<TaggedInstruction> Pipeline::tags_for(const Instance& instance) {
  if (cfg_.preset_tags) {
    auto it = cfg_.preset_tags->find(instance.id);
    if (it == cfg_.preset_tags->end()) {
      throw Error("no preset tags for instance " + instance.id);
    }
    return it->second;
  }
  Gateway& tagger = tagger_ ? *tagger_ : *base_;
  RenderContext ctx{tagger.config().model_name, cfg_.split};
  ModelTags tagged =
      tag_with_model(tagger, instance.applicable_instructions, schema_, tmpl_tagger_,
                     tagger_demos_, ctx);
  return tagged.tags;
}

Pipeline::PathOutcome Pipeline::default_path(const Instance& instance) {
  RenderContext ctx{base_->config().model_name, cfg_.split};
  std::string prompt =
      build_prompt(tmpl_default_, schema_, instance_prompt_vars(instance), cfg_.demos_default, ctx);
  PathOutcome outcome;
  outcome.trace = base_->complete(prompt);
  outcome.calls = parse_calls(outcome.trace.text).calls;
  return outcome;
}

Pipeline::PathOutcome Pipeline::ext_tag_path(const Instance& instance) {
  std::vector<TaggedInstruction> tags = tags_for(instance);

  std::vector<std::string> tagged_texts;
  tagged_texts.reserve(tags.size());
  for (const auto& t : tags) tagged_texts.push_back(render_tagged(t));

  PromptVars vars = instance_prompt_vars(instance);
  vars["tagged_applicable_instructions"] = tagged_texts;
  RenderContext ctx{base_->config().model_name, cfg_.split};
  std::string prompt = build_prompt(tmpl_ext_, schema_, vars, cfg_.demos_ext, ctx);

  PathOutcome outcome;
  outcome.trace = base_->complete(prompt);
  outcome.calls = parse_calls(outcome.trace.text).calls;
  outcome.tags = std::move(tagged_texts);
  return outcome;
}

Pipeline::PathOutcome Pipeline::joint_path(const Instance& instance) {
  RenderContext ctx{base_->config().model_name, cfg_.split};
  std::string prompt =
      build_prompt(tmpl_joint_, schema_, instance_prompt_vars(instance), cfg_.demos_joint, ctx);

  PathOutcome outcome;
  outcome.trace = base_->complete(prompt);
  const std::string& text = outcome.trace.text;

  // The tagged section and the call section are separated by the template's
  // literal marker; without it, the whole output is scanned for calls.
  std::size_t marker = text.find(kJointMarker);
  std::string call_section = marker == std::string::npos
                                 ? text
                                 : text.substr(marker + kJointMarker.size());
  outcome.calls = parse_calls(call_section).calls;

  if (marker != std::string::npos) {
    std::vector<std::string> tagged_texts;
    for (const auto& line : split_lines(text.substr(0, marker))) {
      std::string candidate = trim(line);
      if (candidate.rfind("> ", 0) == 0) candidate = candidate.substr(2);
      if (candidate.empty()) continue;
      TagParseResult parsed = parse_tagged(candidate);
      if (auto* t = std::get_if<TaggedInstruction>(&parsed)) {
        tagged_texts.push_back(render_tagged(canonicalize_names(*t, schema_)));
      }
    }
    if (!tagged_texts.empty()) outcome.tags = std::move(tagged_texts);
  }
  return outcome;
}

PredictionRecord Pipeline::run_guarded(const Instance& instance, GenerationTrace* trace_out) {
  PredictionRecord record;
  record.instance_id = instance.id;

  switch (cfg_.mode) {
    case RunMode::Default: {
      PathOutcome outcome = default_path(instance);
      record.first_answer = outcome.calls;
      record.final_answer = outcome.calls;
      record.first_trace = summarize_trace(outcome.trace);
      record.uncertainty = record.first_trace.least_confidence;
      if (trace_out) *trace_out = std::move(outcome.trace);
      break;
    }
    case RunMode::ExtTag:
    case RunMode::ExtTagOpt: {
      PathOutcome outcome = ext_tag_path(instance);
      record.first_answer = outcome.calls;
      record.final_answer = outcome.calls;
      record.first_trace = summarize_trace(outcome.trace);
      record.uncertainty = record.first_trace.least_confidence;
      record.tool_invoked = true;
      record.tags_used = outcome.tags;
      if (trace_out) *trace_out = std::move(outcome.trace);
      break;
    }
    case RunMode::JointTag: {
      PathOutcome outcome = joint_path(instance);
      record.first_answer = outcome.calls;
      record.final_answer = outcome.calls;
      record.first_trace = summarize_trace(outcome.trace);
      record.uncertainty = record.first_trace.least_confidence;
      record.tool_invoked = true;
      record.tags_used = outcome.tags;
      if (trace_out) *trace_out = std::move(outcome.trace);
      break;
    }
    case RunMode::Taps:
    case RunMode::TapsOpt: {
      PathOutcome first = default_path(instance);
      record.first_answer = first.calls;
      record.first_trace = summarize_trace(first.trace);
      if (!record.first_trace.least_confidence) {
        throw Error("tool detection needs token logprobs from the base model");
      }
      record.uncertainty = record.first_trace.least_confidence;
      if (*record.uncertainty > cfg_.threshold->value) {
        PathOutcome regen = ext_tag_path(instance);
        record.final_answer = regen.calls;
        record.tool_invoked = true;
        record.tags_used = regen.tags;
      } else {
        record.final_answer = first.calls;
      }
      if (trace_out) *trace_out = std::move(first.trace);
      break;
    }
    case RunMode::TapsOracle:
    case RunMode::TapsOracleOpt: {
      PathOutcome first = default_path(instance);
      PathOutcome regen = ext_tag_path(instance);
      record.first_answer = first.calls;
      record.first_trace = summarize_trace(first.trace);
      record.uncertainty = record.first_trace.least_confidence;
      double first_f1 = score_instance(first.calls, instance.gold_calls, cfg_.scoring).f1;
      double regen_f1 = score_instance(regen.calls, instance.gold_calls, cfg_.scoring).f1;
      if (regen_f1 > first_f1) {
        record.final_answer = regen.calls;
        record.tool_invoked = true;
        record.tags_used = regen.tags;
      } else {
        record.final_answer = first.calls;
      }
      if (trace_out) *trace_out = std::move(first.trace);
      break;
    }
  }

  record.score = score_instance(record.final_answer, instance.gold_calls, cfg_.scoring);
  return record;
}

PredictionRecord Pipeline::run_instance(const Instance& instance) {
  try {
    return run_guarded(instance, nullptr);
  } catch (const std::exception& e) {
    PredictionRecord record;
    record.instance_id = instance.id;
    record.failure = e.what();
    record.score = score_instance({}, instance.gold_calls, cfg_.scoring);
    return record;
  }
}

RunResult Pipeline::run_dataset(const std::vector<Instance>& instances, std::size_t parallelism) {
  RunResult result;
  result.records.resize(instances.size());
  result.first_traces.resize(instances.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    while (true) {
      std::size_t i = next.fetch_add(1);
      if (i >= instances.size()) return;
      try {
        result.records[i] = run_guarded(instances[i], &result.first_traces[i]);
      } catch (const std::exception& e) {
        PredictionRecord record;
        record.instance_id = instances[i].id;
        record.failure = e.what();
        record.score = score_instance({}, instances[i].gold_calls, cfg_.scoring);
        result.records[i] = std::move(record);
        result.first_traces[i] = {};
      }
    }
  };

  std::size_t workers = std::max<std::size_t>(1, parallelism);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (std::size_t i = 0; i < workers; ++i) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }

  // Deterministic aggregation order by instance id.
  std::vector<std::size_t> order(instances.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return result.records[a].instance_id < result.records[b].instance_id;
  });

  std::vector<PredictionRecord> records;
  std::vector<GenerationTrace> traces;
  std::vector<InstanceScore> scores;
  std::vector<std::string> types;
  std::size_t invoked = 0;
  std::size_t failures = 0;
  records.reserve(order.size());
  for (std::size_t idx : order) {
    records.push_back(std::move(result.records[idx]));
    traces.push_back(std::move(result.first_traces[idx]));
    scores.push_back(records.back().score);
    types.push_back(instances[idx].reasoning_type);
    if (records.back().tool_invoked) ++invoked;
    if (!records.back().failure.empty()) ++failures;
  }
  result.records = std::move(records);
  result.first_traces = std::move(traces);

  AggregateOptions agg_options;
  result.report = aggregate(scores, types, agg_options);
  result.report.failures = failures;
  if (!instances.empty()) {
    result.report.tool_invocation_rate =
        100.0 * static_cast<double>(invoked) / static_cast<double>(instances.size());
  }
  return result;
}

}  // namespace taps
