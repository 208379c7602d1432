#include "taps/cli.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "taps/corruption.hpp"
#include "taps/pipeline.hpp"
#include "taps/util.hpp"

namespace taps {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Configuration-phase failures exit 1, runtime failures exit 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

struct CommonFlags {
  std::string schema_path;
  std::string out_dir = "runs";
  std::string cache_dir;
  bool overwrite = false;
  std::uint64_t seed = 0;
  std::size_t parallelism = 1;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--schema", flags.schema_path, "Schema document (defaults to the bundled one)");
  cmd->add_option("--out", flags.out_dir, "Output directory");
  cmd->add_option("--cache", flags.cache_dir, "Response cache directory");
  cmd->add_flag("--overwrite", flags.overwrite,
                "Write into --out directly instead of a fresh timestamped subdirectory");
  cmd->add_option("--seed", flags.seed, "Random seed");
  cmd->add_option("--parallelism", flags.parallelism, "Worker count for dataset runs");
}

ApiSchema load_schema_or_default(const CommonFlags& flags) {
  try {
    if (flags.schema_path.empty()) return ApiSchema::bundled_default();
    return ApiSchema::from_file(flags.schema_path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

fs::path resolve_out_dir(const CommonFlags& flags, const std::string& verb) {
  fs::path base(flags.out_dir);
  if (flags.overwrite) {
    fs::create_directories(base);
    return base;
  }
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream stamp;
  stamp << std::put_time(&tm, "%Y%m%d-%H%M%S");
  fs::path dir = base / (stamp.str() + "-" + verb);
  for (int i = 1; fs::exists(dir); ++i) {
    dir = base / (stamp.str() + "-" + verb + "-" + std::to_string(i));
  }
  fs::create_directories(dir);
  return dir;
}

std::optional<std::string> cache_of(const CommonFlags& flags) {
  if (flags.cache_dir.empty()) return std::nullopt;
  return flags.cache_dir;
}

void write_manifest(const fs::path& dir, const std::string& verb, const CommonFlags& flags,
                    const json& extra) {
  json manifest;
  manifest["command"] = verb;
  manifest["seed"] = flags.seed;
  manifest["parallelism"] = flags.parallelism;
  manifest["schema"] = flags.schema_path.empty() ? "<bundled>" : flags.schema_path;
  for (const auto& [key, value] : extra.items()) manifest[key] = value;
  write_file((dir / "manifest.json").string(), manifest.dump(2) + "\n");
}

LoadedDataset load_dataset_checked(const std::string& path, const ApiSchema& schema) {
  if (path.empty()) throw ConfigError("missing --dataset");
  try {
    LoadedDataset dataset = load_dataset(path, schema);
    for (const auto& warning : dataset.warnings) {
      std::cerr << "warning: " << warning << "\n";
    }
    return dataset;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

RunConfig load_run_config(const std::string& path) {
  if (path.empty()) throw ConfigError("missing --config");
  try {
    return RunConfig::from_json_text(read_file(path));
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

std::string headline(const Report& report) {
  std::ostringstream ss;
  ss << std::left << std::setw(10) << "EM" << std::setw(10) << "F1" << std::setw(10) << "Prec."
     << std::setw(10) << "Rec." << "\n"
     << std::fixed << std::setprecision(2) << std::left << std::setw(10)
     << report.overall.exact_match << std::setw(10) << report.overall.f1 << std::setw(10)
     << report.overall.precision << std::setw(10) << report.overall.recall << "\n";
  return ss.str();
}

// Tag corpus files: one instruction per line, the untagged original and the
// tagged form separated by a tab; a line without a tab is tagged-only.
std::vector<TaggedInstruction> load_tag_corpus(const std::string& path, const ApiSchema& schema,
                                               const char* label) {
  std::ifstream in(path);
  if (!in) throw ConfigError(std::string("cannot open ") + label + " corpus: " + path);
  std::vector<TaggedInstruction> corpus;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::size_t tab = line.find('\t');
    std::string untagged = tab == std::string::npos ? "" : line.substr(0, tab);
    std::string tagged = tab == std::string::npos ? line : line.substr(tab + 1);
    TagParseResult result = parse_tagged(tagged);
    auto* t = std::get_if<TaggedInstruction>(&result);
    if (!t) {
      throw ConfigError(std::string(label) + " corpus line " + std::to_string(line_no) +
                        ": malformed tags");
    }
    TaggedInstruction canonical = canonicalize_names(*t, schema);
    if (!untagged.empty() && canonical.tokens != split_ws(untagged)) {
      throw ConfigError(std::string(label) + " corpus line " + std::to_string(line_no) +
                        ": tagged tokens do not match the untagged original");
    }
    corpus.push_back(std::move(canonical));
  }
  return corpus;
}

std::map<std::string, std::vector<TaggedInstruction>> load_instance_tags(
    const std::string& path, const ApiSchema& schema) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open tags file: " + path);
  std::map<std::string, std::vector<TaggedInstruction>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ConfigError("tags line " + std::to_string(line_no) + ": " + e.what());
    }
    std::vector<TaggedInstruction> tags;
    for (const auto& text : j.at("tagged")) {
      TagParseResult result = parse_tagged(text.get<std::string>());
      auto* t = std::get_if<TaggedInstruction>(&result);
      if (!t) {
        throw ConfigError("tags line " + std::to_string(line_no) + ": malformed tagged text");
      }
      tags.push_back(canonicalize_names(*t, schema));
    }
    out[j.at("id").get<std::string>()] = std::move(tags);
  }
  return out;
}

std::vector<PredictionRecord> load_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open predictions: " + path);
  std::vector<PredictionRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    records.push_back(record_from_json(line));
  }
  return records;
}

void write_records(const fs::path& path, const std::vector<PredictionRecord>& records) {
  std::string out;
  for (const auto& record : records) {
    out += record_to_json(record);
    out += "\n";
  }
  write_file(path.string(), out);
}

void write_report_artifacts(const fs::path& dir, const Report& report) {
  write_file((dir / "report.json").string(), report_to_json(report));
  write_file((dir / "report.txt").string(), format_report_table(report));
  write_file((dir / "report.tsv").string(), report_to_tsv(report));
}

// ---------------------------------------------------------------------------
// run

int cmd_run(const CommonFlags& flags, const std::string& dataset_path,
            const std::string& config_path, const std::string& tags_path) {
  ApiSchema schema = load_schema_or_default(flags);
  LoadedDataset dataset = load_dataset_checked(dataset_path, schema);
  RunConfig cfg = load_run_config(config_path);
  cfg.seed = flags.seed;
  if (!tags_path.empty()) cfg.preset_tags = load_instance_tags(tags_path, schema);
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }

  fs::path dir = resolve_out_dir(flags, "run");
  Pipeline pipeline(cfg, schema, cache_of(flags));
  RunResult result = pipeline.run_dataset(dataset.instances, flags.parallelism);

  write_records(dir / "predictions.jsonl", result.records);
  write_report_artifacts(dir, result.report);

  // Correlation table over the first-path traces, when the backend supplied
  // usable signals. Failed instances carry no trace and are excluded.
  std::vector<GenerationTrace> traces;
  std::vector<double> f1s;
  for (std::size_t i = 0; i < result.records.size(); ++i) {
    if (result.first_traces[i].has_logprobs()) {
      traces.push_back(result.first_traces[i]);
      f1s.push_back(result.records[i].score.f1);
    }
  }
  if (traces.size() >= 3) {
    std::vector<EstimatorRow> rows = correlate_estimators(traces, f1s);
    write_file((dir / "correlation.txt").string(), format_correlation_table(rows));
    write_file((dir / "correlation.tsv").string(), correlation_to_tsv(rows));
  }

  write_manifest(dir, "run", flags,
                 json{{"dataset", dataset_path},
                      {"dataset_digest", sha256_hex(read_file(dataset_path))},
                      {"schema_digest", schema.digest()},
                      {"config", json::parse(cfg.to_json())}});

  std::cout << headline(result.report);
  if (result.report.tool_invocation_rate) {
    std::cout << "Tool invocation rate: " << std::fixed << std::setprecision(2)
              << *result.report.tool_invocation_rate << "%\n";
  }
  if (result.report.failures > 0) {
    std::cout << result.report.failures << " instance(s) failed and were scored 0\n";
  }
  std::cout << "Artifacts: " << dir.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval

int cmd_eval(const CommonFlags& flags, const std::string& pred_path,
             const std::string& dataset_path, bool set_mode, bool micro) {
  ApiSchema schema = load_schema_or_default(flags);
  LoadedDataset dataset = load_dataset_checked(dataset_path, schema);
  std::vector<PredictionRecord> records = load_records(pred_path);

  std::map<std::string, const Instance*> by_id;
  for (const auto& instance : dataset.instances) by_id[instance.id] = &instance;

  ScoreOptions score_options{set_mode};
  std::vector<InstanceScore> scores;
  std::vector<std::string> types;
  for (const auto& record : records) {
    auto it = by_id.find(record.instance_id);
    if (it == by_id.end()) {
      throw ConfigError("prediction for unknown instance id: " + record.instance_id);
    }
    scores.push_back(score_instance(record.final_answer, it->second->gold_calls, score_options));
    types.push_back(it->second->reasoning_type);
  }
  Report report = aggregate(scores, types, AggregateOptions{micro});

  fs::path dir = resolve_out_dir(flags, "eval");
  write_report_artifacts(dir, report);
  write_manifest(dir, "eval", flags,
                 json{{"dataset", dataset_path},
                      {"predictions", pred_path},
                      {"set_mode", set_mode},
                      {"micro", micro},
                      {"schema_digest", schema.digest()}});
  std::cout << headline(report) << format_report_table(report);
  return 0;
}

// ---------------------------------------------------------------------------
// tune-threshold

int cmd_tune_threshold(const CommonFlags& flags, const std::string& dataset_path,
                       const std::string& config_path, double grid_step, bool list_presets) {
  if (list_presets) {
    std::cout << "Published operating points (least confidence):\n";
    for (const auto& preset : threshold_presets()) {
      std::cout << "  " << std::left << std::setw(22) << preset.model << preset.value << "\n";
    }
    return 0;
  }
  if (grid_step <= 0.0 || grid_step > 1.0) throw ConfigError("grid step must be in (0, 1]");

  ApiSchema schema = load_schema_or_default(flags);
  LoadedDataset dataset = load_dataset_checked(dataset_path, schema);
  RunConfig cfg = load_run_config(config_path);
  cfg.seed = flags.seed;

  // Validation predictions for both paths, produced on demand.
  RunConfig base_cfg = cfg;
  base_cfg.mode = RunMode::Default;
  Pipeline base_pipeline(base_cfg, schema, cache_of(flags));
  RunResult base = base_pipeline.run_dataset(dataset.instances, flags.parallelism);

  RunConfig regen_cfg = cfg;
  regen_cfg.mode = cfg.tagger_model ? RunMode::ExtTagOpt : RunMode::ExtTag;
  Pipeline regen_pipeline(regen_cfg, schema, cache_of(flags));
  RunResult regen = regen_pipeline.run_dataset(dataset.instances, flags.parallelism);

  std::vector<double> scores;
  std::vector<double> base_f1;
  std::vector<double> regen_f1;
  for (std::size_t i = 0; i < base.records.size(); ++i) {
    if (!base.records[i].uncertainty) {
      throw ConfigError("no uncertainty score for instance " + base.records[i].instance_id +
                        " (backend without logprobs?)");
    }
    scores.push_back(*base.records[i].uncertainty);
    base_f1.push_back(base.records[i].score.f1);
    regen_f1.push_back(regen.records[i].score.f1);
  }

  std::vector<double> grid;
  for (double tau = 0.0; tau <= 1.0 + 1e-12; tau += grid_step) grid.push_back(tau);
  ThresholdChoice choice = select_threshold(scores, base_f1, regen_f1, grid);

  fs::path dir = resolve_out_dir(flags, "tune-threshold");
  std::ostringstream sweep;
  sweep << "tau\tobjective\n";
  for (const auto& point : choice.sweep) sweep << point.tau << '\t' << point.objective << '\n';
  write_file((dir / "sweep.tsv").string(), sweep.str());
  write_file((dir / "threshold.json").string(),
             json{{"estimator", "least-confidence"},
                  {"value", choice.threshold.value},
                  {"objective_mean_f1", choice.objective * 100.0}}
                     .dump(2) +
                 "\n");
  write_manifest(dir, "tune-threshold", flags,
                 json{{"dataset", dataset_path},
                      {"dataset_digest", sha256_hex(read_file(dataset_path))},
                      {"schema_digest", schema.digest()},
                      {"grid_step", grid_step},
                      {"config", json::parse(cfg.to_json())}});

  std::cout << "Selected threshold: " << choice.threshold.value << " (mean F1 "
            << std::fixed << std::setprecision(2) << choice.objective * 100.0 << ")\n"
            << "Artifacts: " << dir.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// corrupt-study

int cmd_corrupt_study(const CommonFlags& flags, const std::string& dataset_path,
                      const std::string& config_path, const std::string& tags_path,
                      std::vector<int> rates, std::vector<std::string> operator_names,
                      std::size_t shift_magnitude, bool instruction_level) {
  ApiSchema schema = load_schema_or_default(flags);
  LoadedDataset dataset = load_dataset_checked(dataset_path, schema);
  RunConfig cfg = load_run_config(config_path);
  if (tags_path.empty()) throw ConfigError("missing --tags (gold tags are required)");
  auto gold_tags = load_instance_tags(tags_path, schema);

  CorruptionStudyConfig study_cfg;
  if (!rates.empty()) study_cfg.rates = std::move(rates);
  if (!operator_names.empty()) {
    study_cfg.operators.clear();
    for (const auto& name : operator_names) {
      if (name == "slot-deletion") {
        study_cfg.operators.insert(CorruptionOp::SlotDeletion);
      } else if (name == "boundary-shift") {
        study_cfg.operators.insert(CorruptionOp::BoundaryShift);
      } else if (name == "name-substitution") {
        study_cfg.operators.insert(CorruptionOp::NameSubstitution);
      } else {
        throw ConfigError("unknown corruption operator: " + name);
      }
    }
  }
  study_cfg.shift_magnitude = shift_magnitude;
  study_cfg.seed = flags.seed;
  study_cfg.parallelism = flags.parallelism;
  study_cfg.instruction_level = instruction_level;

  CorruptionStudy study =
      corruption_study(dataset.instances, gold_tags, cfg.base_model, schema, study_cfg,
                       cache_of(flags));

  fs::path dir = resolve_out_dir(flags, "corrupt-study");
  write_file((dir / "curve.tsv").string(), curve_to_tsv(study));
  json reports = json::array();
  for (const auto& point : study.points) {
    reports.push_back(json{{"rate", point.rate},
                           {"report", json::parse(report_to_json(point.report))}});
  }
  write_file((dir / "reports.json").string(), reports.dump(2) + "\n");
  write_manifest(dir, "corrupt-study", flags,
                 json{{"dataset", dataset_path},
                      {"dataset_digest", sha256_hex(read_file(dataset_path))},
                      {"tags", tags_path},
                      {"schema_digest", schema.digest()},
                      {"rates", study_cfg.rates},
                      {"shift_magnitude", shift_magnitude},
                      {"instruction_level", instruction_level},
                      {"config", json::parse(cfg.to_json())}});

  std::cout << std::left << std::setw(8) << "Rate" << std::setw(10) << "EM" << std::setw(10)
            << "F1" << std::setw(10) << "Prec." << std::setw(10) << "Rec." << "\n";
  for (const auto& point : study.points) {
    std::cout << std::left << std::setw(8) << point.rate << std::fixed << std::setprecision(2)
              << std::setw(10) << point.report.overall.exact_match << std::setw(10)
              << point.report.overall.f1 << std::setw(10) << point.report.overall.precision
              << std::setw(10) << point.report.overall.recall << "\n";
  }
  std::cout << "Artifacts: " << dir.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// tag-eval

int cmd_tag_eval(const CommonFlags& flags, const std::string& pred_path,
                 const std::string& gold_path) {
  ApiSchema schema = load_schema_or_default(flags);
  std::vector<TaggedInstruction> pred = load_tag_corpus(pred_path, schema, "pred");
  std::vector<TaggedInstruction> gold = load_tag_corpus(gold_path, schema, "gold");
  if (pred.empty() || gold.empty()) throw ConfigError("empty tag corpus");
  if (pred.size() != gold.size()) {
    throw ConfigError("corpora differ in size: pred has " + std::to_string(pred.size()) +
                      " lines, gold has " + std::to_string(gold.size()));
  }
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i].tokens != gold[i].tokens) {
      throw ConfigError("token mismatch between pred and gold at line " + std::to_string(i + 1));
    }
  }

  TaggingScores scores = tagging_metrics(pred, gold);
  fs::path dir = resolve_out_dir(flags, "tag-eval");
  write_file((dir / "tag_report.json").string(),
             json{{"f1", scores.f1},
                  {"precision", scores.precision},
                  {"recall", scores.recall},
                  {"classes", scores.classes}}
                     .dump(2) +
                 "\n");
  write_manifest(dir, "tag-eval", flags,
                 json{{"pred", pred_path}, {"gold", gold_path},
                      {"schema_digest", schema.digest()}});

  std::cout << std::left << std::setw(10) << "F1" << std::setw(10) << "Prec." << std::setw(10)
            << "Rec." << "\n"
            << std::fixed << std::setprecision(2) << std::left << std::setw(10) << scores.f1
            << std::setw(10) << scores.precision << std::setw(10) << scores.recall << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// bootstrap-demos

int cmd_bootstrap_demos(const CommonFlags& flags, const std::string& train_path,
                        const std::string& val_path, const std::string& config_path,
                        std::size_t max_bootstrapped, std::size_t max_labeled,
                        std::size_t num_candidates) {
  ApiSchema schema = load_schema_or_default(flags);
  LoadedDataset train = load_dataset_checked(train_path, schema);
  LoadedDataset val = load_dataset_checked(val_path, schema);
  RunConfig cfg = load_run_config(config_path);

  Gateway gateway(cfg.base_model, schema, cache_of(flags));
  PromptTemplate tmpl = PromptTemplate::bundled(cfg.default_template);
  BootstrapParams params{max_bootstrapped, max_labeled, num_candidates, flags.seed};
  DemoSet demos;
  try {
    demos = bootstrap_demos(train.instances, val.instances, gateway, schema, tmpl, params);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }

  fs::path dir = resolve_out_dir(flags, "bootstrap-demos");
  write_file((dir / "demos.json").string(), demo_set_to_json(demos));
  write_manifest(dir, "bootstrap-demos", flags,
                 json{{"train", train_path},
                      {"val", val_path},
                      {"max_bootstrapped", max_bootstrapped},
                      {"max_labeled", max_labeled},
                      {"num_candidates", num_candidates},
                      {"schema_digest", schema.digest()}});
  std::cout << "Selected " << demos.demos.size() << " demonstrations\n"
            << "Artifacts: " << dir.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// report

int cmd_report(const CommonFlags& flags, const std::string& report_path,
               const std::string& base_records, const std::string& new_records,
               double tolerance) {
  fs::path dir = resolve_out_dir(flags, "report");
  if (!base_records.empty() || !new_records.empty()) {
    if (base_records.empty() || new_records.empty()) {
      throw ConfigError("--compare needs both --base and --new record files");
    }
    std::vector<PredictionRecord> base = load_records(base_records);
    std::vector<PredictionRecord> fresh = load_records(new_records);
    std::map<std::string, double> base_f1;
    for (const auto& record : base) base_f1[record.instance_id] = record.score.f1;
    std::vector<double> bases;
    std::vector<double> news;
    for (const auto& record : fresh) {
      auto it = base_f1.find(record.instance_id);
      if (it == base_f1.end()) {
        throw ConfigError("instance " + record.instance_id + " missing from base records");
      }
      bases.push_back(it->second);
      news.push_back(record.score.f1);
    }
    WinSameLoss result = win_same_loss(bases, news, tolerance);
    json out{{"win", result.win}, {"same", result.same}, {"loss", result.loss},
             {"tolerance", tolerance}, {"count", news.size()}};
    write_file((dir / "comparison.json").string(), out.dump(2) + "\n");
    write_manifest(dir, "report", flags,
                   json{{"base", base_records}, {"new", new_records}, {"tolerance", tolerance}});
    std::cout << std::fixed << std::setprecision(1) << "Win  " << result.win << "\n"
              << "Same " << result.same << "\n"
              << "Loss " << result.loss << "\n";
    return 0;
  }

  if (report_path.empty()) throw ConfigError("missing --in report file");
  Report report;
  try {
    report = report_from_json(read_file(report_path));
  } catch (const std::exception& e) {
    throw ConfigError(std::string("cannot read report: ") + e.what());
  }
  write_report_artifacts(dir, report);
  write_manifest(dir, "report", flags, json{{"in", report_path}});
  std::cout << format_report_table(report);
  return 0;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"TAPS experiment harness: personalised API-call generation with a structured "
               "tagging tool and uncertainty-gated tool use"};
  app.require_subcommand(1);

  CommonFlags flags;

  std::string dataset_path;
  std::string config_path;
  std::string tags_path;
  auto* run = app.add_subcommand("run", "Run an experiment configuration over a dataset");
  add_common(run, flags);
  run->add_option("--dataset", dataset_path, "Dataset (line-delimited records)")->required();
  run->add_option("--config", config_path, "Run configuration file")->required();
  run->add_option("--tags", tags_path, "Preset tags keyed by instance id (replaces the tagger)");

  std::string pred_path;
  bool set_mode = false;
  bool micro = false;
  auto* eval = app.add_subcommand("eval", "Score a prediction dump against gold calls");
  add_common(eval, flags);
  eval->add_option("--pred", pred_path, "Prediction records (jsonl)")->required();
  eval->add_option("--dataset", dataset_path, "Dataset with gold calls")->required();
  eval->add_flag("--set-mode", set_mode, "Deduplicate triplets before scoring");
  eval->add_flag("--micro", micro, "Micro-average instead of macro");

  double grid_step = 0.005;
  bool list_presets = false;
  auto* tune = app.add_subcommand("tune-threshold",
                                  "Select the tool-detection threshold on a validation set");
  add_common(tune, flags);
  tune->add_option("--dataset", dataset_path, "Validation dataset");
  tune->add_option("--config", config_path, "Run configuration file");
  tune->add_option("--grid-step", grid_step, "Threshold grid step (default 0.005)");
  tune->add_flag("--list-presets", list_presets, "Print the published per-model thresholds");

  std::vector<int> rates;
  std::vector<std::string> operator_names;
  std::size_t shift_magnitude = 1;
  bool instruction_level = false;
  auto* corrupt_cmd = app.add_subcommand("corrupt-study",
                                         "Metric-vs-rate curves under controlled tag corruption");
  add_common(corrupt_cmd, flags);
  corrupt_cmd->add_option("--dataset", dataset_path, "Dataset")->required();
  corrupt_cmd->add_option("--config", config_path, "Run configuration file")->required();
  corrupt_cmd->add_option("--tags", tags_path, "Gold tags (jsonl keyed by instance id)")
      ->required();
  corrupt_cmd->add_option("--rates", rates, "Corruption rates in percent (default 0..100)");
  corrupt_cmd->add_option("--operators", operator_names,
                          "Enabled operators: slot-deletion boundary-shift name-substitution");
  corrupt_cmd->add_option("--shift-magnitude", shift_magnitude, "Boundary shift in tokens");
  corrupt_cmd->add_flag("--instruction-level", instruction_level,
                        "Corrupt whole instructions instead of individual spans");

  std::string gold_path;
  auto* tag_eval = app.add_subcommand("tag-eval", "Token-classification scores for tag corpora");
  add_common(tag_eval, flags);
  tag_eval->add_option("--pred", pred_path, "Predicted tag corpus")->required();
  tag_eval->add_option("--gold", gold_path, "Gold tag corpus")->required();

  std::string train_path;
  std::string val_path;
  std::size_t max_bootstrapped = 5;
  std::size_t max_labeled = 5;
  std::size_t num_candidates = 10;
  auto* bootstrap = app.add_subcommand("bootstrap-demos",
                                       "Bootstrap few-shot demonstrations with random search");
  add_common(bootstrap, flags);
  bootstrap->add_option("--train", train_path, "Train split")->required();
  bootstrap->add_option("--val", val_path, "Validation split")->required();
  bootstrap->add_option("--config", config_path, "Run configuration file")->required();
  bootstrap->add_option("--max-bootstrapped", max_bootstrapped, "Bootstrapped demo cap");
  bootstrap->add_option("--max-labeled", max_labeled, "Labeled demo cap");
  bootstrap->add_option("--num-candidates", num_candidates, "Candidate demo sets");

  std::string report_path;
  std::string base_records;
  std::string new_records;
  double tolerance = 0.0;
  auto* report = app.add_subcommand("report", "Format stored reports; compare two prediction dumps");
  add_common(report, flags);
  report->add_option("--in", report_path, "Report json to format");
  report->add_option("--base", base_records, "Baseline prediction records (comparison)");
  report->add_option("--new", new_records, "New prediction records (comparison)");
  report->add_option("--tolerance", tolerance, "F1 tolerance for win/same/loss");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (run->parsed()) return cmd_run(flags, dataset_path, config_path, tags_path);
    if (eval->parsed()) return cmd_eval(flags, pred_path, dataset_path, set_mode, micro);
    if (tune->parsed()) {
      return cmd_tune_threshold(flags, dataset_path, config_path, grid_step, list_presets);
    }
    if (corrupt_cmd->parsed()) {
      return cmd_corrupt_study(flags, dataset_path, config_path, tags_path, rates,
                               operator_names, shift_magnitude, instruction_level);
    }
    if (tag_eval->parsed()) return cmd_tag_eval(flags, pred_path, gold_path);
    if (bootstrap->parsed()) {
      return cmd_bootstrap_demos(flags, train_path, val_path, config_path, max_bootstrapped,
                                 max_labeled, num_candidates);
    }
    if (report->parsed()) {
      return cmd_report(flags, report_path, base_records, new_records, tolerance);
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace taps
