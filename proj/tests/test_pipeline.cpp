#include <doctest.h>

#include <filesystem>

#include "support/fixtures.hpp"
#include "taps/corruption.hpp"
#include "taps/pipeline.hpp"
#include "taps/util.hpp"

using namespace taps;

namespace {

std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("taps_pipe_" + name)).string();
}

RunConfig fixture_config(const testing::FixtureSet& fx, RunMode mode, double confidence = 1.0) {
  RunConfig cfg;
  cfg.mode = mode;
  cfg.base_model = testing::faithful_stub_config(fx, confidence);
  if (mode == RunMode::Taps || mode == RunMode::TapsOpt) {
    Threshold t;
    t.value = 0.02;
    cfg.threshold = t;
  }
  return cfg;
}

std::string records_digest(const std::vector<PredictionRecord>& records) {
  std::string all;
  for (const auto& record : records) {
    all += record_to_json(record);
    all += "\n";
  }
  return sha256_hex(all);
}

}  // namespace

TEST_CASE("default mode on the faithful stub scores 100") {
  ApiSchema schema = ApiSchema::bundled_default();
  testing::FixtureSet fx = testing::pipeline_fixtures(schema);
  Pipeline pipeline(fixture_config(fx, RunMode::Default), schema);
  RunResult result = pipeline.run_dataset(fx.instances);
  CHECK(result.report.overall.f1 == doctest::Approx(100.0));
  CHECK(result.report.overall.exact_match == doctest::Approx(100.0));
  CHECK(result.report.failures == 0);
  CHECK(*result.report.tool_invocation_rate == doctest::Approx(0.0));
  CHECK(result.report.by_type.size() == 4);
}

TEST_CASE("ext-tag mode reconstructs from tags and reports full tool use") {
  ApiSchema schema = ApiSchema::bundled_default();
  testing::FixtureSet fx = testing::pipeline_fixtures(schema);
  Pipeline pipeline(fixture_config(fx, RunMode::ExtTag), schema);
  RunResult result = pipeline.run_dataset(fx.instances);
  CHECK(result.report.overall.f1 == doctest::Approx(100.0));
  CHECK(*result.report.tool_invocation_rate == doctest::Approx(100.0));
  for (const auto& record : result.records) {
    CHECK(record.tool_invoked);
    REQUIRE(record.tags_used.has_value());
    CHECK_FALSE(record.tags_used->empty());
  }
}

TEST_CASE("joint-tag mode splits tags from calls at the marker") {
  ApiSchema schema = ApiSchema::bundled_default();
  testing::FixtureSet fx = testing::pipeline_fixtures(schema);
  Pipeline pipeline(fixture_config(fx, RunMode::JointTag), schema);
  RunResult result = pipeline.run_dataset(fx.instances);
  CHECK(result.report.overall.f1 == doctest::Approx(100.0));
  for (const auto& record : result.records) {
    REQUIRE(record.tags_used.has_value());
  }
}

TEST_CASE("taps with full confidence never invokes the tool") {
  ApiSchema schema = ApiSchema::bundled_default();
  testing::FixtureSet fx = testing::pipeline_fixtures(schema);
  Pipeline pipeline(fixture_config(fx, RunMode::Taps, 1.0), schema);
  RunResult result = pipeline.run_dataset(fx.instances);
  CHECK(*result.report.tool_invocation_rate == doctest::Approx(0.0));
  for (const auto& record : result.records) {
    CHECK_FALSE(record.tool_invoked);
    CHECK(record.final_answer == record.first_answer);
    CHECK(*record.uncertainty == doctest::Approx(0.0).epsilon(1e-9));
  }
}

TEST_CASE("taps with low confidence invokes the tool everywhere") {
  ApiSchema schema = ApiSchema::bundled_default();
  testing::FixtureSet fx = testing::pipeline_fixtures(schema);
  Pipeline pipeline(fixture_config(fx, RunMode::Taps, 0.5), schema);
  RunResult result = pipeline.run_dataset(fx.instances);
  CHECK(*result.report.tool_invocation_rate == doctest::Approx(100.0));
  for (const auto& record : result.records) {
    CHECK(record.tool_invoked);
    CHECK(*record.uncertainty == doctest::Approx(0.5).epsilon(1e-9));
    REQUIRE(record.tags_used.has_value());
  }
}

TEST_CASE("taps repairs default-path errors through the tool") {
  ApiSchema schema = ApiSchema::bundled_default();
  testing::FixtureSet fx = testing::pipeline_fixtures(schema);
  RunConfig cfg = fixture_config(fx, RunMode::Taps, 0.5);
  cfg.base_model.stub.error_mode = "drop-argument";
  cfg.base_model.stub.error_rate = 1.0;
  Pipeline pipeline(cfg, schema);
  RunResult result = pipeline.run_dataset(fx.instances);
  // The default path drops an argument, the tagged path reconstructs gold.
  CHECK(result.report.overall.f1 == doctest::Approx(100.0));
  for (const auto& record : result.records) CHECK(record.tool_invoked);

  RunConfig no_tool = fixture_config(fx, RunMode::Default);
  no_tool.base_model.stub.error_mode = "drop-argument";
  no_tool.base_model.stub.error_rate = 1.0;
  Pipeline broken(no_tool, schema);
  CHECK(broken.run_dataset(fx.instances).report.overall.f1 < 100.0);
}

TEST_CASE("oracle picks the better path per instance") {
  ApiSchema schema = ApiSchema::bundled_default();
  testing::FixtureSet fx = testing::pipeline_fixtures(schema);
  RunConfig cfg = fixture_config(fx, RunMode::TapsOracle);
  cfg.base_model.stub.error_mode = "rename-slot";
  cfg.base_model.stub.error_rate = 0.5;  // some instances break on the default path
  Pipeline oracle_pipeline(cfg, schema);
  RunResult oracle = oracle_pipeline.run_dataset(fx.instances);

  RunConfig default_cfg = cfg;
  default_cfg.mode = RunMode::Default;
  RunResult plain = Pipeline(default_cfg, schema).run_dataset(fx.instances);

  RunConfig ext_cfg = cfg;
  ext_cfg.mode = RunMode::ExtTag;
  RunResult ext = Pipeline(ext_cfg, schema).run_dataset(fx.instances);

  for (std::size_t i = 0; i < oracle.records.size(); ++i) {
    double expected = std::max(plain.records[i].score.f1, ext.records[i].score.f1);
    CHECK(oracle.records[i].score.f1 == doctest::Approx(expected).epsilon(1e-12));
  }
  CHECK(oracle.report.overall.f1 >= plain.report.overall.f1 - 1e-9);
  CHECK(oracle.report.overall.f1 >= ext.report.overall.f1 - 1e-9);

  SUBCASE("ties go to the first answer") {
    // With no errors both paths are gold; the oracle must keep the default.
    RunConfig clean = fixture_config(fx, RunMode::TapsOracle);
    RunResult tied = Pipeline(clean, schema).run_dataset(fx.instances);
    for (const auto& record : tied.records) CHECK_FALSE(record.tool_invoked);
  }
}

TEST_CASE("taps at threshold zero reproduces ext-tag final answers") {
  ApiSchema schema = ApiSchema::bundled_default();
  testing::FixtureSet fx = testing::pipeline_fixtures(schema);
  RunConfig taps_cfg = fixture_config(fx, RunMode::Taps, 0.5);  // uncertainty 0.5 > 0
  taps_cfg.threshold->value = 0.0;
  RunResult taps = Pipeline(taps_cfg, schema).run_dataset(fx.instances);

  RunConfig ext_cfg = fixture_config(fx, RunMode::ExtTag, 0.5);
  RunResult ext = Pipeline(ext_cfg, schema).run_dataset(fx.instances);

  REQUIRE(taps.records.size() == ext.records.size());
  for (std::size_t i = 0; i < taps.records.size(); ++i) {
    CHECK(taps.records[i].tool_invoked);
    CHECK(taps.records[i].final_answer == ext.records[i].final_answer);
  }
}

TEST_CASE("taps at the max grid threshold matches default records bit for bit") {
  ApiSchema schema = ApiSchema::bundled_default();
  testing::FixtureSet fx = testing::pipeline_fixtures(schema);
  RunConfig taps_cfg = fixture_config(fx, RunMode::Taps, 0.5);
  taps_cfg.threshold->value = default_threshold_grid().back();
  RunResult taps = Pipeline(taps_cfg, schema).run_dataset(fx.instances);

  RunConfig default_cfg = fixture_config(fx, RunMode::Default, 0.5);
  RunResult plain = Pipeline(default_cfg, schema).run_dataset(fx.instances);

  CHECK(records_digest(taps.records) == records_digest(plain.records));
}

TEST_CASE("tool_invoked=false implies final equals first on every record") {
  ApiSchema schema = ApiSchema::bundled_default();
  testing::FixtureSet fx = testing::pipeline_fixtures(schema);
  for (RunMode mode : {RunMode::Default, RunMode::Taps, RunMode::TapsOracle}) {
    RunConfig cfg = fixture_config(fx, mode, 0.7);
    cfg.base_model.stub.error_mode = "hallucinate-function";
    cfg.base_model.stub.error_rate = 0.4;
    RunResult result = Pipeline(cfg, schema).run_dataset(fx.instances);
    for (const auto& record : result.records) {
      if (!record.tool_invoked) CHECK(record.final_answer == record.first_answer);
    }
  }
}

TEST_CASE("rerun with the same seed and cache reproduces the report bit-identically") {
  ApiSchema schema = ApiSchema::bundled_default();
  testing::FixtureSet fx = testing::pipeline_fixtures(schema);
  std::string cache = tmp_path("cache_rerun");
  std::filesystem::remove_all(cache);

  RunConfig cfg = fixture_config(fx, RunMode::Taps, 0.5);
  std::string first;
  std::string second;
  {
    Pipeline pipeline(cfg, schema, cache);
    first = report_to_json(pipeline.run_dataset(fx.instances).report);
  }
  {
    Pipeline pipeline(cfg, schema, cache);
    second = report_to_json(pipeline.run_dataset(fx.instances).report);
  }
  CHECK(first == second);
}

TEST_CASE("parallel runs aggregate deterministically") {
  ApiSchema schema = ApiSchema::bundled_default();
  testing::FixtureSet fx = testing::corruption_fixtures(schema, 24);
  RunConfig cfg;
  cfg.mode = RunMode::ExtTag;
  cfg.base_model = testing::faithful_stub_config(fx);
  cfg.preset_tags = fx.tags;
  RunResult serial = Pipeline(cfg, schema).run_dataset(fx.instances, 1);
  RunResult parallel = Pipeline(cfg, schema).run_dataset(fx.instances, 4);
  CHECK(records_digest(serial.records) == records_digest(parallel.records));
  CHECK(report_to_json(serial.report) == report_to_json(parallel.report));
}

TEST_CASE("per-instance failures are recorded, scored zero, and do not abort") {
  ApiSchema schema = ApiSchema::bundled_default();
  testing::FixtureSet fx = testing::pipeline_fixtures(schema);
  RunConfig cfg;
  cfg.mode = RunMode::ExtTag;
  cfg.base_model = testing::faithful_stub_config(fx);
  // Preset tags for only one instance: the others fail and score zero.
  std::map<std::string, std::vector<TaggedInstruction>> partial;
  partial["fx-001"] = fx.tags.at("fx-001");
  cfg.preset_tags = partial;
  RunResult result = Pipeline(cfg, schema).run_dataset(fx.instances);
  CHECK(result.report.failures == 3);
  std::size_t clean = 0;
  for (const auto& record : result.records) {
    if (record.failure.empty()) {
      ++clean;
    } else {
      CHECK(record.score.f1 == 0.0);
      CHECK(record.final_answer.empty());
    }
  }
  CHECK(clean == 1);
}

TEST_CASE("run config validation") {
  RunConfig cfg;
  cfg.mode = RunMode::TapsOpt;
  cfg.threshold = Threshold{};
  CHECK_THROWS_AS(cfg.validate(), Error);  // missing tagger model
  cfg.tagger_model = ModelConfig{};
  CHECK_NOTHROW(cfg.validate());

  RunConfig taps;
  taps.mode = RunMode::Taps;
  CHECK_THROWS_AS(taps.validate(), Error);  // missing threshold

  CHECK(run_mode_from_string("taps-oracle") == RunMode::TapsOracle);
  CHECK_THROWS_AS(run_mode_from_string("bogus"), Error);
}

TEST_CASE("run config json round trip") {
  ApiSchema schema = ApiSchema::bundled_default();
  testing::FixtureSet fx = testing::pipeline_fixtures(schema);
  RunConfig cfg = fixture_config(fx, RunMode::Taps, 0.5);
  cfg.seed = 42;
  RunConfig back = RunConfig::from_json_text(cfg.to_json());
  CHECK(back.mode == RunMode::Taps);
  CHECK(back.threshold->value == doctest::Approx(0.02));
  CHECK(back.seed == 42);
  CHECK(back.base_model.stub.answers == cfg.base_model.stub.answers);
}

TEST_CASE("dataset loading") {
  ApiSchema schema = ApiSchema::bundled_default();
  testing::FixtureSet fx = testing::pipeline_fixtures(schema);
  std::string path = tmp_path("dataset.jsonl");
  testing::write_temp_dataset(fx.instances, path);

  LoadedDataset loaded = load_dataset(path, schema);
  CHECK(loaded.instances.size() == 4);
  CHECK(loaded.warnings.empty());
  CHECK(loaded.instances[0].id == "fx-001");
  CHECK(loaded.instances[0].gold_calls == fx.instances[0].gold_calls);

  SUBCASE("missing fields raise with the line number") {
    write_file(path, R"({"id": "x", "dialogue": []})" "\n");
    try {
      load_dataset(path, schema);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("line 1") != std::string::npos);
    }
  }

  SUBCASE("schema violations in gold calls are warnings, not rejections") {
    write_file(path,
               R"({"id": "x", "dialogue": [{"speaker": "User", "text": "hi"}],)"
               R"( "applicable_instructions": [],)"
               R"json( "gold_calls": ["GetHomes(city=\"Hayward\")"], "reasoning_type": "Plain"})json"
               "\n");
    LoadedDataset tolerant = load_dataset(path, schema);
    CHECK(tolerant.instances.size() == 1);
    REQUIRE(tolerant.warnings.size() == 1);
    CHECK(tolerant.warnings[0].find("unknown-slot") != std::string::npos);
  }

  SUBCASE("more than three gold calls warns") {
    write_file(path,
               R"({"id": "x", "dialogue": [{"speaker": "User", "text": "hi"}],)"
               R"( "applicable_instructions": [],)"
               R"json( "gold_calls": ["GetMedia()", "GetMusic()", "GetEvents()", "GetHomes()"],)json"
               R"( "reasoning_type": "Plain"})"
               "\n");
    LoadedDataset tolerant = load_dataset(path, schema);
    CHECK(tolerant.instances.size() == 1);
    CHECK(!tolerant.warnings.empty());
  }
}

TEST_CASE("prediction record serialization round trip") {
  PredictionRecord record;
  record.instance_id = "fx-001";
  record.first_answer = {ApiCall{"GetHomes", {{"number_of_beds", "one"}}}};
  record.final_answer = record.first_answer;
  record.uncertainty = 0.25;
  record.tool_invoked = true;
  record.tags_used = std::vector<std::string>{"<a:GetHomes> x </a>"};
  record.score.f1 = 1.0;
  record.first_trace.steps = 4;
  record.first_trace.least_confidence = 0.25;
  record.first_trace.margin_gaps = {0.5, 0.25};

  PredictionRecord back = record_from_json(record_to_json(record));
  CHECK(back.instance_id == "fx-001");
  CHECK(back.first_answer == record.first_answer);
  CHECK(*back.uncertainty == doctest::Approx(0.25));
  CHECK(back.tool_invoked);
  CHECK(back.tags_used == record.tags_used);
  CHECK(back.first_trace.margin_gaps == record.first_trace.margin_gaps);
}

TEST_CASE("corruption study on the faithful stub") {
  ApiSchema schema = ApiSchema::bundled_default();
  testing::FixtureSet fx = testing::corruption_fixtures(schema, 20);
  CorruptionStudyConfig cfg;
  cfg.rates = {0, 50, 100};
  cfg.seed = 5;
  ModelConfig model = testing::faithful_stub_config(fx);
  CorruptionStudy study = corruption_study(fx.instances, fx.tags, model, schema, cfg);
  REQUIRE(study.points.size() == 3);
  CHECK(study.points[0].report.overall.f1 == doctest::Approx(100.0));
  CHECK(study.points[1].report.overall.f1 >= study.points[2].report.overall.f1 - 1e-9);
  CHECK(study.points[0].report.overall.f1 >= study.points[1].report.overall.f1 - 1e-9);

  SUBCASE("bit-identical on rerun") {
    CorruptionStudy again = corruption_study(fx.instances, fx.tags, model, schema, cfg);
    CHECK(curve_to_tsv(study) == curve_to_tsv(again));
  }

  SUBCASE("missing tags raise") {
    std::map<std::string, std::vector<TaggedInstruction>> empty;
    CHECK_THROWS_AS(corruption_study(fx.instances, empty, model, schema, cfg), Error);
  }
}
