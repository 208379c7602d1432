#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "support/fixtures.hpp"
#include "taps/pipeline.hpp"
#include "taps/util.hpp"

using namespace taps;
namespace fs = std::filesystem;

namespace {

struct CommandResult {
  int exit_code;
  std::string output;
};

CommandResult run_cmd(const std::string& args) {
  std::string out_file = (fs::temp_directory_path() / "taps_cli_out.txt").string();
  std::string cmd = std::string(TAPS_CLI_PATH) + " " + args + " > " + out_file + " 2>&1";
  int status = std::system(cmd.c_str());
  CommandResult result;
  result.exit_code = WEXITSTATUS(status);
  result.output = read_file(out_file);
  return result;
}

struct CliWorkspace {
  fs::path dir;
  std::string dataset;
  std::string config;
  std::string tags;

  explicit CliWorkspace(const std::string& name) {
    dir = fs::temp_directory_path() / ("taps_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);

    ApiSchema schema = ApiSchema::bundled_default();
    testing::FixtureSet fx = testing::pipeline_fixtures(schema);
    dataset = (dir / "dataset.jsonl").string();
    testing::write_temp_dataset(fx.instances, dataset);

    RunConfig cfg;
    cfg.mode = RunMode::Default;
    cfg.base_model = testing::faithful_stub_config(fx);
    config = (dir / "config.json").string();
    write_file(config, cfg.to_json());

    std::string tag_lines;
    for (const auto& instance : fx.instances) {
      nlohmann::json j;
      j["id"] = instance.id;
      j["tagged"] = fx.tagged_texts.at(instance.id);
      tag_lines += j.dump() + "\n";
    }
    tags = (dir / "tags.jsonl").string();
    write_file(tags, tag_lines);
  }

  std::string out(const std::string& name) const { return (dir / name).string(); }
};

}  // namespace

TEST_CASE("run command produces artifacts and the headline metrics") {
  CliWorkspace ws("run");
  CommandResult result = run_cmd("run --dataset " + ws.dataset + " --config " + ws.config +
                                 " --out " + ws.out("run1") + " --overwrite");
  CHECK(result.exit_code == 0);
  CHECK(result.output.find("100.00") != std::string::npos);
  CHECK(fs::exists(ws.out("run1") + "/predictions.jsonl"));
  CHECK(fs::exists(ws.out("run1") + "/report.json"));
  CHECK(fs::exists(ws.out("run1") + "/report.tsv"));
  CHECK(fs::exists(ws.out("run1") + "/manifest.json"));

  SUBCASE("manifest records digests and full config") {
    nlohmann::json manifest =
        nlohmann::json::parse(read_file(ws.out("run1") + "/manifest.json"));
    CHECK(manifest.at("command") == "run");
    CHECK(manifest.contains("dataset_digest"));
    CHECK(manifest.contains("schema_digest"));
    CHECK(manifest.at("config").contains("mode"));
  }

  SUBCASE("rerun into the same directory is byte-identical") {
    std::string report_before = read_file(ws.out("run1") + "/report.json");
    std::string predictions_before = read_file(ws.out("run1") + "/predictions.jsonl");
    CommandResult rerun = run_cmd("run --dataset " + ws.dataset + " --config " + ws.config +
                                  " --out " + ws.out("run1") + " --overwrite");
    CHECK(rerun.exit_code == 0);
    CHECK(read_file(ws.out("run1") + "/report.json") == report_before);
    CHECK(read_file(ws.out("run1") + "/predictions.jsonl") == predictions_before);
  }

  SUBCASE("without --overwrite a fresh timestamped directory is used") {
    CommandResult first = run_cmd("run --dataset " + ws.dataset + " --config " + ws.config +
                                  " --out " + ws.out("fresh"));
    CommandResult second = run_cmd("run --dataset " + ws.dataset + " --config " + ws.config +
                                   " --out " + ws.out("fresh"));
    CHECK(first.exit_code == 0);
    CHECK(second.exit_code == 0);
    std::size_t subdirs = 0;
    for (const auto& entry : fs::directory_iterator(ws.out("fresh"))) {
      if (entry.is_directory()) ++subdirs;
    }
    CHECK(subdirs == 2);
  }
}

TEST_CASE("missing dataset is a usage error with exit 1") {
  CommandResult result = run_cmd("run --config nowhere.json");
  CHECK(result.exit_code == 1);
  CommandResult no_file = run_cmd("run --dataset does_not_exist.jsonl --config nope.json");
  CHECK(no_file.exit_code == 1);
}

TEST_CASE("eval command scores a prediction dump") {
  CliWorkspace ws("eval");
  REQUIRE(run_cmd("run --dataset " + ws.dataset + " --config " + ws.config + " --out " +
                  ws.out("run") + " --overwrite")
              .exit_code == 0);
  CommandResult result = run_cmd("eval --pred " + ws.out("run") + "/predictions.jsonl" +
                                 " --dataset " + ws.dataset + " --out " + ws.out("eval") +
                                 " --overwrite");
  CHECK(result.exit_code == 0);
  CHECK(result.output.find("100.00") != std::string::npos);
}

TEST_CASE("corrupt-study command emits a monotone curve for the stub") {
  CliWorkspace ws("corrupt");
  // corruption fixtures, not pipeline ones: single-action instances
  ApiSchema schema = ApiSchema::bundled_default();
  testing::FixtureSet fx = testing::corruption_fixtures(schema, 12);
  testing::write_temp_dataset(fx.instances, ws.dataset);
  RunConfig cfg;
  cfg.base_model = testing::faithful_stub_config(fx);
  write_file(ws.config, cfg.to_json());
  std::string tag_lines;
  for (const auto& instance : fx.instances) {
    nlohmann::json j;
    j["id"] = instance.id;
    j["tagged"] = fx.tagged_texts.at(instance.id);
    tag_lines += j.dump() + "\n";
  }
  write_file(ws.tags, tag_lines);

  CommandResult result = run_cmd("corrupt-study --dataset " + ws.dataset + " --config " +
                                 ws.config + " --tags " + ws.tags + " --rates 0 50 100" +
                                 " --out " + ws.out("study") + " --overwrite --seed 3");
  CHECK(result.exit_code == 0);
  REQUIRE(fs::exists(ws.out("study") + "/curve.tsv"));
  std::string curve = read_file(ws.out("study") + "/curve.tsv");
  auto lines = split_lines(curve);
  REQUIRE(lines.size() == 4);  // header + 3 rates
  CHECK(lines[1].rfind("0\t100\t100\t", 0) == 0);

  SUBCASE("missing tags file is a usage error") {
    CommandResult bad = run_cmd("corrupt-study --dataset " + ws.dataset + " --config " +
                                ws.config + " --tags missing.jsonl --out " + ws.out("x") +
                                " --overwrite");
    CHECK(bad.exit_code == 1);
  }
}

TEST_CASE("tag-eval command") {
  CliWorkspace ws("tageval");
  std::string corpus =
      "Request a home with one bed.\t"
      "<a:GetHomes> Request a home with <sl:number_of_beds> one </sl> bed. </a>\n";
  std::string pred_path = ws.out("pred.tsv");
  std::string gold_path = ws.out("gold.tsv");
  write_file(pred_path, corpus);
  write_file(gold_path, corpus);

  CommandResult identity = run_cmd("tag-eval --pred " + pred_path + " --gold " + gold_path +
                                   " --out " + ws.out("tag") + " --overwrite");
  CHECK(identity.exit_code == 0);
  CHECK(identity.output.find("100.00") != std::string::npos);

  SUBCASE("alignment mismatch reports the line") {
    write_file(pred_path, corpus + "extra line\textra line\n");
    CommandResult bad = run_cmd("tag-eval --pred " + pred_path + " --gold " + gold_path +
                                " --out " + ws.out("tag2") + " --overwrite");
    CHECK(bad.exit_code == 1);
  }

  SUBCASE("empty corpus is a usage error") {
    write_file(pred_path, "");
    write_file(gold_path, "");
    CommandResult bad = run_cmd("tag-eval --pred " + pred_path + " --gold " + gold_path +
                                " --out " + ws.out("tag3") + " --overwrite");
    CHECK(bad.exit_code == 1);
  }
}

TEST_CASE("tune-threshold on a stub run") {
  CliWorkspace ws("tune");
  // Confidence 0.5 gives every instance an uncertainty of 0.5.
  ApiSchema schema = ApiSchema::bundled_default();
  testing::FixtureSet fx = testing::pipeline_fixtures(schema);
  RunConfig cfg;
  cfg.base_model = testing::faithful_stub_config(fx, 0.5);
  write_file(ws.config, cfg.to_json());

  CommandResult result = run_cmd("tune-threshold --dataset " + ws.dataset + " --config " +
                                 ws.config + " --out " + ws.out("tune") + " --overwrite");
  CHECK(result.exit_code == 0);
  CHECK(fs::exists(ws.out("tune") + "/threshold.json"));
  CHECK(fs::exists(ws.out("tune") + "/sweep.tsv"));

  SUBCASE("preset listing includes the published operating points") {
    CommandResult presets = run_cmd("tune-threshold --list-presets");
    CHECK(presets.exit_code == 0);
    CHECK(presets.output.find("0.02") != std::string::npos);
    CHECK(presets.output.find("0.01") != std::string::npos);
    CHECK(presets.output.find("0.04") != std::string::npos);
  }
}

TEST_CASE("report --compare computes win/same/loss") {
  CliWorkspace ws("report");
  REQUIRE(run_cmd("run --dataset " + ws.dataset + " --config " + ws.config + " --out " +
                  ws.out("base") + " --overwrite")
              .exit_code == 0);
  // Degrade the stub for the comparison run.
  ApiSchema schema = ApiSchema::bundled_default();
  testing::FixtureSet fx = testing::pipeline_fixtures(schema);
  RunConfig cfg;
  cfg.base_model = testing::faithful_stub_config(fx);
  cfg.base_model.stub.error_mode = "drop-argument";
  cfg.base_model.stub.error_rate = 1.0;
  write_file(ws.config, cfg.to_json());
  REQUIRE(run_cmd("run --dataset " + ws.dataset + " --config " + ws.config + " --out " +
                  ws.out("worse") + " --overwrite")
              .exit_code == 0);

  CommandResult result = run_cmd("report --base " + ws.out("base") + "/predictions.jsonl" +
                                 " --new " + ws.out("worse") + "/predictions.jsonl --out " +
                                 ws.out("cmp") + " --overwrite");
  CHECK(result.exit_code == 0);
  CHECK(result.output.find("Loss") != std::string::npos);
  CHECK(fs::exists(ws.out("cmp") + "/comparison.json"));
  nlohmann::json cmp = nlohmann::json::parse(read_file(ws.out("cmp") + "/comparison.json"));
  CHECK(cmp.at("loss").get<double>() > 0.0);
  CHECK(cmp.at("win").get<double>() == 0.0);
}

TEST_CASE("bootstrap-demos command writes a demo set") {
  CliWorkspace ws("boot");
  CommandResult result = run_cmd("bootstrap-demos --train " + ws.dataset + " --val " +
                                 ws.dataset + " --config " + ws.config +
                                 " --num-candidates 2 --max-bootstrapped 2 --max-labeled 1" +
                                 " --out " + ws.out("demos") + " --overwrite");
  CHECK(result.exit_code == 0);
  REQUIRE(fs::exists(ws.out("demos") + "/demos.json"));
  DemoSet demos = demo_set_from_json(read_file(ws.out("demos") + "/demos.json"));
  CHECK_FALSE(demos.demos.empty());
}
