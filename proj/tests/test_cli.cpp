#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "rulecheck/llm_gateway.hpp"
#include "rulecheck/util.hpp"

namespace {

const std::filesystem::path kSource = RULECHECK_SOURCE_DIR;
const std::string kCli = RULECHECK_CLI_PATH;

struct RunResult {
  int exit_code = -1;
  std::string output;  // stdout + stderr
};

RunResult run_cli(const std::string& args) {
  const std::string command = "cd " + kSource.string() + " && " + kCli + " " + args + " 2>&1";
  RunResult result;
  FILE* pipe = popen(command.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buffer;
  while (std::size_t n = fread(buffer.data(), 1, buffer.size(), pipe)) {
    result.output.append(buffer.data(), n);
  }
  const int status = pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

std::filesystem::path temp_out(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("rulecheck-cli-" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("unknown flags produce usage text and exit 2") {
  const RunResult r = run_cli("--definitely-not-a-flag pipeline");
  CHECK(r.exit_code == 2);
  CHECK(r.output.find("--help") != std::string::npos);
}

TEST_CASE("a subcommand is required") {
  const RunResult r = run_cli("");
  CHECK(r.exit_code == 2);
}

TEST_CASE("config validation failures exit 2 before any stage runs") {
  CHECK(run_cli("pipeline --provider nonsense").exit_code == 2);
  CHECK(run_cli("pipeline --target basic").exit_code == 2);
  CHECK(run_cli("extract --provider http").exit_code == 2);  // http needs an endpoint
  CHECK(run_cli("ingest --dep-pattern '['").exit_code == 2);
  CHECK(run_cli("ingest --dep-pattern 'no groups here'").exit_code == 2);
}

TEST_CASE("stage failures exit 1") {
  const RunResult r = run_cli("generate --corpus /does/not/exist --output /tmp/rulecheck-cli-x");
  CHECK(r.exit_code == 1);
  CHECK(r.output.find("error:") != std::string::npos);
}

TEST_CASE("evaluate in single-file mode prints EdScores JSON on stdout") {
  const RunResult r = run_cli(
      "evaluate --pred fixtures/gold/entities.jsonl --gold fixtures/gold/entities.jsonl");
  REQUIRE(r.exit_code == 0);
  const auto j = nlohmann::json::parse(r.output);
  CHECK(j["extracted"] == 18);
  CHECK(j["precision"].get<double>() == doctest::Approx(1.0));
  CHECK(j["f1"].get<double>() == doctest::Approx(1.0));
}

TEST_CASE("evaluate infers the events kind from the filename") {
  const RunResult r = run_cli(
      "evaluate --pred fixtures/gold/events.jsonl --gold fixtures/gold/events.jsonl");
  REQUIRE(r.exit_code == 0);
  const auto j = nlohmann::json::parse(r.output);
  CHECK(j["tri-r"].get<double>() == doctest::Approx(1.0));
  CHECK(j["arg-p-O"].get<double>() <= j["arg-p-A"].get<double>() + 1e-12);
}

TEST_CASE("analyze emits the incompleteness report as JSON") {
  const RunResult complete = run_cli("analyze fixtures/checks/6.2.1.dsl");
  REQUIRE(complete.exit_code == 0);
  CHECK(nlohmann::json::parse(complete.output)["complete"] == true);

  const auto dir = temp_out("analyze");
  std::filesystem::create_directories(dir);
  rulecheck::write_file(dir / "broken.dsl",
                        "check \"1.1.1\" { assert Foo(x) message \"violates 1.1.1\"; }");
  const RunResult broken = run_cli("analyze " + (dir / "broken.dsl").string());
  REQUIRE(broken.exit_code == 0);
  const auto j = nlohmann::json::parse(broken.output);
  CHECK(j["complete"] == false);
  CHECK(j["undefined"][0] == "Foo");

  const RunResult cfamily =
      run_cli("analyze --analyze-target cfamily " + (dir / "broken.dsl").string());
  REQUIRE(cfamily.exit_code == 0);
}

TEST_CASE("individual stages compose exactly like pipeline") {
  const auto staged = temp_out("staged");
  const auto composed = temp_out("composed");
  const std::string base = "--config fixtures/pipeline/config.toml ";

  CHECK(run_cli("ingest " + base + "--output " + staged.string()).exit_code == 0);
  CHECK(run_cli("extract " + base + "--output " + staged.string()).exit_code == 0);
  CHECK(run_cli("generate " + base + "--output " + staged.string()).exit_code == 0);
  CHECK(run_cli("run-checks " + base + "--output " + staged.string()).exit_code == 0);
  CHECK(run_cli("evaluate " + base + "--output " + staged.string()).exit_code == 0);

  CHECK(run_cli("pipeline " + base + "--output " + composed.string()).exit_code == 0);

  for (const char* file : {"entities.jsonl", "events.jsonl", "outcomes.json",
                           "scores/entities.json", "scores/events.json", "scores/codegen.json",
                           "6.2.7/artifact.dsl", "6.2.7/trace.json"}) {
    CAPTURE(file);
    CHECK(rulecheck::read_file(staged / file) == rulecheck::read_file(composed / file));
  }
}

TEST_CASE("ingest with corrections enabled rewrites entry text and logs replacements") {
  using namespace rulecheck;
  const auto work = temp_out("corrections");
  std::filesystem::create_directories(work / "store");
  write_file(work / "raw.txt", "6.2.1 The spacing shall be l00 mm at least.\n");

  PromptCatalog catalog(kSource / "prompts");
  const auto request = catalog.render(
      "ocr-correction",
      {{"rule_content", "The spacing shall be l00 mm at least."}, {"assets", ""}});
  ReplayRecord record;
  record.fingerprint = fingerprint(request);
  record.template_id = request.template_id;
  record.rendered_sha = sha256_hex(request.rendered);
  record.response_text = R"([{"original":"l00 mm","corrected":"100 mm","reason":"ocr-confusable"}])";
  record.recorded_at = "1970-01-01T00:00:00Z";
  ReplayStore(work / "store", true).put(record);

  const RunResult r = run_cli("ingest --raw " + (work / "raw.txt").string() +
                              " --chapter 6 --section 2 --corrections on --provider replay" +
                              " --replay-dir " + (work / "store").string() + " --output " +
                              (work / "out").string());
  REQUIRE(r.exit_code == 0);
  const std::string entries =
      read_file(work / "out" / "corpus" / "chapter-6" / "entries.jsonl");
  CHECK(entries.find("100 mm") != std::string::npos);
  CHECK(entries.find("l00 mm") == std::string::npos);
  const std::string log = read_file(work / "out" / "corrections.jsonl");
  CHECK(log.find("ocr-confusable") != std::string::npos);
}

TEST_CASE("partial outputs survive a mid-pipeline failure") {
  // a replay store with one record removed: ingest succeeds, extract fails
  const auto broken_store = temp_out("broken-store");
  std::filesystem::create_directories(broken_store);
  bool dropped_one = false;
  for (const auto& it : std::filesystem::directory_iterator(kSource / "fixtures" / "llm")) {
    if (!dropped_one) {
      dropped_one = true;
      continue;
    }
    std::filesystem::copy_file(it.path(), broken_store / it.path().filename());
  }
  const auto out = temp_out("partial");
  const RunResult r = run_cli("pipeline --config fixtures/pipeline/config.toml --replay-dir " +
                              broken_store.string() + " --output " + out.string());
  CHECK(r.exit_code == 1);
  // the ingest stage's corpus output is preserved
  CHECK(std::filesystem::exists(out / "corpus" / "chapter-6" / "entries.jsonl"));
}

TEST_CASE("pipeline outputs validate against the published record schemas") {
  const auto out = temp_out("schema");
  REQUIRE(run_cli("pipeline --config fixtures/pipeline/config.toml --output " + out.string())
              .exit_code == 0);

  const auto entity_schema = nlohmann::json::parse(
      rulecheck::read_file(kSource / "schema" / "entity.json"));
  const auto event_schema = nlohmann::json::parse(
      rulecheck::read_file(kSource / "schema" / "event.json"));

  auto check_required = [](const nlohmann::json& schema, const nlohmann::json& record) {
    for (const auto& field : schema["required"]) {
      REQUIRE_MESSAGE(record.contains(field.get<std::string>()),
                      "missing field " << field << " in " << record.dump());
    }
    for (const auto& [key, value] : record.items()) {
      REQUIRE_MESSAGE(schema["properties"].contains(key), "undocumented field " << key);
      const std::string type = schema["properties"][key]["type"];
      if (type == "string") CHECK(value.is_string());
      if (type == "array") CHECK(value.is_array());
    }
  };

  for (const auto& line : rulecheck::read_lines(out / "entities.jsonl")) {
    check_required(entity_schema, nlohmann::json::parse(line));
  }
  for (const auto& line : rulecheck::read_lines(out / "events.jsonl")) {
    check_required(event_schema, nlohmann::json::parse(line));
  }
}
