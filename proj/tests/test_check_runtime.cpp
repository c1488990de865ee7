#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "rulecheck/check_runtime.hpp"
#include "rulecheck/util.hpp"
#include "support/brute_force.hpp"
#include "support/dsl_gen.hpp"

using namespace rulecheck;

namespace {

const std::filesystem::path kModels =
    std::filesystem::path(RULECHECK_SOURCE_DIR) / "fixtures" / "models";
const std::filesystem::path kChecks =
    std::filesystem::path(RULECHECK_SOURCE_DIR) / "fixtures" / "checks";

BuildingModel two_room_model(bool room_b_has_detector) {
  std::string json = R"({
    "model_id": "m",
    "elements": [
      {"id": "ra", "category": "Room", "position": [0,0,0], "params": {"area": 40.0}},
      {"id": "rb", "category": "Room", "position": [10,0,0], "params": {"area": 50.0}},
      {"id": "d1", "category": "SmokeDetector", "room": "ra", "position": [1,1,3], "params": {}})";
  if (room_b_has_detector) {
    json += R"(,{"id": "d2", "category": "SmokeDetector", "room": "rb", "position": [11,1,3], "params": {}})";
  }
  json += "]}";
  return model_from_json_text(json, "inline");
}

const char* kEveryRoomCheck = R"(check "6.2.1" {
  forall r in elements(category="Room") {
    assert count(elements(category="SmokeDetector", within=r)) >= 1 message "violates 6.2.1";
  }
})";

}  // namespace

TEST_CASE("minimal model loads; invariants are enforced with field paths") {
  const BuildingModel model = two_room_model(true);
  CHECK(model.elements.size() == 4);
  CHECK(model.expected_violations.empty());

  CHECK_THROWS_WITH_AS(
      static_cast<void>(model_from_json_text(
          R"({"model_id":"m","elements":[{"id":"a","category":"Room"},{"id":"a","category":"Room"}]})",
          "inline")),
      doctest::Contains("duplicate element id"), ModelError);

  CHECK_THROWS_WITH_AS(
      static_cast<void>(model_from_json_text(
          R"({"model_id":"m","elements":[{"id":"d","category":"SmokeDetector","room":"nope"}]})",
          "inline")),
      doctest::Contains("missing room"), ModelError);

  CHECK_THROWS_WITH_AS(
      static_cast<void>(model_from_json_text(
          R"({"model_id":"m","elements":[{"id":"w","category":"Wall"},{"id":"d","category":"X","room":"w"}]})",
          "inline")),
      doctest::Contains("not a Room"), ModelError);

  CHECK_THROWS_AS(static_cast<void>(model_from_json_text(
                      R"({"model_id":"m","elements":[{"id":"d","category":"X","position":[1,2]}]})",
                      "inline")),
                  ModelError);
}

TEST_CASE("model json round-trips") {
  const BuildingModel model = load_model(kModels / "6.2.2.violating.json");
  const BuildingModel back = model_from_json_text(model_to_json_text(model), "roundtrip");
  CHECK(back.model_id == model.model_id);
  CHECK(back.elements.size() == model.elements.size());
  CHECK(back.expected_violations.size() == model.expected_violations.size());
}

TEST_CASE("parse_check accepts the grammar and reports static errors") {
  SUBCASE("well-formed forall/assert check") {
    const ParseResult result = parse_check(kEveryRoomCheck);
    REQUIRE(result.ok());
    CHECK(result.program->rule == RuleIndex{6, 2, 1});
    REQUIRE(result.program->body.size() == 1);
    CHECK(result.program->body[0]->kind == Stmt::Kind::Forall);
    CHECK(result.program->body[0]->body[0]->kind == Stmt::Kind::Assert);
  }

  SUBCASE("unknown function") {
    const ParseResult result = parse_check(
        R"(check "1.1.1" { assert foo() message "violates 1.1.1"; })");
    REQUIRE(!result.diagnostics.empty());
    CHECK(result.diagnostics[0].message == "unknown function foo");
    CHECK(!result.ok());
  }

  SUBCASE("assertion without a rule index in its message") {
    const ParseResult result = parse_check(
        R"(check "1.1.1" { assert 1 >= 1 message "no index here"; })");
    REQUIRE(!result.diagnostics.empty());
    CHECK(result.diagnostics[0].message.find("no rule index") != std::string::npos);
  }

  SUBCASE("arity errors") {
    const ParseResult result = parse_check(
        R"(check "1.1.1" { assert ceil(1.0, 2.0) >= 1 message "violates 1.1.1"; })");
    REQUIRE(!result.diagnostics.empty());
    CHECK(result.diagnostics[0].message.find("ceil expects 1") != std::string::npos);
  }

  SUBCASE("unbound variables") {
    const ParseResult result = parse_check(
        R"(check "1.1.1" { assert attr(r, "area") >= 1 message "violates 1.1.1"; })");
    REQUIRE(!result.diagnostics.empty());
    CHECK(result.diagnostics[0].message.find("unbound variable") != std::string::npos);
  }

  SUBCASE("bad header index") {
    const ParseResult result = parse_check(R"(check "banana" { })");
    CHECK(!result.ok());
  }

  SUBCASE("syntax error yields no program") {
    const ParseResult result = parse_check("check \"1.1.1\" { forall r in ");
    CHECK(result.program == nullptr);
    CHECK(!result.diagnostics.empty());
  }
}

TEST_CASE("execute reports the failing room and nothing else") {
  const ParseResult parsed = parse_check(kEveryRoomCheck);
  REQUIRE(parsed.ok());

  const ViolationReport violating = execute(*parsed.program, two_room_model(false));
  REQUIRE(violating.violations.size() == 1);
  CHECK(violating.violations[0].element == "rb");
  CHECK(violating.violations[0].rule == RuleIndex{6, 2, 1});
  CHECK(violating.diagnostics.empty());
  CHECK(violating.asserts_evaluated == 2);

  const ViolationReport compliant = execute(*parsed.program, two_room_model(true));
  CHECK(compliant.violations.empty());
  CHECK(compliant.diagnostics.empty());
}

TEST_CASE("attribute typos abort the assertion with a diagnostic, never default") {
  const ParseResult parsed = parse_check(
      R"(check "1.1.1" { forall r in elements(category="Room") { assert attr(r, "aera") >= 1 message "violates 1.1.1"; } })");
  REQUIRE(parsed.ok());
  const ViolationReport report = execute(*parsed.program, two_room_model(true));
  CHECK(report.violations.empty());
  REQUIRE(report.diagnostics.size() == 2);  // once per room
  CHECK(report.diagnostics[0].find("unknown attribute aera") != std::string::npos);
  CHECK(report.asserts_evaluated == 0);
}

TEST_CASE("type mismatches are diagnostics") {
  const ParseResult parsed = parse_check(
      R"(check "1.1.1" { forall r in elements(category="Room") { assert attr(r, "category") >= 1 message "violates 1.1.1"; } })");
  REQUIRE(parsed.ok());
  const ViolationReport report = execute(*parsed.program, two_room_model(true));
  CHECK(!report.diagnostics.empty());
  CHECK(report.diagnostics[0].find("type mismatch") != std::string::npos);
}

TEST_CASE("division by zero is a diagnostic") {
  const ParseResult parsed = parse_check(
      R"(check "1.1.1" { assert 1.0 / 0.0 >= 1 message "violates 1.1.1"; })");
  REQUIRE(parsed.ok());
  const ViolationReport report = execute(*parsed.program, two_room_model(true));
  REQUIRE(report.diagnostics.size() == 1);
  CHECK(report.diagnostics[0].find("division by zero") != std::string::npos);
}

TEST_CASE("exists statement and model-level violations") {
  const ParseResult parsed = parse_check(
      R"(check "6.2.6" { exists p in elements(category="FireAlarmPanel"); })");
  REQUIRE(parsed.ok());
  const ViolationReport report = execute(*parsed.program, two_room_model(true));
  REQUIRE(report.violations.size() == 1);
  CHECK(!report.violations[0].element.has_value());
  CHECK(report.violations[0].rule == RuleIndex{6, 2, 6});
  CHECK(report.asserts_evaluated == 1);
}

TEST_CASE("distance built-in is symmetric and satisfies the triangle inequality") {
  std::mt19937 rng(1234);
  std::uniform_real_distribution<double> coord(-50.0, 50.0);
  auto dist = [](const Element& a, const Element& b) {
    double sum = 0;
    for (int k = 0; k < 3; ++k) sum += (a.position[k] - b.position[k]) * (a.position[k] - b.position[k]);
    return std::sqrt(sum);
  };
  for (int i = 0; i < 500; ++i) {
    Element a, b, c;
    for (int k = 0; k < 3; ++k) {
      a.position[k] = coord(rng);
      b.position[k] = coord(rng);
      c.position[k] = coord(rng);
    }
    CHECK(dist(a, b) == doctest::Approx(dist(b, a)));
    CHECK(dist(a, c) <= dist(a, b) + dist(b, c) + 1e-9);
  }

  // and through the interpreter itself
  const ParseResult parsed = parse_check(
    R"(check "1.1.1" { forall a in elements(category="SmokeDetector") { forall b in elements(category="Room") { assert distance(a, b) == distance(b, a) message "violates 1.1.1"; } } })");
  REQUIRE(parsed.ok());
  const ViolationReport report = execute(*parsed.program, two_room_model(true));
  CHECK(report.violations.empty());
  CHECK(report.asserts_evaluated == 4);
}

TEST_CASE("judge on the fixture pair matches the documented outcomes") {
  const BuildingModel compliant = load_model(kModels / "6.2.1.compliant.json");
  const BuildingModel violating = load_model(kModels / "6.2.1.violating.json");
  const std::string check = read_file(kChecks / "6.2.1.dsl");

  SUBCASE("correct check passes end to end") {
    const JudgeDetail detail = judge(check, compliant, violating);
    CHECK(detail.outcome.compile_pass);
    CHECK(detail.outcome.logic_pass);
    CHECK(detail.outcome.pass);
  }

  SUBCASE("flipped comparator runs clean but fails the twins") {
    std::string flipped = check;
    const auto at = flipped.find(">=");
    REQUIRE(at != std::string::npos);
    flipped.replace(at, 2, "<");
    const JudgeDetail detail = judge(flipped, compliant, violating);
    CHECK(detail.outcome.compile_pass);
    CHECK(detail.outcome.logic_pass);
    CHECK(!detail.outcome.pass);
  }

  SUBCASE("syntactically broken check fails everything") {
    const JudgeDetail detail = judge("check \"6.2.1\" { forall r in {", compliant, violating);
    CHECK(!detail.outcome.compile_pass);
    CHECK(!detail.outcome.logic_pass);
    CHECK(!detail.outcome.pass);
  }
}

TEST_CASE("vacuous checks cannot pass: selector matching nothing fails logic") {
  const BuildingModel compliant = load_model(kModels / "6.2.1.compliant.json");
  const BuildingModel violating = load_model(kModels / "6.2.1.violating.json");
  const std::string vacuous = R"(check "6.2.1" {
  forall r in elements(category="NoSuchCategory") {
    assert count(elements(category="SmokeDetector", within=r)) >= 1 message "violates 6.2.1";
  }
})";
  const JudgeDetail detail = judge(vacuous, compliant, violating);
  CHECK(detail.outcome.compile_pass);
  CHECK(!detail.outcome.logic_pass);
  CHECK(!detail.outcome.pass);
}

TEST_CASE("over-reporting is as wrong as under-reporting") {
  const BuildingModel compliant = load_model(kModels / "6.2.1.compliant.json");
  const BuildingModel violating = load_model(kModels / "6.2.1.violating.json");
  // requires two detectors per room: violates on compliant model too
  const std::string strict = R"(check "6.2.1" {
  forall r in elements(category="Room") {
    assert count(elements(category="SmokeDetector", within=r)) >= 2 message "violates 6.2.1";
  }
})";
  const JudgeDetail detail = judge(strict, compliant, violating);
  CHECK(detail.outcome.compile_pass);
  CHECK(detail.outcome.logic_pass);
  CHECK(!detail.outcome.pass);
}

TEST_CASE("every shipped fixture pair passes its reference check") {
  for (int k = 1; k <= 10; ++k) {
    const std::string rule = "6.2." + std::to_string(k);
    const BuildingModel compliant = load_model(kModels / (rule + ".compliant.json"));
    const BuildingModel violating = load_model(kModels / (rule + ".violating.json"));
    const std::string check = read_file(kChecks / (rule + ".dsl"));
    const JudgeDetail detail = judge(check, compliant, violating);
    CHECK_MESSAGE(detail.outcome.pass, rule, " expected to pass: compile=",
                  detail.outcome.compile_pass, " logic=", detail.outcome.logic_pass);
  }
}

TEST_CASE("interpreter agrees with the brute-force evaluator on fixture checks") {
  for (int k = 1; k <= 10; ++k) {
    const std::string rule = "6.2." + std::to_string(k);
    const std::string check = read_file(kChecks / (rule + ".dsl"));
    const ParseResult parsed = parse_check(check);
    REQUIRE(parsed.ok());
    for (const char* kind : {".compliant.json", ".violating.json"}) {
      const BuildingModel model = load_model(kModels / (rule + kind));
      const ViolationReport fast = execute(*parsed.program, model);
      const ViolationReport slow = testgen::brute_force_execute(*parsed.program, model);
      CHECK(fast.violation_keys() == slow.violation_keys());
      CHECK(fast.asserts_evaluated == slow.asserts_evaluated);
      CHECK(fast.diagnostics.size() == slow.diagnostics.size());
    }
  }
}

TEST_CASE("pass implies logic implies compile over random mutations") {
  std::mt19937 rng(777);
  const BuildingModel compliant = load_model(kModels / "6.2.1.compliant.json");
  const BuildingModel violating = load_model(kModels / "6.2.1.violating.json");
  const std::string check = read_file(kChecks / "6.2.1.dsl");
  using testgen::MutationKind;
  const MutationKind kinds[] = {MutationKind::ComparatorFlip, MutationKind::ThresholdPerturb,
                                MutationKind::IdentifierTypo, MutationKind::SyntaxBreak};
  for (int i = 0; i < 100; ++i) {
    const auto mutant = testgen::mutate(check, kinds[i % 4], rng);
    if (!mutant) continue;
    const JudgeDetail detail = judge(mutant->source, compliant, violating);
    if (detail.outcome.pass) CHECK(detail.outcome.logic_pass);
    if (detail.outcome.logic_pass) CHECK(detail.outcome.compile_pass);
  }
}
