// Acceptance suite: runs every acceptance criterion at its stated tolerance
// and prints one pass/fail line per criterion. Exits non-zero if any fail.
//
// Usage: acceptance --cli <path-to-rulecheck-binary>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <vector>

#include "rulecheck/check_runtime.hpp"
#include "rulecheck/code_analysis.hpp"
#include "rulecheck/codegen.hpp"
#include "rulecheck/eval_harness.hpp"
#include "rulecheck/llm_gateway.hpp"
#include "rulecheck/rule_corpus.hpp"
#include "rulecheck/util.hpp"
#include "support/brute_force.hpp"
#include "support/dsl_gen.hpp"

using namespace rulecheck;

namespace {

const std::filesystem::path kSource = RULECHECK_SOURCE_DIR;
std::string g_cli_path;

struct Criterion {
  std::string name;
  std::function<void(std::ostringstream&)> run;  // throws on failure
};

void require(bool condition, const std::string& message) {
  if (!condition) throw std::runtime_error(message);
}

// ---------------------------------------------------------------------------

void metric_formula_fidelity(std::ostringstream& detail) {
  const double f1 = harmonic_f1(0.631, 0.713);
  detail << "f1(0.631, 0.713) = " << f1;
  require(std::abs(f1 - 0.669) <= 0.001, "F1 deviates from 0.669 by more than 0.001");
}

void done_at_k_semantics(std::ostringstream& detail) {
  std::vector<IterationTrace> traces;
  for (int k : {1, 2, 2, 3, 1}) {
    IterationTrace t;
    t.finalized = true;
    t.finalized_at = k;
    traces.push_back(t);
  }
  const double d1 = done_at_k(traces, 1);
  const double d2 = done_at_k(traces, 2);
  detail << "done@1 = " << d1 << ", done@2 = " << d2;
  require(std::abs(d1 - 0.400) < 1e-12, "done@1 != 0.400 on the [1,2,2,3,1] fixture");
  require(std::abs(d2 - 0.800) < 1e-12, "done@2 != 0.800 on the [1,2,2,3,1] fixture");

  std::mt19937 rng(424242);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<IterationTrace> set;
    const int n = static_cast<int>(rng() % 12) + 1;
    for (int i = 0; i < n; ++i) {
      IterationTrace t;
      if (rng() % 4 != 0) {
        t.finalized = true;
        t.finalized_at = static_cast<int>(rng() % 6);
      }
      set.push_back(t);
    }
    for (int k = 0; k < 7; ++k) {
      require(done_at_k(set, k) <= done_at_k(set, k + 1) + 1e-12,
              "done@k monotonicity violated");
    }
  }
  detail << "; monotone over 1000 random trace sets";
}

void pass_chain_invariant(std::ostringstream& detail) {
  const std::vector<std::string> rules = {"6.2.1", "6.2.2", "6.2.4", "6.2.9", "6.2.10"};
  struct Pair {
    std::string source;
    BuildingModel compliant;
    BuildingModel violating;
  };
  std::vector<Pair> pairs;
  for (const auto& rule : rules) {
    Pair p;
    p.source = read_file(kSource / "fixtures" / "checks" / (rule + ".dsl"));
    p.compliant = load_model(kSource / "fixtures" / "models" / (rule + ".compliant.json"));
    p.violating = load_model(kSource / "fixtures" / "models" / (rule + ".violating.json"));
    const JudgeDetail baseline = judge(p.source, p.compliant, p.violating);
    require(baseline.outcome.pass, "baseline check " + rule + " must pass its twins");
    pairs.push_back(std::move(p));
  }

  using testgen::MutationKind;
  const MutationKind kinds[] = {MutationKind::ComparatorFlip, MutationKind::ThresholdPerturb,
                                MutationKind::IdentifierTypo, MutationKind::SyntaxBreak};
  std::mt19937 rng(20240811);
  int executed = 0;
  int flips = 0;
  int breaks = 0;
  while (executed < 500) {
    const Pair& pair = pairs[static_cast<std::size_t>(executed) % pairs.size()];
    const MutationKind kind = kinds[static_cast<std::size_t>(executed) % 4];
    const auto mutant = testgen::mutate(pair.source, kind, rng);
    require(mutant.has_value(), "mutation produced no site");
    const JudgeDetail detail_run = judge(mutant->source, pair.compliant, pair.violating);
    const PassOutcome& o = detail_run.outcome;
    require(!o.pass || o.logic_pass, "pass => logic violated by a mutant");
    require(!o.logic_pass || o.compile_pass, "logic => compile violated by a mutant");
    if (kind == MutationKind::ComparatorFlip) {
      ++flips;
      require(o.compile_pass && o.logic_pass && !o.pass,
              "comparator flip must yield (true, true, false); got (" +
                  std::to_string(o.compile_pass) + "," + std::to_string(o.logic_pass) + "," +
                  std::to_string(o.pass) + ") for:\n" + mutant->source);
    }
    if (kind == MutationKind::SyntaxBreak) {
      ++breaks;
      require(!o.compile_pass && !o.logic_pass && !o.pass,
              "syntax mutant must yield (false, false, false) for:\n" + mutant->source);
    }
    ++executed;
  }
  detail << executed << " mutants (" << flips << " comparator flips, " << breaks
         << " syntax breaks), chain held";
}

ReplayRecord record_for(const PromptRequest& request, const std::string& response) {
  ReplayRecord record;
  record.fingerprint = fingerprint(request);
  record.template_id = request.template_id;
  record.rendered_sha = sha256_hex(request.rendered);
  record.response_text = response;
  record.recorded_at = "1970-01-01T00:00:00Z";
  return record;
}

void completion_loop_convergence(std::ostringstream& detail) {
  const auto dir = std::filesystem::temp_directory_path() / "rulecheck-acc-loop";
  std::filesystem::remove_all(dir);
  auto store = std::make_shared<ReplayStore>(dir, true);
  PromptCatalog catalog(kSource / "prompts");

  RuleEntry entry;
  entry.index = RuleIndex{6, 2, 1};
  entry.text = "Every room shall be equipped with at least one smoke detector.";
  const std::vector<EntityRecord> entities;
  const std::vector<AssignmentEvent> events;

  const std::string framework = R"(check "6.2.1" {
  // rule 6.2.1
  forall r in elements(category="Room") {
    // <unimplemented> RoomHasDetector
    assert RoomHasDetector(r) message "violates 6.2.1";
  }
})";
  const std::string intermediate = R"(check "6.2.1" {
  // rule 6.2.1
  forall r in elements(category="Room") {
    assert DetectorCount(r) >= 1 message "violates 6.2.1";
  }
})";
  const std::string final_code = R"(check "6.2.1" {
  // rule 6.2.1
  forall r in elements(category="Room") {
    assert count(elements(category="SmokeDetector", within=r)) >= 1 message "violates 6.2.1";
  }
})";

  auto completion_request = [&](const std::string& code, const std::string& symbol) {
    return catalog.render("codegen-completion-dsl",
                          {{"code_framework", code},
                           {"unimplemented_functions", "[\"" + symbol + "\"]"},
                           {"entity_list", ""},
                           {"event_list", ""},
                           {"rule_content", entry.text}});
  };
  store->put(record_for(completion_request(framework, "RoomHasDetector"), intermediate));
  store->put(record_for(completion_request(intermediate, "DetectorCount"), final_code));

  Gateway gateway(catalog, make_replay_provider(store));
  CodegenOptions options;
  options.knowledge = false;

  GeneratedArtifact artifact;
  artifact.entry = entry.index;
  artifact.target = CodeTarget::CheckDsl;
  artifact.code = framework;
  artifact.stage = ArtifactStage::Framework;

  IterationTrace trace;
  trace.iterations.push_back({IterationKind::Framework, "f", 1, 0});
  const auto completed =
      complete_loop(artifact, entry, entities, events, gateway, 5, trace, options);
  require(trace.finalized, "two-step fixture must finalize");
  require(trace.finalized_at == 2, "two-step fixture must finalize at k=2, got k=" +
                                       std::to_string(trace.finalized_at.value_or(-1)));
  require(find_incomplete(completed.code, CodeTarget::CheckDsl).empty(),
          "find_incomplete(final code) must be empty");
  detail << "two-step fixture finalized at k=2";

  // never-converging fixture
  const auto dir2 = std::filesystem::temp_directory_path() / "rulecheck-acc-loop2";
  std::filesystem::remove_all(dir2);
  auto store2 = std::make_shared<ReplayStore>(dir2, true);
  const int max_iter = 4;
  std::string current = framework;
  std::string symbol = "RoomHasDetector";
  for (int i = 0; i < max_iter; ++i) {
    const std::string next_symbol = "Missing" + std::to_string(i);
    const std::string next = R"(check "6.2.1" {
  forall r in elements(category="Room") {
    assert )" + next_symbol + R"((r) message "violates 6.2.1";
  }
})";
    store2->put(record_for(completion_request(current, symbol), next));
    current = next;
    symbol = next_symbol;
  }
  // re-render against the second store
  Gateway gateway2(catalog, make_replay_provider(store2));
  GeneratedArtifact artifact2;
  artifact2.entry = entry.index;
  artifact2.target = CodeTarget::CheckDsl;
  artifact2.code = framework;
  artifact2.stage = ArtifactStage::Framework;
  IterationTrace trace2;
  trace2.iterations.push_back({IterationKind::Framework, "f", 1, 0});
  const auto result =
      complete_loop(artifact2, entry, entities, events, gateway2, max_iter, trace2, options);
  require(!trace2.finalized, "diverging fixture must not finalize");
  require(trace2.iterations.size() == static_cast<std::size_t>(max_iter) + 1,
          "trace length must be max-iter + 1");
  require(!result.incomplete_symbols.empty(), "diverging artifact must stay incomplete");
  detail << "; diverging fixture stopped unfinalized after " << max_iter << " iterations";
}

void code_integrity_computation(std::ostringstream& detail) {
  GeneratedArtifact artifact;
  artifact.entry = RuleIndex{6, 2, 2};
  artifact.target = CodeTarget::CheckDsl;

  std::set<std::string> required;
  std::string code = "check \"6.2.2\" {\n";
  for (int i = 1; i <= 9; ++i) required.insert("6.2.2/" + std::to_string(i));
  for (int i = 1; i <= 7; ++i) code += "  // req: 6.2.2/" + std::to_string(i) + "\n";
  code += "}\n";
  artifact.code = code;
  const double partial = check_integrity(artifact, required).integrity;
  detail << "7/9 -> " << partial;
  require(std::abs(partial - 0.778) <= 0.001, "integrity 7/9 must be 0.778 +/- 0.001");

  std::string full = "check \"6.2.2\" {\n";
  for (int i = 1; i <= 9; ++i) full += "  // req: 6.2.2/" + std::to_string(i) + "\n";
  full += "}\n";
  artifact.code = full;
  const double complete = check_integrity(artifact, required).integrity;
  detail << "; 9/9 -> " << complete;
  require(complete == 1.0, "full annotation must yield integrity 1.00");
}

void splitter_round_trip(std::ostringstream& detail) {
  std::mt19937 rng(6021023);
  for (int i = 0; i < 50; ++i) {
    const auto chapter = testgen::generate_chapter(rng, 3 + i % 7, 1 + i % 4);
    const auto entries = split_chapter(chapter.text, SplitMode::Heuristic);
    require(static_cast<int>(entries.size()) == chapter.clause_count,
            "clause count mismatch: expected " + std::to_string(chapter.clause_count) + ", got " +
                std::to_string(entries.size()) + "\n" + chapter.text);
    std::string reconstructed;
    for (const auto& e : entries) reconstructed += e.number_token + e.body;
    require(strip_ws(reconstructed) == strip_ws(chapter.text),
            "split lost non-whitespace characters");
  }
  detail << "50 chapters split and reconstructed";
}

void parser_oracle_equivalence(std::ostringstream& detail) {
  std::mt19937 rng(987654);
  for (int i = 0; i < 200; ++i) {
    const auto program = testgen::generate_random_check(rng);
    const ParseResult parsed = parse_check(program.source);
    require(parsed.program != nullptr, "generated program failed to parse:\n" + program.source);
    const SymbolTable scanned = parse_symbols(program.source, CodeTarget::CheckDsl);
    const SymbolTable walked = testgen::ast_walk_symbols(*parsed.program);
    require(scanned.defined_functions == walked.defined_functions,
            "defined sets disagree on:\n" + program.source);
    require(scanned.called_functions == walked.called_functions,
            "called sets disagree on:\n" + program.source);
    require(scanned.declared_variables == walked.declared_variables,
            "declared sets disagree on:\n" + program.source);
  }
  detail << "200 random programs, token scan == grammar walk";
}

std::map<std::string, std::string> snapshot_outputs(const std::filesystem::path& out) {
  std::map<std::string, std::string> files;
  auto add = [&](const std::filesystem::path& p) {
    files[std::filesystem::relative(p, out).string()] = read_file(p);
  };
  add(out / "entities.jsonl");
  add(out / "events.jsonl");
  for (int k = 1; k <= 10; ++k) {
    const auto dir = out / ("6.2." + std::to_string(k));
    add(dir / "artifact.dsl");
    add(dir / "trace.json");
    add(dir / "integrity.json");
  }
  add(out / "outcomes.json");
  for (const char* score : {"entities.json", "events.json", "codegen.json"}) {
    add(out / "scores" / score);
  }
  return files;
}

void end_to_end_determinism(std::ostringstream& detail) {
  require(!g_cli_path.empty(), "acceptance needs --cli <path to rulecheck>");
  const auto base = std::filesystem::temp_directory_path() / "rulecheck-acc-e2e";
  std::filesystem::remove_all(base);
  std::filesystem::create_directories(base);

  auto run_once = [&](const std::string& tag) {
    const auto out = base / tag;
    std::ostringstream cmd;
    cmd << "cd " << kSource << " && " << g_cli_path
        << " pipeline --config fixtures/pipeline/config.toml --output " << out << " > "
        << (base / (tag + ".log")) << " 2>&1";
    const int rc = std::system(cmd.str().c_str());
    require(rc == 0, "pipeline run " + tag + " exited with " + std::to_string(rc) +
                         " (log: " + (base / (tag + ".log")).string() + ")");
    return snapshot_outputs(out);
  };

  const auto first = run_once("run1");
  const auto second = run_once("run2");
  require(first.size() == second.size(), "output file sets differ between runs");
  for (const auto& [name, content] : first) {
    auto it = second.find(name);
    require(it != second.end(), "second run is missing " + name);
    require(it->second == content, "output differs between runs: " + name);
  }
  detail << first.size() << " output files byte-identical across two runs";
}

void runtime_brute_force_equivalence(std::ostringstream& detail) {
  int compared = 0;
  for (int k = 1; k <= 10; ++k) {
    const std::string rule = "6.2." + std::to_string(k);
    const std::string check = read_file(kSource / "fixtures" / "checks" / (rule + ".dsl"));
    const ParseResult parsed = parse_check(check);
    require(parsed.ok(), "shipped check " + rule + " must compile");
    for (const char* kind : {".compliant.json", ".violating.json"}) {
      const BuildingModel model =
          load_model(kSource / "fixtures" / "models" / (rule + kind));
      const ViolationReport fast = execute(*parsed.program, model);
      const ViolationReport slow = testgen::brute_force_execute(*parsed.program, model);
      require(fast.violation_keys() == slow.violation_keys(),
              "violation sets disagree for " + rule + kind);
      require(fast.asserts_evaluated == slow.asserts_evaluated,
              "assert counts disagree for " + rule + kind);
      ++compared;
    }
  }
  detail << compared << " model evaluations matched the brute-force oracle";
}

void knowledge_toggle_contract(std::ostringstream& detail) {
  PromptCatalog catalog(kSource / "prompts");
  RuleEntry entry;
  entry.index = RuleIndex{6, 2, 1};
  entry.text = "Every room shall be equipped with at least one smoke detector.";
  std::vector<EntityRecord> entities = {{"room", EntityType::Zone, entry.index},
                                        {"smoke detector", EntityType::Component, entry.index}};
  std::vector<AssignmentEvent> events(1);
  events[0].entity = "room";
  events[0].attribute = "smoke detector quantity";
  events[0].comparator = Comparator::Ge;
  events[0].value = "1";
  events[0].entry = entry.index;

  const std::string entity_json = entities_to_prompt_json(entities);
  const std::string event_json = events_to_prompt_json(events);

  for (const std::string target : {"dsl", "cfamily"}) {
    std::map<std::string, std::string> on = {{"entity_list", entity_json},
                                             {"event_list", event_json},
                                             {"rule_content", entry.text},
                                             {"rule_index", entry.index.str()},
                                             {"dependencies", ""},
                                             {"example", ""}};
    std::map<std::string, std::string> off = on;
    off["entity_list"] = "";
    off["event_list"] = "";
    const std::string rendered_on =
        catalog.render("codegen-framework-" + target, on).rendered;
    const std::string rendered_off =
        catalog.render("codegen-framework-" + target, off).rendered;

    std::string expected_off = rendered_on;
    const auto entity_at = expected_off.find(entity_json);
    require(entity_at != std::string::npos, "entity binding not found in the on-prompt");
    expected_off.replace(entity_at, entity_json.size(), "");
    const auto event_at = expected_off.find(event_json);
    require(event_at != std::string::npos, "event binding not found in the on-prompt");
    expected_off.replace(event_at, event_json.size(), "");
    require(expected_off == rendered_off,
            "prompts differ beyond the entity/event bindings for target " + target);
  }
  detail << "on/off prompts differ exactly in the entity/event bindings (both targets)";
}

}  // namespace

int main(int argc, char** argv) {
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--cli") g_cli_path = argv[i + 1];
  }

  const std::vector<Criterion> criteria = {
      {"metric-formula-fidelity", metric_formula_fidelity},
      {"done-at-k-semantics", done_at_k_semantics},
      {"pass-chain-invariant", pass_chain_invariant},
      {"completion-loop-convergence", completion_loop_convergence},
      {"code-integrity-computation", code_integrity_computation},
      {"splitter-round-trip", splitter_round_trip},
      {"parser-oracle-equivalence", parser_oracle_equivalence},
      {"end-to-end-determinism", end_to_end_determinism},
      {"runtime-brute-force-equivalence", runtime_brute_force_equivalence},
      {"knowledge-toggle-contract", knowledge_toggle_contract},
  };

  int failures = 0;
  for (const auto& criterion : criteria) {
    const auto start = std::chrono::steady_clock::now();
    std::ostringstream detail;
    bool ok = true;
    std::string error;
    try {
      criterion.run(detail);
    } catch (const std::exception& ex) {
      ok = false;
      error = ex.what();
    }
    const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - start);
    if (ok) {
      std::cout << "[PASS] " << criterion.name << " (" << elapsed.count() << " ms)";
      if (!detail.str().empty()) std::cout << " - " << detail.str();
      std::cout << "\n";
    } else {
      ++failures;
      std::cout << "[FAIL] " << criterion.name << " (" << elapsed.count() << " ms) - " << error
                << "\n";
    }
  }
  if (failures) {
    std::cout << failures << " criterion(s) failed\n";
    return 1;
  }
  std::cout << "all " << criteria.size() << " acceptance criteria passed\n";
  return 0;
}
