#include "rulecheck/pipeline.hpp"

#include <algorithm>
#include <map>
#include <regex>
#include <sstream>

#include <json.hpp>

#include "rulecheck/check_runtime.hpp"
#include "rulecheck/codegen.hpp"
#include "rulecheck/eval_harness.hpp"
#include "rulecheck/info_extraction.hpp"
#include "rulecheck/rule_corpus.hpp"
#include "rulecheck/util.hpp"

namespace rulecheck {

using ordered_json = nlohmann::ordered_json;

void PipelineConfig::validate() const {
  auto fail = [](const std::string& message) { throw std::runtime_error("config: " + message); };
  if (provider != "replay" && provider != "http" && provider != "record") {
    fail("provider must be replay, http or record (got \"" + provider + "\")");
  }
  if ((provider == "http" || provider == "record") && endpoint.empty() && !provider_factory) {
    fail("provider \"" + provider + "\" needs an endpoint");
  }
  if (splitter != "heuristic" && splitter != "llm") {
    fail("splitter must be heuristic or llm (got \"" + splitter + "\")");
  }
  if (target != "dsl" && target != "cfamily") {
    fail("target must be dsl or cfamily (got \"" + target + "\")");
  }
  if (shots != 0 && shots != 1) fail("shots must be 0 or 1");
  if (workers < 1) fail("workers must be >= 1");
  if (max_iterations < 1) fail("max-iter must be >= 1");
  if (refine_rounds < 0) fail("refine-rounds must be >= 0");
  if (!ingest_raw.empty() && (ingest_chapter < 1 || ingest_section < 1)) {
    fail("ingest raw text needs chapter and section numbers");
  }
  if (max_retries < 1) fail("max-retries must be >= 1");
  for (const auto& pattern : dependency_patterns) {
    try {
      std::regex re(pattern);
      if (re.mark_count() < 3) {
        fail("dependency pattern needs 3 capture groups: " + pattern);
      }
    } catch (const std::regex_error&) {
      fail("invalid dependency pattern: " + pattern);
    }
  }
}

CodeTarget PipelineConfig::code_target() const {
  return target == "dsl" ? CodeTarget::CheckDsl : CodeTarget::CFamilyText;
}

std::unique_ptr<Gateway> PipelineConfig::make_gateway() const {
  PromptCatalog catalog(prompt_dir);
  const DecodingParams params{temperature, max_tokens};
  std::unique_ptr<Provider> provider_impl;
  if (provider == "replay") {
    auto store = std::make_shared<ReplayStore>(replay_dir);
    provider_impl = make_replay_provider(std::move(store));
  } else {
    std::unique_ptr<Provider> inner;
    if (provider_factory) {
      inner = provider_factory();
    } else {
      HttpConfig http;
      http.endpoint = endpoint;
      http.model = model;
      http.api_key_env = api_key_env;
      http.max_attempts = max_retries;
      inner = make_http_provider(http);
    }
    if (provider == "record") {
      auto store = std::make_shared<ReplayStore>(replay_dir, /*create=*/true);
      provider_impl = make_record_provider(std::move(store), std::move(inner));
    } else {
      provider_impl = std::move(inner);
    }
  }
  return std::make_unique<Gateway>(std::move(catalog), std::move(provider_impl), params);
}

std::filesystem::path effective_corpus_dir(const PipelineConfig& config) {
  return config.ingest_raw.empty() ? config.corpus_dir : config.output_dir / "corpus";
}

namespace {

std::string diag_to_string(const Diagnostic& d) {
  return "line " + std::to_string(d.line) + ", col " + std::to_string(d.col) + ": " + d.message;
}

std::vector<std::string> dsl_static_diagnostics(const std::string& code) {
  const ParseResult result = parse_check(code);
  std::vector<std::string> out;
  for (const auto& d : result.diagnostics) out.push_back(diag_to_string(d));
  return out;
}

/// Links assets in `assets_dir` to entries by filename prefix "<index>-" or
/// "<index>.": 6.2.2-coverage.csv attaches to entry 6.2.2.
void link_assets(std::vector<RuleEntry>& entries, const std::filesystem::path& assets_dir) {
  if (assets_dir.empty() || !std::filesystem::is_directory(assets_dir)) return;
  std::vector<std::filesystem::path> files;
  for (const auto& it : std::filesystem::directory_iterator(assets_dir)) {
    if (it.is_regular_file()) files.push_back(it.path());
  }
  std::sort(files.begin(), files.end());
  for (auto& entry : entries) {
    const std::string prefix_dash = entry.index.str() + "-";
    const std::string prefix_dot = entry.index.str() + ".";
    for (const auto& file : files) {
      const std::string name = file.filename().string();
      if (!starts_with(name, prefix_dash) && !starts_with(name, prefix_dot)) continue;
      const std::string ext = ascii_lower(file.extension().string());
      const std::string rel = "assets/" + name;
      if (ext == ".csv") {
        entry.tables.push_back(rel);
      } else if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") {
        entry.figures.push_back(rel);
      } else if (ext == ".txt") {
        // sidecar captions ride along with their figure
      }
    }
  }
}

void copy_assets(const std::filesystem::path& assets_dir, const std::filesystem::path& chapter_dir) {
  if (assets_dir.empty() || !std::filesystem::is_directory(assets_dir)) return;
  std::filesystem::create_directories(chapter_dir / "assets");
  for (const auto& it : std::filesystem::directory_iterator(assets_dir)) {
    if (!it.is_regular_file()) continue;
    std::filesystem::copy_file(it.path(), chapter_dir / "assets" / it.path().filename(),
                               std::filesystem::copy_options::overwrite_existing);
  }
}

struct ExtractOutputs {
  std::vector<std::vector<EntityRecord>> entities;
  std::vector<std::vector<AssignmentEvent>> events;
  std::vector<IeDiagnostics> diagnostics;
};

std::map<RuleIndex, std::vector<EntityRecord>> group_entities(
    const std::vector<EntityRecord>& flat) {
  std::map<RuleIndex, std::vector<EntityRecord>> out;
  for (const auto& r : flat) out[r.entry].push_back(r);
  return out;
}

std::map<RuleIndex, std::vector<AssignmentEvent>> group_events(
    const std::vector<AssignmentEvent>& flat) {
  std::map<RuleIndex, std::vector<AssignmentEvent>> out;
  for (const auto& e : flat) out[e.entry].push_back(e);
  return out;
}

}  // namespace

void run_ingest(const PipelineConfig& config) {
  const auto out_corpus = config.output_dir / "corpus";

  Corpus corpus;
  std::vector<std::string> warnings;
  if (config.ingest_raw.empty()) {
    // No raw input: validate and re-normalize the configured corpus.
    corpus = load_corpus(config.corpus_dir);
    for (const auto& it : std::filesystem::directory_iterator(config.corpus_dir)) {
      if (it.is_directory() && std::filesystem::is_directory(it.path() / "assets")) {
        copy_assets(it.path() / "assets", out_corpus / it.path().filename());
      }
    }
  } else {
    const std::string raw = read_file(config.ingest_raw);
    std::unique_ptr<Gateway> split_gateway;
    const SplitMode mode = config.splitter == "llm" ? SplitMode::Llm : SplitMode::Heuristic;
    if (mode == SplitMode::Llm) split_gateway = config.make_gateway();
    const auto split = split_chapter(raw, mode, split_gateway.get());
    auto entries = index_entries(split, config.ingest_chapter, config.ingest_section,
                                 config.ingest_raw.filename().string(), &warnings);
    link_assets(entries, config.ingest_assets);
    for (auto& entry : entries) corpus.add(std::move(entry));
    copy_assets(config.ingest_assets,
                out_corpus / ("chapter-" + std::to_string(config.ingest_chapter)));
  }

  // Corrections resolve table/figure content against the copied assets.
  if (config.corrections) {
    auto gateway = config.make_gateway();
    std::ostringstream corrections_log;
    for (auto& entry : corpus.entries) {
      const auto chapter_dir =
          out_corpus / ("chapter-" + std::to_string(entry.index.chapter));
      auto [corrected, log] = correct_entry(entry, *gateway, chapter_dir);
      entry.text = corrected.text;
      ordered_json j;
      j["entry_index"] = log.entry.str();
      ordered_json reps = ordered_json::array();
      for (const auto& rep : log.replacements) {
        reps.push_back(ordered_json{{"original", rep.original},
                                    {"corrected", rep.corrected},
                                    {"reason", to_string(rep.reason)}});
      }
      j["replacements"] = std::move(reps);
      j["gateway_error"] = log.gateway_error;
      if (!log.error.empty()) j["error"] = log.error;
      corrections_log << j.dump() << "\n";
    }
    write_file(config.output_dir / "corrections.jsonl", corrections_log.str());
  }

  // Dependencies are re-detected over the final texts.
  const auto& patterns = config.dependency_patterns.empty() ? default_dependency_patterns()
                                                            : config.dependency_patterns;
  for (auto& entry : corpus.entries) {
    entry.dependencies = detect_dependencies(entry, corpus, patterns, &warnings);
  }

  save_corpus(corpus, out_corpus);

  std::ostringstream warn_out;
  for (const auto& w : warnings) warn_out << w << "\n";
  write_file(config.output_dir / "ingest_warnings.txt", warn_out.str());

  // The written corpus must load back clean.
  load_corpus(out_corpus);
}

void run_extract(const PipelineConfig& config) {
  const Corpus corpus = load_corpus(effective_corpus_dir(config));
  auto gateway = config.make_gateway();

  ExtractOutputs outputs;
  outputs.entities.resize(corpus.entries.size());
  outputs.events.resize(corpus.entries.size());
  outputs.diagnostics.resize(corpus.entries.size());

  parallel_for_indexed(corpus.entries.size(), config.workers, [&](std::size_t i) {
    const RuleEntry& entry = corpus.entries[i];
    IeDiagnostics diags;
    auto entities = discover_entities(entry, *gateway, &diags);
    auto events = extract_events(entry, entities, *gateway, &diags);
    outputs.entities[i] = std::move(entities);
    outputs.events[i] = std::move(events);
    outputs.diagnostics[i] = std::move(diags);
  });

  std::ostringstream entities_out;
  std::ostringstream events_out;
  ordered_json diag_json = ordered_json::object();
  diag_json["dropped"] = ordered_json::array();
  diag_json["repaired"] = ordered_json::array();
  diag_json["notes"] = ordered_json::array();
  for (std::size_t i = 0; i < corpus.entries.size(); ++i) {
    for (const auto& r : outputs.entities[i]) entities_out << entity_to_jsonl(r) << "\n";
    for (const auto& e : outputs.events[i]) events_out << event_to_jsonl(e) << "\n";
    for (const auto& d : outputs.diagnostics[i].dropped) diag_json["dropped"].push_back(d);
    for (const auto& d : outputs.diagnostics[i].repaired) diag_json["repaired"].push_back(d);
    for (const auto& d : outputs.diagnostics[i].notes) diag_json["notes"].push_back(d);
  }
  write_file(config.output_dir / "entities.jsonl", entities_out.str());
  write_file(config.output_dir / "events.jsonl", events_out.str());
  write_file(config.output_dir / "ie_diagnostics.json", diag_json.dump(2) + "\n");
}

void run_generate(const PipelineConfig& config) {
  const Corpus corpus = load_corpus(effective_corpus_dir(config));
  const auto entities_path = config.output_dir / "entities.jsonl";
  const auto events_path = config.output_dir / "events.jsonl";
  if (!std::filesystem::exists(entities_path) || !std::filesystem::exists(events_path)) {
    throw std::runtime_error("generate: missing extraction outputs under " +
                             config.output_dir.string() + " (run extract first)");
  }
  const auto entities = group_entities(load_entities_jsonl(entities_path));
  const auto events = group_events(load_events_jsonl(events_path));

  std::map<RuleIndex, std::set<std::string>> required_ids;
  if (!config.gold_dir.empty()) {
    const auto gold_events_path = config.gold_dir / "events.jsonl";
    if (std::filesystem::exists(gold_events_path)) {
      std::map<RuleIndex, int> counter;
      for (const auto& e : load_events_jsonl(gold_events_path)) {
        const int k = ++counter[e.entry];
        required_ids[e.entry].insert(e.entry.str() + "/" + std::to_string(k));
      }
    }
  }

  auto gateway = config.make_gateway();
  CodegenOptions options;
  options.knowledge = config.knowledge;
  options.shots = config.shots;
  options.target = config.code_target();
  options.max_iterations = config.max_iterations;
  options.refine_rounds = config.refine_rounds;

  const bool dsl = options.target == CodeTarget::CheckDsl;

  parallel_for_indexed(corpus.entries.size(), config.workers, [&](std::size_t i) {
    const RuleEntry& entry = corpus.entries[i];
    const auto entry_entities = entities.count(entry.index) ? entities.at(entry.index)
                                                            : std::vector<EntityRecord>{};
    const auto entry_events =
        events.count(entry.index) ? events.at(entry.index) : std::vector<AssignmentEvent>{};
    std::vector<RuleEntry> deps;
    for (const auto& dep : entry.dependencies) {
      if (const RuleEntry* found = corpus.find(dep)) deps.push_back(*found);
    }

    IterationTrace trace;
    GeneratedArtifact artifact = generate_framework(entry, entry_entities, entry_events, deps,
                                                    *gateway, options, &trace);
    artifact = complete_loop(std::move(artifact), entry, entry_entities, entry_events, *gateway,
                             options.max_iterations, trace, options);
    if (dsl && artifact.stage == ArtifactStage::Completed && options.refine_rounds > 0) {
      const auto diags = dsl_static_diagnostics(artifact.code);
      if (!diags.empty()) {
        artifact = refine(std::move(artifact), diags, *gateway, dsl_static_diagnostics,
                          options.refine_rounds, &trace);
      }
    }

    const auto entry_dir = config.output_dir / entry.index.str();
    write_file(entry_dir / ("artifact." + artifact_extension(options.target)), artifact.code);
    write_file(entry_dir / "trace.json", trace_to_json(trace));
    if (required_ids.count(entry.index)) {
      const IntegrityReport report = check_integrity(artifact, required_ids.at(entry.index));
      write_file(entry_dir / "integrity.json", integrity_to_json(report));
    }
  });
}

void run_checks(const PipelineConfig& config) {
  const Corpus corpus = load_corpus(effective_corpus_dir(config));
  const std::string ext = artifact_extension(config.code_target());
  ordered_json outcomes = ordered_json::array();
  ordered_json skipped = ordered_json::array();

  for (const auto& entry : corpus.entries) {
    const auto artifact_path = config.output_dir / entry.index.str() / ("artifact." + ext);
    if (!std::filesystem::exists(artifact_path)) {
      skipped.push_back(ordered_json{{"index", entry.index.str()}, {"reason", "no artifact"}});
      continue;
    }
    if (config.code_target() != CodeTarget::CheckDsl) {
      skipped.push_back(ordered_json{{"index", entry.index.str()},
                                     {"reason", "c-family artifacts are analyzed, not executed"}});
      continue;
    }
    const auto compliant_path = config.model_dir / (entry.index.str() + ".compliant.json");
    const auto violating_path = config.model_dir / (entry.index.str() + ".violating.json");
    if (!std::filesystem::exists(compliant_path) || !std::filesystem::exists(violating_path)) {
      skipped.push_back(ordered_json{{"index", entry.index.str()}, {"reason", "no model pair"}});
      continue;
    }
    const BuildingModel compliant = load_model(compliant_path);
    const BuildingModel violating = load_model(violating_path);
    const JudgeDetail detail = judge(read_file(artifact_path), compliant, violating);

    outcomes.push_back(ordered_json{{"index", entry.index.str()},
                                    {"compile_pass", detail.outcome.compile_pass},
                                    {"logic_pass", detail.outcome.logic_pass},
                                    {"pass", detail.outcome.pass}});

    ordered_json detail_json;
    detail_json["index"] = entry.index.str();
    ordered_json compile_diags = ordered_json::array();
    for (const auto& d : detail.compile_diagnostics) compile_diags.push_back(diag_to_string(d));
    detail_json["compile_diagnostics"] = std::move(compile_diags);
    auto report_json = [](const ViolationReport& report) {
      ordered_json j;
      ordered_json violations = ordered_json::array();
      for (const auto& v : report.violations) {
        violations.push_back(ordered_json{{"rule", v.rule.str()},
                                          {"element", v.element ? ordered_json(*v.element)
                                                                : ordered_json(nullptr)},
                                          {"message", v.message}});
      }
      j["violations"] = std::move(violations);
      j["diagnostics"] = report.diagnostics;
      j["asserts_evaluated"] = report.asserts_evaluated;
      return j;
    };
    detail_json["compliant"] = report_json(detail.compliant_report);
    detail_json["violating"] = report_json(detail.violating_report);
    write_file(config.output_dir / entry.index.str() / "violations.json",
               detail_json.dump(2) + "\n");
  }

  ordered_json top;
  top["outcomes"] = std::move(outcomes);
  top["skipped"] = std::move(skipped);
  write_file(config.output_dir / "outcomes.json", top.dump(2) + "\n");
}

void run_evaluate(const PipelineConfig& config) {
  if (config.gold_dir.empty()) {
    throw std::runtime_error("evaluate: gold directory not configured");
  }
  const auto corpus = load_corpus(effective_corpus_dir(config));

  const auto pred_entities = load_entities_jsonl(config.output_dir / "entities.jsonl");
  const auto gold_entities = load_entities_jsonl(config.gold_dir / "entities.jsonl");
  const auto pred_events = load_events_jsonl(config.output_dir / "events.jsonl");
  const auto gold_events = load_events_jsonl(config.gold_dir / "events.jsonl");

  const EdScores ed = score_entities(pred_entities, gold_entities,
                                     config.overlap_match ? EntityMatchMode::Overlap
                                                          : EntityMatchMode::Exact);
  const EeScores ee = score_events(pred_events, gold_events);

  std::vector<IterationTrace> traces;
  std::vector<IntegrityReport> integrity;
  std::vector<PassOutcome> outcomes;
  for (const auto& entry : corpus.entries) {
    const auto trace_path = config.output_dir / entry.index.str() / "trace.json";
    if (std::filesystem::exists(trace_path)) {
      traces.push_back(trace_from_json(read_file(trace_path)));
    }
    const auto integrity_path = config.output_dir / entry.index.str() / "integrity.json";
    if (std::filesystem::exists(integrity_path)) {
      ordered_json j = ordered_json::parse(read_file(integrity_path));
      IntegrityReport report;
      const auto idx = RuleIndex::parse(j.value("entry_index", std::string()));
      report.entry = idx.value_or(entry.index);
      report.integrity = j.value("integrity", 0.0);
      integrity.push_back(report);
    }
  }
  const auto outcomes_path = config.output_dir / "outcomes.json";
  if (std::filesystem::exists(outcomes_path)) {
    ordered_json j = ordered_json::parse(read_file(outcomes_path));
    for (const auto& o : j.value("outcomes", ordered_json::array())) {
      PassOutcome outcome;
      outcome.compile_pass = o.value("compile_pass", false);
      outcome.logic_pass = o.value("logic_pass", false);
      outcome.pass = o.value("pass", false);
      outcomes.push_back(outcome);
    }
  }
  const CodegenScores cg = score_codegen(traces, integrity, outcomes);

  const auto scores_dir = config.output_dir / "scores";
  write_file(scores_dir / "entities.json", emit_scorecard(ed, ScoreFormat::Json));
  write_file(scores_dir / "events.json", emit_scorecard(ee, ScoreFormat::Json));
  write_file(scores_dir / "codegen.json", emit_scorecard(cg, ScoreFormat::Json));
  write_file(scores_dir / "entities.txt", emit_scorecard(ed, ScoreFormat::TableText));
  write_file(scores_dir / "events.txt", emit_scorecard(ee, ScoreFormat::TableText));
  write_file(scores_dir / "codegen.txt", emit_scorecard(cg, ScoreFormat::TableText));
}

void run_pipeline(const PipelineConfig& config) {
  run_ingest(config);
  run_extract(config);
  run_generate(config);
  run_checks(config);
  run_evaluate(config);
}

}  // namespace rulecheck
