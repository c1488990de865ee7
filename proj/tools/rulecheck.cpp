#include <CLI11.hpp>

#include <iostream>
#include <sstream>

#include "rulecheck/code_analysis.hpp"
#include "rulecheck/eval_harness.hpp"
#include "rulecheck/info_extraction.hpp"
#include "rulecheck/pipeline.hpp"
#include "rulecheck/util.hpp"

namespace {

struct StringOptions {
  std::string corpus = "fixtures/corpus";
  std::string output = "out";
  std::string prompts = "prompts";
  std::string gold;
  std::string replay_dir = "fixtures/llm";
  std::string raw;
  std::string assets;
  std::string models = "fixtures/models";
};

void apply(const StringOptions& s, rulecheck::PipelineConfig& config) {
  config.corpus_dir = s.corpus;
  config.output_dir = s.output;
  config.prompt_dir = s.prompts;
  config.gold_dir = s.gold;
  config.replay_dir = s.replay_dir;
  config.ingest_raw = s.raw;
  config.ingest_assets = s.assets;
  config.model_dir = s.models;
}

int evaluate_files(const std::string& pred, const std::string& gold, std::string kind,
                   bool overlap) {
  using namespace rulecheck;
  if (kind == "auto") {
    if (pred.find("entit") != std::string::npos) {
      kind = "entities";
    } else if (pred.find("event") != std::string::npos) {
      kind = "events";
    } else {
      std::cerr << "error: cannot infer --kind from \"" << pred << "\"; pass --kind\n";
      return 2;
    }
  }
  if (kind == "entities") {
    const auto scores = score_entities(load_entities_jsonl(pred), load_entities_jsonl(gold),
                                       overlap ? EntityMatchMode::Overlap : EntityMatchMode::Exact);
    std::cout << emit_scorecard(scores, ScoreFormat::Json);
    return 0;
  }
  const auto scores = score_events(load_events_jsonl(pred), load_events_jsonl(gold));
  std::cout << emit_scorecard(scores, ScoreFormat::Json);
  return 0;
}

int analyze_file(const std::string& path, const std::string& target) {
  using namespace rulecheck;
  std::string code;
  if (path == "-") {
    std::ostringstream buffer;
    buffer << std::cin.rdbuf();
    code = buffer.str();
  } else {
    code = read_file(path);
  }
  const CodeTarget t = target == "dsl" ? CodeTarget::CheckDsl : CodeTarget::CFamilyText;
  std::cout << report_to_json(find_incomplete(code, t)) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rulecheck: turns building-code rule text into executable verification checks"};
  app.fallthrough();
  app.require_subcommand(1);

  rulecheck::PipelineConfig config;
  StringOptions paths;

  app.set_config("--config", "", "pipeline configuration file (key=value, # comments)");

  app.add_option("--corpus", paths.corpus, "corpus directory");
  app.add_option("--output", paths.output, "output directory");
  app.add_option("--prompts", paths.prompts, "prompt catalog directory");
  app.add_option("--gold-dir", paths.gold, "gold annotation directory");
  app.add_option("--workers", config.workers, "pipeline worker count")->check(CLI::PositiveNumber);

  app.add_option("--provider", config.provider, "gateway provider")
      ->check(CLI::IsMember({"replay", "http", "record"}));
  app.add_option("--endpoint", config.endpoint, "chat-completions endpoint (http provider)");
  app.add_option("--model", config.model, "model name sent to the provider");
  app.add_option("--replay-dir", paths.replay_dir, "replay store directory");
  app.add_option("--api-key-env", config.api_key_env, "environment variable holding the API key");
  app.add_option("--max-retries", config.max_retries, "max provider attempts")
      ->check(CLI::PositiveNumber);
  app.add_option("--temperature", config.temperature, "decoding temperature");
  app.add_option("--max-tokens", config.max_tokens, "max output tokens")->check(CLI::PositiveNumber);

  app.add_option("--raw", paths.raw, "raw chapter text to ingest");
  app.add_option("--chapter", config.ingest_chapter, "chapter number for ingested text");
  app.add_option("--section", config.ingest_section, "section number for ingested text");
  app.add_option("--splitter", config.splitter, "chapter splitter")
      ->check(CLI::IsMember({"heuristic", "llm"}));
  app.add_option("--corrections", config.corrections, "run gateway OCR correction during ingest");
  app.add_option("--assets", paths.assets, "asset directory linked during ingest");
  app.add_option("--dep-pattern", config.dependency_patterns,
                 "dependency reference regex (3 capture groups); repeatable, replaces the defaults");

  app.add_option("--knowledge", config.knowledge, "bind extracted entities/events into prompts");
  app.add_option("--shots", config.shots, "few-shot examples in the framework prompt")
      ->check(CLI::Range(0, 1));
  app.add_option("--target", config.target, "code generation target")
      ->check(CLI::IsMember({"dsl", "cfamily"}));
  app.add_option("--max-iter", config.max_iterations, "max completion iterations")
      ->check(CLI::PositiveNumber);
  app.add_option("--refine-rounds", config.refine_rounds, "max self-refinement rounds")
      ->check(CLI::NonNegativeNumber);

  app.add_option("--models", paths.models, "building model directory");
  app.add_option("--overlap", config.overlap_match, "overlap entity matching in evaluation");

  auto* ingest = app.add_subcommand("ingest", "build the indexed rule corpus");
  auto* extract = app.add_subcommand("extract", "run entity discovery and event extraction");
  auto* generate = app.add_subcommand("generate", "generate verification code per rule entry");
  auto* run_checks_cmd = app.add_subcommand("run-checks", "judge artifacts against model pairs");
  auto* evaluate = app.add_subcommand("evaluate", "compute scorecards");
  auto* analyze = app.add_subcommand("analyze", "report incomplete symbols in generated code");
  auto* pipeline = app.add_subcommand("pipeline", "run every stage in order");

  std::string analyze_path = "-";
  std::string analyze_target = "dsl";
  analyze->add_option("code", analyze_path, "code file to analyze, or - for stdin");
  analyze->add_option("--analyze-target", analyze_target, "analysis target")
      ->check(CLI::IsMember({"dsl", "cfamily"}));

  std::string eval_pred, eval_gold, eval_kind = "auto";
  evaluate->add_option("--pred", eval_pred, "prediction jsonl (single-file mode)");
  evaluate->add_option("--gold", eval_gold, "gold jsonl (single-file mode)");
  evaluate->add_option("--kind", eval_kind, "entities | events | auto")
      ->check(CLI::IsMember({"entities", "events", "auto"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  apply(paths, config);
  try {
    config.validate();
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 2;
  }

  try {
    if (analyze->parsed()) return analyze_file(analyze_path, analyze_target);
    if (evaluate->parsed() && !eval_pred.empty()) {
      if (eval_gold.empty()) {
        std::cerr << "error: --pred needs --gold\n";
        return 2;
      }
      return evaluate_files(eval_pred, eval_gold, eval_kind, config.overlap_match);
    }
    if (ingest->parsed()) rulecheck::run_ingest(config);
    if (extract->parsed()) rulecheck::run_extract(config);
    if (generate->parsed()) rulecheck::run_generate(config);
    if (run_checks_cmd->parsed()) rulecheck::run_checks(config);
    if (evaluate->parsed() && eval_pred.empty()) rulecheck::run_evaluate(config);
    if (pipeline->parsed()) rulecheck::run_pipeline(config);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 0;
}
