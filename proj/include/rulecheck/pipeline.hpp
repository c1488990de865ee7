#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rulecheck/code_analysis.hpp"
#include "rulecheck/llm_gateway.hpp"

namespace rulecheck {

/// Everything one run needs, normally read from a single config file with
/// flag overrides on top. validate() runs before any stage.
struct PipelineConfig {
  std::filesystem::path corpus_dir = "fixtures/corpus";
  std::filesystem::path output_dir = "out";
  std::filesystem::path prompt_dir = "prompts";
  std::filesystem::path gold_dir;  // optional; enables integrity + evaluate
  int workers = 1;

  // gateway
  std::string provider = "replay";  // replay | http | record
  std::string endpoint;
  std::string model = "gpt-3.5-turbo";
  std::filesystem::path replay_dir = "fixtures/llm";
  std::string api_key_env = "OPENAI_API_KEY";
  int max_retries = 3;
  double temperature = 0.0;
  int max_tokens = 4096;

  // ingest
  std::filesystem::path ingest_raw;  // raw chapter text; empty = reuse corpus_dir
  int ingest_chapter = 0;
  int ingest_section = 0;
  std::string splitter = "heuristic";  // heuristic | llm
  bool corrections = false;
  std::filesystem::path ingest_assets;
  /// Dependency reference regexes (three capture groups each); empty = the
  /// built-in default pattern set.
  std::vector<std::string> dependency_patterns;

  // codegen
  bool knowledge = true;
  int shots = 0;
  std::string target = "dsl";  // dsl | cfamily
  int max_iterations = 5;
  int refine_rounds = 2;

  // runtime
  std::filesystem::path model_dir = "fixtures/models";

  // evaluate
  bool overlap_match = false;

  /// Testing/tooling hook: when set, this provider backs the gateway instead
  /// of the configured one (still wrapped by the record layer when
  /// provider == "record"). Never read from config files.
  std::function<std::unique_ptr<Provider>()> provider_factory;

  void validate() const;  // throws std::runtime_error on bad values
  CodeTarget code_target() const;
  std::unique_ptr<Gateway> make_gateway() const;
};

/// Stage entry points. Each reads and writes only its documented files under
/// output_dir; each throws on stage failure, leaving partial outputs behind.
void run_ingest(const PipelineConfig& config);
void run_extract(const PipelineConfig& config);
void run_generate(const PipelineConfig& config);
void run_checks(const PipelineConfig& config);
void run_evaluate(const PipelineConfig& config);

/// ingest -> extract -> generate -> run-checks -> evaluate.
void run_pipeline(const PipelineConfig& config);

/// Corpus directory a stage should read: the ingest output when this run
/// ingests raw text, otherwise the configured corpus.
std::filesystem::path effective_corpus_dir(const PipelineConfig& config);

}  // namespace rulecheck
