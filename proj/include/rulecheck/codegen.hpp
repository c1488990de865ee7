#pragma once

#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "rulecheck/code_analysis.hpp"
#include "rulecheck/info_extraction.hpp"
#include "rulecheck/rule_corpus.hpp"

namespace rulecheck {

class Gateway;

enum class ArtifactStage { Framework, Completed, Refined };

std::string to_string(ArtifactStage s);

struct GeneratedArtifact {
  RuleIndex entry;
  CodeTarget target = CodeTarget::CheckDsl;
  std::string code;
  ArtifactStage stage = ArtifactStage::Framework;
  std::set<std::string> incomplete_symbols;
  std::set<RuleIndex> annotations;  // harvested by code_analysis, never hand-set
  bool unresolved = false;          // refinement rounds exhausted with errors left
};

enum class IterationKind { Framework, Completion, Refinement };

std::string to_string(IterationKind k);

struct IterationStep {
  IterationKind kind = IterationKind::Framework;
  std::string request_fingerprint;
  int incomplete_after = 0;
  int errors_after = 0;
};

struct IterationTrace {
  RuleIndex entry;
  std::vector<IterationStep> iterations;
  bool finalized = false;
  /// Completion iterations spent when finalized (0 = framework was already
  /// complete); nullopt while unfinalized. This is the k of Done@K.
  std::optional<int> finalized_at;
};

std::string trace_to_json(const IterationTrace& trace);
IterationTrace trace_from_json(const std::string& text);

struct CodegenOptions {
  bool knowledge = true;  // bind extracted entities/events into the prompt
  int shots = 0;          // 0 or 1; 1 adds the catalog example
  CodeTarget target = CodeTarget::CheckDsl;
  int max_iterations = 5;
  int refine_rounds = 2;
};

/// Generates the framework-stage artifact. Dependency entries are the full
/// texts resolved from detect_dependencies (one hop). knowledge=off renders
/// the same template with empty entity/event bindings and changes nothing
/// else about the loop.
GeneratedArtifact generate_framework(const RuleEntry& entry,
                                     const std::vector<EntityRecord>& entities,
                                     const std::vector<AssignmentEvent>& events,
                                     const std::vector<RuleEntry>& dependency_entries,
                                     Gateway& gateway, const CodegenOptions& options,
                                     IterationTrace* trace = nullptr);

/// Iterative completion: while find_incomplete reports work, render the
/// completion prompt with the current code and the full incomplete-symbol set
/// and replace the code with the response. Stops when complete (finalized) or
/// after max_iterations completion calls.
GeneratedArtifact complete_loop(GeneratedArtifact artifact, const RuleEntry& entry,
                                const std::vector<EntityRecord>& entities,
                                const std::vector<AssignmentEvent>& events, Gateway& gateway,
                                int max_iterations, IterationTrace& trace,
                                const CodegenOptions& options);

/// Re-checks code for diagnostics after each refinement round; supplied by
/// the caller (the DSL static checker, or an external compiler log source).
using RecheckFn = std::function<std::vector<std::string>(const std::string& code)>;

/// Self-refinement: feeds the code plus verbatim diagnostics back to the
/// model for at most `rounds` rounds. Zero initial diagnostics is a no-op.
GeneratedArtifact refine(GeneratedArtifact artifact, std::vector<std::string> diagnostics,
                         Gateway& gateway, const RecheckFn& recheck, int rounds,
                         IterationTrace* trace = nullptr);

struct IntegrityReport {
  RuleIndex entry;
  std::set<std::string> required;
  std::set<std::string> annotated;
  std::set<std::string> unknown;  // annotated ids outside the required set
  double integrity = 1.0;
};

/// integrity = |annotated ∩ required| / |required| (1.0 on an empty required
/// set). Annotated ids are requirement annotations plus rendered rule-index
/// annotations found in the code.
IntegrityReport check_integrity(const GeneratedArtifact& artifact,
                                const std::set<std::string>& required_ids);

std::string integrity_to_json(const IntegrityReport& report);

/// File extension for persisted artifacts of a target.
std::string artifact_extension(CodeTarget target);

}  // namespace rulecheck
