#include "rulecheck/codegen.hpp"

#include <sstream>

#include <json.hpp>

#include "rulecheck/llm_gateway.hpp"
#include "rulecheck/util.hpp"

namespace rulecheck {

using ordered_json = nlohmann::ordered_json;

std::string to_string(ArtifactStage s) {
  switch (s) {
    case ArtifactStage::Framework: return "framework";
    case ArtifactStage::Completed: return "completed";
    case ArtifactStage::Refined: return "refined";
  }
  return "framework";
}

std::string to_string(IterationKind k) {
  switch (k) {
    case IterationKind::Framework: return "framework";
    case IterationKind::Completion: return "completion";
    case IterationKind::Refinement: return "refinement";
  }
  return "framework";
}

std::string artifact_extension(CodeTarget target) {
  return target == CodeTarget::CheckDsl ? "dsl" : "cs";
}

namespace {

std::string template_suffix(CodeTarget target) {
  return target == CodeTarget::CheckDsl ? "dsl" : "cfamily";
}

std::set<std::string> incomplete_symbols(const IncompletenessReport& report) {
  std::set<std::string> out = report.unimplemented;
  out.insert(report.undefined.begin(), report.undefined.end());
  out.insert(report.unbound_variables.begin(), report.unbound_variables.end());
  return out;
}

std::string dependencies_binding(const std::vector<RuleEntry>& deps) {
  if (deps.empty()) return "";
  std::ostringstream out;
  out << "\nDependent rule entries:\n";
  for (const auto& dep : deps) {
    out << dep.index.str() << " " << dep.text << "\n";
  }
  return out.str();
}

std::string symbols_binding(const std::set<std::string>& symbols) {
  ordered_json arr = ordered_json::array();
  for (const auto& s : symbols) arr.push_back(s);
  return arr.dump();
}

void refresh_analysis(GeneratedArtifact& artifact) {
  artifact.incomplete_symbols = incomplete_symbols(find_incomplete(artifact.code, artifact.target));
  artifact.annotations = find_rule_annotations(artifact.code);
}

}  // namespace

GeneratedArtifact generate_framework(const RuleEntry& entry,
                                     const std::vector<EntityRecord>& entities,
                                     const std::vector<AssignmentEvent>& events,
                                     const std::vector<RuleEntry>& dependency_entries,
                                     Gateway& gateway, const CodegenOptions& options,
                                     IterationTrace* trace) {
  const std::string suffix = template_suffix(options.target);
  std::map<std::string, std::string> bindings;
  bindings["entity_list"] = options.knowledge ? entities_to_prompt_json(entities) : "";
  bindings["event_list"] = options.knowledge ? events_to_prompt_json(events) : "";
  bindings["rule_content"] = entry.text;
  bindings["rule_index"] = entry.index.str();
  bindings["dependencies"] = dependencies_binding(dependency_entries);
  bindings["example"] =
      options.shots == 1 ? gateway.catalog().text("codegen-example-" + suffix) : "";

  const PromptRequest request = gateway.render("codegen-framework-" + suffix, bindings);
  const Completion completion = gateway.complete(request);
  const std::string code = strip_code_fence(completion.text);
  if (code.empty()) {
    throw GatewayError("empty framework completion for entry " + entry.index.str());
  }

  GeneratedArtifact artifact;
  artifact.entry = entry.index;
  artifact.target = options.target;
  artifact.code = code;
  artifact.stage = ArtifactStage::Framework;
  refresh_analysis(artifact);

  if (trace) {
    trace->entry = entry.index;
    trace->iterations.push_back({IterationKind::Framework, fingerprint(request),
                                 static_cast<int>(artifact.incomplete_symbols.size()), 0});
  }
  return artifact;
}

GeneratedArtifact complete_loop(GeneratedArtifact artifact, const RuleEntry& entry,
                                const std::vector<EntityRecord>& entities,
                                const std::vector<AssignmentEvent>& events, Gateway& gateway,
                                int max_iterations, IterationTrace& trace,
                                const CodegenOptions& options) {
  if (artifact.stage != ArtifactStage::Framework) {
    throw std::invalid_argument("complete_loop expects a framework-stage artifact");
  }
  if (max_iterations < 1) throw std::invalid_argument("max_iterations must be >= 1");
  const std::string suffix = template_suffix(artifact.target);
  trace.entry = entry.index;

  int completions = 0;
  while (true) {
    const IncompletenessReport report = find_incomplete(artifact.code, artifact.target);
    artifact.incomplete_symbols = incomplete_symbols(report);
    if (report.empty()) {
      artifact.stage = ArtifactStage::Completed;
      trace.finalized = true;
      trace.finalized_at = completions;
      break;
    }
    if (completions >= max_iterations) {
      trace.finalized = false;
      trace.finalized_at = std::nullopt;
      break;
    }

    std::map<std::string, std::string> bindings;
    bindings["code_framework"] = artifact.code;
    bindings["unimplemented_functions"] = symbols_binding(incomplete_symbols(report));
    bindings["entity_list"] = options.knowledge ? entities_to_prompt_json(entities) : "";
    bindings["event_list"] = options.knowledge ? events_to_prompt_json(events) : "";
    bindings["rule_content"] = entry.text;

    PromptRequest request;
    Completion completion;
    try {
      request = gateway.render("codegen-completion-" + suffix, bindings);
      completion = gateway.complete(request);
    } catch (const GatewayError&) {
      // keep the trace up to the failure; the artifact stays unfinalized
      trace.finalized = false;
      trace.finalized_at = std::nullopt;
      artifact.unresolved = true;
      refresh_analysis(artifact);
      return artifact;
    }
    const std::string code = strip_code_fence(completion.text);
    if (!code.empty()) artifact.code = code;
    ++completions;
    refresh_analysis(artifact);
    trace.iterations.push_back({IterationKind::Completion, fingerprint(request),
                                static_cast<int>(artifact.incomplete_symbols.size()), 0});
  }

  refresh_analysis(artifact);
  return artifact;
}

GeneratedArtifact refine(GeneratedArtifact artifact, std::vector<std::string> diagnostics,
                         Gateway& gateway, const RecheckFn& recheck, int rounds,
                         IterationTrace* trace) {
  if (artifact.stage == ArtifactStage::Framework) {
    throw std::invalid_argument("refine expects a finalized artifact");
  }
  if (diagnostics.empty()) return artifact;
  const std::string suffix = template_suffix(artifact.target);

  for (int round = 0; round < rounds && !diagnostics.empty(); ++round) {
    std::ostringstream joined;
    for (const auto& d : diagnostics) joined << d << "\n";
    const PromptRequest request = gateway.render(
        "codegen-refine-" + suffix,
        {{"code", artifact.code}, {"errors", joined.str()}, {"rule_index", artifact.entry.str()}});
    const Completion completion = gateway.complete(request);
    const std::string code = strip_code_fence(completion.text);
    if (!code.empty()) artifact.code = code;
    artifact.stage = ArtifactStage::Refined;
    refresh_analysis(artifact);
    diagnostics = recheck ? recheck(artifact.code) : std::vector<std::string>{};
    if (trace) {
      trace->iterations.push_back({IterationKind::Refinement, fingerprint(request),
                                   static_cast<int>(artifact.incomplete_symbols.size()),
                                   static_cast<int>(diagnostics.size())});
    }
  }
  artifact.stage = ArtifactStage::Refined;
  artifact.unresolved = !diagnostics.empty();
  return artifact;
}

IntegrityReport check_integrity(const GeneratedArtifact& artifact,
                                const std::set<std::string>& required_ids) {
  IntegrityReport report;
  report.entry = artifact.entry;
  report.required = required_ids;
  report.annotated = find_requirement_annotations(artifact.code);
  for (const auto& idx : find_rule_annotations(artifact.code)) {
    report.annotated.insert(idx.str());
  }
  int matched = 0;
  for (const auto& id : report.annotated) {
    if (required_ids.count(id)) {
      ++matched;
    } else {
      report.unknown.insert(id);
    }
  }
  report.integrity =
      required_ids.empty() ? 1.0 : static_cast<double>(matched) / static_cast<double>(required_ids.size());
  return report;
}

// --- serialization -----------------------------------------------------------

std::string trace_to_json(const IterationTrace& trace) {
  ordered_json j;
  j["entry_index"] = trace.entry.str();
  ordered_json steps = ordered_json::array();
  for (const auto& step : trace.iterations) {
    steps.push_back(ordered_json{{"kind", to_string(step.kind)},
                                 {"request_fingerprint", step.request_fingerprint},
                                 {"incomplete_after", step.incomplete_after},
                                 {"errors_after", step.errors_after}});
  }
  j["iterations"] = std::move(steps);
  j["finalized"] = trace.finalized;
  j["finalized_at"] = trace.finalized_at ? ordered_json(*trace.finalized_at) : ordered_json(nullptr);
  return j.dump(2) + "\n";
}

IterationTrace trace_from_json(const std::string& text) {
  ordered_json j = ordered_json::parse(text);
  IterationTrace trace;
  const auto idx = RuleIndex::parse(j.value("entry_index", std::string()));
  if (!idx) throw std::runtime_error("trace: bad entry_index");
  trace.entry = *idx;
  for (const auto& step_json : j.value("iterations", ordered_json::array())) {
    IterationStep step;
    const std::string kind = step_json.value("kind", std::string("framework"));
    step.kind = kind == "completion"  ? IterationKind::Completion
                : kind == "refinement" ? IterationKind::Refinement
                                       : IterationKind::Framework;
    step.request_fingerprint = step_json.value("request_fingerprint", std::string());
    step.incomplete_after = step_json.value("incomplete_after", 0);
    step.errors_after = step_json.value("errors_after", 0);
    trace.iterations.push_back(std::move(step));
  }
  trace.finalized = j.value("finalized", false);
  if (j.contains("finalized_at") && !j["finalized_at"].is_null()) {
    trace.finalized_at = j["finalized_at"].get<int>();
  }
  return trace;
}

std::string integrity_to_json(const IntegrityReport& report) {
  ordered_json j;
  j["entry_index"] = report.entry.str();
  j["required"] = report.required;
  j["annotated"] = report.annotated;
  j["unknown"] = report.unknown;
  j["integrity"] = report.integrity;
  return j.dump(2) + "\n";
}

}  // namespace rulecheck
