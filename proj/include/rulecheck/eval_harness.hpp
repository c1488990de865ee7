#pragma once

#include <map>
#include <string>
#include <vector>

#include "rulecheck/check_runtime.hpp"
#include "rulecheck/codegen.hpp"
#include "rulecheck/info_extraction.hpp"

namespace rulecheck {

/// Harmonic mean of precision and recall; 0 when both are 0.
double harmonic_f1(double precision, double recall);

struct EdScores {
  int extracted = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

enum class EntityMatchMode {
  Exact,    // normalized surface + type + entry must all match
  Overlap,  // one normalized surface contains the other, same type + entry
};

/// One-to-one matching in gold order; TP <= min(|pred|, |gold|).
EdScores score_entities(const std::vector<EntityRecord>& pred,
                        const std::vector<EntityRecord>& gold,
                        EntityMatchMode mode = EntityMatchMode::Exact);

struct EeScores {
  int extracted = 0;
  double tri_r = 0.0;        // entity-matched pairs / |gold|
  double arg_p_a = 0.0;      // (entity, attribute)-matched / |pred|
  double arg_p_all = 0.0;    // fully matched, all components non-degenerate / |pred|
  double arg_p_ordered = 0.0;  // as arg_p_all, plus canonical serialization order
};

EeScores score_events(const std::vector<AssignmentEvent>& pred,
                      const std::vector<AssignmentEvent>& gold);

struct CodegenScores {
  double code_integrity = 0.0;
  std::map<int, double> done_at;  // k -> ratio finalized within k completions
  double compile_rate = 0.0;
  double logic_rate = 0.0;
  double pass_rate = 0.0;
};

CodegenScores score_codegen(const std::vector<IterationTrace>& traces,
                            const std::vector<IntegrityReport>& integrity,
                            const std::vector<PassOutcome>& outcomes);

/// done@k over a trace set, for one k.
double done_at_k(const std::vector<IterationTrace>& traces, int k);

enum class ScoreFormat { Json, TableText };

std::string emit_scorecard(const EdScores& scores, ScoreFormat format);
std::string emit_scorecard(const EeScores& scores, ScoreFormat format);
std::string emit_scorecard(const CodegenScores& scores, ScoreFormat format);

}  // namespace rulecheck
