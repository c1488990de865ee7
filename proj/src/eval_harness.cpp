#include "rulecheck/eval_harness.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "rulecheck/util.hpp"

namespace rulecheck {

using ordered_json = nlohmann::ordered_json;

double harmonic_f1(double precision, double recall) {
  if (precision + recall <= 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

namespace {

double ratio(int numerator, int denominator) {
  if (denominator == 0) return 0.0;
  return static_cast<double>(numerator) / static_cast<double>(denominator);
}

bool surfaces_match(const std::string& pred, const std::string& gold, EntityMatchMode mode) {
  const std::string p = normalize_ws(pred);
  const std::string g = normalize_ws(gold);
  if (mode == EntityMatchMode::Exact) return p == g;
  return p.find(g) != std::string::npos || g.find(p) != std::string::npos;
}

}  // namespace

EdScores score_entities(const std::vector<EntityRecord>& pred,
                        const std::vector<EntityRecord>& gold, EntityMatchMode mode) {
  std::vector<bool> used(pred.size(), false);
  int tp = 0;
  for (const auto& g : gold) {
    for (std::size_t i = 0; i < pred.size(); ++i) {
      if (used[i]) continue;
      if (pred[i].entry == g.entry && pred[i].type == g.type &&
          surfaces_match(pred[i].surface, g.surface, mode)) {
        used[i] = true;
        ++tp;
        break;
      }
    }
  }
  EdScores scores;
  scores.extracted = static_cast<int>(pred.size());
  if (pred.empty() && gold.empty()) {
    scores.precision = scores.recall = scores.f1 = 1.0;
    return scores;
  }
  scores.precision = ratio(tp, static_cast<int>(pred.size()));
  scores.recall = ratio(tp, static_cast<int>(gold.size()));
  scores.f1 = harmonic_f1(scores.precision, scores.recall);
  return scores;
}

namespace {

bool non_degenerate(const AssignmentEvent& e) {
  return !normalize_ws(e.entity).empty() && !normalize_ws(e.attribute).empty() &&
         e.comparator != Comparator::None && !normalize_ws(e.value).empty();
}

bool canonical_order_ok(const AssignmentEvent& e) {
  return e.component_order.empty() || e.component_order == canonical_component_order();
}

}  // namespace

EeScores score_events(const std::vector<AssignmentEvent>& pred,
                      const std::vector<AssignmentEvent>& gold) {
  EeScores scores;
  scores.extracted = static_cast<int>(pred.size());
  if (pred.empty() && gold.empty()) {
    scores.tri_r = scores.arg_p_a = scores.arg_p_all = scores.arg_p_ordered = 1.0;
    return scores;
  }

  // Tri-R: one-to-one trigger-entity matching, greedy in gold order.
  {
    std::vector<bool> used(pred.size(), false);
    int matched = 0;
    for (const auto& g : gold) {
      for (std::size_t i = 0; i < pred.size(); ++i) {
        if (used[i]) continue;
        if (pred[i].entry == g.entry && normalize_ws(pred[i].entity) == normalize_ws(g.entity)) {
          used[i] = true;
          ++matched;
          break;
        }
      }
    }
    scores.tri_r = ratio(matched, static_cast<int>(gold.size()));
  }

  // Argument precision family: one-to-one (entity, attribute) matching.
  std::vector<int> matched_gold(pred.size(), -1);
  {
    std::vector<bool> used(pred.size(), false);
    for (std::size_t gi = 0; gi < gold.size(); ++gi) {
      const auto& g = gold[gi];
      for (std::size_t i = 0; i < pred.size(); ++i) {
        if (used[i]) continue;
        if (pred[i].entry == g.entry && normalize_ws(pred[i].entity) == normalize_ws(g.entity) &&
            normalize_ws(pred[i].attribute) == normalize_ws(g.attribute)) {
          used[i] = true;
          matched_gold[i] = static_cast<int>(gi);
          break;
        }
      }
    }
  }

  int attr_matched = 0;
  int all_components = 0;
  int ordered = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (matched_gold[i] < 0) continue;
    ++attr_matched;
    const auto& g = gold[static_cast<std::size_t>(matched_gold[i])];
    const bool full_match = non_degenerate(pred[i]) && pred[i].comparator == g.comparator &&
                            normalize_ws(pred[i].value) == normalize_ws(g.value) &&
                            normalize_ws(pred[i].conditions) == normalize_ws(g.conditions);
    if (!full_match) continue;
    ++all_components;
    if (canonical_order_ok(pred[i])) ++ordered;
  }
  scores.arg_p_a = ratio(attr_matched, static_cast<int>(pred.size()));
  scores.arg_p_all = ratio(all_components, static_cast<int>(pred.size()));
  scores.arg_p_ordered = ratio(ordered, static_cast<int>(pred.size()));
  return scores;
}

double done_at_k(const std::vector<IterationTrace>& traces, int k) {
  if (traces.empty()) return 0.0;
  int done = 0;
  for (const auto& trace : traces) {
    if (trace.finalized && trace.finalized_at && *trace.finalized_at <= k) ++done;
  }
  return static_cast<double>(done) / static_cast<double>(traces.size());
}

CodegenScores score_codegen(const std::vector<IterationTrace>& traces,
                            const std::vector<IntegrityReport>& integrity,
                            const std::vector<PassOutcome>& outcomes) {
  CodegenScores scores;
  double integrity_sum = 0.0;
  for (const auto& report : integrity) integrity_sum += report.integrity;
  scores.code_integrity =
      integrity.empty() ? 0.0 : integrity_sum / static_cast<double>(integrity.size());

  int max_k = 2;
  for (const auto& trace : traces) {
    if (trace.finalized && trace.finalized_at) max_k = std::max(max_k, *trace.finalized_at);
  }
  for (int k = 1; k <= max_k; ++k) scores.done_at[k] = done_at_k(traces, k);

  int compile = 0, logic = 0, pass = 0;
  for (const auto& outcome : outcomes) {
    compile += outcome.compile_pass ? 1 : 0;
    logic += outcome.logic_pass ? 1 : 0;
    pass += outcome.pass ? 1 : 0;
  }
  scores.compile_rate = ratio(compile, static_cast<int>(outcomes.size()));
  scores.logic_rate = ratio(logic, static_cast<int>(outcomes.size()));
  scores.pass_rate = ratio(pass, static_cast<int>(outcomes.size()));
  return scores;
}

namespace {

std::string fixed(double v, int places) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.*f", places, v);
  return buf;
}

std::string table_row(const std::string& label, const std::string& value) {
  std::string row = label;
  if (row.size() < 30) row.append(30 - row.size(), ' ');
  return row + value + "\n";
}

}  // namespace

std::string emit_scorecard(const EdScores& scores, ScoreFormat format) {
  if (format == ScoreFormat::Json) {
    ordered_json j;
    j["extracted"] = scores.extracted;
    j["precision"] = scores.precision;
    j["recall"] = scores.recall;
    j["f1"] = scores.f1;
    return j.dump(2) + "\n";
  }
  std::string out;
  out += table_row("Number of Extracted Entities", std::to_string(scores.extracted));
  out += table_row("Precision", fixed(scores.precision, 3));
  out += table_row("Recall", fixed(scores.recall, 3));
  out += table_row("F1", fixed(scores.f1, 3));
  return out;
}

std::string emit_scorecard(const EeScores& scores, ScoreFormat format) {
  if (format == ScoreFormat::Json) {
    ordered_json j;
    j["extracted"] = scores.extracted;
    j["tri-r"] = scores.tri_r;
    j["arg-p-a"] = scores.arg_p_a;
    j["arg-p-A"] = scores.arg_p_all;
    j["arg-p-O"] = scores.arg_p_ordered;
    return j.dump(2) + "\n";
  }
  std::string out;
  out += table_row("Number of Extracted Event", std::to_string(scores.extracted));
  out += table_row("Tri-R", fixed(scores.tri_r, 3));
  out += table_row("Arg-P_a", fixed(scores.arg_p_a, 3));
  out += table_row("Arg-P_A", fixed(scores.arg_p_all, 3));
  out += table_row("Arg-P_O", fixed(scores.arg_p_ordered, 3));
  return out;
}

std::string emit_scorecard(const CodegenScores& scores, ScoreFormat format) {
  if (format == ScoreFormat::Json) {
    ordered_json j;
    j["code_integrity"] = scores.code_integrity;
    ordered_json done = ordered_json::object();
    for (const auto& [k, v] : scores.done_at) done[std::to_string(k)] = v;
    j["done_at"] = std::move(done);
    j["compile_pass_rate"] = scores.compile_rate;
    j["logic_pass_rate"] = scores.logic_rate;
    j["pass_rate"] = scores.pass_rate;
    return j.dump(2) + "\n";
  }
  std::string out;
  out += table_row("Code Integrity", fixed(scores.code_integrity, 2));
  for (const auto& [k, v] : scores.done_at) {
    out += table_row("Done@" + std::to_string(k), fixed(v, 2));
  }
  out += table_row("Compile Pass", fixed(scores.compile_rate, 3));
  out += table_row("Logic Pass", fixed(scores.logic_rate, 3));
  out += table_row("Pass", fixed(scores.pass_rate, 3));
  return out;
}

}  // namespace rulecheck
