#pragma once

#include <set>
#include <string>

#include "rulecheck/rule_index.hpp"

namespace rulecheck {

enum class CodeTarget { CheckDsl, CFamilyText };

std::string to_string(CodeTarget t);

struct SymbolTable {
  std::set<std::string> defined_functions;
  std::set<std::string> called_functions;
  std::set<std::string> declared_variables;
  std::set<std::string> used_variables;
  std::set<std::string> marker_tagged;
};

struct IncompletenessReport {
  std::set<std::string> unimplemented;      // marker-tagged or empty/todo bodies
  std::set<std::string> undefined;          // called but never defined
  std::set<std::string> unbound_variables;  // used before any declaration

  bool empty() const {
    return unimplemented.empty() && undefined.empty() && unbound_variables.empty();
  }
};

/// Extracts defined/called functions and declared/used variables.
/// The check-dsl path follows the DSL grammar exactly; the c-family path is
/// the documented token heuristic (a definition is `type-ish ident (params) {`,
/// a call is `ident (` not preceded by a type-ish token, method calls after
/// `.` and constructor calls after `new` are treated as external).
SymbolTable parse_symbols(const std::string& code, CodeTarget target);

/// Built-in names that never count as undefined for a target.
const std::set<std::string>& builtin_whitelist(CodeTarget target);

IncompletenessReport find_incomplete(const std::string& code, CodeTarget target);
IncompletenessReport find_incomplete(const std::string& code, CodeTarget target,
                                     const std::set<std::string>& extra_builtins);

/// Rule indices mentioned in comments or string literals, as bare "c.s.e"
/// tokens. Both `//` and `/* */` comment syntaxes are scanned.
std::set<RuleIndex> find_rule_annotations(const std::string& code);

/// Requirement ids written as `req: <id>` inside comments.
std::set<std::string> find_requirement_annotations(const std::string& code);

std::string report_to_json(const IncompletenessReport& report);

/// The completion marker is accepted in both its Unicode-bracket and ASCII
/// spellings.
bool contains_unimplemented_marker(const std::string& line);

}  // namespace rulecheck
