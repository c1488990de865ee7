#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "rulecheck/rule_index.hpp"

namespace rulecheck {

class ModelError : public std::runtime_error {
 public:
  explicit ModelError(const std::string& what) : std::runtime_error(what) {}
};

using ParamValue = std::variant<double, std::string, bool>;

struct Element {
  std::string id;
  std::string category;
  std::optional<std::string> room;
  std::array<double, 3> position{0, 0, 0};
  std::map<std::string, ParamValue> params;
};

struct ExpectedViolation {
  RuleIndex rule;
  std::optional<std::string> element;  // nullopt = model-level

  auto operator<=>(const ExpectedViolation&) const = default;
};

struct BuildingModel {
  std::string model_id;
  std::vector<Element> elements;
  std::vector<ExpectedViolation> expected_violations;

  const Element* find(const std::string& id) const;
};

/// Loads and validates a model JSON file. Violated invariants (duplicate ids,
/// dangling room references, non-finite positions) throw ModelError with the
/// offending field path.
BuildingModel load_model(const std::filesystem::path& path);
BuildingModel model_from_json_text(const std::string& text, const std::string& origin);
std::string model_to_json_text(const BuildingModel& model);

// --- Check DSL -------------------------------------------------------------
//
// Grammar (full EBNF in docs/check_dsl.md):
//   check "<c.s.e>" { stmt* }
//   stmt     = forall | exists-stmt | assert | if
//   forall   = "forall" ident "in" selector "{" stmt* "}"
//   exists   = "exists" ident "in" selector ";"
//   assert   = "assert" boolexpr "message" string ";"
//   if       = "if" boolexpr "{" stmt* "}"
//   selector = "elements" "(" "category" "=" string ["," "within" "=" ident] ")"

struct Selector {
  std::string category;
  std::optional<std::string> within_var;
};

struct Expr;
using ExprPtr = std::unique_ptr<Expr>;

enum class BinOp { Add, Sub, Mul, Div };
enum class CmpOp { Lt, Le, Eq, Ge, Gt, Ne };
enum class BoolOp { And, Or };

std::string to_string(CmpOp op);

struct Expr {
  enum class Kind {
    Number,
    String,
    Var,
    Count,
    Attr,
    Distance,
    Call,  // generic call, resolved against builtins at static-check time
    Binary,
    Compare,
    Bool,  // and / or
    Not,
    Exists,
  };

  Kind kind;
  int line = 0;
  int col = 0;

  double number = 0.0;
  std::string text;  // String literal, Var name, Call/Attr name
  Selector selector;           // Count, Exists
  std::string bound_var;       // Exists
  std::vector<ExprPtr> args;   // Call, Attr(var,name) uses args[0]=Var, Distance args
  ExprPtr lhs, rhs;            // Binary, Compare, Bool
  BinOp bin_op = BinOp::Add;
  CmpOp cmp_op = CmpOp::Eq;
  BoolOp bool_op = BoolOp::And;
};

struct Stmt;
using StmtPtr = std::unique_ptr<Stmt>;

struct Stmt {
  enum class Kind { Forall, Exists, Assert, If };

  Kind kind;
  int line = 0;
  int col = 0;

  std::string var;     // Forall, Exists
  Selector selector;   // Forall, Exists
  ExprPtr condition;   // Assert, If
  std::string message; // Assert
  RuleIndex message_rule;  // first rule index embedded in the message
  std::vector<StmtPtr> body;  // Forall, If
};

struct CheckProgram {
  RuleIndex rule;
  std::vector<StmtPtr> body;
  std::string source;
};

struct Diagnostic {
  int line = 0;
  int col = 0;
  std::string message;
};

struct ParseResult {
  std::shared_ptr<const CheckProgram> program;  // null when diagnostics block compilation
  std::vector<Diagnostic> diagnostics;

  bool ok() const { return program != nullptr && diagnostics.empty(); }
};

/// Parses and statically checks a check program. Static diagnostics cover
/// unknown functions, arity errors, unbound variables and assertions whose
/// message carries no rule index.
ParseResult parse_check(const std::string& source);

struct Violation {
  RuleIndex rule;
  std::optional<std::string> element;
  std::string message;

  auto operator<=>(const Violation&) const = default;
};

struct ViolationReport {
  std::vector<Violation> violations;
  std::vector<std::string> diagnostics;
  int asserts_evaluated = 0;

  std::set<std::pair<std::string, std::optional<std::string>>> violation_keys() const;
};

/// Evaluates a compiled program over a model. Total: attribute misses and
/// type mismatches become diagnostics that abort the current assertion, never
/// silent defaults.
ViolationReport execute(const CheckProgram& program, const BuildingModel& model);

struct PassOutcome {
  bool compile_pass = false;
  bool logic_pass = false;
  bool pass = false;
};

struct JudgeDetail {
  PassOutcome outcome;
  std::vector<Diagnostic> compile_diagnostics;
  ViolationReport compliant_report;
  ViolationReport violating_report;
};

/// compile = parses clean; logic = compile and both executions are
/// diagnostic-free with at least one assertion evaluated on each model;
/// pass = logic and violation sets equal the expected sets on both twins.
JudgeDetail judge(const std::string& source, const BuildingModel& compliant,
                  const BuildingModel& violating);

}  // namespace rulecheck
