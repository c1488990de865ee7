#include <cmath>
#include <regex>
#include <sstream>

#include "rulecheck/check_runtime.hpp"
#include "rulecheck/util.hpp"

namespace rulecheck {

std::string to_string(CmpOp op) {
  switch (op) {
    case CmpOp::Lt: return "<";
    case CmpOp::Le: return "<=";
    case CmpOp::Eq: return "==";
    case CmpOp::Ge: return ">=";
    case CmpOp::Gt: return ">";
    case CmpOp::Ne: return "!=";
  }
  return "==";
}

namespace {

struct Token {
  enum class Kind { Ident, Number, String, Punct, End };
  Kind kind = Kind::End;
  std::string text;
  double number = 0.0;
  int line = 1;
  int col = 1;
};

class Lexer {
 public:
  explicit Lexer(const std::string& src) : src_(src) { advance(); }

  const Token& peek() const { return current_; }

  Token next() {
    Token t = current_;
    advance();
    return t;
  }

  std::optional<std::string> error() const { return error_; }

 private:
  void advance() {
    skip_trivia();
    current_ = Token{};
    current_.line = line_;
    current_.col = col_;
    if (pos_ >= src_.size()) return;  // End
    const char c = src_[pos_];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::string text;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
        text.push_back(take());
      }
      current_.kind = Token::Kind::Ident;
      current_.text = std::move(text);
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::string text;
      while (pos_ < src_.size() &&
             (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.')) {
        text.push_back(take());
      }
      current_.kind = Token::Kind::Number;
      current_.text = text;
      try {
        current_.number = std::stod(text);
      } catch (...) {
        set_error("malformed number \"" + text + "\"");
      }
      return;
    }
    if (c == '"') {
      take();
      std::string text;
      while (pos_ < src_.size() && src_[pos_] != '"') {
        if (src_[pos_] == '\\' && pos_ + 1 < src_.size()) {
          take();
          text.push_back(take());
          continue;
        }
        if (src_[pos_] == '\n') {
          set_error("unterminated string literal");
          break;
        }
        text.push_back(take());
      }
      if (pos_ < src_.size() && src_[pos_] == '"') take();
      else set_error("unterminated string literal");
      current_.kind = Token::Kind::String;
      current_.text = std::move(text);
      return;
    }
    static const char* two_char[] = {"==", "!=", "<=", ">="};
    for (const char* op : two_char) {
      if (c == op[0] && pos_ + 1 < src_.size() && src_[pos_ + 1] == op[1]) {
        take();
        take();
        current_.kind = Token::Kind::Punct;
        current_.text = op;
        return;
      }
    }
    if (std::string("{}();,=<>+-*/").find(c) != std::string::npos) {
      take();
      current_.kind = Token::Kind::Punct;
      current_.text = std::string(1, c);
      return;
    }
    set_error(std::string("unexpected character \"") + c + "\"");
    take();
    current_.kind = Token::Kind::Punct;
    current_.text = std::string(1, c);
  }

  void skip_trivia() {
    while (pos_ < src_.size()) {
      const char c = src_[pos_];
      if (c == '\n' || std::isspace(static_cast<unsigned char>(c))) {
        take();
        continue;
      }
      if (c == '/' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '/') {
        while (pos_ < src_.size() && src_[pos_] != '\n') take();
        continue;
      }
      if (c == '/' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '*') {
        take();
        take();
        while (pos_ + 1 < src_.size() && !(src_[pos_] == '*' && src_[pos_ + 1] == '/')) take();
        if (pos_ + 1 < src_.size()) {
          take();
          take();
        } else {
          pos_ = src_.size();
        }
        continue;
      }
      if (static_cast<unsigned char>(c) >= 0x80) {  // tolerate stray unicode in trivia
        take();
        continue;
      }
      break;
    }
  }

  char take() {
    const char c = src_[pos_++];
    if (c == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    return c;
  }

  void set_error(const std::string& message) {
    if (!error_) error_ = std::to_string(line_) + ":" + std::to_string(col_) + ": " + message;
  }

  const std::string& src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
  Token current_;
  std::optional<std::string> error_;
};

const std::regex kBareIndex(R"((?:^|[^0-9.])(\d+)\.(\d+)\.(\d+)(?![0-9.]))");

std::optional<RuleIndex> first_index_in(const std::string& text) {
  std::smatch m;
  if (std::regex_search(text, m, kBareIndex)) {
    RuleIndex idx{std::stoi(m[1]), std::stoi(m[2]), std::stoi(m[3])};
    if (idx.valid()) return idx;
  }
  return std::nullopt;
}

class Parser {
 public:
  explicit Parser(const std::string& source) : source_(source), lex_(source) {}

  ParseResult run() {
    ParseResult result;
    auto program = std::make_shared<CheckProgram>();
    program->source = source_;
    try {
      expect_keyword("check");
      const Token name = expect(Token::Kind::String, "rule index string");
      const auto idx = RuleIndex::parse(name.text);
      if (!idx) {
        diag(name, "check header \"" + name.text + "\" is not a rule index");
      } else {
        program->rule = *idx;
      }
      expect_punct("{");
      while (!at_punct("}")) program->body.push_back(statement());
      expect_punct("}");
      if (lex_.peek().kind != Token::Kind::End) {
        diag(lex_.peek(), "trailing input after check block");
      }
    } catch (const ParseAbort&) {
      // diagnostics already recorded
    }
    if (auto lex_error = lex_.error()) {
      diagnostics_.push_back(parse_diag(*lex_error));
    }
    result.diagnostics = std::move(diagnostics_);
    if (!parse_failed_) {
      // static diagnostics keep the AST available to callers; ok() stays false
      check_static(*program, result.diagnostics);
      result.program = std::move(program);
    }
    return result;
  }

 private:
  struct ParseAbort {};

  Diagnostic parse_diag(const std::string& pre_rendered) {
    Diagnostic d;
    const std::size_t colon1 = pre_rendered.find(':');
    const std::size_t colon2 = pre_rendered.find(':', colon1 + 1);
    d.line = std::stoi(pre_rendered.substr(0, colon1));
    d.col = std::stoi(pre_rendered.substr(colon1 + 1, colon2 - colon1 - 1));
    d.message = pre_rendered.substr(colon2 + 2);
    return d;
  }

  void diag(const Token& at, const std::string& message) {
    diagnostics_.push_back({at.line, at.col, message});
  }

  [[noreturn]] void abort_parse(const Token& at, const std::string& message) {
    diag(at, message);
    parse_failed_ = true;
    throw ParseAbort{};
  }

  Token expect(Token::Kind kind, const std::string& what) {
    if (lex_.peek().kind != kind) {
      abort_parse(lex_.peek(), "expected " + what + ", got \"" + lex_.peek().text + "\"");
    }
    return lex_.next();
  }

  void expect_keyword(const std::string& kw) {
    if (lex_.peek().kind != Token::Kind::Ident || lex_.peek().text != kw) {
      abort_parse(lex_.peek(), "expected \"" + kw + "\", got \"" + lex_.peek().text + "\"");
    }
    lex_.next();
  }

  void expect_punct(const std::string& p) {
    if (lex_.peek().kind != Token::Kind::Punct || lex_.peek().text != p) {
      abort_parse(lex_.peek(), "expected \"" + p + "\", got \"" + lex_.peek().text + "\"");
    }
    lex_.next();
  }

  bool at_punct(const std::string& p) const {
    return lex_.peek().kind == Token::Kind::Punct && lex_.peek().text == p;
  }

  bool at_keyword(const std::string& kw) const {
    return lex_.peek().kind == Token::Kind::Ident && lex_.peek().text == kw;
  }

  Selector selector() {
    expect_keyword("elements");
    expect_punct("(");
    expect_keyword("category");
    expect_punct("=");
    Selector sel;
    sel.category = expect(Token::Kind::String, "category string").text;
    if (at_punct(",")) {
      lex_.next();
      expect_keyword("within");
      expect_punct("=");
      sel.within_var = expect(Token::Kind::Ident, "variable name").text;
    }
    expect_punct(")");
    return sel;
  }

  StmtPtr statement() {
    const Token head = lex_.peek();
    if (at_keyword("forall")) {
      lex_.next();
      auto stmt = std::make_unique<Stmt>();
      stmt->kind = Stmt::Kind::Forall;
      stmt->line = head.line;
      stmt->col = head.col;
      stmt->var = expect(Token::Kind::Ident, "variable name").text;
      expect_keyword("in");
      stmt->selector = selector();
      expect_punct("{");
      while (!at_punct("}")) stmt->body.push_back(statement());
      expect_punct("}");
      return stmt;
    }
    if (at_keyword("exists")) {
      lex_.next();
      auto stmt = std::make_unique<Stmt>();
      stmt->kind = Stmt::Kind::Exists;
      stmt->line = head.line;
      stmt->col = head.col;
      stmt->var = expect(Token::Kind::Ident, "variable name").text;
      expect_keyword("in");
      stmt->selector = selector();
      expect_punct(";");
      return stmt;
    }
    if (at_keyword("assert")) {
      lex_.next();
      auto stmt = std::make_unique<Stmt>();
      stmt->kind = Stmt::Kind::Assert;
      stmt->line = head.line;
      stmt->col = head.col;
      stmt->condition = expression();
      expect_keyword("message");
      const Token msg = expect(Token::Kind::String, "message string");
      stmt->message = msg.text;
      expect_punct(";");
      if (auto idx = first_index_in(stmt->message)) {
        stmt->message_rule = *idx;
      } else {
        diag(msg, "assertion message carries no rule index");
      }
      return stmt;
    }
    if (at_keyword("if")) {
      lex_.next();
      auto stmt = std::make_unique<Stmt>();
      stmt->kind = Stmt::Kind::If;
      stmt->line = head.line;
      stmt->col = head.col;
      stmt->condition = expression();
      expect_punct("{");
      while (!at_punct("}")) stmt->body.push_back(statement());
      expect_punct("}");
      return stmt;
    }
    abort_parse(head, "expected statement, got \"" + head.text + "\"");
  }

  ExprPtr make_expr(Expr::Kind kind, const Token& at) {
    auto e = std::make_unique<Expr>();
    e->kind = kind;
    e->line = at.line;
    e->col = at.col;
    return e;
  }

  ExprPtr expression() { return or_expr(); }

  ExprPtr or_expr() {
    ExprPtr lhs = and_expr();
    while (at_keyword("or")) {
      const Token op = lex_.next();
      auto node = make_expr(Expr::Kind::Bool, op);
      node->bool_op = BoolOp::Or;
      node->lhs = std::move(lhs);
      node->rhs = and_expr();
      lhs = std::move(node);
    }
    return lhs;
  }

  ExprPtr and_expr() {
    ExprPtr lhs = not_expr();
    while (at_keyword("and")) {
      const Token op = lex_.next();
      auto node = make_expr(Expr::Kind::Bool, op);
      node->bool_op = BoolOp::And;
      node->lhs = std::move(lhs);
      node->rhs = not_expr();
      lhs = std::move(node);
    }
    return lhs;
  }

  ExprPtr not_expr() {
    if (at_keyword("not")) {
      const Token op = lex_.next();
      auto node = make_expr(Expr::Kind::Not, op);
      node->lhs = not_expr();
      return node;
    }
    return cmp_expr();
  }

  std::optional<CmpOp> peek_cmp() const {
    if (lex_.peek().kind != Token::Kind::Punct) return std::nullopt;
    const std::string& t = lex_.peek().text;
    if (t == "<") return CmpOp::Lt;
    if (t == "<=") return CmpOp::Le;
    if (t == "==") return CmpOp::Eq;
    if (t == ">=") return CmpOp::Ge;
    if (t == ">") return CmpOp::Gt;
    if (t == "!=") return CmpOp::Ne;
    return std::nullopt;
  }

  ExprPtr cmp_expr() {
    ExprPtr lhs = add_expr();
    if (auto op = peek_cmp()) {
      const Token at = lex_.next();
      auto node = make_expr(Expr::Kind::Compare, at);
      node->cmp_op = *op;
      node->lhs = std::move(lhs);
      node->rhs = add_expr();
      if (peek_cmp()) diag(lex_.peek(), "chained comparisons are not allowed");
      return node;
    }
    return lhs;
  }

  ExprPtr add_expr() {
    ExprPtr lhs = mul_expr();
    while (at_punct("+") || at_punct("-")) {
      const Token op = lex_.next();
      auto node = make_expr(Expr::Kind::Binary, op);
      node->bin_op = op.text == "+" ? BinOp::Add : BinOp::Sub;
      node->lhs = std::move(lhs);
      node->rhs = mul_expr();
      lhs = std::move(node);
    }
    return lhs;
  }

  ExprPtr mul_expr() {
    ExprPtr lhs = unary_expr();
    while (at_punct("*") || at_punct("/")) {
      const Token op = lex_.next();
      auto node = make_expr(Expr::Kind::Binary, op);
      node->bin_op = op.text == "*" ? BinOp::Mul : BinOp::Div;
      node->lhs = std::move(lhs);
      node->rhs = unary_expr();
      lhs = std::move(node);
    }
    return lhs;
  }

  ExprPtr unary_expr() {
    if (at_punct("-")) {
      const Token op = lex_.next();
      auto node = make_expr(Expr::Kind::Binary, op);
      node->bin_op = BinOp::Sub;
      node->lhs = make_expr(Expr::Kind::Number, op);
      node->lhs->number = 0.0;
      node->rhs = unary_expr();
      return node;
    }
    return primary();
  }

  ExprPtr primary() {
    const Token head = lex_.peek();
    if (head.kind == Token::Kind::Number) {
      lex_.next();
      auto node = make_expr(Expr::Kind::Number, head);
      node->number = head.number;
      return node;
    }
    if (head.kind == Token::Kind::String) {
      lex_.next();
      auto node = make_expr(Expr::Kind::String, head);
      node->text = head.text;
      return node;
    }
    if (at_punct("(")) {
      lex_.next();
      ExprPtr inner = expression();
      expect_punct(")");
      return inner;
    }
    if (at_keyword("exists")) {
      lex_.next();
      auto node = make_expr(Expr::Kind::Exists, head);
      node->bound_var = expect(Token::Kind::Ident, "variable name").text;
      expect_keyword("in");
      node->selector = selector();
      return node;
    }
    if (head.kind == Token::Kind::Ident) {
      lex_.next();
      if (!at_punct("(")) {
        auto node = make_expr(Expr::Kind::Var, head);
        node->text = head.text;
        return node;
      }
      // call forms
      if (head.text == "count") {
        lex_.next();  // (
        auto node = make_expr(Expr::Kind::Count, head);
        node->selector = selector();
        expect_punct(")");
        return node;
      }
      if (head.text == "attr") {
        lex_.next();
        auto node = make_expr(Expr::Kind::Attr, head);
        auto var = make_expr(Expr::Kind::Var, lex_.peek());
        var->text = expect(Token::Kind::Ident, "variable name").text;
        node->args.push_back(std::move(var));
        expect_punct(",");
        node->text = expect(Token::Kind::String, "attribute name string").text;
        expect_punct(")");
        return node;
      }
      if (head.text == "distance") {
        lex_.next();
        auto node = make_expr(Expr::Kind::Distance, head);
        for (int k = 0; k < 2; ++k) {
          auto var = make_expr(Expr::Kind::Var, lex_.peek());
          var->text = expect(Token::Kind::Ident, "variable name").text;
          node->args.push_back(std::move(var));
          if (k == 0) expect_punct(",");
        }
        expect_punct(")");
        return node;
      }
      lex_.next();  // (
      auto node = make_expr(Expr::Kind::Call, head);
      node->text = head.text;
      if (!at_punct(")")) {
        node->args.push_back(expression());
        while (at_punct(",")) {
          lex_.next();
          node->args.push_back(expression());
        }
      }
      expect_punct(")");
      return node;
    }
    abort_parse(head, "expected expression, got \"" + head.text + "\"");
  }

  // --- static checks --------------------------------------------------------

  void check_static(const CheckProgram& program, std::vector<Diagnostic>& out) {
    std::vector<std::string> scope;
    for (const auto& stmt : program.body) check_stmt(*stmt, scope, out);
  }

  void check_selector(const Selector& sel, int line, int col, const std::vector<std::string>& scope,
                      std::vector<Diagnostic>& out) {
    if (sel.within_var &&
        std::find(scope.begin(), scope.end(), *sel.within_var) == scope.end()) {
      out.push_back({line, col, "unbound variable \"" + *sel.within_var + "\" in selector"});
    }
  }

  void check_stmt(const Stmt& stmt, std::vector<std::string>& scope, std::vector<Diagnostic>& out) {
    switch (stmt.kind) {
      case Stmt::Kind::Forall: {
        check_selector(stmt.selector, stmt.line, stmt.col, scope, out);
        scope.push_back(stmt.var);
        for (const auto& s : stmt.body) check_stmt(*s, scope, out);
        scope.pop_back();
        break;
      }
      case Stmt::Kind::Exists:
        check_selector(stmt.selector, stmt.line, stmt.col, scope, out);
        break;
      case Stmt::Kind::Assert:
        check_expr(*stmt.condition, scope, out);
        break;
      case Stmt::Kind::If: {
        check_expr(*stmt.condition, scope, out);
        for (const auto& s : stmt.body) check_stmt(*s, scope, out);
        break;
      }
    }
  }

  void check_expr(const Expr& expr, std::vector<std::string>& scope,
                  std::vector<Diagnostic>& out) {
    switch (expr.kind) {
      case Expr::Kind::Number:
      case Expr::Kind::String:
        break;
      case Expr::Kind::Var:
        if (std::find(scope.begin(), scope.end(), expr.text) == scope.end()) {
          out.push_back({expr.line, expr.col, "unbound variable \"" + expr.text + "\""});
        }
        break;
      case Expr::Kind::Count:
        check_selector(expr.selector, expr.line, expr.col, scope, out);
        break;
      case Expr::Kind::Attr:
      case Expr::Kind::Distance:
        for (const auto& arg : expr.args) check_expr(*arg, scope, out);
        break;
      case Expr::Kind::Call: {
        static const std::map<std::string, int> arity = {
            {"ceil", 1}, {"floor", 1}, {"min", 2}, {"max", 2}};
        auto it = arity.find(expr.text);
        if (it == arity.end()) {
          out.push_back({expr.line, expr.col, "unknown function " + expr.text});
        } else if (static_cast<int>(expr.args.size()) != it->second) {
          out.push_back({expr.line, expr.col,
                         expr.text + " expects " + std::to_string(it->second) + " argument(s), got " +
                             std::to_string(expr.args.size())});
        }
        for (const auto& arg : expr.args) check_expr(*arg, scope, out);
        break;
      }
      case Expr::Kind::Binary:
      case Expr::Kind::Compare:
      case Expr::Kind::Bool:
        check_expr(*expr.lhs, scope, out);
        check_expr(*expr.rhs, scope, out);
        break;
      case Expr::Kind::Not:
        check_expr(*expr.lhs, scope, out);
        break;
      case Expr::Kind::Exists:
        check_selector(expr.selector, expr.line, expr.col, scope, out);
        break;
    }
  }

  const std::string& source_;
  Lexer lex_;
  std::vector<Diagnostic> diagnostics_;
  bool parse_failed_ = false;
};

}  // namespace

ParseResult parse_check(const std::string& source) { return Parser(source).run(); }

// --- interpreter -------------------------------------------------------------

namespace {

using Value = std::variant<double, std::string, bool, const Element*>;

struct ExecState {
  const BuildingModel* model;
  ViolationReport* report;
  RuleIndex program_rule;
  std::vector<std::pair<std::string, const Element*>> env;

  const Element* lookup(const std::string& name) const {
    for (auto it = env.rbegin(); it != env.rend(); ++it) {
      if (it->first == name) return it->second;
    }
    return nullptr;
  }

  std::optional<std::string> innermost_element() const {
    if (env.empty()) return std::nullopt;
    return env.back().second->id;
  }

  void diagnose(int line, const std::string& message) {
    report->diagnostics.push_back("line " + std::to_string(line) + ": " + message);
  }
};

std::vector<const Element*> select(const Selector& sel, ExecState& state) {
  std::vector<const Element*> out;
  const Element* container = nullptr;
  if (sel.within_var) container = state.lookup(*sel.within_var);
  for (const auto& e : state.model->elements) {
    if (e.category != sel.category) continue;
    if (sel.within_var) {
      if (!container || !e.room || *e.room != container->id) continue;
    }
    out.push_back(&e);
  }
  return out;
}

std::string value_type_name(const Value& v) {
  if (std::holds_alternative<double>(v)) return "number";
  if (std::holds_alternative<std::string>(v)) return "string";
  if (std::holds_alternative<bool>(v)) return "boolean";
  return "element";
}

std::optional<Value> eval(const Expr& expr, ExecState& state);

std::optional<double> eval_number(const Expr& expr, ExecState& state) {
  auto v = eval(expr, state);
  if (!v) return std::nullopt;
  if (!std::holds_alternative<double>(*v)) {
    state.diagnose(expr.line, "expected a number, got " + value_type_name(*v));
    return std::nullopt;
  }
  return std::get<double>(*v);
}

std::optional<Value> eval(const Expr& expr, ExecState& state) {
  switch (expr.kind) {
    case Expr::Kind::Number:
      return Value{expr.number};
    case Expr::Kind::String:
      return Value{expr.text};
    case Expr::Kind::Var: {
      const Element* e = state.lookup(expr.text);
      if (!e) {
        state.diagnose(expr.line, "unbound variable \"" + expr.text + "\"");
        return std::nullopt;
      }
      return Value{e};
    }
    case Expr::Kind::Count:
      return Value{static_cast<double>(select(expr.selector, state).size())};
    case Expr::Kind::Attr: {
      auto target = eval(*expr.args[0], state);
      if (!target) return std::nullopt;
      const Element* e = std::get<const Element*>(*target);
      if (expr.text == "id") return Value{e->id};
      if (expr.text == "category") return Value{e->category};
      auto it = e->params.find(expr.text);
      if (it == e->params.end()) {
        state.diagnose(expr.line,
                       "unknown attribute " + expr.text + " on element \"" + e->id + "\"");
        return std::nullopt;
      }
      if (std::holds_alternative<double>(it->second)) return Value{std::get<double>(it->second)};
      if (std::holds_alternative<std::string>(it->second)) {
        return Value{std::get<std::string>(it->second)};
      }
      return Value{std::get<bool>(it->second)};
    }
    case Expr::Kind::Distance: {
      auto a = eval(*expr.args[0], state);
      if (!a) return std::nullopt;
      auto b = eval(*expr.args[1], state);
      if (!b) return std::nullopt;
      const Element* ea = std::get<const Element*>(*a);
      const Element* eb = std::get<const Element*>(*b);
      const double dx = ea->position[0] - eb->position[0];
      const double dy = ea->position[1] - eb->position[1];
      const double dz = ea->position[2] - eb->position[2];
      return Value{std::sqrt(dx * dx + dy * dy + dz * dz)};
    }
    case Expr::Kind::Call: {
      std::vector<double> args;
      for (const auto& arg : expr.args) {
        auto v = eval_number(*arg, state);
        if (!v) return std::nullopt;
        args.push_back(*v);
      }
      if (expr.text == "ceil") return Value{std::ceil(args[0])};
      if (expr.text == "floor") return Value{std::floor(args[0])};
      if (expr.text == "min") return Value{std::min(args[0], args[1])};
      if (expr.text == "max") return Value{std::max(args[0], args[1])};
      state.diagnose(expr.line, "unknown function " + expr.text);
      return std::nullopt;
    }
    case Expr::Kind::Binary: {
      auto lhs = eval_number(*expr.lhs, state);
      if (!lhs) return std::nullopt;
      auto rhs = eval_number(*expr.rhs, state);
      if (!rhs) return std::nullopt;
      switch (expr.bin_op) {
        case BinOp::Add: return Value{*lhs + *rhs};
        case BinOp::Sub: return Value{*lhs - *rhs};
        case BinOp::Mul: return Value{*lhs * *rhs};
        case BinOp::Div:
          if (*rhs == 0.0) {
            state.diagnose(expr.line, "division by zero");
            return std::nullopt;
          }
          return Value{*lhs / *rhs};
      }
      return std::nullopt;
    }
    case Expr::Kind::Compare: {
      auto lhs = eval(*expr.lhs, state);
      if (!lhs) return std::nullopt;
      auto rhs = eval(*expr.rhs, state);
      if (!rhs) return std::nullopt;
      if (std::holds_alternative<double>(*lhs) && std::holds_alternative<double>(*rhs)) {
        const double a = std::get<double>(*lhs);
        const double b = std::get<double>(*rhs);
        switch (expr.cmp_op) {
          case CmpOp::Lt: return Value{a < b};
          case CmpOp::Le: return Value{a <= b};
          case CmpOp::Eq: return Value{a == b};
          case CmpOp::Ge: return Value{a >= b};
          case CmpOp::Gt: return Value{a > b};
          case CmpOp::Ne: return Value{a != b};
        }
      }
      if (std::holds_alternative<std::string>(*lhs) && std::holds_alternative<std::string>(*rhs)) {
        if (expr.cmp_op == CmpOp::Eq) return Value{std::get<std::string>(*lhs) == std::get<std::string>(*rhs)};
        if (expr.cmp_op == CmpOp::Ne) return Value{std::get<std::string>(*lhs) != std::get<std::string>(*rhs)};
        state.diagnose(expr.line, "ordered comparison of strings");
        return std::nullopt;
      }
      if (std::holds_alternative<bool>(*lhs) && std::holds_alternative<bool>(*rhs)) {
        if (expr.cmp_op == CmpOp::Eq) return Value{std::get<bool>(*lhs) == std::get<bool>(*rhs)};
        if (expr.cmp_op == CmpOp::Ne) return Value{std::get<bool>(*lhs) != std::get<bool>(*rhs)};
        state.diagnose(expr.line, "ordered comparison of booleans");
        return std::nullopt;
      }
      state.diagnose(expr.line, "type mismatch comparing " + value_type_name(*lhs) + " and " +
                                    value_type_name(*rhs));
      return std::nullopt;
    }
    case Expr::Kind::Bool: {
      auto lhs = eval(*expr.lhs, state);
      if (!lhs) return std::nullopt;
      if (!std::holds_alternative<bool>(*lhs)) {
        state.diagnose(expr.lhs->line, "expected a boolean, got " + value_type_name(*lhs));
        return std::nullopt;
      }
      const bool a = std::get<bool>(*lhs);
      // short circuit
      if (expr.bool_op == BoolOp::And && !a) return Value{false};
      if (expr.bool_op == BoolOp::Or && a) return Value{true};
      auto rhs = eval(*expr.rhs, state);
      if (!rhs) return std::nullopt;
      if (!std::holds_alternative<bool>(*rhs)) {
        state.diagnose(expr.rhs->line, "expected a boolean, got " + value_type_name(*rhs));
        return std::nullopt;
      }
      return Value{std::get<bool>(*rhs)};
    }
    case Expr::Kind::Not: {
      auto v = eval(*expr.lhs, state);
      if (!v) return std::nullopt;
      if (!std::holds_alternative<bool>(*v)) {
        state.diagnose(expr.line, "expected a boolean, got " + value_type_name(*v));
        return std::nullopt;
      }
      return Value{!std::get<bool>(*v)};
    }
    case Expr::Kind::Exists:
      return Value{!select(expr.selector, state).empty()};
  }
  return std::nullopt;
}

void exec_stmt(const Stmt& stmt, ExecState& state);

void exec_block(const std::vector<StmtPtr>& body, ExecState& state) {
  for (const auto& s : body) exec_stmt(*s, state);
}

void exec_stmt(const Stmt& stmt, ExecState& state) {
  switch (stmt.kind) {
    case Stmt::Kind::Forall: {
      const auto selected = select(stmt.selector, state);
      for (const Element* e : selected) {
        state.env.emplace_back(stmt.var, e);
        exec_block(stmt.body, state);
        state.env.pop_back();
      }
      break;
    }
    case Stmt::Kind::Exists: {
      ++state.report->asserts_evaluated;
      if (select(stmt.selector, state).empty()) {
        Violation v;
        v.rule = state.program_rule;
        v.element = state.innermost_element();
        v.message = "rule " + state.program_rule.str() + ": no \"" + stmt.selector.category +
                    "\" element (exists " + stmt.var + ")";
        state.report->violations.push_back(std::move(v));
      }
      break;
    }
    case Stmt::Kind::Assert: {
      auto v = eval(*stmt.condition, state);
      if (!v) break;  // diagnostic recorded, assertion aborted
      if (!std::holds_alternative<bool>(*v)) {
        state.diagnose(stmt.line, "assert condition is not a boolean");
        break;
      }
      ++state.report->asserts_evaluated;
      if (!std::get<bool>(*v)) {
        Violation violation;
        violation.rule = stmt.message_rule;
        violation.element = state.innermost_element();
        violation.message = stmt.message;
        state.report->violations.push_back(std::move(violation));
      }
      break;
    }
    case Stmt::Kind::If: {
      auto v = eval(*stmt.condition, state);
      if (!v) break;
      if (!std::holds_alternative<bool>(*v)) {
        state.diagnose(stmt.line, "if condition is not a boolean");
        break;
      }
      if (std::get<bool>(*v)) exec_block(stmt.body, state);
      break;
    }
  }
}

}  // namespace

std::set<std::pair<std::string, std::optional<std::string>>> ViolationReport::violation_keys()
    const {
  std::set<std::pair<std::string, std::optional<std::string>>> keys;
  for (const auto& v : violations) keys.emplace(v.rule.str(), v.element);
  return keys;
}

ViolationReport execute(const CheckProgram& program, const BuildingModel& model) {
  ViolationReport report;
  ExecState state{&model, &report, program.rule, {}};
  exec_block(program.body, state);
  return report;
}

JudgeDetail judge(const std::string& source, const BuildingModel& compliant,
                  const BuildingModel& violating) {
  JudgeDetail detail;
  const ParseResult parsed = parse_check(source);
  detail.compile_diagnostics = parsed.diagnostics;
  if (!parsed.ok()) return detail;
  detail.outcome.compile_pass = true;

  detail.compliant_report = execute(*parsed.program, compliant);
  detail.violating_report = execute(*parsed.program, violating);

  const bool clean = detail.compliant_report.diagnostics.empty() &&
                     detail.violating_report.diagnostics.empty();
  const bool non_vacuous = detail.compliant_report.asserts_evaluated > 0 &&
                           detail.violating_report.asserts_evaluated > 0;
  detail.outcome.logic_pass = clean && non_vacuous;
  if (!detail.outcome.logic_pass) return detail;

  auto expected_keys = [](const BuildingModel& model) {
    std::set<std::pair<std::string, std::optional<std::string>>> keys;
    for (const auto& v : model.expected_violations) keys.emplace(v.rule.str(), v.element);
    return keys;
  };
  detail.outcome.pass = detail.compliant_report.violation_keys() == expected_keys(compliant) &&
                        detail.violating_report.violation_keys() == expected_keys(violating);
  return detail;
}

}  // namespace rulecheck
