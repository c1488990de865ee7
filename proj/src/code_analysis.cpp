#include "rulecheck/code_analysis.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "rulecheck/util.hpp"

namespace rulecheck {

using ordered_json = nlohmann::ordered_json;

std::string to_string(CodeTarget t) {
  return t == CodeTarget::CheckDsl ? "check-dsl" : "c-family-text";
}

bool contains_unimplemented_marker(const std::string& line) {
  return line.find("⟨unimplemented⟩") != std::string::npos ||
         line.find("<unimplemented>") != std::string::npos;
}

namespace {

struct Token {
  enum class Kind { Ident, Number, String, Punct };
  Kind kind;
  std::string text;
  int line = 1;
};

struct Scan {
  std::vector<Token> tokens;
  std::vector<std::pair<int, std::string>> comments;  // line, body
  std::vector<std::pair<int, std::string>> strings;   // line, body
};

bool ident_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}
bool ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

/// C-like scanner shared by both targets: //-comments, /* */-comments,
/// double/single-quoted strings, identifiers, numbers, punctuation.
/// Non-ASCII bytes outside comments/strings are skipped.
Scan scan_code(const std::string& code) {
  Scan out;
  int line = 1;
  std::size_t i = 0;
  const std::size_t n = code.size();
  while (i < n) {
    const char c = code[i];
    if (c == '\n') {
      ++line;
      ++i;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (c == '/' && i + 1 < n && code[i + 1] == '/') {
      const std::size_t end = std::min(code.find('\n', i), n);
      out.comments.emplace_back(line, code.substr(i + 2, end - i - 2));
      i = end;
      continue;
    }
    if (c == '/' && i + 1 < n && code[i + 1] == '*') {
      const std::size_t end = code.find("*/", i + 2);
      const std::size_t stop = end == std::string::npos ? n : end;
      const std::string body = code.substr(i + 2, stop - i - 2);
      out.comments.emplace_back(line, body);
      line += static_cast<int>(std::count(body.begin(), body.end(), '\n'));
      i = end == std::string::npos ? n : end + 2;
      continue;
    }
    if (c == '"' || c == '\'') {
      const char quote = c;
      std::string body;
      ++i;
      while (i < n && code[i] != quote) {
        if (code[i] == '\\' && i + 1 < n) {
          body.push_back(code[i + 1]);
          i += 2;
          continue;
        }
        if (code[i] == '\n') ++line;
        body.push_back(code[i]);
        ++i;
      }
      if (i < n) ++i;  // closing quote
      out.strings.emplace_back(line, body);
      out.tokens.push_back({Token::Kind::String, body, line});
      continue;
    }
    if (ident_start(c)) {
      std::size_t j = i + 1;
      while (j < n && ident_char(code[j])) ++j;
      out.tokens.push_back({Token::Kind::Ident, code.substr(i, j - i), line});
      i = j;
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i + 1;
      while (j < n && (std::isdigit(static_cast<unsigned char>(code[j])) || code[j] == '.')) ++j;
      out.tokens.push_back({Token::Kind::Number, code.substr(i, j - i), line});
      i = j;
      continue;
    }
    // multi-char operators kept whole
    static const char* two_char[] = {"==", "!=", "<=", ">=", "&&", "||", "->", "=>"};
    bool matched = false;
    for (const char* op : two_char) {
      if (c == op[0] && i + 1 < n && code[i + 1] == op[1]) {
        out.tokens.push_back({Token::Kind::Punct, op, line});
        i += 2;
        matched = true;
        break;
      }
    }
    if (matched) continue;
    if (static_cast<unsigned char>(c) < 0x80) {
      out.tokens.push_back({Token::Kind::Punct, std::string(1, c), line});
    }
    ++i;  // non-ASCII bytes (e.g. the unicode marker) fall through here
  }
  return out;
}

struct MarkerLine {
  int line;
  std::string name;  // first identifier after the marker, possibly empty
};

std::vector<MarkerLine> scan_markers(const std::string& code) {
  std::vector<MarkerLine> out;
  std::istringstream in(code);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!contains_unimplemented_marker(line)) continue;
    std::size_t at = line.find("<unimplemented>");
    std::size_t after = at == std::string::npos ? 0 : at + 15;
    if (at == std::string::npos) {
      at = line.find("⟨unimplemented⟩");
      after = at + std::string("⟨unimplemented⟩").size();
    }
    std::string name;
    for (std::size_t i = after; i < line.size(); ++i) {
      if (ident_start(line[i])) {
        std::size_t j = i + 1;
        while (j < line.size() && ident_char(line[j])) ++j;
        name = line.substr(i, j - i);
        break;
      }
      if (!std::isspace(static_cast<unsigned char>(line[i])) && line[i] != ':' && line[i] != '-') {
        break;
      }
    }
    out.push_back({line_no, name});
  }
  return out;
}

const std::set<std::string>& dsl_keywords() {
  static const std::set<std::string> kw = {"check", "forall", "exists", "assert", "if",
                                           "in",    "message", "and",   "or",    "not",
                                           "elements", "category", "within", "true", "false"};
  return kw;
}

SymbolTable dsl_symbols(const std::string& code) {
  SymbolTable table;
  const Scan scan = scan_code(code);
  const auto& toks = scan.tokens;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (toks[i].kind != Token::Kind::Ident) continue;
    const std::string& text = toks[i].text;
    const bool is_kw = dsl_keywords().count(text) > 0;
    if (is_kw) {
      if ((text == "forall" || text == "exists") && i + 2 < toks.size() &&
          toks[i + 1].kind == Token::Kind::Ident && toks[i + 2].text == "in") {
        table.declared_variables.insert(toks[i + 1].text);
      }
      continue;
    }
    const bool is_binder = i > 0 && (toks[i - 1].text == "forall" || toks[i - 1].text == "exists") &&
                           i + 1 < toks.size() && toks[i + 1].text == "in";
    if (is_binder) continue;
    if (i + 1 < toks.size() && toks[i + 1].text == "(") {
      table.called_functions.insert(text);
    } else {
      table.used_variables.insert(text);
    }
  }
  for (const auto& marker : scan_markers(code)) {
    if (!marker.name.empty()) table.marker_tagged.insert(marker.name);
  }
  return table;
}

const std::set<std::string>& cfamily_keywords() {
  static const std::set<std::string> kw = {
      "if",     "else",    "while",   "for",     "foreach", "switch",  "case",    "default",
      "return", "break",   "continue", "new",    "using",   "namespace", "class", "struct",
      "public", "private", "protected", "internal", "static", "void",  "var",     "int",
      "double", "float",   "bool",    "string",  "char",    "long",    "decimal", "object",
      "try",    "catch",   "finally", "throw",   "in",      "out",     "ref",     "null",
      "true",   "false",   "this",    "base",    "lock",    "typeof",  "sizeof",  "nameof",
      "do",     "readonly", "const",  "override", "virtual", "get",    "set",     "is",
      "as",     "enum",    "interface"};
  return kw;
}

const std::set<std::string>& cfamily_type_keywords() {
  static const std::set<std::string> kw = {"void",   "var",  "int",  "double", "float",
                                           "bool",   "string", "char", "long", "decimal",
                                           "object"};
  return kw;
}

bool is_type_ish(const Token& tok) {
  if (tok.kind == Token::Kind::Ident) {
    if (cfamily_type_keywords().count(tok.text)) return true;
    if (cfamily_keywords().count(tok.text)) return false;
    return true;  // any plain identifier can be a user type
  }
  return tok.kind == Token::Kind::Punct &&
         (tok.text == ">" || tok.text == "]" || tok.text == "*");
}

std::size_t match_forward(const std::vector<Token>& toks, std::size_t open, const std::string& o,
                          const std::string& c) {
  int depth = 0;
  for (std::size_t i = open; i < toks.size(); ++i) {
    if (toks[i].kind != Token::Kind::Punct) continue;
    if (toks[i].text == o) ++depth;
    if (toks[i].text == c) {
      --depth;
      if (depth == 0) return i;
    }
  }
  return toks.size();
}

bool body_is_stub(const std::vector<Token>& toks, std::size_t open_brace, std::size_t close_brace) {
  // Tokens carry no comments, so a comments-only body is empty here.
  if (close_brace <= open_brace + 1) return true;
  int semicolons = 0;
  bool mentions_not_implemented = false;
  for (std::size_t i = open_brace + 1; i < close_brace; ++i) {
    if (toks[i].kind == Token::Kind::Punct && toks[i].text == ";") ++semicolons;
    if (toks[i].kind == Token::Kind::Punct && toks[i].text == "{") return false;
    const std::string lower = ascii_lower(toks[i].text);
    if (lower.find("notimplemented") != std::string::npos || lower == "todo") {
      mentions_not_implemented = true;
    }
  }
  return semicolons <= 1 && mentions_not_implemented;
}

struct CFamilyScan {
  SymbolTable table;
  std::set<std::string> stub_bodies;
  std::vector<std::pair<int, std::string>> uses_in_order;      // line, name
  std::vector<std::pair<int, std::string>> declares_in_order;  // line, name
};

CFamilyScan cfamily_scan(const std::string& code) {
  CFamilyScan out;
  const Scan scan = scan_code(code);
  const auto& toks = scan.tokens;
  std::vector<MarkerLine> markers = scan_markers(code);
  std::size_t next_marker = 0;

  auto pending_marker = [&](int line) -> std::optional<std::string> {
    std::optional<std::string> hit;
    while (next_marker < markers.size() && markers[next_marker].line <= line) {
      hit = markers[next_marker].name;
      ++next_marker;
    }
    return hit;
  };

  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (toks[i].kind != Token::Kind::Ident) continue;
    const std::string& name = toks[i].text;
    if (cfamily_keywords().count(name)) continue;

    const Token* prev = i > 0 ? &toks[i - 1] : nullptr;
    const bool next_is_paren = i + 1 < toks.size() && toks[i + 1].text == "(";

    if (next_is_paren) {
      if (prev && prev->kind == Token::Kind::Punct && prev->text == ".") continue;  // method
      if (prev && prev->kind == Token::Kind::Ident && prev->text == "new") continue;  // ctor
      const std::size_t close = match_forward(toks, i + 1, "(", ")");
      const bool has_body = close + 1 < toks.size() && toks[close + 1].text == "{";
      const bool prev_type_ish = prev != nullptr && is_type_ish(*prev);
      if (prev_type_ish && has_body) {
        out.table.defined_functions.insert(name);
        const auto marker = pending_marker(toks[i].line);
        if (marker) out.table.marker_tagged.insert(name);
        const std::size_t body_close = match_forward(toks, close + 1, "{", "}");
        if (body_is_stub(toks, close + 1, body_close)) out.stub_bodies.insert(name);
        // parameters: `Type name` pairs inside the parens
        for (std::size_t p = i + 2; p < close && close < toks.size(); ++p) {
          if (toks[p].kind == Token::Kind::Ident && !cfamily_keywords().count(toks[p].text) &&
              p > i + 2 && is_type_ish(toks[p - 1]) &&
              (p + 1 == close || toks[p + 1].text == ",")) {
            out.table.declared_variables.insert(toks[p].text);
            out.declares_in_order.emplace_back(toks[p].line, toks[p].text);
          }
        }
        continue;
      }
      if (prev_type_ish && !has_body) {
        // declared-only signature (possibly a marker-tagged stub)
        const auto marker = pending_marker(toks[i].line);
        if (marker) out.table.marker_tagged.insert(name);
        continue;
      }
      out.table.called_functions.insert(name);
      continue;
    }

    if (prev && prev->kind == Token::Kind::Punct && prev->text == ".") continue;  // member
    const bool next_is_ident = i + 1 < toks.size() && toks[i + 1].kind == Token::Kind::Ident;
    if (next_is_ident) continue;  // type position (`Room r`)

    const bool declaration = prev != nullptr && is_type_ish(*prev) && i + 1 < toks.size() &&
                             (toks[i + 1].text == "=" || toks[i + 1].text == ";" ||
                              toks[i + 1].text == "," || toks[i + 1].text == ")" ||
                              toks[i + 1].text == "in");
    if (declaration) {
      out.table.declared_variables.insert(name);
      out.declares_in_order.emplace_back(toks[i].line, name);
    } else {
      out.table.used_variables.insert(name);
      out.uses_in_order.emplace_back(toks[i].line, name);
    }
  }

  // Unnamed markers that precede no definition: keep the explicit names only.
  for (const auto& m : markers) {
    if (!m.name.empty()) out.table.marker_tagged.insert(m.name);
  }
  return out;
}

}  // namespace

SymbolTable parse_symbols(const std::string& code, CodeTarget target) {
  if (target == CodeTarget::CheckDsl) return dsl_symbols(code);
  return cfamily_scan(code).table;
}

const std::set<std::string>& builtin_whitelist(CodeTarget target) {
  static const std::set<std::string> dsl = {"count", "attr", "distance", "ceil",
                                            "floor", "min",  "max"};
  static const std::set<std::string> cfamily = {"assert", "Assert", "print", "Print",
                                                "Main"};
  return target == CodeTarget::CheckDsl ? dsl : cfamily;
}

IncompletenessReport find_incomplete(const std::string& code, CodeTarget target) {
  return find_incomplete(code, target, {});
}

IncompletenessReport find_incomplete(const std::string& code, CodeTarget target,
                                     const std::set<std::string>& extra_builtins) {
  IncompletenessReport report;
  const auto& builtins = builtin_whitelist(target);
  auto known = [&](const std::string& name) {
    return builtins.count(name) > 0 || extra_builtins.count(name) > 0;
  };

  if (target == CodeTarget::CheckDsl) {
    const SymbolTable table = dsl_symbols(code);
    report.unimplemented = table.marker_tagged;
    for (const auto& name : table.called_functions) {
      if (!known(name) && !table.defined_functions.count(name)) report.undefined.insert(name);
    }
    for (const auto& name : table.used_variables) {
      if (!table.declared_variables.count(name)) report.unbound_variables.insert(name);
    }
    return report;
  }

  const CFamilyScan scan = cfamily_scan(code);
  report.unimplemented = scan.table.marker_tagged;
  for (const auto& name : scan.stub_bodies) report.unimplemented.insert(name);
  for (const auto& name : scan.table.called_functions) {
    if (!known(name) && !scan.table.defined_functions.count(name)) report.undefined.insert(name);
  }
  // use before any declaration, by line order
  std::map<std::string, int> first_decl;
  for (const auto& [line, name] : scan.declares_in_order) {
    if (!first_decl.count(name)) first_decl[name] = line;
  }
  for (const auto& [line, name] : scan.uses_in_order) {
    auto it = first_decl.find(name);
    if (it == first_decl.end() || it->second > line) report.unbound_variables.insert(name);
  }
  return report;
}

std::set<RuleIndex> find_rule_annotations(const std::string& code) {
  const Scan scan = scan_code(code);
  static const std::regex kBareIndex(R"((?:^|[^0-9.])(\d+)\.(\d+)\.(\d+)(?![0-9.]))");
  std::set<RuleIndex> out;
  auto harvest = [&](const std::string& text) {
    auto begin = std::sregex_iterator(text.begin(), text.end(), kBareIndex);
    for (auto it = begin; it != std::sregex_iterator(); ++it) {
      RuleIndex idx{std::stoi((*it)[1]), std::stoi((*it)[2]), std::stoi((*it)[3])};
      if (idx.valid()) out.insert(idx);
    }
  };
  for (const auto& [line, text] : scan.comments) harvest(text);
  for (const auto& [line, text] : scan.strings) harvest(text);
  return out;
}

std::set<std::string> find_requirement_annotations(const std::string& code) {
  const Scan scan = scan_code(code);
  static const std::regex kReq(R"(req:\s*([A-Za-z0-9._/#-]+))");
  std::set<std::string> out;
  for (const auto& [line, text] : scan.comments) {
    auto begin = std::sregex_iterator(text.begin(), text.end(), kReq);
    for (auto it = begin; it != std::sregex_iterator(); ++it) out.insert((*it)[1]);
  }
  return out;
}

std::string report_to_json(const IncompletenessReport& report) {
  ordered_json j;
  j["unimplemented"] = report.unimplemented;
  j["undefined"] = report.undefined;
  j["unbound_variables"] = report.unbound_variables;
  j["complete"] = report.empty();
  return j.dump(2);
}

}  // namespace rulecheck
