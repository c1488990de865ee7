#include "rulecheck/rule_index.hpp"

#include <cctype>
#include <cstdio>

namespace rulecheck {

std::string RuleIndex::str() const {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%d.%d.%d", chapter, section, entry);
  return buf;
}

std::optional<RuleIndex> RuleIndex::parse(const std::string& text) {
  int parts[3] = {0, 0, 0};
  int part = 0;
  bool any_digit = false;
  for (char c : text) {
    if (c >= '0' && c <= '9') {
      if (parts[part] > 100000) return std::nullopt;
      parts[part] = parts[part] * 10 + (c - '0');
      any_digit = true;
    } else if (c == '.') {
      if (!any_digit || part == 2) return std::nullopt;
      ++part;
      any_digit = false;
    } else {
      return std::nullopt;
    }
  }
  if (part != 2 || !any_digit) return std::nullopt;
  RuleIndex idx{parts[0], parts[1], parts[2]};
  if (!idx.valid()) return std::nullopt;
  return idx;
}

}  // namespace rulecheck
