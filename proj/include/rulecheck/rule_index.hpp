#pragma once

#include <compare>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>

namespace rulecheck {

/// Index of one rule entry within a code document, rendered as "chapter.section.entry".
struct RuleIndex {
  int chapter = 0;
  int section = 0;
  int entry = 0;

  auto operator<=>(const RuleIndex&) const = default;

  bool valid() const { return chapter > 0 && section > 0 && entry > 0; }

  std::string str() const;

  /// Parses "c.s.e" with positive integer components. Returns nullopt on any deviation.
  static std::optional<RuleIndex> parse(const std::string& text);
};

}  // namespace rulecheck

template <>
struct std::hash<rulecheck::RuleIndex> {
  std::size_t operator()(const rulecheck::RuleIndex& ri) const noexcept {
    std::size_t h = std::hash<int>{}(ri.chapter);
    h = h * 1000003u ^ std::hash<int>{}(ri.section);
    h = h * 1000003u ^ std::hash<int>{}(ri.entry);
    return h;
  }
};
