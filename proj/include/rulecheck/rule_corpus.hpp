#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "rulecheck/rule_index.hpp"

namespace rulecheck {

class Gateway;

struct Provenance {
  std::string source;
  std::size_t begin = 0;
  std::size_t end = 0;

  bool operator==(const Provenance&) const = default;
};

/// One indexed rule clause. Asset paths are relative to the chapter directory.
struct RuleEntry {
  RuleIndex index;
  std::string text;
  std::vector<std::string> tables;
  std::vector<std::string> figures;
  std::set<RuleIndex> dependencies;
  Provenance provenance;
};

enum class CorrectionReason { OcrConfusable, TableMerge, FigureMerge };

std::string to_string(CorrectionReason r);
std::optional<CorrectionReason> correction_reason_from(const std::string& s);

struct Replacement {
  std::string original;
  std::string corrected;
  CorrectionReason reason = CorrectionReason::OcrConfusable;
};

struct CorrectionLog {
  RuleIndex entry;
  std::vector<Replacement> replacements;
  bool gateway_error = false;
  std::string error;
};

/// Applies replacements in order, each at the first occurrence of its
/// original span. Throws if a span is absent.
std::string apply_corrections(const std::string& text, const CorrectionLog& log);

/// Pre-index entry produced by split_chapter. `number_token` holds the
/// explicit clause number exactly as written (empty when unnumbered), so the
/// original chapter text can be reconstructed from the split.
struct SplitEntry {
  std::string body;
  std::string number_token;
  std::optional<RuleIndex> explicit_index;
  std::size_t begin = 0;
  std::size_t end = 0;
  bool no_boundary = false;  // set on the degenerate single-entry result
};

enum class SplitMode { Heuristic, Llm };

/// Splits a chapter into clause entries. Heuristic mode anchors on
/// line-initial "c.s.e" tokens. Llm mode delegates to the gateway with the
/// chapter-split template; provider failures propagate, an unparseable
/// response falls back to the heuristic.
std::vector<SplitEntry> split_chapter(const std::string& raw_text, SplitMode mode,
                                      Gateway* gateway = nullptr);

/// Assigns indices to split entries. Explicit clause numbers win over
/// position; mismatches are reported in `warnings`. Duplicate explicit
/// indices throw.
std::vector<RuleEntry> index_entries(const std::vector<SplitEntry>& entries, int chapter,
                                     int section, const std::string& source_id,
                                     std::vector<std::string>* warnings = nullptr);

/// Re-derives positional indices for already-built entries; used for the
/// idempotency property and by ingest when re-normalizing a corpus.
std::vector<RuleEntry> index_entries(const std::vector<RuleEntry>& entries, int chapter,
                                     int section, std::vector<std::string>* warnings = nullptr);

/// Default reference patterns for dependency detection. Each regex captures
/// chapter, section and entry as three integer groups.
const std::vector<std::string>& default_dependency_patterns();

struct Corpus {
  std::filesystem::path root;
  std::vector<RuleEntry> entries;  // document order
  std::map<RuleIndex, std::size_t> by_index;

  bool contains(const RuleIndex& idx) const { return by_index.count(idx) > 0; }
  const RuleEntry* find(const RuleIndex& idx) const;
  void add(RuleEntry entry);  // throws on duplicate index
};

/// Indices referenced by entry.text that exist in the corpus. Self-references
/// are ignored; references to absent indices produce dangling warnings.
std::set<RuleIndex> detect_dependencies(const RuleEntry& entry, const Corpus& corpus,
                                        const std::vector<std::string>& patterns,
                                        std::vector<std::string>* warnings = nullptr);

/// Gateway-backed OCR correction. The prompt carries the entry text plus the
/// contents of linked tables and figure captions. On gateway failure the
/// entry is returned unchanged with an error-tagged log.
std::pair<RuleEntry, CorrectionLog> correct_entry(const RuleEntry& entry, Gateway& gateway,
                                                  const std::filesystem::path& asset_base);

/// Loads `<root>/<chapter-dir>/entries.jsonl` for every chapter directory.
/// Validates index uniqueness, dependency sanity and asset existence.
Corpus load_corpus(const std::filesystem::path& root);

/// Writes one chapter directory per chapter under `root`.
void save_corpus(const Corpus& corpus, const std::filesystem::path& root);

}  // namespace rulecheck
