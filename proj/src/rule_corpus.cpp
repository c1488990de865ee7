#include "rulecheck/rule_corpus.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <regex>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "rulecheck/llm_gateway.hpp"
#include "rulecheck/util.hpp"

namespace rulecheck {

using ordered_json = nlohmann::ordered_json;

std::string to_string(CorrectionReason r) {
  switch (r) {
    case CorrectionReason::OcrConfusable: return "ocr-confusable";
    case CorrectionReason::TableMerge: return "table-merge";
    case CorrectionReason::FigureMerge: return "figure-merge";
  }
  return "ocr-confusable";
}

std::optional<CorrectionReason> correction_reason_from(const std::string& s) {
  if (s == "ocr-confusable") return CorrectionReason::OcrConfusable;
  if (s == "table-merge") return CorrectionReason::TableMerge;
  if (s == "figure-merge") return CorrectionReason::FigureMerge;
  return std::nullopt;
}

std::string apply_corrections(const std::string& text, const CorrectionLog& log) {
  std::string out = text;
  for (const auto& rep : log.replacements) {
    const std::size_t pos = out.find(rep.original);
    if (pos == std::string::npos) {
      throw std::runtime_error("correction span not found: \"" + rep.original + "\"");
    }
    out.replace(pos, rep.original.size(), rep.corrected);
  }
  return out;
}

namespace {

// Line-initial clause number: optional indentation, then c.s.e followed by
// whitespace or end of line.
const std::regex kClauseHead(R"(^[ \t]*(\d+)\.(\d+)\.(\d+)(?=\s|$))");

struct Boundary {
  std::size_t line_start;
  std::size_t token_end;
  RuleIndex index;
  std::string token;
};

std::vector<Boundary> find_boundaries(const std::string& raw) {
  std::vector<Boundary> out;
  std::size_t line_start = 0;
  while (line_start <= raw.size()) {
    const std::size_t line_end = std::min(raw.find('\n', line_start), raw.size());
    const std::string line = raw.substr(line_start, line_end - line_start);
    std::smatch m;
    if (std::regex_search(line, m, kClauseHead)) {
      RuleIndex idx{std::stoi(m[1]), std::stoi(m[2]), std::stoi(m[3])};
      if (idx.valid()) {
        const std::size_t token_begin = line_start + m.position(1);
        const std::size_t token_end = line_start + m.position(3) + m.length(3);
        out.push_back({line_start, token_end, idx, raw.substr(token_begin, token_end - token_begin)});
      }
    }
    if (line_end >= raw.size()) break;
    line_start = line_end + 1;
  }
  return out;
}

std::vector<SplitEntry> split_heuristic(const std::string& raw) {
  std::vector<SplitEntry> entries;
  const auto boundaries = find_boundaries(raw);
  if (boundaries.empty()) {
    SplitEntry single;
    single.body = trim(raw);
    single.begin = 0;
    single.end = raw.size();
    single.no_boundary = true;
    entries.push_back(std::move(single));
    return entries;
  }
  // Text before the first clause number becomes an unnumbered leading entry.
  if (trim(raw.substr(0, boundaries.front().line_start)).size() > 0) {
    SplitEntry lead;
    lead.body = trim(raw.substr(0, boundaries.front().line_start));
    lead.begin = 0;
    lead.end = boundaries.front().line_start;
    entries.push_back(std::move(lead));
  }
  for (std::size_t i = 0; i < boundaries.size(); ++i) {
    const auto& b = boundaries[i];
    const std::size_t end = (i + 1 < boundaries.size()) ? boundaries[i + 1].line_start : raw.size();
    SplitEntry e;
    e.body = trim(raw.substr(b.token_end, end - b.token_end));
    e.number_token = b.token;
    e.explicit_index = b.index;
    e.begin = b.line_start;
    e.end = end;
    entries.push_back(std::move(e));
  }
  return entries;
}

std::vector<SplitEntry> split_via_llm(const std::string& raw, Gateway& gateway) {
  const auto request = gateway.render("chapter-split", {{"chapter_text", raw}});
  const Completion completion = gateway.complete(request);
  const std::string body = strip_code_fence(completion.text);
  const std::size_t open = body.find('[');
  if (open == std::string::npos) return split_heuristic(raw);
  ordered_json arr = ordered_json::parse(body.substr(open), nullptr, false);
  if (arr.is_discarded() || !arr.is_array()) return split_heuristic(raw);

  std::vector<SplitEntry> entries;
  std::size_t cursor = 0;
  for (const auto& item : arr) {
    if (!item.is_object() || !item.contains("text")) continue;
    SplitEntry e;
    e.body = trim(item["text"].get<std::string>());
    if (item.contains("number") && item["number"].is_string()) {
      const std::string num = item["number"].get<std::string>();
      e.number_token = num;
      e.explicit_index = RuleIndex::parse(num);
    }
    // Best-effort provenance: locate the body (or its head) in the raw text.
    const std::string probe = e.body.substr(0, std::min<std::size_t>(e.body.size(), 24));
    const std::size_t at = probe.empty() ? std::string::npos : raw.find(probe, cursor);
    if (at != std::string::npos) {
      e.begin = at;
      e.end = at + e.body.size();
      cursor = e.end;
    }
    if (!e.body.empty()) entries.push_back(std::move(e));
  }
  if (entries.empty()) return split_heuristic(raw);
  return entries;
}

}  // namespace

std::vector<SplitEntry> split_chapter(const std::string& raw_text, SplitMode mode,
                                      Gateway* gateway) {
  if (trim(raw_text).empty()) throw std::invalid_argument("split_chapter: empty input");
  if (mode == SplitMode::Llm) {
    if (gateway == nullptr) throw std::invalid_argument("split_chapter: llm mode needs a gateway");
    return split_via_llm(raw_text, *gateway);
  }
  return split_heuristic(raw_text);
}

std::vector<RuleEntry> index_entries(const std::vector<SplitEntry>& entries, int chapter,
                                     int section, const std::string& source_id,
                                     std::vector<std::string>* warnings) {
  std::vector<RuleEntry> out;
  std::set<RuleIndex> seen;
  int position = 0;
  for (const auto& se : entries) {
    ++position;
    RuleEntry entry;
    if (se.explicit_index) {
      entry.index = *se.explicit_index;
      const RuleIndex positional{chapter, section, position};
      if (entry.index != positional && warnings) {
        warnings->push_back("explicit index " + entry.index.str() + " at position " +
                            std::to_string(position) + " differs from positional " +
                            positional.str());
      }
      if (entry.index.chapter == chapter && entry.index.section == section) {
        position = entry.index.entry;
      }
    } else {
      entry.index = RuleIndex{chapter, section, position};
    }
    if (!seen.insert(entry.index).second) {
      throw std::runtime_error("duplicate rule index " + entry.index.str());
    }
    entry.text = se.body;
    entry.provenance = Provenance{source_id, se.begin, se.end};
    out.push_back(std::move(entry));
  }
  return out;
}

std::vector<RuleEntry> index_entries(const std::vector<RuleEntry>& entries, int chapter,
                                     int section, std::vector<std::string>* warnings) {
  std::vector<RuleEntry> out;
  std::set<RuleIndex> seen;
  int position = 0;
  for (const auto& src : entries) {
    ++position;
    RuleEntry entry = src;
    if (!entry.index.valid()) {
      entry.index = RuleIndex{chapter, section, position};
    } else {
      const RuleIndex positional{chapter, section, position};
      if (entry.index != positional && warnings) {
        warnings->push_back("explicit index " + entry.index.str() + " at position " +
                            std::to_string(position) + " differs from positional " +
                            positional.str());
      }
      if (entry.index.chapter == chapter && entry.index.section == section) {
        position = entry.index.entry;
      }
    }
    if (!seen.insert(entry.index).second) {
      throw std::runtime_error("duplicate rule index " + entry.index.str());
    }
    out.push_back(std::move(entry));
  }
  return out;
}

const std::vector<std::string>& default_dependency_patterns() {
  static const std::vector<std::string> patterns = {
      R"(第\s*(\d+)\.(\d+)\.(\d+)\s*条)",
      R"(entry\s+(\d+)\.(\d+)\.(\d+))",
      R"(per\s+(\d+)\.(\d+)\.(\d+))",
      R"((\d+)\.(\d+)\.(\d+)\s*条)",
  };
  return patterns;
}

const RuleEntry* Corpus::find(const RuleIndex& idx) const {
  auto it = by_index.find(idx);
  if (it == by_index.end()) return nullptr;
  return &entries[it->second];
}

void Corpus::add(RuleEntry entry) {
  if (by_index.count(entry.index)) {
    throw std::runtime_error("duplicate rule index " + entry.index.str());
  }
  by_index[entry.index] = entries.size();
  entries.push_back(std::move(entry));
}

std::set<RuleIndex> detect_dependencies(const RuleEntry& entry, const Corpus& corpus,
                                        const std::vector<std::string>& patterns,
                                        std::vector<std::string>* warnings) {
  std::set<RuleIndex> found;
  std::set<RuleIndex> dangling;
  for (const auto& pattern : patterns) {
    std::regex re(pattern);
    auto begin = std::sregex_iterator(entry.text.begin(), entry.text.end(), re);
    for (auto it = begin; it != std::sregex_iterator(); ++it) {
      const std::smatch& m = *it;
      if (m.size() < 4) continue;
      RuleIndex idx{std::stoi(m[1]), std::stoi(m[2]), std::stoi(m[3])};
      if (!idx.valid() || idx == entry.index) continue;
      if (corpus.contains(idx)) {
        found.insert(idx);
      } else {
        dangling.insert(idx);
      }
    }
  }
  if (warnings) {
    for (const auto& idx : dangling) {
      warnings->push_back("dangling reference " + idx.str() + " in entry " + entry.index.str());
    }
  }
  return found;
}

namespace {

std::string asset_context(const RuleEntry& entry, const std::filesystem::path& base) {
  std::ostringstream out;
  for (const auto& table : entry.tables) {
    out << "-- table " << table << " --\n";
    const auto path = base / table;
    if (std::filesystem::exists(path)) out << read_file(path) << "\n";
  }
  for (const auto& figure : entry.figures) {
    out << "-- figure " << figure << " --\n";
    const auto caption = base / (figure + ".txt");
    if (std::filesystem::exists(caption)) {
      out << trim(read_file(caption)) << "\n";
    } else {
      out << std::filesystem::path(figure).stem().string() << "\n";
    }
  }
  return out.str();
}

}  // namespace

std::pair<RuleEntry, CorrectionLog> correct_entry(const RuleEntry& entry, Gateway& gateway,
                                                  const std::filesystem::path& asset_base) {
  CorrectionLog log;
  log.entry = entry.index;
  Completion completion;
  try {
    const auto request = gateway.render("ocr-correction", {{"rule_content", entry.text},
                                                           {"assets", asset_context(entry, asset_base)}});
    completion = gateway.complete(request);
  } catch (const std::exception& ex) {
    log.gateway_error = true;
    log.error = ex.what();
    return {entry, log};
  }

  const std::string body = strip_code_fence(completion.text);
  const std::size_t open = body.find('[');
  ordered_json arr =
      open == std::string::npos ? ordered_json() : ordered_json::parse(body.substr(open), nullptr, false);
  if (!arr.is_array()) {
    log.gateway_error = true;
    log.error = "unparseable correction response";
    return {entry, log};
  }

  std::string text = entry.text;
  for (const auto& item : arr) {
    if (!item.is_object() || !item.contains("original") || !item.contains("corrected")) continue;
    Replacement rep;
    rep.original = item["original"].get<std::string>();
    rep.corrected = item.value("corrected", std::string());
    rep.reason = correction_reason_from(item.value("reason", std::string("ocr-confusable")))
                     .value_or(CorrectionReason::OcrConfusable);
    const std::size_t pos = text.find(rep.original);
    if (rep.original.empty() || pos == std::string::npos) {
      if (!log.error.empty()) log.error += "; ";
      log.error += "unappliable span \"" + rep.original + "\"";
      continue;
    }
    text.replace(pos, rep.original.size(), rep.corrected);
    log.replacements.push_back(std::move(rep));
  }

  RuleEntry corrected = entry;
  corrected.text = text;
  return {corrected, log};
}

namespace {

ordered_json entry_to_json(const RuleEntry& e) {
  ordered_json j;
  j["index"] = e.index.str();
  j["text"] = e.text;
  j["tables"] = e.tables;
  j["figures"] = e.figures;
  ordered_json deps = ordered_json::array();
  for (const auto& d : e.dependencies) deps.push_back(d.str());
  j["dependencies"] = std::move(deps);
  j["provenance"] = ordered_json{{"source", e.provenance.source},
                                 {"begin", e.provenance.begin},
                                 {"end", e.provenance.end}};
  return j;
}

RuleEntry entry_from_json(const ordered_json& j, const std::string& origin) {
  RuleEntry e;
  const auto idx = RuleIndex::parse(j.at("index").get<std::string>());
  if (!idx) throw std::runtime_error(origin + ": bad index \"" + j.at("index").get<std::string>() + "\"");
  e.index = *idx;
  e.text = j.at("text").get<std::string>();
  if (trim(e.text).empty()) throw std::runtime_error(origin + ": empty text for " + e.index.str());
  e.tables = j.value("tables", std::vector<std::string>{});
  e.figures = j.value("figures", std::vector<std::string>{});
  for (const auto& d : j.value("dependencies", std::vector<std::string>{})) {
    const auto dep = RuleIndex::parse(d);
    if (!dep) throw std::runtime_error(origin + ": bad dependency \"" + d + "\"");
    if (*dep == e.index) {
      throw std::runtime_error(origin + ": entry " + e.index.str() + " depends on itself");
    }
    e.dependencies.insert(*dep);
  }
  if (j.contains("provenance")) {
    const auto& p = j["provenance"];
    e.provenance.source = p.value("source", std::string());
    e.provenance.begin = p.value("begin", std::size_t{0});
    e.provenance.end = p.value("end", std::size_t{0});
  }
  return e;
}

}  // namespace

Corpus load_corpus(const std::filesystem::path& root) {
  if (!std::filesystem::is_directory(root)) {
    throw std::runtime_error("corpus directory not found: " + root.string());
  }
  Corpus corpus;
  corpus.root = root;
  std::vector<std::filesystem::path> chapter_dirs;
  for (const auto& it : std::filesystem::directory_iterator(root)) {
    if (it.is_directory() && std::filesystem::exists(it.path() / "entries.jsonl")) {
      chapter_dirs.push_back(it.path());
    }
  }
  // numeric chapter order where the directory name carries a number
  auto chapter_key = [](const std::filesystem::path& p) {
    const std::string name = p.filename().string();
    const std::size_t digit = name.find_first_of("0123456789");
    const long number = digit == std::string::npos ? std::numeric_limits<long>::max()
                                                   : std::stol(name.substr(digit));
    return std::make_pair(number, name);
  };
  std::sort(chapter_dirs.begin(), chapter_dirs.end(),
            [&](const auto& a, const auto& b) { return chapter_key(a) < chapter_key(b); });
  if (chapter_dirs.empty()) {
    throw std::runtime_error("no chapter directories under " + root.string());
  }
  for (const auto& dir : chapter_dirs) {
    const auto file = dir / "entries.jsonl";
    std::size_t line_no = 0;
    for (const auto& line : read_lines(file)) {
      ++line_no;
      const std::string origin = file.string() + ":" + std::to_string(line_no);
      ordered_json j = ordered_json::parse(line, nullptr, false);
      if (j.is_discarded()) throw std::runtime_error(origin + ": invalid JSON");
      RuleEntry entry = entry_from_json(j, origin);
      for (const auto& asset : entry.tables) {
        if (!std::filesystem::exists(dir / asset)) {
          throw std::runtime_error(origin + ": missing table asset " + (dir / asset).string());
        }
      }
      for (const auto& asset : entry.figures) {
        if (!std::filesystem::exists(dir / asset)) {
          throw std::runtime_error(origin + ": missing figure asset " + (dir / asset).string());
        }
      }
      corpus.add(std::move(entry));
    }
  }
  return corpus;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& root) {
  std::map<int, std::vector<const RuleEntry*>> by_chapter;
  for (const auto& e : corpus.entries) by_chapter[e.index.chapter].push_back(&e);
  for (const auto& [chapter, entries] : by_chapter) {
    const auto dir = root / ("chapter-" + std::to_string(chapter));
    std::filesystem::create_directories(dir);
    std::ostringstream out;
    for (const RuleEntry* e : entries) out << entry_to_json(*e).dump() << "\n";
    write_file(dir / "entries.jsonl", out.str());
  }
}

}  // namespace rulecheck
