#include "rulecheck/info_extraction.hpp"

#include <algorithm>

#include <json.hpp>

#include "rulecheck/llm_gateway.hpp"
#include "rulecheck/util.hpp"

namespace rulecheck {

using ordered_json = nlohmann::ordered_json;

std::string to_string(EntityType t) {
  switch (t) {
    case EntityType::Building: return "Building";
    case EntityType::System: return "System";
    case EntityType::Component: return "Component";
    case EntityType::Zone: return "Zone";
  }
  return "Component";
}

std::optional<EntityType> entity_type_from(const std::string& s) {
  if (s == "Building") return EntityType::Building;
  if (s == "System") return EntityType::System;
  if (s == "Component") return EntityType::Component;
  if (s == "Zone") return EntityType::Zone;
  return std::nullopt;
}

const std::vector<std::string>& entity_type_examples(EntityType t) {
  static const std::vector<std::string> building = {"building", "dwelling building"};
  static const std::vector<std::string> system = {"fire extinguishing system",
                                                  "fire automatic alarm system"};
  static const std::vector<std::string> component = {"detector", "button"};
  static const std::vector<std::string> zone = {"fire compartment", "smoke-proof compartment"};
  switch (t) {
    case EntityType::Building: return building;
    case EntityType::System: return system;
    case EntityType::Component: return component;
    case EntityType::Zone: return zone;
  }
  return component;
}

std::string to_string(ConstraintCategory c) {
  switch (c) {
    case ConstraintCategory::DirectAttribute: return "direct-attribute";
    case ConstraintCategory::Quantity: return "quantity";
    case ConstraintCategory::Distance: return "distance";
    case ConstraintCategory::Classification: return "classification";
    case ConstraintCategory::Spatial: return "spatial";
    case ConstraintCategory::OtherIndirect: return "other-indirect";
  }
  return "other-indirect";
}

std::optional<ConstraintCategory> constraint_category_from(const std::string& s) {
  if (s == "direct-attribute") return ConstraintCategory::DirectAttribute;
  if (s == "quantity") return ConstraintCategory::Quantity;
  if (s == "distance") return ConstraintCategory::Distance;
  if (s == "classification") return ConstraintCategory::Classification;
  if (s == "spatial") return ConstraintCategory::Spatial;
  if (s == "other-indirect") return ConstraintCategory::OtherIndirect;
  return std::nullopt;
}

std::string to_string(Comparator c) {
  switch (c) {
    case Comparator::Lt: return "<";
    case Comparator::Le: return "<=";
    case Comparator::Eq: return "==";
    case Comparator::Ge: return ">=";
    case Comparator::Gt: return ">";
    case Comparator::Ne: return "!=";
    case Comparator::InRange: return "in-range";
    case Comparator::MemberOf: return "member-of";
    case Comparator::None: return "none";
  }
  return "none";
}

std::optional<Comparator> comparator_from(const std::string& s) {
  if (s == "<") return Comparator::Lt;
  if (s == "<=") return Comparator::Le;
  if (s == "==" || s == "=") return Comparator::Eq;
  if (s == ">=") return Comparator::Ge;
  if (s == ">") return Comparator::Gt;
  if (s == "!=") return Comparator::Ne;
  if (s == "in-range") return Comparator::InRange;
  if (s == "member-of") return Comparator::MemberOf;
  if (s == "none" || s.empty()) return Comparator::None;
  return std::nullopt;
}

const std::vector<std::string>& canonical_component_order() {
  static const std::vector<std::string> order = {"entity_of_attribute", "attribute_name",
                                                 "conditions", "comparator", "attribute_value"};
  return order;
}

ConstraintCategory classify_constraint(const std::string& attribute_name) {
  struct Row {
    ConstraintCategory category;
    std::vector<std::string> keywords;
  };
  // Keyword rows are checked in order; the first hit wins.
  static const std::vector<Row> rows = {
      {ConstraintCategory::DirectAttribute, {"length", "width", "height"}},
      {ConstraintCategory::Quantity, {"quantity", "piece", "unit", "count", "number"}},
      {ConstraintCategory::Distance, {"distance", "spacing", "separation"}},
      {ConstraintCategory::Classification, {"type", "category", "class"}},
      {ConstraintCategory::Spatial, {"top", "above", "centered", "below", "position"}},
      {ConstraintCategory::OtherIndirect, {"components", "composed of"}},
  };
  const std::string name = ascii_lower(normalize_ws(attribute_name));
  for (const auto& row : rows) {
    for (const auto& keyword : row.keywords) {
      if (name.find(keyword) != std::string::npos) return row.category;
    }
  }
  return ConstraintCategory::OtherIndirect;
}

namespace {

/// First balanced JSON array in the text, bracket-counted with string
/// awareness, validated by an actual parse.
std::optional<std::string> extract_first_json_array(const std::string& text) {
  for (std::size_t start = text.find('['); start != std::string::npos;
       start = text.find('[', start + 1)) {
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = start; i < text.size(); ++i) {
      const char c = text[i];
      if (in_string) {
        if (c == '\\') {
          ++i;
        } else if (c == '"') {
          in_string = false;
        }
        continue;
      }
      if (c == '"') {
        in_string = true;
      } else if (c == '[') {
        ++depth;
      } else if (c == ']') {
        --depth;
        if (depth == 0) {
          const std::string candidate = text.substr(start, i - start + 1);
          ordered_json j = ordered_json::parse(candidate, nullptr, false);
          if (!j.is_discarded() && j.is_array()) return candidate;
          break;
        }
      }
    }
  }
  return std::nullopt;
}

}  // namespace

std::optional<std::string> parse_structured_response(const std::string& text,
                                                     ResponseSchema schema, Gateway* gateway,
                                                     IeDiagnostics* diags) {
  if (auto arr = extract_first_json_array(strip_code_fence(text))) return arr;
  if (gateway == nullptr) return std::nullopt;
  // one repair round-trip, then give up
  try {
    const char* expected = schema == ResponseSchema::Entities ? "entity objects" : "event objects";
    const auto request = gateway->render(
        "json-repair", {{"response", text}, {"expected", expected}});
    const Completion repaired = gateway->complete(request);
    if (auto arr = extract_first_json_array(strip_code_fence(repaired.text))) {
      if (diags) diags->repaired.push_back("response repaired via one round-trip");
      return arr;
    }
  } catch (const std::exception& ex) {
    if (diags) diags->notes.push_back(std::string("repair round-trip failed: ") + ex.what());
  }
  return std::nullopt;
}

std::vector<EntityRecord> discover_entities(const RuleEntry& entry, Gateway& gateway,
                                            IeDiagnostics* diags) {
  const auto request = gateway.render("entity-discovery", {{"rule_content", entry.text}});
  const Completion completion = gateway.complete(request);
  const auto array_text =
      parse_structured_response(completion.text, ResponseSchema::Entities, &gateway, diags);
  if (!array_text) {
    throw std::runtime_error("entity discovery for " + entry.index.str() +
                             ": unparseable model response");
  }
  std::vector<EntityRecord> records;
  for (const auto& item : ordered_json::parse(*array_text)) {
    if (!item.is_object() || !item.contains("surface") || !item["surface"].is_string() ||
        !item.contains("type") || !item["type"].is_string()) {
      if (diags) diags->dropped.push_back(entry.index.str() + ": entity object missing surface/type");
      continue;
    }
    EntityRecord record;
    record.surface = item["surface"].get<std::string>();
    const auto type = entity_type_from(item["type"].get<std::string>());
    if (!type) {
      if (diags) {
        diags->dropped.push_back(entry.index.str() + ": unknown entity type \"" +
                                 item["type"].get<std::string>() + "\"");
      }
      continue;
    }
    record.type = *type;
    record.entry = entry.index;
    if (record.surface.empty() || entry.text.find(record.surface) == std::string::npos) {
      if (diags) {
        diags->dropped.push_back(entry.index.str() + ": surface \"" + record.surface +
                                 "\" is not a verbatim span of the entry");
      }
      continue;
    }
    records.push_back(std::move(record));
  }
  return records;
}

std::vector<AssignmentEvent> extract_events(const RuleEntry& entry,
                                            const std::vector<EntityRecord>& entities,
                                            Gateway& gateway, IeDiagnostics* diags) {
  const auto request = gateway.render("event-extraction",
                                      {{"rule_content", entry.text},
                                       {"entity_list", entities_to_prompt_json(entities)}});
  const Completion completion = gateway.complete(request);
  const auto array_text =
      parse_structured_response(completion.text, ResponseSchema::Events, &gateway, diags);
  if (!array_text) {
    throw std::runtime_error("event extraction for " + entry.index.str() +
                             ": unparseable model response");
  }

  auto string_field = [](const ordered_json& item, const char* key) {
    auto it = item.find(key);
    return it != item.end() && it->is_string() ? it->get<std::string>() : std::string();
  };

  std::vector<AssignmentEvent> events;
  for (const auto& item : ordered_json::parse(*array_text)) {
    if (!item.is_object()) continue;
    AssignmentEvent event;
    event.entry = entry.index;
    event.entity = string_field(item, "entity_of_attribute");
    event.attribute = string_field(item, "attribute_name");
    event.conditions = string_field(item, "conditions");
    event.value = string_field(item, "attribute_value");
    const std::string comparator_text =
        item.contains("comparator") && item["comparator"].is_string()
            ? item["comparator"].get<std::string>()
            : std::string("none");
    const auto comparator = comparator_from(comparator_text);
    if (!comparator) {
      if (diags) {
        diags->notes.push_back(entry.index.str() + ": unknown comparator \"" +
                               comparator_text + "\", treated as none");
      }
      event.comparator = Comparator::None;
    } else {
      event.comparator = *comparator;
    }
    for (const auto& [key, _] : item.items()) {
      if (std::find(canonical_component_order().begin(), canonical_component_order().end(), key) !=
          canonical_component_order().end()) {
        event.component_order.push_back(key);
      }
    }

    if (event.attribute.empty()) {
      if (diags) diags->dropped.push_back(entry.index.str() + ": event without attribute name");
      continue;
    }
    if (event.comparator != Comparator::None && event.value.empty()) {
      if (diags) {
        diags->dropped.push_back(entry.index.str() + ": comparator without attribute value");
      }
      continue;
    }
    const std::string normalized_entity = normalize_ws(event.entity);
    const bool known_entity =
        std::any_of(entities.begin(), entities.end(), [&](const EntityRecord& r) {
          return normalize_ws(r.surface) == normalized_entity;
        });
    if (!known_entity) {
      if (diags) {
        diags->dropped.push_back(entry.index.str() + ": event entity \"" + event.entity +
                                 "\" is not a discovered entity");
      }
      continue;
    }

    const ConstraintCategory keyword_category = classify_constraint(event.attribute);
    const auto reported = constraint_category_from(string_field(item, "category"));
    if (reported && *reported != keyword_category && diags) {
      diags->notes.push_back(entry.index.str() + ": category disagreement for \"" +
                             event.attribute + "\": model " + to_string(*reported) +
                             ", keyword " + to_string(keyword_category));
    }
    event.category = keyword_category;
    events.push_back(std::move(event));
  }
  return events;
}

// --- serialization -----------------------------------------------------------

std::string entity_to_jsonl(const EntityRecord& r) {
  ordered_json j;
  j["surface"] = r.surface;
  j["type"] = to_string(r.type);
  j["entry_index"] = r.entry.str();
  return j.dump();
}

std::optional<EntityRecord> entity_from_jsonl(const std::string& line, std::string* error) {
  ordered_json j = ordered_json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    if (error) *error = "invalid JSON";
    return std::nullopt;
  }
  EntityRecord r;
  r.surface = j.value("surface", std::string());
  const auto type = entity_type_from(j.value("type", std::string()));
  const auto idx = RuleIndex::parse(j.value("entry_index", std::string()));
  if (r.surface.empty() || !type || !idx) {
    if (error) *error = "missing surface/type/entry_index";
    return std::nullopt;
  }
  r.type = *type;
  r.entry = *idx;
  return r;
}

std::string event_to_jsonl(const AssignmentEvent& e) {
  ordered_json j;
  j["entity_of_attribute"] = e.entity;
  j["attribute_name"] = e.attribute;
  j["conditions"] = e.conditions;
  j["comparator"] = to_string(e.comparator);
  j["attribute_value"] = e.value;
  j["category"] = to_string(e.category);
  j["entry_index"] = e.entry.str();
  if (!e.component_order.empty() && e.component_order != canonical_component_order()) {
    j["component_order"] = e.component_order;
  }
  return j.dump();
}

std::optional<AssignmentEvent> event_from_jsonl(const std::string& line, std::string* error) {
  ordered_json j = ordered_json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    if (error) *error = "invalid JSON";
    return std::nullopt;
  }
  AssignmentEvent e;
  e.entity = j.value("entity_of_attribute", std::string());
  e.attribute = j.value("attribute_name", std::string());
  e.conditions = j.value("conditions", std::string());
  e.value = j.value("attribute_value", std::string());
  const auto comparator = comparator_from(j.value("comparator", std::string("none")));
  const auto category = constraint_category_from(j.value("category", std::string("other-indirect")));
  const auto idx = RuleIndex::parse(j.value("entry_index", std::string()));
  if (e.attribute.empty() || !comparator || !category || !idx) {
    if (error) *error = "missing or invalid event fields";
    return std::nullopt;
  }
  e.comparator = *comparator;
  e.category = *category;
  e.entry = *idx;
  e.component_order = j.value("component_order", std::vector<std::string>{});
  return e;
}

std::vector<EntityRecord> load_entities_jsonl(const std::filesystem::path& path) {
  std::vector<EntityRecord> out;
  std::size_t line_no = 0;
  for (const auto& line : read_lines(path)) {
    ++line_no;
    std::string error;
    auto r = entity_from_jsonl(line, &error);
    if (!r) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + error);
    }
    out.push_back(std::move(*r));
  }
  return out;
}

std::vector<AssignmentEvent> load_events_jsonl(const std::filesystem::path& path) {
  std::vector<AssignmentEvent> out;
  std::size_t line_no = 0;
  for (const auto& line : read_lines(path)) {
    ++line_no;
    std::string error;
    auto e = event_from_jsonl(line, &error);
    if (!e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + error);
    }
    out.push_back(std::move(*e));
  }
  return out;
}

std::string entities_to_prompt_json(const std::vector<EntityRecord>& entities) {
  ordered_json arr = ordered_json::array();
  for (const auto& r : entities) {
    arr.push_back(ordered_json{{"surface", r.surface}, {"type", to_string(r.type)}});
  }
  return arr.dump();
}

std::string events_to_prompt_json(const std::vector<AssignmentEvent>& events) {
  ordered_json arr = ordered_json::array();
  for (const auto& e : events) {
    ordered_json j;
    j["entity_of_attribute"] = e.entity;
    j["attribute_name"] = e.attribute;
    j["conditions"] = e.conditions;
    j["comparator"] = to_string(e.comparator);
    j["attribute_value"] = e.value;
    arr.push_back(std::move(j));
  }
  return arr.dump();
}

}  // namespace rulecheck
