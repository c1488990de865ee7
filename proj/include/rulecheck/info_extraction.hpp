#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rulecheck/rule_corpus.hpp"
#include "rulecheck/rule_index.hpp"

namespace rulecheck {

class Gateway;

enum class EntityType { Building, System, Component, Zone };

std::string to_string(EntityType t);
std::optional<EntityType> entity_type_from(const std::string& s);
/// Catalog examples shipped with each type (the classification annotation).
const std::vector<std::string>& entity_type_examples(EntityType t);

struct EntityRecord {
  std::string surface;  // verbatim span from the entry text
  EntityType type = EntityType::Component;
  RuleIndex entry;

  bool operator==(const EntityRecord&) const = default;
};

enum class ConstraintCategory {
  DirectAttribute,
  Quantity,
  Distance,
  Classification,
  Spatial,
  OtherIndirect,
};

std::string to_string(ConstraintCategory c);
std::optional<ConstraintCategory> constraint_category_from(const std::string& s);

enum class Comparator { Lt, Le, Eq, Ge, Gt, Ne, InRange, MemberOf, None };

std::string to_string(Comparator c);
std::optional<Comparator> comparator_from(const std::string& s);

/// Canonical component serialization order, as specified by the extraction
/// prompt: entity, attribute, conditions, comparator, value.
const std::vector<std::string>& canonical_component_order();

struct AssignmentEvent {
  std::string entity;      // entity of attribute; matches a discovered surface
  std::string attribute;   // attribute name
  std::string conditions;  // possibly empty
  Comparator comparator = Comparator::None;
  std::string value;
  ConstraintCategory category = ConstraintCategory::OtherIndirect;
  RuleIndex entry;
  /// Component key order as observed in the model response; empty means
  /// canonical. Quantifies the Arg-P_O ordering requirement.
  std::vector<std::string> component_order;
};

/// Deterministic keyword classification of an attribute name; unmatched
/// attributes fall through to OtherIndirect.
ConstraintCategory classify_constraint(const std::string& attribute_name);

struct IeDiagnostics {
  std::vector<std::string> dropped;
  std::vector<std::string> repaired;
  std::vector<std::string> notes;
};

enum class ResponseSchema { Entities, Events };

/// Extracts the first JSON array from free-form model output. On parse
/// failure one repair round-trip is issued through the gateway (when given),
/// then the failure is final. Returns the array as serialized JSON text.
std::optional<std::string> parse_structured_response(const std::string& text,
                                                     ResponseSchema schema, Gateway* gateway,
                                                     IeDiagnostics* diags);

/// Entity discovery with classification annotation. Records whose surface is
/// not a verbatim substring of the entry text are dropped with a warning.
std::vector<EntityRecord> discover_entities(const RuleEntry& entry, Gateway& gateway,
                                            IeDiagnostics* diags = nullptr);

/// Assignment-event extraction anchored on discovered entities. Events
/// referencing unknown entities are dropped; the reported category is
/// cross-checked against classify_constraint and overridden on disagreement.
std::vector<AssignmentEvent> extract_events(const RuleEntry& entry,
                                            const std::vector<EntityRecord>& entities,
                                            Gateway& gateway, IeDiagnostics* diags = nullptr);

// JSONL serialization (field names match schema/entity.json, schema/event.json).
std::string entity_to_jsonl(const EntityRecord& r);
std::optional<EntityRecord> entity_from_jsonl(const std::string& line, std::string* error = nullptr);
std::string event_to_jsonl(const AssignmentEvent& e);
std::optional<AssignmentEvent> event_from_jsonl(const std::string& line, std::string* error = nullptr);

std::vector<EntityRecord> load_entities_jsonl(const std::filesystem::path& path);
std::vector<AssignmentEvent> load_events_jsonl(const std::filesystem::path& path);

/// Serializes entity/event lists as the JSON arrays bound into prompts, in
/// the documented field order.
std::string entities_to_prompt_json(const std::vector<EntityRecord>& entities);
std::string events_to_prompt_json(const std::vector<AssignmentEvent>& events);

}  // namespace rulecheck
