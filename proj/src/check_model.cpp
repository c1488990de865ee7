#include <cmath>
#include <set>

#include <json.hpp>

#include "rulecheck/check_runtime.hpp"
#include "rulecheck/util.hpp"

namespace rulecheck {

using ordered_json = nlohmann::ordered_json;

const Element* BuildingModel::find(const std::string& id) const {
  for (const auto& e : elements) {
    if (e.id == id) return &e;
  }
  return nullptr;
}

namespace {

ParamValue param_from_json(const ordered_json& j, const std::string& path) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) return j.get<std::string>();
  if (j.is_boolean()) return j.get<bool>();
  throw ModelError(path + ": param must be number, string or boolean");
}

ordered_json param_to_json(const ParamValue& v) {
  if (std::holds_alternative<double>(v)) return std::get<double>(v);
  if (std::holds_alternative<std::string>(v)) return std::get<std::string>(v);
  return std::get<bool>(v);
}

}  // namespace

BuildingModel model_from_json_text(const std::string& text, const std::string& origin) {
  ordered_json j = ordered_json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ModelError(origin + ": invalid JSON");
  BuildingModel model;
  if (!j.contains("model_id") || !j["model_id"].is_string()) {
    throw ModelError(origin + ": model_id: required string");
  }
  model.model_id = j["model_id"].get<std::string>();
  if (!j.contains("elements") || !j["elements"].is_array()) {
    throw ModelError(origin + ": elements: required array");
  }

  std::set<std::string> ids;
  std::size_t pos = 0;
  for (const auto& ej : j["elements"]) {
    const std::string path = origin + ": elements[" + std::to_string(pos++) + "]";
    if (!ej.is_object()) throw ModelError(path + ": must be an object");
    Element e;
    if (!ej.contains("id") || !ej["id"].is_string() || ej["id"].get<std::string>().empty()) {
      throw ModelError(path + ".id: required non-empty string");
    }
    e.id = ej["id"].get<std::string>();
    if (!ids.insert(e.id).second) throw ModelError(path + ".id: duplicate element id \"" + e.id + "\"");
    if (!ej.contains("category") || !ej["category"].is_string()) {
      throw ModelError(path + ".category: required string");
    }
    e.category = ej["category"].get<std::string>();
    if (ej.contains("room") && !ej["room"].is_null()) {
      if (!ej["room"].is_string()) throw ModelError(path + ".room: must be a string");
      e.room = ej["room"].get<std::string>();
    }
    if (ej.contains("position")) {
      if (!ej["position"].is_array() || ej["position"].size() != 3) {
        throw ModelError(path + ".position: must be a 3-element array");
      }
      for (int k = 0; k < 3; ++k) {
        if (!ej["position"][k].is_number()) throw ModelError(path + ".position: numeric entries required");
        e.position[k] = ej["position"][k].get<double>();
        if (!std::isfinite(e.position[k])) throw ModelError(path + ".position: must be finite");
      }
    }
    const ordered_json params = ej.value("params", ordered_json::object());
    for (const auto& [key, value] : params.items()) {
      e.params[key] = param_from_json(value, path + ".params." + key);
      if (std::holds_alternative<double>(e.params[key]) &&
          !std::isfinite(std::get<double>(e.params[key]))) {
        throw ModelError(path + ".params." + key + ": must be finite");
      }
    }
    model.elements.push_back(std::move(e));
  }

  for (const auto& e : model.elements) {
    if (!e.room) continue;
    const Element* room = model.find(*e.room);
    if (!room) {
      throw ModelError(origin + ": element \"" + e.id + "\" references missing room \"" + *e.room + "\"");
    }
    if (room->category != "Room") {
      throw ModelError(origin + ": element \"" + e.id + "\" room reference \"" + *e.room +
                       "\" is not a Room");
    }
  }

  std::size_t vpos = 0;
  for (const auto& vj : j.value("expected_violations", ordered_json::array())) {
    const std::string path = origin + ": expected_violations[" + std::to_string(vpos++) + "]";
    if (!vj.is_object() || !vj.contains("rule")) throw ModelError(path + ": needs {rule, element}");
    const auto rule = RuleIndex::parse(vj["rule"].get<std::string>());
    if (!rule) throw ModelError(path + ".rule: bad rule index");
    ExpectedViolation ev;
    ev.rule = *rule;
    if (vj.contains("element") && !vj["element"].is_null()) {
      ev.element = vj["element"].get<std::string>();
      if (!model.find(*ev.element)) {
        throw ModelError(path + ".element: unknown element \"" + *ev.element + "\"");
      }
    }
    model.expected_violations.push_back(std::move(ev));
  }
  return model;
}

BuildingModel load_model(const std::filesystem::path& path) {
  return model_from_json_text(read_file(path), path.string());
}

std::string model_to_json_text(const BuildingModel& model) {
  ordered_json j;
  j["model_id"] = model.model_id;
  ordered_json elements = ordered_json::array();
  for (const auto& e : model.elements) {
    ordered_json ej;
    ej["id"] = e.id;
    ej["category"] = e.category;
    if (e.room) ej["room"] = *e.room;
    ej["position"] = {e.position[0], e.position[1], e.position[2]};
    ordered_json params = ordered_json::object();
    for (const auto& [key, value] : e.params) params[key] = param_to_json(value);
    ej["params"] = std::move(params);
    elements.push_back(std::move(ej));
  }
  j["elements"] = std::move(elements);
  ordered_json violations = ordered_json::array();
  for (const auto& v : model.expected_violations) {
    ordered_json vj;
    vj["rule"] = v.rule.str();
    vj["element"] = v.element ? ordered_json(*v.element) : ordered_json(nullptr);
    violations.push_back(std::move(vj));
  }
  j["expected_violations"] = std::move(violations);
  return j.dump(2) + "\n";
}

}  // namespace rulecheck
