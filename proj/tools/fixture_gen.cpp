// Regenerates the sealed replay store under fixtures/llm by driving the real
// pipeline in record mode against a scripted provider. Run from the repo root
// after editing the fixture corpus, prompts, or canned responses:
//
//   ./build/tools/rulecheck_fixturegen
//
// The canned responses below are the single source of truth for what the
// "model" said when the fixture store was recorded.

#include <filesystem>
#include <iostream>
#include <map>
#include <stdexcept>

#include "rulecheck/llm_gateway.hpp"
#include "rulecheck/pipeline.hpp"
#include "rulecheck/rule_corpus.hpp"
#include "rulecheck/util.hpp"

namespace rulecheck {
namespace {

struct Key {
  std::string template_id;
  std::string index;

  bool operator<(const Key& other) const {
    return std::tie(template_id, index) < std::tie(other.template_id, other.index);
  }
};

std::map<Key, std::vector<std::string>> canned_responses() {
  std::map<Key, std::vector<std::string>> r;

  // --- entity discovery ------------------------------------------------
  r[{"entity-discovery", "6.2.1"}] = {R"(Here are the entities:
[{"surface":"room","type":"Zone"},{"surface":"smoke detector","type":"Component"},{"surface":"ceiling","type":"Component"}])"};
  r[{"entity-discovery", "6.2.2"}] = {R"([{"surface":"smoke detectors","type":"Component"},{"surface":"room","type":"Zone"}])"};
  r[{"entity-discovery", "6.2.3"}] = {R"([{"surface":"room","type":"Zone"},{"surface":"manual call point","type":"Component"}])"};
  r[{"entity-discovery", "6.2.4"}] = {R"([{"surface":"smoke detector","type":"Component"}])"};
  r[{"entity-discovery", "6.2.5"}] = {R"([{"surface":"smoke detector","type":"Component"},{"surface":"wall","type":"Zone"}])"};
  r[{"entity-discovery", "6.2.6"}] = {R"([{"surface":"fire alarm control panel","type":"System"},{"surface":"building","type":"Building"}])"};
  r[{"entity-discovery", "6.2.7"}] = {R"([{"surface":"rooms","type":"Zone"},{"surface":"heat detectors","type":"Component"}])"};
  r[{"entity-discovery", "6.2.8"}] = {R"([{"surface":"Rooms","type":"Zone"}])"};
  r[{"entity-discovery", "6.2.9"}] = {R"([{"surface":"Manual call points","type":"Component"}])"};
  r[{"entity-discovery", "6.2.10"}] = {R"([{"surface":"fire alarm control panel","type":"System"},{"surface":"building","type":"Building"}])"};

  // --- event extraction -------------------------------------------------
  r[{"event-extraction", "6.2.1"}] = {R"([{"entity_of_attribute":"room","attribute_name":"smoke detector quantity","conditions":"","comparator":">=","attribute_value":"1","category":"quantity"}])"};
  r[{"event-extraction", "6.2.2"}] = {R"([{"entity_of_attribute":"room","attribute_name":"smoke detector quantity","conditions":"","comparator":">=","attribute_value":"area / 80","category":"quantity"}])"};
  r[{"event-extraction", "6.2.3"}] = {"[]"};
  r[{"event-extraction", "6.2.4"}] = {R"([{"entity_of_attribute":"smoke detector","attribute_name":"mounting height","conditions":"","comparator":"<=","attribute_value":"12 m","category":"spatial"}])"};
  r[{"event-extraction", "6.2.5"}] = {R"([{"entity_of_attribute":"smoke detector","attribute_name":"distance to nearest wall","conditions":"","comparator":">=","attribute_value":"0.5 m","category":"distance"}])"};
  r[{"event-extraction", "6.2.6"}] = {R"([{"entity_of_attribute":"fire alarm control panel","attribute_name":"fire alarm control panel quantity","conditions":"","comparator":">=","attribute_value":"1","category":"quantity"}])"};
  r[{"event-extraction", "6.2.7"}] = {R"([{"entity_of_attribute":"heat detectors","attribute_name":"sensitivity class","conditions":"ceiling height greater than 8 m","comparator":"==","attribute_value":"A","category":"classification"}])"};
  r[{"event-extraction", "6.2.8"}] = {R"([{"entity_of_attribute":"Rooms","attribute_name":"emergency exit quantity","conditions":"protected floor area greater than 500 square meters","comparator":">=","attribute_value":"2","category":"quantity"}])"};
  // value serialized before comparator: counted by Arg-P_A, excluded by Arg-P_O
  r[{"event-extraction", "6.2.9"}] = {R"([{"entity_of_attribute":"Manual call points","attribute_name":"mounting height","conditions":"","attribute_value":"1.3-1.5 m","comparator":"in-range","category":"direct-attribute"}])"};
  r[{"event-extraction", "6.2.10"}] = {R"([{"entity_of_attribute":"building","attribute_name":"fire alarm control panel quantity","conditions":"","comparator":"<=","attribute_value":"1","category":"quantity"}])"};

  // --- code frameworks ---------------------------------------------------
  r[{"codegen-framework-dsl", "6.2.1"}] = {R"(```
check "6.2.1" {
  // rule 6.2.1
  // req: 6.2.1/1
  forall r in elements(category="Room") {
    assert count(elements(category="SmokeDetector", within=r)) >= 1 message "violates 6.2.1: room lacks a smoke detector";
  }
}
```)"};
  r[{"codegen-framework-dsl", "6.2.2"}] = {R"(```
check "6.2.2" {
  // rule 6.2.2 (detector selection per 6.2.1)
  // req: 6.2.2/1
  forall r in elements(category="Room") {
    // ⟨unimplemented⟩ RequiredDetectorCount
    assert count(elements(category="SmokeDetector", within=r)) >= RequiredDetectorCount(r) message "violates 6.2.2: too few smoke detectors for the protected area";
  }
}
```)"};
  r[{"codegen-framework-dsl", "6.2.3"}] = {R"(```
check "6.2.3" {
  // rule 6.2.3 (installation per 6.2.1)
  // req: 6.2.3/1
  forall r in elements(category="Room") {
    // ⟨unimplemented⟩ RoomHasCallPoint
    assert RoomHasCallPoint(r) message "violates 6.2.3: room lacks a manual call point";
  }
}
```)"};
  r[{"codegen-framework-dsl", "6.2.4"}] = {R"(```
check "6.2.4" {
  // rule 6.2.4
  // req: 6.2.4/1
  forall d in elements(category="SmokeDetectors") {
    // ⟨unimplemented⟩ HeightWithinLimit
    assert HeightWithinLimit(d) message "violates 6.2.4: smoke detector mounted above 12 m";
  }
}
```)"};
  r[{"codegen-framework-dsl", "6.2.5"}] = {R"(```
check "6.2.5" {
  // rule 6.2.5
  // req: 6.2.5/1
  forall r in elements(category="Room") {
    forall w in elements(category="Wall", within=r) {
      forall d in elements(category="SmokeDetector", within=r) {
        // ⟨unimplemented⟩ WallClearanceOk
        assert WallClearanceOk(d, w) message "violates 6.2.5: detector closer than 0.5 m to a wall";
      }
    }
  }
}
```)"};
  r[{"codegen-framework-dsl", "6.2.6"}] = {R"(```
check "6.2.6" {
  // rule 6.2.6
  // req: 6.2.6/1
  // ⟨unimplemented⟩ BuildingHasPanel
  assert BuildingHasPanel() message "violates 6.2.6: no fire alarm control panel";
}
```)"};
  r[{"codegen-framework-dsl", "6.2.7"}] = {R"(```
check "6.2.7" {
  // rule 6.2.7
  // req: 6.2.7/1
  forall r in elements(category="Room") {
    if attr(r, "height") > 8.0 {
      forall h in elements(category="HeatDetector", within=r) {
        // ⟨unimplemented⟩ SensitivityClassOk
        assert SensitivityClassOk(h) message "violates 6.2.7: heat detector in a high room is not class A";
      }
    }
  }
}
```)"};
  r[{"codegen-framework-dsl", "6.2.8"}] = {R"(```
check "6.2.8" {
  // rule 6.2.8
  // req: 6.2.8/1
  forall r in elements(category="Room") {
    if attr(r, "area") > 500.0 {
      // ⟨unimplemented⟩ EnoughExits
      assert EnoughExits(r) message "violates 6.2.8: large room lacks 2 emergency exits";
    }
  }
}
```)"};
  r[{"codegen-framework-dsl", "6.2.9"}] = {R"(```
check "6.2.9" {
  // rule 6.2.9
  // req: 6.2.9/1
  forall c in elements(category="ManualCallPoint") {
    // ⟨unimplemented⟩ MountingHeightOk
    assert MountingHeightOk(c) message "violates 6.2.9: call point mounted outside the 1.3-1.5 m band";
  }
}
```)"};
  r[{"codegen-framework-dsl", "6.2.10"}] = {R"(```
check "6.2.10" {
  // rule 6.2.10
  // req: 6.2.10/1
  // ⟨unimplemented⟩ PanelCountOk
  assert PanelCountOk() message "violates 6.2.10: more than one fire alarm control panel";
}
```)"};

  // --- completions -------------------------------------------------------
  // 6.2.1 needs none (framework already complete).
  r[{"codegen-completion-dsl", "6.2.2"}] = {
      R"(```
check "6.2.2" {
  // rule 6.2.2 (detector selection per 6.2.1)
  // req: 6.2.2/1
  forall r in elements(category="Room") {
    assert count(elements(category="SmokeDetector", within=r)) >= ceil(ProtectedArea(r) / 80.0) message "violates 6.2.2: too few smoke detectors for the protected area";
  }
}
```)",
      R"(```
check "6.2.2" {
  // rule 6.2.2 (detector selection per 6.2.1)
  // req: 6.2.2/1
  forall r in elements(category="Room") {
    assert count(elements(category="SmokeDetector", within=r)) >= ceil(attr(r, "area") / 80.0) message "violates 6.2.2: too few smoke detectors for the protected area";
  }
}
```)"};
  r[{"codegen-completion-dsl", "6.2.3"}] = {R"(```
check "6.2.3" {
  // rule 6.2.3 (installation per 6.2.1)
  // req: 6.2.3/1
  forall r in elements(category="Room") {
    assert count(elements(category="ManualCallPoint", within=r)) >= 1 message "violates 6.2.3: room lacks a manual call point";
  }
}
```)"};
  r[{"codegen-completion-dsl", "6.2.4"}] = {R"(```
check "6.2.4" {
  // rule 6.2.4
  // req: 6.2.4/1
  forall d in elements(category="SmokeDetectors") {
    assert attr(d, "height") <= 12.0 message "violates 6.2.4: smoke detector mounted above 12 m";
  }
}
```)"};
  r[{"codegen-completion-dsl", "6.2.5"}] = {R"(```
check "6.2.5" {
  // rule 6.2.5
  // req: 6.2.5/1
  forall r in elements(category="Room") {
    forall w in elements(category="Wall", within=r) {
      forall d in elements(category="SmokeDetector", within=r) {
        assert distance(d, w) >= 0.5 message "violates 6.2.5: detector closer than 0.5 m to a wall";
      }
    }
  }
}
```)"};
  r[{"codegen-completion-dsl", "6.2.6"}] = {R"(```
check "6.2.6" {
  // rule 6.2.6
  // req: 6.2.6/1
  assert exists p in elements(category="FireAlarmPanel") message "violates 6.2.6: no fire alarm control panel";
}
```)"};
  // missing semicolon; repaired by the refinement round below
  r[{"codegen-completion-dsl", "6.2.7"}] = {R"(```
check "6.2.7" {
  // rule 6.2.7
  // req: 6.2.7/1
  forall r in elements(category="Room") {
    if attr(r, "height") > 8.0 {
      forall h in elements(category="HeatDetector", within=r) {
        assert attr(h, "sensitivity") == "A" message "violates 6.2.7: heat detector in a high room is not class A"
      }
    }
  }
}
```)"};
  r[{"codegen-completion-dsl", "6.2.8"}] = {R"(```
check "6.2.8" {
  // rule 6.2.8
  // req: 6.2.8/1
  forall r in elements(category="Room") {
    if attr(r, "area") > 500.0 {
      assert count(elements(category="Exit", within=r)) >= 2 message "violates 6.2.8: large room lacks 2 emergency exits";
    }
  }
}
```)"};
  // comparator slipped from >= to <; runs clean but misjudges the twins
  r[{"codegen-completion-dsl", "6.2.9"}] = {R"(```
check "6.2.9" {
  // rule 6.2.9
  // req: 6.2.9/1
  forall c in elements(category="ManualCallPoint") {
    assert attr(c, "height") < 1.3 and attr(c, "height") <= 1.5 message "violates 6.2.9: call point mounted outside the 1.3-1.5 m band";
  }
}
```)"};
  r[{"codegen-completion-dsl", "6.2.10"}] = {R"(```
check "6.2.10" {
  // rule 6.2.10
  // req: 6.2.10/1
  assert count(elements(category="FireAlarmPanel")) <= 1.0 message "violates 6.2.10: more than one fire alarm control panel";
}
```)"};

  // --- refinement ---------------------------------------------------------
  r[{"codegen-refine-dsl", "6.2.7"}] = {R"(```
check "6.2.7" {
  // rule 6.2.7
  // req: 6.2.7/1
  forall r in elements(category="Room") {
    if attr(r, "height") > 8.0 {
      forall h in elements(category="HeatDetector", within=r) {
        assert attr(h, "sensitivity") == "A" message "violates 6.2.7: heat detector in a high room is not class A";
      }
    }
  }
}
```)"};

  return r;
}

class ScriptedProvider final : public Provider {
 public:
  explicit ScriptedProvider(std::filesystem::path corpus_dir)
      : corpus_dir_(std::move(corpus_dir)), responses_(canned_responses()) {}

  std::string id() const override { return "scripted"; }

  Completion complete(const PromptRequest& request) override {
    const std::string index = match_entry(request);
    const Key key{request.template_id, index};
    auto it = responses_.find(key);
    if (it == responses_.end()) {
      throw std::runtime_error("no canned response for template " + request.template_id +
                               ", entry " + index);
    }
    const std::size_t occurrence = cursor_[key]++;
    if (occurrence >= it->second.size()) {
      throw std::runtime_error("canned responses exhausted for template " + request.template_id +
                               ", entry " + index);
    }
    Completion completion;
    completion.text = it->second[occurrence];
    completion.provider_id = id();
    return completion;
  }

 private:
  std::string match_entry(const PromptRequest& request) {
    if (!corpus_) corpus_ = std::make_unique<Corpus>(load_corpus(corpus_dir_));
    for (const auto& entry : corpus_->entries) {
      if (request.rendered.find("'''" + entry.text) != std::string::npos) {
        return entry.index.str();
      }
    }
    // refinement prompts carry the rule index instead of the rule content
    for (const auto& entry : corpus_->entries) {
      if (request.rendered.find("rule " + entry.index.str() + " ") != std::string::npos) {
        return entry.index.str();
      }
    }
    throw std::runtime_error("cannot match request to a corpus entry (template " +
                             request.template_id + ")");
  }

  std::filesystem::path corpus_dir_;
  std::map<Key, std::vector<std::string>> responses_;
  std::map<Key, std::size_t> cursor_;
  std::unique_ptr<Corpus> corpus_;
};

}  // namespace
}  // namespace rulecheck

int main(int argc, char** argv) {
  using namespace rulecheck;
  const std::filesystem::path root = argc > 1 ? argv[1] : ".";
  const auto scratch = std::filesystem::temp_directory_path() / "rulecheck-fixturegen";
  std::filesystem::remove_all(scratch);
  std::filesystem::remove_all(root / "fixtures" / "llm");

  PipelineConfig config;
  config.output_dir = scratch;
  config.prompt_dir = root / "prompts";
  config.replay_dir = root / "fixtures" / "llm";
  config.gold_dir = root / "fixtures" / "gold";
  config.model_dir = root / "fixtures" / "models";
  config.ingest_raw = root / "fixtures" / "raw" / "chapter-6-2.txt";
  config.ingest_chapter = 6;
  config.ingest_section = 2;
  config.ingest_assets = root / "fixtures" / "raw" / "assets";
  config.provider = "record";
  config.workers = 1;
  config.provider_factory = [&] {
    return std::make_unique<ScriptedProvider>(scratch / "corpus");
  };

  try {
    config.validate();
    run_pipeline(config);
  } catch (const std::exception& ex) {
    std::cerr << "fixture generation failed: " << ex.what() << "\n";
    return 1;
  }

  std::size_t count = 0;
  for (const auto& it : std::filesystem::directory_iterator(root / "fixtures" / "llm")) {
    if (it.path().extension() == ".json") ++count;
  }
  std::cout << "recorded " << count << " replay fixtures under " << (root / "fixtures" / "llm")
            << "\n";
  std::cout << "pipeline outputs (scorecards, artifacts) left in " << scratch << " for review\n";
  return 0;
}
