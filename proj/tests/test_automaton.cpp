#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "grounder/automaton/automaton.hpp"
#include "support/scripted_suite.hpp"

using namespace grounder;
using namespace grounder::automaton;

namespace {

backends::ImageHandle test_image(int w = 64, int h = 64) {
    return backends::ImageHandle::from_image(imaging::Image::filled(w, h, {20, 30, 40}));
}

std::vector<int> rows_of(const GroundingResult& r) {
    std::vector<int> rows;
    for (const TransitionEvent& e : r.trace) rows.push_back(e.row);
    return rows;
}

testing::ScriptedSuite single_entity_suite() {
    testing::ScriptedSuite s;
    s.on_categories = [](const std::string&, const std::string&,
                         const std::optional<std::string>&) {
        return std::vector<std::string>{"dog"};
    };
    s.on_detect = [](const backends::ImageHandle&, const std::vector<std::string>&) {
        return std::vector<backends::Detection>{{"dog", {5, 5, 30, 40}, 0.85}};
    };
    s.on_answer = [](const backends::ImageHandle&, const std::string&) { return 0.97; };
    return s;
}

}  // namespace

TEST_CASE("table-driven row classification") {
    struct Case {
        Observation obs;
        int row;
        StateId to;
    };
    const std::vector<Case> cases = {
        {{StateId::Perception, 0, 0, false, 0, false, 0}, 1, StateId::Perception},
        {{StateId::Perception, 2, 1, false, 0, false, 0}, 2, StateId::Answering},
        {{StateId::Perception, 2, 3, false, 0, false, 0}, 3, StateId::LogicGeneration},
        {{StateId::LogicGeneration, 2, 3, true, 0, false, 0}, 4, StateId::LogicGeneration},
        {{StateId::LogicGeneration, 2, 3, false, 0, false, 0}, 5, StateId::LogicReasoning},
        {{StateId::LogicReasoning, 2, 3, false, 0, false, 0}, 6, StateId::LogicGeneration},
        {{StateId::LogicReasoning, 2, 3, false, 2, false, 0}, 7, StateId::Answering},
        {{StateId::Answering, 2, 3, false, 2, true, 1}, 8, StateId::ReturnTarget},
        {{StateId::Answering, 2, 3, false, 2, false, 1}, 9, StateId::Answering},
        {{StateId::Answering, 2, 3, false, 2, false, 0}, 10, StateId::Perception},
    };
    for (const Case& c : cases) {
        const RowDecision d = classify_transition(c.obs);
        CHECK(d.row == c.row);
        CHECK(d.from == c.obs.state);
        CHECK(d.to == c.to);
    }
}

TEST_CASE("transition conditions partition the observation space") {
    std::mt19937 rng(20250313);
    std::uniform_int_distribution<int> small(0, 5);
    std::uniform_int_distribution<int> coin(0, 1);
    for (StateId state : {StateId::Perception, StateId::LogicGeneration,
                          StateId::LogicReasoning, StateId::Answering}) {
        for (int i = 0; i < 1000; ++i) {
            Observation obs;
            obs.state = state;
            obs.n_categories = small(rng);
            obs.n_entities = small(rng);
            obs.generation_error = coin(rng) != 0;
            obs.n_results = small(rng);
            obs.answer_yes = coin(rng) != 0;
            obs.n_alternatives = small(rng);
            CHECK(matching_rows(obs).size() == 1);
        }
    }
    CHECK(matching_rows({StateId::ReturnTarget, 1, 1, false, 1, true, 1}).empty());
}

TEST_CASE("trace rows are consistent with the transition table") {
    for (const RowInfo& info : transition_table()) {
        const RowDecision d = classify_transition([&] {
            Observation obs;
            obs.state = info.from;
            switch (info.row) {
                case 1: obs.n_categories = 0; break;
                case 2: obs.n_categories = 1; obs.n_entities = 1; break;
                case 3: obs.n_categories = 1; obs.n_entities = 2; break;
                case 4: obs.generation_error = true; break;
                case 5: obs.generation_error = false; break;
                case 6: obs.n_results = 0; break;
                case 7: obs.n_results = 1; break;
                case 8: obs.answer_yes = true; break;
                case 9: obs.answer_yes = false; obs.n_alternatives = 1; break;
                case 10: obs.answer_yes = false; obs.n_alternatives = 0; break;
            }
            return obs;
        }());
        CHECK(d.row == info.row);
        CHECK(d.to == info.to);
    }
}

TEST_CASE("single entity goes straight to Answering") {
    auto suite = single_entity_suite();
    const GroundingResult r = run(test_image(), "the dog", suite);
    CHECK(rows_of(r) == std::vector<int>{2, 8});
    CHECK(r.status == ResultStatus::Validated);
    REQUIRE(r.target);
    CHECK(r.target->entity_id == "dog_0");
    CHECK(r.program_text.empty());
    CHECK(suite.n_logic == 0);
}

TEST_CASE("empty categories retry with feedback, then succeed") {
    auto suite = single_entity_suite();
    suite.on_categories = [](const std::string&, const std::string&,
                             const std::optional<std::string>& feedback) {
        if (!feedback) return std::vector<std::string>{};
        CHECK(feedback->find("no relevant categories") != std::string::npos);
        return std::vector<std::string>{"dog"};
    };
    const GroundingResult r = run(test_image(), "the dog", suite);
    CHECK(rows_of(r) == std::vector<int>{1, 2, 8});
    CHECK(r.status == ResultStatus::Validated);
}

TEST_CASE("invalid rule then valid rule shows rows 4 then 5") {
    testing::ScriptedSuite suite;
    suite.on_categories = [](const std::string&, const std::string&,
                             const std::optional<std::string>&) {
        return std::vector<std::string>{"person"};
    };
    suite.on_detect = [](const backends::ImageHandle&, const std::vector<std::string>&) {
        return std::vector<backends::Detection>{{"person", {0, 0, 10, 20}, 0.9},
                                                {"person", {30, 0, 45, 20}, 0.6}};
    };
    suite.on_logic = [](const std::string&, const std::string&,
                        const std::vector<std::string>&,
                        const std::optional<std::string>& feedback) -> std::string {
        if (!feedback) return "```\ntarget(ID) :- wat(ID).\n```";
        CHECK(feedback->find("unknown predicate wat") != std::string::npos);
        return "```\ntarget(ID) :- entity(ID, \"person\", _, _, _, _).\n```";
    };
    suite.on_answer = [](const backends::ImageHandle&, const std::string&) { return 0.9; };
    const GroundingResult r = run(test_image(), "a person", suite);
    CHECK(rows_of(r) == std::vector<int>{3, 4, 5, 7, 8});
    CHECK(r.status == ResultStatus::Validated);
    CHECK(r.target->entity_id == "person_0");
    CHECK(r.alternatives.size() == 1);
    CHECK(!r.program_text.empty());
}

TEST_CASE("six consecutive rejections exhaust the budget") {
    testing::ScriptedSuite suite;
    suite.on_categories = [](const std::string&, const std::string&,
                             const std::optional<std::string>&) {
        return std::vector<std::string>{"person"};
    };
    suite.on_detect = [](const backends::ImageHandle&, const std::vector<std::string>&) {
        return std::vector<backends::Detection>{{"person", {0, 0, 10, 20}, 0.9},
                                                {"person", {30, 0, 45, 20}, 0.6}};
    };
    suite.on_logic = [](const std::string&, const std::string&,
                        const std::vector<std::string>&,
                        const std::optional<std::string>&) -> std::string {
        return "nonsense";
    };
    const GroundingResult r = run(test_image(), "a person", suite);
    CHECK(r.status == ResultStatus::BestEffort);
    REQUIRE(r.target);
    CHECK(r.target->entity_id == "person_0");  // top detector confidence
    const auto rows = rows_of(r);
    CHECK(std::count(rows.begin(), rows.end(), 4) == 6);
}

TEST_CASE("empty reasoning results loop back through row 6") {
    testing::ScriptedSuite suite;
    suite.on_categories = [](const std::string&, const std::string&,
                             const std::optional<std::string>&) {
        return std::vector<std::string>{"person"};
    };
    suite.on_detect = [](const backends::ImageHandle&, const std::vector<std::string>&) {
        return std::vector<backends::Detection>{{"person", {0, 0, 10, 20}, 0.9},
                                                {"person", {30, 0, 45, 20}, 0.6}};
    };
    suite.on_attribute = [](const backends::ImageHandle&, const spatial::BoundingBox&,
                            const std::string&) { return 0.4; };
    int calls = 0;
    suite.on_logic = [&calls](const std::string&, const std::string&,
                              const std::vector<std::string>&,
                              const std::optional<std::string>& feedback) -> std::string {
        ++calls;
        if (calls == 1) {
            // References a category nothing was detected for: grounds to zero
            // candidates.
            return "target(ID) :- entity(ID, \"person\", X1, _, _, _), X1 > 1000.";
        }
        CHECK(feedback);
        return "target(ID) :- entity(ID, \"person\", _, _, _, _).";
    };
    suite.on_answer = [](const backends::ImageHandle&, const std::string&) { return 1.0; };
    const GroundingResult r = run(test_image(), "a person", suite);
    CHECK(rows_of(r) == std::vector<int>{3, 5, 6, 5, 7, 8});
    CHECK(r.status == ResultStatus::Validated);
}

TEST_CASE("rejected top candidate falls through row 9 to the alternative") {
    testing::ScriptedSuite suite;
    suite.on_categories = [](const std::string&, const std::string&,
                             const std::optional<std::string>&) {
        return std::vector<std::string>{"person"};
    };
    suite.on_detect = [](const backends::ImageHandle&, const std::vector<std::string>&) {
        return std::vector<backends::Detection>{{"person", {0, 0, 10, 20}, 0.9},
                                                {"person", {30, 0, 45, 20}, 0.6}};
    };
    suite.on_logic = [](const std::string&, const std::string&,
                        const std::vector<std::string>&,
                        const std::optional<std::string>&) -> std::string {
        return "target(ID) :- entity(ID, \"person\", _, _, _, _).";
    };
    int answers = 0;
    suite.on_answer = [&answers](const backends::ImageHandle&, const std::string&) {
        return ++answers == 1 ? 0.2 : 0.97;
    };
    const GroundingResult r = run(test_image(), "a person", suite);
    CHECK(rows_of(r) == std::vector<int>{3, 5, 7, 9, 8});
    CHECK(r.status == ResultStatus::Validated);
    CHECK(r.target->entity_id == "person_1");
}

TEST_CASE("row 10 re-perceives with feedback naming rejected candidates") {
    testing::ScriptedSuite suite;
    suite.on_categories = [](const std::string&, const std::string&,
                             const std::optional<std::string>& feedback) {
        if (!feedback) return std::vector<std::string>{"box"};
        CHECK(feedback->find("box_0") != std::string::npos);
        return std::vector<std::string>{"cat"};
    };
    suite.on_detect = [](const backends::ImageHandle&, const std::vector<std::string>& cats) {
        if (cats == std::vector<std::string>{"box"}) {
            return std::vector<backends::Detection>{{"box", {0, 0, 10, 10}, 0.9}};
        }
        return std::vector<backends::Detection>{{"cat", {20, 20, 40, 40}, 0.8}};
    };
    int answers = 0;
    suite.on_answer = [&answers](const backends::ImageHandle&, const std::string&) {
        return ++answers == 1 ? 0.1 : 0.95;
    };
    const GroundingResult r = run(test_image(), "the cat", suite);
    CHECK(rows_of(r) == std::vector<int>{2, 10, 2, 8});
    CHECK(r.status == ResultStatus::Validated);
    CHECK(r.target->entity_id == "cat_0");
}

TEST_CASE("an unchanged re-perception cycle terminates best-effort") {
    testing::ScriptedSuite suite;
    suite.on_categories = [](const std::string&, const std::string&,
                             const std::optional<std::string>&) {
        return std::vector<std::string>{"box"};
    };
    suite.on_detect = [](const backends::ImageHandle&, const std::vector<std::string>&) {
        return std::vector<backends::Detection>{{"box", {0, 0, 10, 10}, 0.9}};
    };
    suite.on_answer = [](const backends::ImageHandle&, const std::string&) { return 0.1; };
    const GroundingResult r = run(test_image(), "the cat", suite);
    CHECK(rows_of(r) == std::vector<int>{2, 10});
    CHECK(r.status == ResultStatus::BestEffort);
    REQUIRE(r.target);
    CHECK(r.note.find("no new information") != std::string::npos);
}

TEST_CASE("no entities adopts the fallback detection") {
    testing::ScriptedSuite suite;
    suite.on_categories = [](const std::string&, const std::string&,
                             const std::optional<std::string>&) {
        return std::vector<std::string>{"unicorn"};
    };
    suite.on_detect = [](const backends::ImageHandle&, const std::vector<std::string>&) {
        return std::vector<backends::Detection>{};
    };
    suite.on_fallback = [](const backends::ImageHandle&, const std::string&) {
        return std::optional<backends::Detection>{{"unicorn", {3, 3, 9, 9}, 0.4}};
    };
    suite.on_answer = [](const backends::ImageHandle&, const std::string&) { return 0.9; };
    const GroundingResult r = run(test_image(), "a unicorn", suite);
    CHECK(rows_of(r) == std::vector<int>{2, 8});
    CHECK(r.status == ResultStatus::Validated);
    CHECK(r.target->entity_id == "fallback_0");
}

TEST_CASE("confidence floor drops weak detections") {
    auto suite = single_entity_suite();
    suite.on_detect = [](const backends::ImageHandle&, const std::vector<std::string>&) {
        return std::vector<backends::Detection>{{"dog", {5, 5, 30, 40}, 0.85},
                                                {"dog", {0, 0, 2, 2}, 0.01}};
    };
    const GroundingResult r = run(test_image(), "the dog", suite);
    CHECK(rows_of(r) == std::vector<int>{2, 8});  // the 0.01 detection never counts
}

TEST_CASE("content policy refusal aborts to a fallback result") {
    testing::ScriptedSuite suite;
    suite.on_caption = [](const backends::ImageHandle&) -> std::string {
        throw backends::CapabilityError(backends::CapabilityErrorKind::ContentPolicyRefusal,
                                        "refused");
    };
    suite.on_fallback = [](const backends::ImageHandle&, const std::string&) {
        return std::optional<backends::Detection>{{"", {1, 1, 5, 5}, 0.3}};
    };
    const GroundingResult r = run(test_image(), "anything", suite);
    CHECK(r.status == ResultStatus::Fallback);
    REQUIRE(r.target);
    CHECK(r.target->box == spatial::BoundingBox{1, 1, 5, 5});
    CHECK(r.note.find("refus") != std::string::npos);
}

TEST_CASE("segmenter-enabled suites attach a mask") {
    auto suite = single_entity_suite();
    suite.segmenter = true;
    suite.on_segment = [](const backends::ImageHandle& img, const spatial::BoundingBox& box) {
        return spatial::Bitmask::from_box(img.pixels.width, img.pixels.height, box);
    };
    const GroundingResult r = run(test_image(), "the dog", suite);
    REQUIRE(r.mask);
    CHECK(r.mask->popcount() == spatial::BoundingBox{5, 5, 30, 40}.area());
}

TEST_CASE("result JSON is stable and carries the trace") {
    auto suite = single_entity_suite();
    const GroundingResult r = run(test_image(), "the dog", suite);
    const nlohmann::json j = result_to_json(r);
    CHECK(j["status"] == "Validated");
    CHECK(j["target"]["entity_id"] == "dog_0");
    CHECK(j["trace"].size() == 2);
    CHECK(j["trace"][0]["row"] == 2);
    CHECK(j["trace"][1]["to"] == "ReturnTarget");
    auto suite2 = single_entity_suite();
    CHECK(result_to_json(run(test_image(), "the dog", suite2)).dump() == j.dump());
}
