#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "grounder/backends/suite.hpp"
#include "grounder/spatial/mask.hpp"

namespace grounder::automaton {

enum class StateId { Perception, LogicGeneration, LogicReasoning, Answering, ReturnTarget };

const char* state_name(StateId s);
std::optional<StateId> state_from_name(const std::string& name);

struct TransitionEvent {
    int row = 0;
    StateId from = StateId::Perception;
    StateId to = StateId::Perception;
    std::string condition_snapshot;
    int step = 0;  // 1-based position in the trace

    bool operator==(const TransitionEvent&) const = default;
};

/// Everything the transition function observes in one state.
struct Observation {
    StateId state = StateId::Perception;
    int n_categories = 0;
    int n_entities = 0;
    bool generation_error = false;
    int n_results = 0;
    bool answer_yes = false;
    int n_alternatives = 0;
};

struct RowDecision {
    int row;
    StateId from;
    StateId to;
};

/// Rows of the transition table whose condition holds for the observation.
/// The conditions partition the observation space: exactly one row matches
/// in any non-final state.
std::vector<int> matching_rows(const Observation& obs);

/// The unique matching row; throws std::logic_error if the partition
/// property is violated.
RowDecision classify_transition(const Observation& obs);

struct RowInfo {
    int row;
    StateId from;
    StateId to;
    const char* condition;
};
const std::vector<RowInfo>& transition_table();

struct AutomatonConfig {
    int max_retries = 6;            // per self-correction edge
    double confidence_floor = 0.05; // detections below are dropped
    int max_pairs = 30;
    double candidate_floor = 1e-6;
    std::size_t grounding_cap = 100000;

    // Ablation toggles; all enabled in the standard configuration.
    bool enable_self_correction = true;
    bool enable_logic = true;
    bool enable_answerer = true;
    bool enable_captioner = true;
};

struct Candidate {
    std::string entity_id;
    spatial::BoundingBox box;
    double probability = 0.0;

    bool operator==(const Candidate&) const = default;
};

enum class ResultStatus { Validated, BestEffort, Fallback };
const char* result_status_text(ResultStatus s);

struct GroundingResult {
    std::optional<Candidate> target;
    std::optional<spatial::Bitmask> mask;
    ResultStatus status = ResultStatus::BestEffort;
    std::vector<Candidate> alternatives;  // ranked, excluding the target
    std::vector<TransitionEvent> trace;
    std::string program_text;  // empty when no program was generated
    std::string note;          // best-effort / fallback explanation
};

nlohmann::json trace_to_json(const std::vector<TransitionEvent>& trace);
nlohmann::json result_to_json(const GroundingResult& result);

/// Executes the five-state pipeline until the final state. Only content
/// policy refusals and transport exhaustion abort a run; the result then
/// carries status Fallback.
GroundingResult run(const backends::ImageHandle& image, const std::string& query,
                    backends::BackendSuite& suite, const AutomatonConfig& config = {});

}  // namespace grounder::automaton
