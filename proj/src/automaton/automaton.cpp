#include "grounder/automaton/automaton.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <stdexcept>

#include "grounder/logic/infer.hpp"
#include "grounder/logic/parser.hpp"
#include "grounder/logicgen/generation.hpp"
#include "grounder/validation/annotate.hpp"

namespace grounder::automaton {

const char* state_name(StateId s) {
    switch (s) {
        case StateId::Perception: return "Perception";
        case StateId::LogicGeneration: return "LogicGeneration";
        case StateId::LogicReasoning: return "LogicReasoning";
        case StateId::Answering: return "Answering";
        case StateId::ReturnTarget: return "ReturnTarget";
    }
    return "?";
}

std::optional<StateId> state_from_name(const std::string& name) {
    for (StateId s : {StateId::Perception, StateId::LogicGeneration, StateId::LogicReasoning,
                      StateId::Answering, StateId::ReturnTarget}) {
        if (name == state_name(s)) return s;
    }
    return std::nullopt;
}

const std::vector<RowInfo>& transition_table() {
    static const std::vector<RowInfo> kTable = {
        {1, StateId::Perception, StateId::Perception, "|C| = 0"},
        {2, StateId::Perception, StateId::Answering, "|E| < 2"},
        {3, StateId::Perception, StateId::LogicGeneration, "|E| >= 2"},
        {4, StateId::LogicGeneration, StateId::LogicGeneration, "code generation error"},
        {5, StateId::LogicGeneration, StateId::LogicReasoning, "code generated"},
        {6, StateId::LogicReasoning, StateId::LogicGeneration, "|Y_L| = 0"},
        {7, StateId::LogicReasoning, StateId::Answering, "|Y_L| > 0"},
        {8, StateId::Answering, StateId::ReturnTarget, "answer Yes"},
        {9, StateId::Answering, StateId::Answering, "answer No, alternatives remain"},
        {10, StateId::Answering, StateId::Perception, "answer No, no alternatives"},
    };
    return kTable;
}

std::vector<int> matching_rows(const Observation& obs) {
    std::vector<int> rows;
    switch (obs.state) {
        case StateId::Perception:
            if (obs.n_categories == 0) rows.push_back(1);
            if (obs.n_categories > 0 && obs.n_entities < 2) rows.push_back(2);
            if (obs.n_categories > 0 && obs.n_entities >= 2) rows.push_back(3);
            break;
        case StateId::LogicGeneration:
            if (obs.generation_error) rows.push_back(4);
            if (!obs.generation_error) rows.push_back(5);
            break;
        case StateId::LogicReasoning:
            if (obs.n_results == 0) rows.push_back(6);
            if (obs.n_results > 0) rows.push_back(7);
            break;
        case StateId::Answering:
            if (obs.answer_yes) rows.push_back(8);
            if (!obs.answer_yes && obs.n_alternatives > 0) rows.push_back(9);
            if (!obs.answer_yes && obs.n_alternatives == 0) rows.push_back(10);
            break;
        case StateId::ReturnTarget:
            break;
    }
    return rows;
}

RowDecision classify_transition(const Observation& obs) {
    const auto rows = matching_rows(obs);
    if (rows.size() != 1) {
        throw std::logic_error("transition conditions matched " +
                               std::to_string(rows.size()) + " rows in state " +
                               state_name(obs.state));
    }
    for (const RowInfo& info : transition_table()) {
        if (info.row == rows.front()) return {info.row, info.from, info.to};
    }
    throw std::logic_error("row missing from transition table");
}

const char* result_status_text(ResultStatus s) {
    switch (s) {
        case ResultStatus::Validated: return "Validated";
        case ResultStatus::BestEffort: return "BestEffort";
        case ResultStatus::Fallback: return "Fallback";
    }
    return "?";
}

nlohmann::json trace_to_json(const std::vector<TransitionEvent>& trace) {
    nlohmann::json arr = nlohmann::json::array();
    for (const TransitionEvent& e : trace) {
        arr.push_back({{"row", e.row},
                       {"from", state_name(e.from)},
                       {"to", state_name(e.to)},
                       {"condition_snapshot", e.condition_snapshot},
                       {"step", e.step}});
    }
    return arr;
}

namespace {

nlohmann::json candidate_to_json(const Candidate& c) {
    return {{"entity_id", c.entity_id},
            {"box", {c.box.x1, c.box.y1, c.box.x2, c.box.y2}},
            {"probability", c.probability}};
}

}  // namespace

nlohmann::json result_to_json(const GroundingResult& result) {
    nlohmann::json j;
    j["status"] = result_status_text(result.status);
    j["target"] = result.target ? candidate_to_json(*result.target) : nlohmann::json();
    if (result.mask) {
        const auto counts = spatial::rle_encode(*result.mask);
        j["mask"] = {{"w", result.mask->width},
                     {"h", result.mask->height},
                     {"counts", counts}};
    } else {
        j["mask"] = nullptr;
    }
    nlohmann::json alts = nlohmann::json::array();
    for (const Candidate& c : result.alternatives) alts.push_back(candidate_to_json(c));
    j["alternatives"] = alts;
    j["trace"] = trace_to_json(result.trace);
    j["program"] = result.program_text;
    j["note"] = result.note;
    return j;
}

namespace {

using backends::CapabilityError;
using backends::CapabilityErrorKind;

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

/// Refusals and exhausted transports abort the whole run; everything else is
/// fed back into the state machine by the caller.
bool is_abort(const CapabilityError& e) {
    return e.kind == CapabilityErrorKind::ContentPolicyRefusal ||
           e.kind == CapabilityErrorKind::Transport ||
           e.kind == CapabilityErrorKind::Timeout;
}

class Runner {
  public:
    Runner(const backends::ImageHandle& image, const std::string& query,
           backends::BackendSuite& suite, const AutomatonConfig& config)
        : image_(image), query_(query), suite_(suite), config_(config) {}

    GroundingResult run() {
        if (query_.empty()) throw std::invalid_argument("empty query");
        try {
            while (state_ != StateId::ReturnTarget) {
                switch (state_) {
                    case StateId::Perception: step_perception(); break;
                    case StateId::LogicGeneration: step_logic_generation(); break;
                    case StateId::LogicReasoning: step_logic_reasoning(); break;
                    case StateId::Answering: step_answering(); break;
                    case StateId::ReturnTarget: break;
                }
                if (done_) break;
            }
        } catch (const CapabilityError& e) {
            if (!is_abort(e)) throw;
            abort_run(e);
        }
        return std::move(result_);
    }

  private:
    int budget() const { return config_.enable_self_correction ? config_.max_retries : 0; }

    void record(int row, const std::string& snapshot) {
        const RowInfo* info = nullptr;
        for (const RowInfo& r : transition_table()) {
            if (r.row == row) info = &r;
        }
        trace_.push_back({row, info->from, info->to,
                          snapshot.empty() ? info->condition : snapshot,
                          static_cast<int>(trace_.size()) + 1});
        state_ = info->to;
    }

    /// True when the counter for a self-correction row is already spent.
    bool spend(int row) {
        int& n = retries_[row];
        ++n;
        return n > budget();
    }

    Candidate entity_candidate(const logicgen::EntityRecord& e) const {
        return {e.id, e.box, e.confidence};
    }

    std::optional<Candidate> best_available() const {
        if (!candidates_.empty()) return candidates_.front();
        if (!entities_.empty()) {
            const auto it = std::max_element(
                entities_.begin(), entities_.end(),
                [](const auto& a, const auto& b) { return a.confidence < b.confidence; });
            return entity_candidate(*it);
        }
        return std::nullopt;
    }

    void finish(std::optional<Candidate> target, ResultStatus status, std::string note) {
        result_.target = std::move(target);
        result_.status = status;
        result_.note = std::move(note);
        result_.trace = trace_;
        result_.program_text = program_text_;
        result_.alternatives.clear();
        for (const Candidate& c : candidates_) {
            if (!result_.target || c.entity_id != result_.target->entity_id) {
                result_.alternatives.push_back(c);
            }
        }
        if (result_.target && suite_.has_segmenter()) {
            try {
                result_.mask = suite_.segment_region(image_, result_.target->box);
            } catch (const CapabilityError&) {
                result_.mask.reset();
            }
        }
        state_ = StateId::ReturnTarget;
        done_ = true;
    }

    void best_effort(const std::string& note) {
        finish(best_available(), ResultStatus::BestEffort, note);
    }

    void abort_run(const CapabilityError& e) {
        std::optional<Candidate> target;
        try {
            if (auto fb = suite_.detect_fallback(image_, query_)) {
                target = Candidate{"fallback_0", fb->box, fb->confidence};
            }
        } catch (const CapabilityError&) {
        }
        if (!target) target = best_available();
        finish(std::move(target), ResultStatus::Fallback, std::string("aborted: ") + e.what());
    }

    void step_perception() {
        std::string failure;
        try {
            if (config_.enable_captioner && !caption_) caption_ = suite_.caption(image_);
            categories_ = suite_.extract_categories(caption_.value_or(""), query_,
                                                    perception_feedback_);
        } catch (const CapabilityError& e) {
            if (is_abort(e)) throw;
            categories_.clear();
            failure = e.detail;
        }
        if (categories_.empty()) {
            if (spend(1)) {
                best_effort("category extraction retries exhausted");
                return;
            }
            perception_feedback_ =
                failure.empty() ? "no relevant categories found, reconsider the query"
                                : "category extraction failed: " + failure;
            record(1, "|C| = 0");
            return;
        }

        std::vector<backends::Detection> detections;
        try {
            detections = suite_.detect_entities(image_, categories_);
        } catch (const CapabilityError& e) {
            if (is_abort(e)) throw;
            if (spend(1)) {
                best_effort("detection retries exhausted");
                return;
            }
            perception_feedback_ = "detection failed: " + e.detail;
            categories_.clear();
            record(1, "|C| = 0 (detection error)");
            return;
        }
        std::erase_if(detections, [&](const backends::Detection& d) {
            return d.confidence < config_.confidence_floor;
        });
        entities_ = logicgen::assign_entity_ids(detections);

        if (entities_.empty()) {
            try {
                if (auto fb = suite_.detect_fallback(image_, query_)) {
                    entities_.push_back({"fallback_0", fb->category.empty() ? "object"
                                                                            : fb->category,
                                         fb->box, fb->confidence});
                }
            } catch (const CapabilityError& e) {
                if (is_abort(e)) throw;
            }
        }

        // A re-perception cycle that changed nothing cannot make progress.
        if (reentered_ && last_cycle_ == cycle_signature()) {
            best_effort("re-perception produced no new information");
            return;
        }
        last_cycle_ = cycle_signature();
        reentered_ = false;

        std::ostringstream snap;
        snap << "|C| = " << categories_.size() << ", |E| = " << entities_.size();
        if (entities_.size() < 2 || !config_.enable_logic) {
            candidates_.clear();
            for (const auto& e : entities_) candidates_.push_back(entity_candidate(e));
            std::stable_sort(candidates_.begin(), candidates_.end(),
                             [](const Candidate& a, const Candidate& b) {
                                 return a.probability > b.probability;
                             });
            record(2, snap.str() + (config_.enable_logic ? "" : " (logic disabled)"));
        } else {
            record(3, snap.str());
        }
    }

    void step_logic_generation() {
        std::vector<std::string> reasons;
        try {
            const std::string raw = suite_.generate_logic(
                query_, logicgen::emit_entity_facts(entities_), categories_, logic_feedback_);
            const std::string block = logicgen::extract_rule_block(raw);
            const logic::Rule rule = logicgen::validate_rule(block, categories_);
            const auto req = logicgen::extract_symbols(rule);
            const auto rel = logicgen::materialize_relations(image_, entities_, req, suite_,
                                                             {config_.max_pairs});
            const auto attr = logicgen::materialize_attributes(image_, entities_, req, suite_);
            const auto facts = logicgen::entity_probfacts(entities_);
            program_ = logicgen::assemble_program(facts, rel, attr, rule, query_);
            program_text_ = logicgen::assemble_program_text(facts, rel, attr, rule, query_);
        } catch (const logicgen::RuleRejected& e) {
            reasons = e.reasons;
        } catch (const logicgen::EmptyOutput& e) {
            reasons = {e.what()};
        } catch (const logic::ParseError& e) {
            reasons = {e.what()};
        } catch (const CapabilityError& e) {
            if (is_abort(e)) throw;
            reasons = {e.detail};
        }
        if (!reasons.empty()) {
            if (spend(4)) {
                best_effort("logic generation retries exhausted");
                return;
            }
            logic_feedback_ = join(reasons, "; ");
            record(4, "generation error: " + *logic_feedback_);
            return;
        }
        record(5, "");
    }

    void step_logic_reasoning() {
        std::vector<logic::QueryAnswer> answers;
        std::string error;
        try {
            logic::AnswerOptions options;
            options.candidate_floor = config_.candidate_floor;
            for (const auto& e : entities_) options.entity_confidence[e.id] = e.confidence;
            answers = logic::answer_query(*program_, options, config_.grounding_cap);
        } catch (const std::exception& e) {
            error = e.what();
        }
        if (answers.empty()) {
            if (spend(6)) {
                best_effort("reasoning retries exhausted");
                return;
            }
            logic_feedback_ = error.empty()
                                  ? "query produced no candidates; relax or correct the rule"
                                  : "inference failed: " + error;
            record(6, error.empty() ? "|Y_L| = 0" : "|Y_L| = 0 (" + error + ")");
            return;
        }
        candidates_.clear();
        for (const auto& a : answers) {
            std::optional<Candidate> c;
            for (const auto& [var, term] : a.binding) {
                for (const auto& e : entities_) {
                    if (term.kind != logic::TermKind::Variable && term.text == e.id) {
                        c = Candidate{e.id, e.box, a.probability};
                    }
                }
            }
            if (!c && a.binding.empty()) {
                if (auto best = best_available()) c = Candidate{best->entity_id, best->box,
                                                                a.probability};
            }
            if (c) candidates_.push_back(*c);
        }
        if (candidates_.empty()) {
            if (spend(6)) {
                best_effort("reasoning retries exhausted");
                return;
            }
            logic_feedback_ = "query answers did not name detected entities";
            record(6, "|Y_L| = 0 (no entity bindings)");
            return;
        }
        record(7, "|Y_L| = " + std::to_string(candidates_.size()));
    }

    void step_answering() {
        if (candidates_.empty()) {
            best_effort("no candidates to validate");
            return;
        }
        const Candidate top = candidates_.front();
        if (!config_.enable_answerer) {
            finish(top, ResultStatus::BestEffort, "answer validation disabled");
            return;
        }
        double p_yes = 0.0;
        bool unparsable = false;
        try {
            const imaging::Image marked =
                validation::annotate_candidate(image_.pixels, top.box);
            const auto handle = backends::ImageHandle::from_image(marked);
            p_yes = suite_.validate_answer(handle, query_);
        } catch (const CapabilityError& e) {
            if (is_abort(e)) throw;
            // Unparsable verdicts count as "No"; the snapshot records the flag.
            unparsable = true;
        } catch (const validation::BoxOutOfBounds&) {
            unparsable = true;
        }
        std::ostringstream snap;
        if (unparsable) {
            snap << "no verdict (treated as No)";
        } else {
            snap << "P(Yes) = " << p_yes;
        }
        if (!unparsable && validation::decide(p_yes) == validation::Verdict::Yes) {
            record(8, snap.str());
            finish(top, ResultStatus::Validated, "");
            return;
        }
        rejected_.push_back(top.entity_id);
        candidates_.erase(candidates_.begin());
        if (!candidates_.empty()) {
            if (spend(9)) {
                best_effort("answer validation retries exhausted");
                return;
            }
            record(9, snap.str() + ", alternatives = " + std::to_string(candidates_.size()));
            return;
        }
        if (spend(10)) {
            best_effort("re-perception retries exhausted");
            return;
        }
        perception_feedback_ =
            "candidates rejected by validation: " + join(rejected_, ", ") +
            "; previously used categories: " + join(categories_, ", ") +
            "; gather new visual information";
        reentered_ = true;
        record(10, snap.str() + ", no alternatives");
    }

    std::string cycle_signature() const {
        std::string sig = join(categories_, "|") + "//";
        for (const auto& e : entities_) sig += e.id + "|";
        return sig;
    }

    const backends::ImageHandle& image_;
    std::string query_;
    backends::BackendSuite& suite_;
    AutomatonConfig config_;

    StateId state_ = StateId::Perception;
    bool done_ = false;
    std::optional<std::string> caption_;
    std::vector<std::string> categories_;
    std::vector<logicgen::EntityRecord> entities_;
    std::optional<logic::Program> program_;
    std::string program_text_;
    std::vector<Candidate> candidates_;
    std::vector<std::string> rejected_;
    std::optional<std::string> perception_feedback_;
    std::optional<std::string> logic_feedback_;
    std::map<int, int> retries_;
    std::vector<TransitionEvent> trace_;
    bool reentered_ = false;
    std::string last_cycle_;
    GroundingResult result_;
};

}  // namespace

GroundingResult run(const backends::ImageHandle& image, const std::string& query,
                    backends::BackendSuite& suite, const AutomatonConfig& config) {
    return Runner(image, query, suite, config).run();
}

}  // namespace grounder::automaton
