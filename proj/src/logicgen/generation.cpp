#include "grounder/logicgen/generation.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "grounder/logic/parser.hpp"
#include "grounder/logic/validate.hpp"

namespace grounder::logicgen {

using logic::Atom;
using logic::ProbFact;
using logic::Rule;
using logic::Term;

RuleRejected::RuleRejected(std::vector<std::string> reasons_)
    : std::runtime_error([&] {
          std::string msg = "rule rejected:";
          for (const std::string& r : reasons_) msg += " " + r + ";";
          return msg;
      }()),
      reasons(std::move(reasons_)) {}

std::vector<EntityRecord> assign_entity_ids(
    const std::vector<backends::Detection>& detections) {
    std::vector<EntityRecord> out;
    std::map<std::string, int> counters;
    for (const backends::Detection& d : detections) {
        EntityRecord e;
        e.category = d.category;
        e.box = d.box;
        e.confidence = d.confidence;
        e.id = d.category + "_" + std::to_string(counters[d.category]++);
        out.push_back(std::move(e));
    }
    return out;
}

double clamp_probability(double p) {
    return std::clamp(p, kProbabilityFloor, kProbabilityCeiling);
}

namespace {

constexpr const char* kEntityHeader =
    "% entity(ID: str, category: str, x1: int, y1: int, x2: int, y2: int).";
constexpr const char* kRelationHeader = "% relation(entity_a: str, entity_b: str, value: str).";
constexpr const char* kAttributeHeader = "% attribute(entity: str, value: str).";

ProbFact entity_fact(const EntityRecord& e) {
    ProbFact f;
    f.probability = clamp_probability(e.confidence);
    f.atom.predicate = "entity";
    f.atom.args = {Term::string(e.id),     Term::string(e.category),
                   Term::integer(e.box.x1), Term::integer(e.box.y1),
                   Term::integer(e.box.x2), Term::integer(e.box.y2)};
    return f;
}

}  // namespace

std::vector<ProbFact> entity_probfacts(const std::vector<EntityRecord>& entities) {
    std::vector<ProbFact> out;
    out.reserve(entities.size());
    for (const EntityRecord& e : entities) out.push_back(entity_fact(e));
    return out;
}

std::string emit_entity_facts(const std::vector<EntityRecord>& entities) {
    std::string out = kEntityHeader;
    out += "\n";
    for (const EntityRecord& e : entities) {
        out += to_string(entity_fact(e));
        out += "\n";
    }
    return out;
}

std::string extract_rule_block(const std::string& llm_text) {
    auto trim = [](std::string s) {
        const auto first = s.find_first_not_of(" \t\r\n");
        if (first == std::string::npos) return std::string();
        const auto last = s.find_last_not_of(" \t\r\n");
        return s.substr(first, last - first + 1);
    };

    const auto fence = llm_text.find("```");
    if (fence != std::string::npos) {
        auto body_start = llm_text.find('\n', fence);
        if (body_start != std::string::npos) {
            ++body_start;
            const auto fence_end = llm_text.find("```", body_start);
            const std::string inner =
                fence_end == std::string::npos
                    ? llm_text.substr(body_start)
                    : llm_text.substr(body_start, fence_end - body_start);
            const std::string trimmed = trim(inner);
            if (trimmed.empty()) throw EmptyOutput("fenced code block is empty");
            return trimmed;
        }
    }
    const std::string trimmed = trim(llm_text);
    if (trimmed.empty()) throw EmptyOutput("model output is empty");
    return trimmed;
}

Rule validate_rule(const std::string& rule_text,
                   const std::vector<std::string>& known_categories) {
    std::vector<std::string> reasons;
    logic::Program parsed;
    try {
        parsed = logic::parse_program(rule_text);
    } catch (const logic::ParseError& e) {
        throw RuleRejected({std::string("parse error: ") + e.what()});
    }

    // The model may echo facts or the query directive around the rule; only
    // the target rule is taken.
    const Rule* rule = nullptr;
    for (const Rule& r : parsed.rules) {
        if (r.head.predicate == "target") {
            rule = &r;
            break;
        }
    }
    if (!rule) {
        if (!parsed.rules.empty()) {
            throw RuleRejected({"no rule with head predicate target/1 (found head " +
                                to_string(parsed.rules.front().head) + ")"});
        }
        throw RuleRejected({"output contains no rule"});
    }
    if (rule->head.arity() != 1) {
        reasons.push_back("head must be target/1, got arity " +
                          std::to_string(rule->head.arity()));
    }

    static const std::map<std::string, std::size_t> kAllowed = {
        {"entity", 6}, {"relation", 3}, {"attribute", 2}};
    const std::set<std::string> categories(known_categories.begin(), known_categories.end());
    for (const auto& lit : rule->body) {
        const Atom* a = std::get_if<Atom>(&lit);
        if (!a) continue;
        auto it = kAllowed.find(a->predicate);
        if (it == kAllowed.end()) {
            reasons.push_back("unknown predicate " + a->predicate + "/" +
                              std::to_string(a->arity()));
            continue;
        }
        if (a->arity() != it->second) {
            reasons.push_back("predicate " + a->predicate + " expects arity " +
                              std::to_string(it->second) + ", got " +
                              std::to_string(a->arity()));
        }
        if (a->predicate == "entity" && a->arity() >= 2 &&
            a->args[1].kind == logic::TermKind::String &&
            !categories.contains(a->args[1].text)) {
            reasons.push_back("unknown category \"" + a->args[1].text + "\"");
        }
    }

    // Safety: check the rule in isolation with a placeholder query.
    logic::Program probe;
    probe.rules.push_back(*rule);
    probe.queries.push_back(rule->head);
    for (const logic::Violation& v : logic::validate_program(probe)) {
        if (v.kind == logic::ViolationKind::UnsafeRule) {
            reasons.push_back(v.detail);
        }
    }

    if (!reasons.empty()) throw RuleRejected(std::move(reasons));
    return *rule;
}

SymbolRequirements extract_symbols(const Rule& rule) {
    SymbolRequirements req;
    std::set<std::string> seen_rel;
    std::set<std::string> seen_attr;
    for (const auto& lit : rule.body) {
        const Atom* a = std::get_if<Atom>(&lit);
        if (!a) continue;
        if (a->predicate == "relation" && a->arity() == 3) {
            const Term& value = a->args[2];
            if (value.kind == logic::TermKind::String) {
                if (seen_rel.insert(value.text).second) req.relations.push_back(value.text);
            } else if (value.is_variable()) {
                req.variable_relation_flagged = true;
            }
        } else if (a->predicate == "attribute" && a->arity() == 2) {
            const Term& value = a->args[1];
            if (value.kind == logic::TermKind::String) {
                if (seen_attr.insert(value.text).second) req.attributes.push_back(value.text);
            } else if (value.is_variable()) {
                req.variable_attribute_flagged = true;
            }
        }
    }
    return req;
}

std::string phrase_for_prompt(const std::string& phrase) {
    std::string out = phrase;
    std::replace(out.begin(), out.end(), '_', ' ');
    return out;
}

std::vector<ProbFact> materialize_relations(const backends::ImageHandle& image,
                                            const std::vector<EntityRecord>& entities,
                                            const SymbolRequirements& req,
                                            backends::BackendSuite& suite,
                                            const MaterializeConfig& config) {
    // Ordered pairs ranked by descending confidence product, capped.
    struct Pair {
        const EntityRecord* a;
        const EntityRecord* b;
    };
    std::vector<Pair> pairs;
    for (const EntityRecord& a : entities) {
        for (const EntityRecord& b : entities) {
            if (a.id != b.id) pairs.push_back({&a, &b});
        }
    }
    std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& x, const Pair& y) {
        const double px = x.a->confidence * x.b->confidence;
        const double py = y.a->confidence * y.b->confidence;
        if (px != py) return px > py;
        if (x.a->id != y.a->id) return x.a->id < y.a->id;
        return x.b->id < y.b->id;
    });
    if (pairs.size() > static_cast<std::size_t>(config.max_pairs)) {
        pairs.resize(static_cast<std::size_t>(config.max_pairs));
    }
    // Canonical output order: phrase, then subject ID, then object ID.
    std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& x, const Pair& y) {
        if (x.a->id != y.a->id) return x.a->id < y.a->id;
        return x.b->id < y.b->id;
    });

    std::optional<spatial::DepthField> depth;  // estimated once per image
    std::map<std::string, double> entity_depths;

    std::vector<ProbFact> out;
    for (const std::string& phrase : req.relations) {
        const std::string spoken = phrase_for_prompt(phrase);
        for (const Pair& pair : pairs) {
            double p;
            try {
                if (spatial::is_geometric_relation(spoken)) {
                    p = spatial::geometric_relation(pair.a->box, pair.b->box, spoken,
                                                    image.pixels.width,
                                                    image.pixels.height);
                } else if (spatial::is_depth_relation(spoken)) {
                    if (!depth) depth = suite.estimate_depth(image);
                    for (const EntityRecord* e : {pair.a, pair.b}) {
                        if (!entity_depths.contains(e->id)) {
                            entity_depths[e->id] = spatial::entity_depth(*depth, e->box);
                        }
                    }
                    p = spatial::depth_relation(entity_depths[pair.a->id],
                                                entity_depths[pair.b->id], spoken);
                } else {
                    backends::Detection da{pair.a->category, pair.a->box, pair.a->confidence};
                    backends::Detection db{pair.b->category, pair.b->box, pair.b->confidence};
                    p = suite.score_relation(image, da, db, spoken);
                }
            } catch (const backends::CapabilityError& e) {
                throw backends::CapabilityError(
                    e.kind, "scoring relation \"" + phrase + "\" for (" + pair.a->id + ", " +
                                pair.b->id + "): " + e.detail);
            }
            ProbFact f;
            f.probability = clamp_probability(p);
            f.atom.predicate = "relation";
            f.atom.args = {Term::string(pair.a->id), Term::string(pair.b->id),
                           Term::string(phrase)};
            out.push_back(std::move(f));
        }
    }
    return out;
}

std::vector<ProbFact> materialize_attributes(const backends::ImageHandle& image,
                                             const std::vector<EntityRecord>& entities,
                                             const SymbolRequirements& req,
                                             backends::BackendSuite& suite) {
    std::vector<ProbFact> out;
    for (const std::string& phrase : req.attributes) {
        const std::string spoken = phrase_for_prompt(phrase);
        for (const EntityRecord& e : entities) {
            double p;
            try {
                p = suite.score_attribute(image, e.box, spoken);
            } catch (const backends::CapabilityError& err) {
                throw backends::CapabilityError(err.kind, "scoring attribute \"" + phrase +
                                                              "\" for " + e.id + ": " +
                                                              err.detail);
            }
            ProbFact f;
            f.probability = clamp_probability(p);
            f.atom.predicate = "attribute";
            f.atom.args = {Term::string(e.id), Term::string(phrase)};
            out.push_back(std::move(f));
        }
    }
    return out;
}

std::string assemble_program_text(const std::vector<ProbFact>& entity_facts,
                                  const std::vector<ProbFact>& relation_facts,
                                  const std::vector<ProbFact>& attribute_facts,
                                  const Rule& rule, const std::string& query_comment) {
    std::string out = kEntityHeader;
    out += "\n";
    for (const ProbFact& f : entity_facts) {
        out += to_string(f);
        out += "\n";
    }
    out += kRelationHeader;
    out += "\n";
    for (const ProbFact& f : relation_facts) {
        out += to_string(f);
        out += "\n";
    }
    out += kAttributeHeader;
    out += "\n";
    for (const ProbFact& f : attribute_facts) {
        out += to_string(f);
        out += "\n";
    }
    out += "% " + query_comment + "\n";
    out += to_string(rule);
    out += "\nquery(target(ID)).\n";
    return out;
}

logic::Program assemble_program(const std::vector<ProbFact>& entity_facts,
                                const std::vector<ProbFact>& relation_facts,
                                const std::vector<ProbFact>& attribute_facts,
                                const Rule& rule, const std::string& query_comment) {
    const std::string text = assemble_program_text(entity_facts, relation_facts,
                                                   attribute_facts, rule, query_comment);
    logic::Program program = logic::parse_program(text);
    const auto violations = logic::validate_program(program);
    if (!violations.empty()) {
        std::string msg = "assembled program failed validation:";
        for (const auto& v : violations) msg += std::string(" ") + v.detail + ";";
        throw std::logic_error(msg);
    }
    return program;
}

}  // namespace grounder::logicgen
