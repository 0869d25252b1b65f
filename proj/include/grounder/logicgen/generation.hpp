#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "grounder/backends/suite.hpp"
#include "grounder/logic/ast.hpp"
#include "grounder/spatial/geometry.hpp"

namespace grounder::logicgen {

struct EmptyOutput : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Machine-readable rejection; the reason text becomes the feedback for the
/// next generation attempt.
struct RuleRejected : std::runtime_error {
    explicit RuleRejected(std::vector<std::string> reasons_);
    std::vector<std::string> reasons;
};

/// Detected object with its generated ID "{category}_{k}".
struct EntityRecord {
    std::string id;
    std::string category;
    spatial::BoundingBox box;
    double confidence = 0.0;

    bool operator==(const EntityRecord&) const = default;
};

/// Assigns IDs by zero-based detection index within each category.
std::vector<EntityRecord> assign_entity_ids(const std::vector<backends::Detection>& detections);

/// Relation and attribute phrases required by the rule body, in body order.
struct SymbolRequirements {
    std::vector<std::string> relations;
    std::vector<std::string> attributes;
    bool variable_relation_flagged = false;
    bool variable_attribute_flagged = false;
};

inline constexpr double kProbabilityFloor = 0.0001;
inline constexpr double kProbabilityCeiling = 0.9999;

double clamp_probability(double p);

/// One fact line per entity, preceded by the entity schema comment header.
std::string emit_entity_facts(const std::vector<EntityRecord>& entities);

/// The same facts as structured values, clamped and ordered as emitted.
std::vector<logic::ProbFact> entity_probfacts(const std::vector<EntityRecord>& entities);

/// Contents of the first fenced code block; the whole text trimmed when no
/// fence is present. Throws EmptyOutput on whitespace-only input.
std::string extract_rule_block(const std::string& llm_text);

/// Parses and checks the generated target rule: head target/1, body
/// predicates limited to entity/6, relation/3, attribute/2 and comparisons,
/// known categories only, safety.
logic::Rule validate_rule(const std::string& rule_text,
                          const std::vector<std::string>& known_categories);

SymbolRequirements extract_symbols(const logic::Rule& rule);

struct MaterializeConfig {
    int max_pairs = 30;
};

/// Scores every required relation phrase over confidence-ranked entity
/// pairs: lexicon phrases via geometry, depth phrases via the depth
/// estimator, everything else via the relation VLM.
std::vector<logic::ProbFact> materialize_relations(const backends::ImageHandle& image,
                                                   const std::vector<EntityRecord>& entities,
                                                   const SymbolRequirements& req,
                                                   backends::BackendSuite& suite,
                                                   const MaterializeConfig& config = {});

std::vector<logic::ProbFact> materialize_attributes(const backends::ImageHandle& image,
                                                    const std::vector<EntityRecord>& entities,
                                                    const SymbolRequirements& req,
                                                    backends::BackendSuite& suite);

/// Replaces underscores with spaces for natural-language prompting; the
/// logic constant keeps its verbatim spelling.
std::string phrase_for_prompt(const std::string& phrase);

/// Concatenates entity, relation and attribute facts with the query comment,
/// rule and query directive, reparses and revalidates.
logic::Program assemble_program(const std::vector<logic::ProbFact>& entity_facts,
                                const std::vector<logic::ProbFact>& relation_facts,
                                const std::vector<logic::ProbFact>& attribute_facts,
                                const logic::Rule& rule, const std::string& query_comment);

/// The assembled surface text, sections in declaration order with their
/// schema comment headers.
std::string assemble_program_text(const std::vector<logic::ProbFact>& entity_facts,
                                  const std::vector<logic::ProbFact>& relation_facts,
                                  const std::vector<logic::ProbFact>& attribute_facts,
                                  const logic::Rule& rule, const std::string& query_comment);

}  // namespace grounder::logicgen
