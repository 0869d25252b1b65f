#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "grounder/logic/ground.hpp"

namespace grounder::logic {

struct InferenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct UnknownPredicate : InferenceError {
    explicit UnknownPredicate(const std::string& predicate)
        : InferenceError("unknown predicate: " + predicate) {}
};
struct OracleTooLarge : InferenceError {
    using InferenceError::InferenceError;
};
struct ProofLimit : InferenceError {
    using InferenceError::InferenceError;
};

/// A proof is a sorted set of fact indices; the DNF is the disjunction of
/// the conjunctions of those facts.
using Proof = std::vector<std::size_t>;
using ProofDnf = std::vector<Proof>;

inline constexpr std::size_t kMaxProofsPerAtom = 8192;

/// Minimal proofs of a ground query atom. Empty DNF when underivable.
ProofDnf prove(const GroundProgram& g, const Atom& query);

/// Exact probability of the DNF under independent Bernoulli facts, by
/// recursive Shannon expansion memoized on the remaining DNF (decision
/// diagram compilation). Branch order: descending proof-membership count.
double probability_of(const ProofDnf& dnf, const std::vector<ProbFact>& facts);

/// Exhaustive possible-world enumeration over the referenced facts.
/// Independent of probability_of; at most 24 distinct facts.
double oracle_probability(const ProofDnf& dnf, const std::vector<ProbFact>& facts);

struct QueryAnswer {
    std::map<std::string, Term> binding;
    double probability = 0.0;

    bool operator==(const QueryAnswer&) const = default;
};

struct AnswerOptions {
    double candidate_floor = 1e-6;
    // Detector confidence per entity ID, used as the first tie-break when a
    // query binding is an entity ID.
    std::map<std::string, double> entity_confidence;
};

/// All ground instantiations of each query directive with their exact
/// probabilities, sorted descending; ties broken by entity confidence then
/// lexicographic binding order. Requires validate_program to have passed.
std::vector<QueryAnswer> answer_query(const Program& p, const AnswerOptions& options = {},
                                      std::size_t grounding_cap = kDefaultGroundingCap);

}  // namespace grounder::logic
