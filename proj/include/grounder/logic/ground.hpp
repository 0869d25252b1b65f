#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "grounder/logic/ast.hpp"

namespace grounder::logic {

enum class GroundingErrorKind { Blowup, TypeError };

struct GroundingError : std::runtime_error {
    GroundingError(GroundingErrorKind k, const std::string& msg)
        : std::runtime_error(msg), kind(k) {}
    GroundingErrorKind kind;
};

struct GroundRule {
    Atom head;
    std::vector<Atom> body;  // comparisons already evaluated and dropped

    bool operator==(const GroundRule&) const = default;
    auto operator<=>(const GroundRule&) const = default;
};

struct GroundProgram {
    std::vector<ProbFact> facts;
    std::vector<GroundRule> rules;            // only instances with derivable bodies
    std::map<Atom, std::vector<std::size_t>> fact_support;  // atom -> fact indices
    std::vector<Atom> derived;                // all derivable atoms, sorted

    bool is_derivable(const Atom& a) const;
    bool defines_predicate(const std::string& predicate) const;
};

inline constexpr std::size_t kDefaultGroundingCap = 100000;

/// Semi-naive bottom-up instantiation. Comparisons are evaluated during
/// grounding; only satisfied instances are kept. Requires validate_program
/// to have passed.
GroundProgram ground_program(const Program& p, std::size_t cap = kDefaultGroundingCap);

}  // namespace grounder::logic
