#pragma once

#include <string>
#include <vector>

#include "grounder/logic/ast.hpp"

namespace grounder::logic {

enum class ViolationKind {
    UnsafeRule,       // head or comparison variable not bound by a positive body atom
    ArityMismatch,    // predicate used with inconsistent arity
    MixedPredicate,   // predicate is both a fact head and a rule head
    MissingQuery,     // no query directive
};

struct Violation {
    ViolationKind kind;
    std::string detail;

    bool operator==(const Violation&) const = default;
};

const char* violation_kind_text(ViolationKind kind);

/// Empty result iff the program satisfies safety, arity consistency,
/// extensional/intensional separation, and has at least one query.
std::vector<Violation> validate_program(const Program& p);

}  // namespace grounder::logic
