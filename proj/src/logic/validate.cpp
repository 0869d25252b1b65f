#include "grounder/logic/validate.hpp"

#include <map>
#include <set>

namespace grounder::logic {

const char* violation_kind_text(ViolationKind kind) {
    switch (kind) {
        case ViolationKind::UnsafeRule: return "UnsafeRule";
        case ViolationKind::ArityMismatch: return "ArityMismatch";
        case ViolationKind::MixedPredicate: return "MixedPredicate";
        case ViolationKind::MissingQuery: return "MissingQuery";
    }
    return "?";
}

namespace {

void collect_variables(const Term& t, std::set<std::string>& out) {
    // Anonymous variables never unify across occurrences, so they carry no
    // binding obligations.
    if (t.is_variable() && !t.is_anonymous()) out.insert(t.text);
}

void check_arity(const std::string& predicate, std::size_t arity,
                 std::map<std::string, std::size_t>& seen, std::vector<Violation>& out) {
    auto [it, inserted] = seen.emplace(predicate, arity);
    if (!inserted && it->second != arity) {
        out.push_back({ViolationKind::ArityMismatch,
                       "predicate " + predicate + " used with arity " + std::to_string(arity) +
                           " and " + std::to_string(it->second)});
    }
}

}  // namespace

std::vector<Violation> validate_program(const Program& p) {
    std::vector<Violation> violations;
    std::map<std::string, std::size_t> arities;
    std::set<std::string> fact_preds;
    std::set<std::string> rule_preds;

    for (const ProbFact& f : p.facts) {
        fact_preds.insert(f.atom.predicate);
        check_arity(f.atom.predicate, f.atom.arity(), arities, violations);
    }
    for (const Rule& r : p.rules) {
        rule_preds.insert(r.head.predicate);
        check_arity(r.head.predicate, r.head.arity(), arities, violations);

        std::set<std::string> bound;
        std::set<std::string> needed;
        for (const Term& t : r.head.args) collect_variables(t, needed);
        for (const BodyLiteral& lit : r.body) {
            if (const Atom* a = std::get_if<Atom>(&lit)) {
                check_arity(a->predicate, a->arity(), arities, violations);
                for (const Term& t : a->args) collect_variables(t, bound);
            } else {
                const Comparison& c = std::get<Comparison>(lit);
                collect_variables(c.lhs, needed);
                collect_variables(c.rhs, needed);
            }
        }
        for (const std::string& v : needed) {
            if (!bound.contains(v)) {
                violations.push_back({ViolationKind::UnsafeRule,
                                      "variable " + v + " in rule " + to_string(r.head) +
                                          " is not bound by a positive body atom"});
            }
        }
    }
    for (const Atom& q : p.queries) {
        check_arity(q.predicate, q.arity(), arities, violations);
    }

    for (const std::string& pred : rule_preds) {
        if (fact_preds.contains(pred)) {
            violations.push_back({ViolationKind::MixedPredicate,
                                  "predicate " + pred + " appears as both a fact and a rule head"});
        }
    }
    if (p.queries.empty()) {
        violations.push_back({ViolationKind::MissingQuery, "no query directive"});
    }
    return violations;
}

}  // namespace grounder::logic
