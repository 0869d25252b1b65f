#include "grounder/logic/ground.hpp"

#include <algorithm>
#include <set>

namespace grounder::logic {

bool GroundProgram::is_derivable(const Atom& a) const {
    return std::binary_search(derived.begin(), derived.end(), a);
}

bool GroundProgram::defines_predicate(const std::string& predicate) const {
    for (const auto& [atom, idx] : fact_support) {
        if (atom.predicate == predicate) return true;
    }
    for (const GroundRule& r : rules) {
        if (r.head.predicate == predicate) return true;
    }
    return false;
}

namespace {

using Bindings = std::map<std::string, Term>;

bool match_term(const Term& pattern, const Term& ground, Bindings& bindings) {
    if (!pattern.is_variable()) return pattern == ground;
    if (pattern.is_anonymous()) return true;
    auto [it, inserted] = bindings.emplace(pattern.text, ground);
    return inserted || it->second == ground;
}

bool match_atom(const Atom& pattern, const Atom& ground, Bindings& bindings) {
    if (pattern.predicate != ground.predicate || pattern.arity() != ground.arity()) {
        return false;
    }
    for (std::size_t i = 0; i < pattern.args.size(); ++i) {
        if (!match_term(pattern.args[i], ground.args[i], bindings)) return false;
    }
    return true;
}

Term substitute(const Term& t, const Bindings& bindings) {
    if (!t.is_variable() || t.is_anonymous()) return t;
    auto it = bindings.find(t.text);
    return it == bindings.end() ? t : it->second;
}

Atom substitute(const Atom& a, const Bindings& bindings) {
    Atom out;
    out.predicate = a.predicate;
    out.args.reserve(a.args.size());
    for (const Term& t : a.args) out.args.push_back(substitute(t, bindings));
    return out;
}

bool eval_comparison(const Comparison& c, const Bindings& bindings) {
    const Term lhs = substitute(c.lhs, bindings);
    const Term rhs = substitute(c.rhs, bindings);
    if (lhs.is_variable() || rhs.is_variable()) {
        throw GroundingError(GroundingErrorKind::TypeError,
                             "unbound variable in comparison " + to_string(c));
    }
    if (c.op == CmpOp::Eq || c.op == CmpOp::Ne) {
        if (lhs.kind != rhs.kind) {
            throw GroundingError(GroundingErrorKind::TypeError,
                                 "mixed-type comparison " + to_string(c));
        }
        return (c.op == CmpOp::Eq) == (lhs == rhs);
    }
    // Ordering comparisons are integer builtins only.
    if (lhs.kind != TermKind::Integer || rhs.kind != TermKind::Integer) {
        throw GroundingError(GroundingErrorKind::TypeError,
                             "ordering comparison over non-integers: " + to_string(c));
    }
    switch (c.op) {
        case CmpOp::Lt: return lhs.value < rhs.value;
        case CmpOp::Le: return lhs.value <= rhs.value;
        case CmpOp::Gt: return lhs.value > rhs.value;
        case CmpOp::Ge: return lhs.value >= rhs.value;
        default: return false;
    }
}

struct JoinState {
    const std::set<Atom>* database;
    const std::set<Atom>* delta;
    std::size_t delta_position;  // body atom index that must match the delta
    std::size_t cap;
    std::size_t* instance_count;
    std::vector<GroundRule>* out;
    std::set<GroundRule>* seen;
};

void join(const Rule& rule, const std::vector<const Atom*>& body_atoms,
          const std::vector<const Comparison*>& comparisons, std::size_t pos,
          Bindings& bindings, std::vector<Atom>& matched, JoinState& st) {
    if (pos == body_atoms.size()) {
        if (++*st.instance_count > st.cap) {
            throw GroundingError(GroundingErrorKind::Blowup,
                                 "ground instance count exceeds cap of " +
                                     std::to_string(st.cap));
        }
        for (const Comparison* c : comparisons) {
            if (!eval_comparison(*c, bindings)) return;
        }
        GroundRule gr;
        gr.head = substitute(rule.head, bindings);
        gr.body = matched;
        if (st.seen->insert(gr).second) st.out->push_back(std::move(gr));
        return;
    }
    const std::set<Atom>& source =
        (pos == st.delta_position) ? *st.delta : *st.database;
    for (const Atom& candidate : source) {
        if (candidate.predicate != body_atoms[pos]->predicate) continue;
        Bindings saved = bindings;
        if (match_atom(*body_atoms[pos], candidate, bindings)) {
            matched.push_back(candidate);
            join(rule, body_atoms, comparisons, pos + 1, bindings, matched, st);
            matched.pop_back();
        }
        bindings = std::move(saved);
    }
}

}  // namespace

GroundProgram ground_program(const Program& p, std::size_t cap) {
    GroundProgram g;
    g.facts = p.facts;
    for (std::size_t i = 0; i < p.facts.size(); ++i) {
        g.fact_support[p.facts[i].atom].push_back(i);
    }

    std::set<Atom> database;
    for (const ProbFact& f : p.facts) database.insert(f.atom);
    std::set<Atom> delta = database;

    std::set<GroundRule> seen;
    std::size_t instance_count = 0;
    bool first_round = true;

    while (!delta.empty() || first_round) {
        std::vector<GroundRule> produced;
        for (const Rule& rule : p.rules) {
            std::vector<const Atom*> body_atoms;
            std::vector<const Comparison*> comparisons;
            for (const BodyLiteral& lit : rule.body) {
                if (const Atom* a = std::get_if<Atom>(&lit)) {
                    body_atoms.push_back(a);
                } else {
                    comparisons.push_back(&std::get<Comparison>(lit));
                }
            }
            if (body_atoms.empty()) {
                // Comparison-only body: fires at most once, in the first round.
                if (first_round) {
                    JoinState st{&database, &delta, 0, cap, &instance_count, &produced, &seen};
                    Bindings bindings;
                    std::vector<Atom> matched;
                    join(rule, body_atoms, comparisons, 0, bindings, matched, st);
                }
                continue;
            }
            // Semi-naive: require at least one body atom to match the delta.
            for (std::size_t dp = 0; dp < body_atoms.size(); ++dp) {
                JoinState st{&database, &delta, dp, cap, &instance_count, &produced, &seen};
                Bindings bindings;
                std::vector<Atom> matched;
                join(rule, body_atoms, comparisons, 0, bindings, matched, st);
            }
        }
        first_round = false;
        std::set<Atom> next_delta;
        for (GroundRule& gr : produced) {
            if (!database.contains(gr.head)) next_delta.insert(gr.head);
            g.rules.push_back(std::move(gr));
        }
        database.insert(next_delta.begin(), next_delta.end());
        delta = std::move(next_delta);
    }

    g.derived.assign(database.begin(), database.end());
    return g;
}

}  // namespace grounder::logic
