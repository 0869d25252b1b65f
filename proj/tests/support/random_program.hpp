#pragma once

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "grounder/logic/ast.hpp"
#include "grounder/logic/validate.hpp"

namespace grounder::testing {

/// Random programs for the oracle-equivalence and round-trip suites:
/// at most 12 facts, 6 rules, 3 body atoms, probabilities at 4 decimals.
/// Fact predicates f0..f2 are extensional; rule heads h0..h5 intensional.
/// Rules may chain through earlier heads but never recurse.
inline logic::Program random_program(std::mt19937& rng) {
    using namespace logic;
    std::uniform_int_distribution<int> coin(0, 1);
    auto pick = [&](int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng); };

    const std::vector<std::string> constants = {"c0", "c1", "c2", "c3"};
    const std::vector<std::string> fact_preds = {"f0", "f1", "f2"};
    std::vector<int> fact_arity = {1 + pick(2), 1 + pick(2), 1 + pick(2)};

    Program p;
    const int n_facts = 1 + pick(12);
    for (int i = 0; i < n_facts && static_cast<int>(p.facts.size()) < 12; ++i) {
        const int f = pick(3);
        Atom a{fact_preds[f], {}};
        for (int k = 0; k < fact_arity[f]; ++k) {
            a.args.push_back(Term::symbol(constants[pick(4)]));
        }
        const bool dup = std::any_of(p.facts.begin(), p.facts.end(),
                                     [&](const ProbFact& pf) { return pf.atom == a; });
        if (dup) continue;
        const double prob = pick(10000) / 10000.0;
        p.facts.push_back({prob, a});
    }

    struct Defined {
        std::string pred;
        int arity;
    };
    std::vector<Defined> body_pool;
    for (int f = 0; f < 3; ++f) body_pool.push_back({fact_preds[f], fact_arity[f]});

    const int n_rules = 1 + pick(6);
    std::vector<Defined> heads;
    for (int r = 0; r < n_rules; ++r) {
        Rule rule;
        const int n_body = 1 + pick(3);
        std::vector<std::string> body_vars;
        for (int b = 0; b < n_body; ++b) {
            const Defined& d = body_pool[pick(static_cast<int>(body_pool.size()))];
            Atom a{d.pred, {}};
            for (int k = 0; k < d.arity; ++k) {
                if (coin(rng)) {
                    a.args.push_back(Term::symbol(constants[pick(4)]));
                } else {
                    std::string v = coin(rng) ? "X" : "Y";
                    a.args.push_back(Term::variable(v));
                    body_vars.push_back(v);
                }
            }
            rule.body.push_back(a);
        }
        // Reuse an earlier head predicate (disjunctive definitions) when it
        // does not occur in this body; recursion stays impossible.
        std::string head_pred = "h" + std::to_string(r);
        if (!heads.empty() && coin(rng)) {
            const std::string reuse = heads[pick(static_cast<int>(heads.size()))].pred;
            const bool in_body = std::any_of(
                rule.body.begin(), rule.body.end(), [&](const BodyLiteral& lit) {
                    return std::get<Atom>(lit).predicate == reuse;
                });
            if (!in_body) head_pred = reuse;
        }
        // Safe head: either a body variable or ground.
        if (!body_vars.empty() && coin(rng)) {
            rule.head = {head_pred, {Term::variable(body_vars[pick(
                                        static_cast<int>(body_vars.size()))])}};
        } else {
            rule.head = {head_pred, {Term::symbol(constants[pick(4)])}};
        }
        p.rules.push_back(rule);
        if (std::none_of(heads.begin(), heads.end(),
                         [&](const Defined& d) { return d.pred == head_pred; })) {
            heads.push_back({head_pred, 1});
            body_pool.push_back({head_pred, 1});
        }
    }

    const int n_queries = 1 + pick(2);
    for (int q = 0; q < n_queries; ++q) {
        const Defined& d = heads[pick(static_cast<int>(heads.size()))];
        p.queries.push_back({d.pred, {Term::variable("Q")}});
    }
    return p;
}

/// Draws until the generated program passes validation (duplicate heads with
/// different bindings are fine; the generator never emits unsafe shapes, but
/// revalidating keeps the suites honest).
inline logic::Program random_valid_program(std::mt19937& rng) {
    for (;;) {
        logic::Program p = random_program(rng);
        if (logic::validate_program(p).empty()) return p;
    }
}

}  // namespace grounder::testing
