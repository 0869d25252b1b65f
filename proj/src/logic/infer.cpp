#include "grounder/logic/infer.hpp"

#include <algorithm>
#include <set>

#include "grounder/logic/validate.hpp"

namespace grounder::logic {
namespace {

Proof normalized(Proof p) {
    std::sort(p.begin(), p.end());
    p.erase(std::unique(p.begin(), p.end()), p.end());
    return p;
}

/// Remove duplicate proofs and proofs subsumed by a subset proof.
ProofDnf minimized(ProofDnf dnf) {
    for (Proof& p : dnf) p = normalized(std::move(p));
    std::sort(dnf.begin(), dnf.end(), [](const Proof& a, const Proof& b) {
        if (a.size() != b.size()) return a.size() < b.size();
        return a < b;
    });
    dnf.erase(std::unique(dnf.begin(), dnf.end()), dnf.end());
    ProofDnf kept;
    for (const Proof& p : dnf) {
        bool subsumed = false;
        for (const Proof& q : kept) {
            if (std::includes(p.begin(), p.end(), q.begin(), q.end())) {
                subsumed = true;
                break;
            }
        }
        if (!subsumed) kept.push_back(p);
    }
    std::sort(kept.begin(), kept.end());
    return kept;
}

}  // namespace

ProofDnf prove(const GroundProgram& g, const Atom& query) {
    if (!g.defines_predicate(query.predicate)) throw UnknownPredicate(query.predicate);

    std::map<Atom, ProofDnf> proofs;
    for (const auto& [atom, indices] : g.fact_support) {
        ProofDnf d;
        for (std::size_t i : indices) d.push_back({i});
        proofs[atom] = minimized(std::move(d));
    }

    bool changed = true;
    while (changed) {
        changed = false;
        for (const GroundRule& rule : g.rules) {
            // Cartesian product of one proof per body atom.
            std::vector<const ProofDnf*> parts;
            bool derivable = true;
            for (const Atom& a : rule.body) {
                auto it = proofs.find(a);
                if (it == proofs.end() || it->second.empty()) {
                    derivable = false;
                    break;
                }
                parts.push_back(&it->second);
            }
            if (!derivable) continue;

            ProofDnf combos{{}};
            for (const ProofDnf* part : parts) {
                ProofDnf next;
                for (const Proof& base : combos) {
                    for (const Proof& extra : *part) {
                        Proof merged = base;
                        merged.insert(merged.end(), extra.begin(), extra.end());
                        next.push_back(normalized(std::move(merged)));
                        if (next.size() > kMaxProofsPerAtom) {
                            throw ProofLimit("proof count exceeds limit for " +
                                             to_string(rule.head));
                        }
                    }
                }
                combos = std::move(next);
            }

            ProofDnf& head_proofs = proofs[rule.head];
            ProofDnf merged = head_proofs;
            merged.insert(merged.end(), combos.begin(), combos.end());
            merged = minimized(std::move(merged));
            if (merged.size() > kMaxProofsPerAtom) {
                throw ProofLimit("proof count exceeds limit for " + to_string(rule.head));
            }
            if (merged != head_proofs) {
                head_proofs = std::move(merged);
                changed = true;
            }
        }
    }

    auto it = proofs.find(query);
    return it == proofs.end() ? ProofDnf{} : it->second;
}

namespace {

double shannon(const ProofDnf& dnf, const std::vector<double>& probs,
               const std::vector<std::size_t>& order, std::size_t order_pos,
               std::map<ProofDnf, double>& memo) {
    if (dnf.empty()) return 0.0;
    for (const Proof& p : dnf) {
        if (p.empty()) return 1.0;
    }
    if (auto it = memo.find(dnf); it != memo.end()) return it->second;

    // First remaining variable in the fixed order that appears in the DNF.
    std::size_t var = 0;
    std::size_t next_pos = order_pos;
    bool found = false;
    for (; next_pos < order.size(); ++next_pos) {
        const std::size_t candidate = order[next_pos];
        for (const Proof& p : dnf) {
            if (std::binary_search(p.begin(), p.end(), candidate)) {
                var = candidate;
                found = true;
                break;
            }
        }
        if (found) break;
    }
    if (!found) return 0.0;  // unreachable for a normalized non-trivial DNF

    ProofDnf when_true;
    ProofDnf when_false;
    for (const Proof& p : dnf) {
        if (std::binary_search(p.begin(), p.end(), var)) {
            Proof reduced;
            reduced.reserve(p.size() - 1);
            for (std::size_t i : p) {
                if (i != var) reduced.push_back(i);
            }
            when_true.push_back(std::move(reduced));
        } else {
            when_true.push_back(p);
            when_false.push_back(p);
        }
    }
    when_true = minimized(std::move(when_true));
    when_false = minimized(std::move(when_false));

    const double pv = probs[var];
    const double result = pv * shannon(when_true, probs, order, next_pos + 1, memo) +
                          (1.0 - pv) * shannon(when_false, probs, order, next_pos + 1, memo);
    memo.emplace(dnf, result);
    return result;
}

}  // namespace

double probability_of(const ProofDnf& dnf, const std::vector<ProbFact>& facts) {
    ProofDnf d = minimized(dnf);
    if (d.empty()) return 0.0;

    std::vector<double> probs(facts.size(), 0.0);
    for (std::size_t i = 0; i < facts.size(); ++i) probs[i] = facts[i].probability;

    std::map<std::size_t, std::size_t> membership;
    for (const Proof& p : d) {
        for (std::size_t i : p) ++membership[i];
    }
    std::vector<std::size_t> order;
    order.reserve(membership.size());
    for (const auto& [idx, count] : membership) order.push_back(idx);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return membership[a] > membership[b];
    });

    std::map<ProofDnf, double> memo;
    return shannon(d, probs, order, 0, memo);
}

double oracle_probability(const ProofDnf& dnf, const std::vector<ProbFact>& facts) {
    std::set<std::size_t> referenced;
    for (const Proof& p : dnf) referenced.insert(p.begin(), p.end());
    if (referenced.size() > 24) {
        throw OracleTooLarge("oracle limited to 24 distinct facts, got " +
                             std::to_string(referenced.size()));
    }
    const std::vector<std::size_t> vars(referenced.begin(), referenced.end());
    std::map<std::size_t, std::size_t> position;
    for (std::size_t i = 0; i < vars.size(); ++i) position[vars[i]] = i;

    double total = 0.0;
    const std::uint64_t worlds = 1ULL << vars.size();
    for (std::uint64_t world = 0; world < worlds; ++world) {
        double weight = 1.0;
        for (std::size_t i = 0; i < vars.size(); ++i) {
            const double p = facts[vars[i]].probability;
            weight *= (world >> i & 1) ? p : (1.0 - p);
        }
        if (weight == 0.0) continue;
        bool entailed = false;
        for (const Proof& proof : dnf) {
            bool all = true;
            for (std::size_t idx : proof) {
                if (!(world >> position[idx] & 1)) {
                    all = false;
                    break;
                }
            }
            if (all) {
                entailed = true;
                break;
            }
        }
        if (entailed) total += weight;
    }
    return total;
}

namespace {

bool match_pattern(const Atom& pattern, const Atom& ground,
                   std::map<std::string, Term>& binding) {
    if (pattern.predicate != ground.predicate || pattern.arity() != ground.arity()) {
        return false;
    }
    for (std::size_t i = 0; i < pattern.args.size(); ++i) {
        const Term& pt = pattern.args[i];
        if (!pt.is_variable()) {
            if (pt != ground.args[i]) return false;
            continue;
        }
        if (pt.is_anonymous()) continue;
        auto [it, inserted] = binding.emplace(pt.text, ground.args[i]);
        if (!inserted && it->second != ground.args[i]) return false;
    }
    return true;
}

std::string binding_key(const std::map<std::string, Term>& binding) {
    std::string out;
    for (const auto& [name, term] : binding) {
        out += name;
        out += "=";
        out += to_string(term);
        out += ";";
    }
    return out;
}

}  // namespace

std::vector<QueryAnswer> answer_query(const Program& p, const AnswerOptions& options,
                                      std::size_t grounding_cap) {
    if (!validate_program(p).empty()) {
        throw InferenceError("answer_query requires a validated program");
    }
    const GroundProgram g = ground_program(p, grounding_cap);

    std::vector<QueryAnswer> answers;
    std::set<std::string> seen_bindings;
    for (const Atom& pattern : p.queries) {
        for (const Atom& candidate : g.derived) {
            std::map<std::string, Term> binding;
            if (!match_pattern(pattern, candidate, binding)) continue;
            const std::string key = to_string(pattern) + "|" + binding_key(binding);
            if (!seen_bindings.insert(key).second) continue;
            const ProofDnf dnf = prove(g, candidate);
            const double prob = probability_of(dnf, g.facts);
            if (prob < options.candidate_floor) continue;
            answers.push_back({std::move(binding), prob});
        }
    }

    auto confidence_of = [&](const QueryAnswer& a) {
        double best = -1.0;
        for (const auto& [name, term] : a.binding) {
            if (term.kind != TermKind::String) continue;
            auto it = options.entity_confidence.find(term.text);
            if (it != options.entity_confidence.end()) best = std::max(best, it->second);
        }
        return best;
    };

    std::stable_sort(answers.begin(), answers.end(),
                     [&](const QueryAnswer& a, const QueryAnswer& b) {
                         if (a.probability != b.probability) {
                             return a.probability > b.probability;
                         }
                         const double ca = confidence_of(a);
                         const double cb = confidence_of(b);
                         if (ca != cb) return ca > cb;
                         return binding_key(a.binding) < binding_key(b.binding);
                     });
    return answers;
}

}  // namespace grounder::logic
