#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace grounder::logic {

enum class TermKind { Variable, Symbol, String, Integer };

/// A logic term. Variables start with an uppercase letter or '_'; the bare
/// anonymous variable "_" never unifies across occurrences.
struct Term {
    TermKind kind = TermKind::Symbol;
    std::string text;        // variable name, symbol name, or string payload
    std::int64_t value = 0;  // integer payload

    static Term variable(std::string name) { return {TermKind::Variable, std::move(name), 0}; }
    static Term symbol(std::string name) { return {TermKind::Symbol, std::move(name), 0}; }
    static Term string(std::string s) { return {TermKind::String, std::move(s), 0}; }
    static Term integer(std::int64_t v) { return {TermKind::Integer, {}, v}; }

    bool is_variable() const { return kind == TermKind::Variable; }
    bool is_anonymous() const { return kind == TermKind::Variable && text == "_"; }
    bool is_ground() const { return kind != TermKind::Variable; }

    bool operator==(const Term&) const = default;
    auto operator<=>(const Term&) const = default;
};

struct Atom {
    std::string predicate;
    std::vector<Term> args;

    std::size_t arity() const { return args.size(); }
    bool is_ground() const;

    bool operator==(const Atom&) const = default;
    auto operator<=>(const Atom&) const = default;
};

enum class CmpOp { Lt, Le, Gt, Ge, Eq, Ne };

struct Comparison {
    Term lhs;
    CmpOp op = CmpOp::Eq;
    Term rhs;

    bool operator==(const Comparison&) const = default;
};

using BodyLiteral = std::variant<Atom, Comparison>;

/// Independent Bernoulli fact under distribution semantics.
struct ProbFact {
    double probability = 0.0;
    Atom atom;  // ground

    bool operator==(const ProbFact&) const = default;
};

struct Rule {
    Atom head;
    std::vector<BodyLiteral> body;

    bool operator==(const Rule&) const = default;
};

struct Program {
    std::vector<ProbFact> facts;
    std::vector<Rule> rules;
    std::vector<Atom> queries;

    bool operator==(const Program&) const = default;
};

const char* cmp_op_text(CmpOp op);

/// Probability label with exactly 4 decimal places.
std::string format_probability(double p);

std::string to_string(const Term& t);
std::string to_string(const Atom& a);
std::string to_string(const Comparison& c);
std::string to_string(const ProbFact& f);
std::string to_string(const Rule& r);

/// Canonical surface form; parse(print(p)) == p.
std::string print_program(const Program& p);

}  // namespace grounder::logic
