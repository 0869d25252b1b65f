#include "grounder/logic/ast.hpp"

#include <cstdio>

namespace grounder::logic {

bool Atom::is_ground() const {
    for (const Term& t : args) {
        if (t.is_variable()) return false;
    }
    return true;
}

const char* cmp_op_text(CmpOp op) {
    switch (op) {
        case CmpOp::Lt: return "<";
        case CmpOp::Le: return "<=";
        case CmpOp::Gt: return ">";
        case CmpOp::Ge: return ">=";
        case CmpOp::Eq: return "==";
        case CmpOp::Ne: return "!=";
    }
    return "?";
}

std::string to_string(const Term& t) {
    switch (t.kind) {
        case TermKind::Variable:
        case TermKind::Symbol: return t.text;
        case TermKind::String: return "\"" + t.text + "\"";
        case TermKind::Integer: return std::to_string(t.value);
    }
    return {};
}

std::string to_string(const Atom& a) {
    if (a.args.empty()) return a.predicate;
    std::string out = a.predicate + "(";
    for (std::size_t i = 0; i < a.args.size(); ++i) {
        if (i) out += ", ";
        out += to_string(a.args[i]);
    }
    out += ")";
    return out;
}

std::string to_string(const Comparison& c) {
    return to_string(c.lhs) + " " + cmp_op_text(c.op) + " " + to_string(c.rhs);
}

std::string format_probability(double p) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%.4f", p);
    return buf;
}

std::string to_string(const ProbFact& f) {
    return format_probability(f.probability) + "::" + to_string(f.atom) + ".";
}

std::string to_string(const Rule& r) {
    std::string out = to_string(r.head) + " :- ";
    for (std::size_t i = 0; i < r.body.size(); ++i) {
        if (i) out += ", ";
        if (const Atom* a = std::get_if<Atom>(&r.body[i])) {
            out += to_string(*a);
        } else {
            out += to_string(std::get<Comparison>(r.body[i]));
        }
    }
    out += ".";
    return out;
}

std::string print_program(const Program& p) {
    std::string out;
    for (const ProbFact& f : p.facts) {
        out += to_string(f);
        out += "\n";
    }
    for (const Rule& r : p.rules) {
        out += to_string(r);
        out += "\n";
    }
    for (const Atom& q : p.queries) {
        out += "query(" + to_string(q) + ").\n";
    }
    return out;
}

}  // namespace grounder::logic
