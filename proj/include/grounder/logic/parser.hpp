#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include "grounder/logic/ast.hpp"

namespace grounder::logic {

enum class ParseErrorKind { Syntax, UnsupportedConstruct, ProbabilityRange };

struct ParseError : std::runtime_error {
    ParseError(ParseErrorKind k, std::string msg, int line_, int column_)
        : std::runtime_error(msg + " (line " + std::to_string(line_) + ", column " +
                             std::to_string(column_) + ")"),
          kind(k),
          line(line_),
          column(column_) {}

    ParseErrorKind kind;
    int line;
    int column;
};

/// Parses the line-oriented surface grammar. '%' starts a line comment.
/// Negation (\+), disjunction (;), cut (!) and `is` arithmetic are rejected
/// with UnsupportedConstruct naming the construct.
Program parse_program(std::string_view source);

}  // namespace grounder::logic
