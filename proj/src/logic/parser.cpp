#include "grounder/logic/parser.hpp"

#include <cctype>
#include <charconv>
#include <optional>

namespace grounder::logic {
namespace {

enum class TokKind {
    Number,     // integer or real; has_dot distinguishes
    Ident,      // lowercase-initial identifier
    Variable,   // uppercase or '_' initial
    String,
    ColonColon,
    ColonDash,
    Period,
    Comma,
    LParen,
    RParen,
    CmpLt,
    CmpLe,
    CmpGt,
    CmpGe,
    CmpEq,
    CmpNe,
    End,
};

struct Token {
    TokKind kind = TokKind::End;
    std::string text;
    std::int64_t int_value = 0;
    double real_value = 0.0;
    bool has_dot = false;
    bool negative = false;
    int line = 1;
    int column = 1;
};

class Lexer {
  public:
    explicit Lexer(std::string_view src) : src_(src) {}

    Token next() {
        skip_ws_and_comments();
        Token t;
        t.line = line_;
        t.column = column_;
        if (eof()) {
            t.kind = TokKind::End;
            return t;
        }
        const char c = peek();
        if (c == '\\' && peek(1) == '+') {
            fail(ParseErrorKind::UnsupportedConstruct, "unsupported construct: \\+");
        }
        if (c == ';') fail(ParseErrorKind::UnsupportedConstruct, "unsupported construct: ;");
        if (c == '!' && peek(1) != '=') {
            fail(ParseErrorKind::UnsupportedConstruct, "unsupported construct: !");
        }
        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '-' && std::isdigit(static_cast<unsigned char>(peek(1))))) {
            return lex_number(t);
        }
        if (c == '"') return lex_string(t);
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return lex_name(t);
        switch (c) {
            case ':':
                if (peek(1) == ':') { advance(2); t.kind = TokKind::ColonColon; return t; }
                if (peek(1) == '-') { advance(2); t.kind = TokKind::ColonDash; return t; }
                fail(ParseErrorKind::Syntax, "unexpected ':'");
            case '.': advance(1); t.kind = TokKind::Period; return t;
            case ',': advance(1); t.kind = TokKind::Comma; return t;
            case '(': advance(1); t.kind = TokKind::LParen; return t;
            case ')': advance(1); t.kind = TokKind::RParen; return t;
            case '<':
                if (peek(1) == '=') { advance(2); t.kind = TokKind::CmpLe; return t; }
                advance(1); t.kind = TokKind::CmpLt; return t;
            case '>':
                if (peek(1) == '=') { advance(2); t.kind = TokKind::CmpGe; return t; }
                advance(1); t.kind = TokKind::CmpGt; return t;
            case '=':
                if (peek(1) == '=') { advance(2); t.kind = TokKind::CmpEq; return t; }
                fail(ParseErrorKind::Syntax, "unexpected '='; comparison is '=='");
            case '!':
                if (peek(1) == '=') { advance(2); t.kind = TokKind::CmpNe; return t; }
                break;
            default: break;
        }
        fail(ParseErrorKind::Syntax, std::string("unexpected character '") + c + "'");
    }

    [[noreturn]] void fail(ParseErrorKind kind, const std::string& msg) const {
        throw ParseError(kind, msg, line_, column_);
    }

  private:
    bool eof() const { return pos_ >= src_.size(); }
    char peek(std::size_t off = 0) const {
        return pos_ + off < src_.size() ? src_[pos_ + off] : '\0';
    }
    void advance(std::size_t n) {
        for (std::size_t i = 0; i < n && pos_ < src_.size(); ++i, ++pos_) {
            if (src_[pos_] == '\n') { ++line_; column_ = 1; } else { ++column_; }
        }
    }
    void skip_ws_and_comments() {
        for (;;) {
            while (!eof() && std::isspace(static_cast<unsigned char>(peek()))) advance(1);
            if (!eof() && peek() == '%') {
                while (!eof() && peek() != '\n') advance(1);
                continue;
            }
            break;
        }
    }
    Token lex_number(Token t) {
        std::size_t start = pos_;
        if (peek() == '-') { t.negative = true; advance(1); }
        while (std::isdigit(static_cast<unsigned char>(peek()))) advance(1);
        // A '.' followed by a digit continues the number; otherwise it is the
        // clause terminator.
        if (peek() == '.' && std::isdigit(static_cast<unsigned char>(peek(1)))) {
            t.has_dot = true;
            advance(1);
            while (std::isdigit(static_cast<unsigned char>(peek()))) advance(1);
        }
        t.kind = TokKind::Number;
        t.text = std::string(src_.substr(start, pos_ - start));
        if (t.has_dot) {
            t.real_value = std::stod(t.text);
        } else {
            auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(),
                                           t.int_value);
            if (ec != std::errc{} || p != t.text.data() + t.text.size()) {
                fail(ParseErrorKind::Syntax, "integer out of 64-bit range: " + t.text);
            }
        }
        return t;
    }
    Token lex_string(Token t) {
        advance(1);
        std::string s;
        while (!eof() && peek() != '"') {
            if (peek() == '\n') fail(ParseErrorKind::Syntax, "unterminated string");
            s += peek();
            advance(1);
        }
        if (eof()) fail(ParseErrorKind::Syntax, "unterminated string");
        advance(1);
        t.kind = TokKind::String;
        t.text = std::move(s);
        return t;
    }
    Token lex_name(Token t) {
        std::size_t start = pos_;
        while (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_') advance(1);
        t.text = std::string(src_.substr(start, pos_ - start));
        const char first = t.text[0];
        t.kind = (std::isupper(static_cast<unsigned char>(first)) || first == '_')
                     ? TokKind::Variable
                     : TokKind::Ident;
        return t;
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    int line_ = 1;
    int column_ = 1;
};

class Parser {
  public:
    explicit Parser(std::string_view src) : lexer_(src) { shift(); }

    Program parse() {
        Program program;
        while (cur_.kind != TokKind::End) {
            parse_clause(program);
        }
        return program;
    }

  private:
    void shift() {
        cur_ = peeked_ ? *peeked_ : lexer_.next();
        peeked_.reset();
    }
    const Token& lookahead() {
        if (!peeked_) peeked_ = lexer_.next();
        return *peeked_;
    }
    [[noreturn]] void fail(ParseErrorKind kind, const std::string& msg) const {
        throw ParseError(kind, msg, cur_.line, cur_.column);
    }
    void expect(TokKind kind, const char* what) {
        if (cur_.kind != kind) fail(ParseErrorKind::Syntax, std::string("expected ") + what);
        shift();
    }

    void parse_clause(Program& program) {
        if (cur_.kind == TokKind::Number) {
            parse_probfact(program);
            return;
        }
        if (cur_.kind == TokKind::Ident && cur_.text == "query" &&
            lookahead().kind == TokKind::LParen) {
            shift();  // query
            shift();  // (
            Atom q = parse_atom();
            expect(TokKind::RParen, "')'");
            expect(TokKind::Period, "'.'");
            program.queries.push_back(std::move(q));
            return;
        }
        if (cur_.kind == TokKind::Ident) {
            Atom head = parse_atom();
            if (cur_.kind == TokKind::Period) {
                fail(ParseErrorKind::Syntax,
                     "non-probabilistic facts are not supported; use a probability label");
            }
            expect(TokKind::ColonDash, "':-'");
            Rule rule;
            rule.head = std::move(head);
            rule.body.push_back(parse_body_literal());
            while (cur_.kind == TokKind::Comma) {
                shift();
                rule.body.push_back(parse_body_literal());
            }
            expect(TokKind::Period, "'.'");
            program.rules.push_back(std::move(rule));
            return;
        }
        fail(ParseErrorKind::Syntax, "expected a fact, rule, or query directive");
    }

    void parse_probfact(Program& program) {
        const Token label = cur_;
        double p = label.has_dot ? label.real_value : static_cast<double>(label.int_value);
        shift();
        expect(TokKind::ColonColon, "'::'");
        if (p < 0.0 || p > 1.0) {
            throw ParseError(ParseErrorKind::ProbabilityRange,
                             "fact probability outside [0,1]: " + label.text, label.line,
                             label.column);
        }
        ProbFact fact;
        fact.probability = p;
        fact.atom = parse_atom();
        if (!fact.atom.is_ground()) {
            fail(ParseErrorKind::Syntax, "probabilistic fact must be ground");
        }
        expect(TokKind::Period, "'.'");
        program.facts.push_back(std::move(fact));
    }

    BodyLiteral parse_body_literal() {
        // Atom only when an identifier is directly applied to '('; a bare
        // identifier or any other term begins a comparison, except a bare
        // zero-arity atom which is only distinguishable by the following
        // token.
        if (cur_.kind == TokKind::Ident) {
            if (cur_.text == "is") fail(ParseErrorKind::UnsupportedConstruct,
                                        "unsupported construct: is");
            if (lookahead().kind == TokKind::LParen) return parse_atom();
            // Zero-arity atom vs. comparison on a symbol constant.
            const TokKind la = lookahead().kind;
            if (la == TokKind::Comma || la == TokKind::Period) return parse_atom();
        }
        Term lhs = parse_term();
        CmpOp op;
        switch (cur_.kind) {
            case TokKind::CmpLt: op = CmpOp::Lt; break;
            case TokKind::CmpLe: op = CmpOp::Le; break;
            case TokKind::CmpGt: op = CmpOp::Gt; break;
            case TokKind::CmpGe: op = CmpOp::Ge; break;
            case TokKind::CmpEq: op = CmpOp::Eq; break;
            case TokKind::CmpNe: op = CmpOp::Ne; break;
            case TokKind::Ident:
                if (cur_.text == "is") {
                    fail(ParseErrorKind::UnsupportedConstruct, "unsupported construct: is");
                }
                [[fallthrough]];
            default:
                fail(ParseErrorKind::Syntax, "expected a comparison operator");
        }
        shift();
        Term rhs = parse_term();
        return Comparison{std::move(lhs), op, std::move(rhs)};
    }

    Atom parse_atom() {
        if (cur_.kind != TokKind::Ident) fail(ParseErrorKind::Syntax, "expected a predicate name");
        if (cur_.text == "is") fail(ParseErrorKind::UnsupportedConstruct,
                                    "unsupported construct: is");
        Atom atom;
        atom.predicate = cur_.text;
        shift();
        if (cur_.kind != TokKind::LParen) return atom;  // zero-arity
        shift();
        atom.args.push_back(parse_term());
        while (cur_.kind == TokKind::Comma) {
            shift();
            atom.args.push_back(parse_term());
        }
        expect(TokKind::RParen, "')'");
        return atom;
    }

    Term parse_term() {
        switch (cur_.kind) {
            case TokKind::Variable: {
                Term t = Term::variable(cur_.text);
                shift();
                return t;
            }
            case TokKind::Ident: {
                if (cur_.text == "is") fail(ParseErrorKind::UnsupportedConstruct,
                                            "unsupported construct: is");
                Term t = Term::symbol(cur_.text);
                shift();
                return t;
            }
            case TokKind::String: {
                Term t = Term::string(cur_.text);
                shift();
                return t;
            }
            case TokKind::Number: {
                if (cur_.has_dot) fail(ParseErrorKind::Syntax, "real numbers only label facts");
                Term t = Term::integer(cur_.int_value);
                shift();
                return t;
            }
            default:
                fail(ParseErrorKind::Syntax, "expected a term");
        }
    }

    Lexer lexer_;
    Token cur_;
    std::optional<Token> peeked_;
};

}  // namespace

Program parse_program(std::string_view source) { return Parser(source).parse(); }

}  // namespace grounder::logic
