#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "contrakt/error.hpp"

namespace contrakt {

// A small expression language for vector fields, guards and switching
// inputs. Variables are the declared state names plus the reserved name
// "t"; all discontinuity lives in guards and signals, so the language
// itself has no conditional. `abs`, `min` and `max` are the only kinked
// functions; `sign` and `step` exist so that their derivatives stay
// expressible (sign(0) = 0, step(0) = 1).

enum class ExprKind { Constant, Variable, Unary, Binary, Call };

enum class Func { Sin, Cos, Exp, Log, Abs, Sign, Step, Min, Max };

struct ExprNode;
using ExprPtr = std::shared_ptr<const ExprNode>;

struct ExprNode {
    ExprKind kind;
    double value = 0.0;          // Constant
    std::string name;            // Variable name or Call function name
    int slot = -1;               // Variable: index into the evaluation env
    char op = 0;                 // Binary: one of + - * / ^ ; Unary: -
    Func fn = Func::Sin;         // Call
    std::vector<ExprPtr> args;   // Unary/Binary/Call children
};

namespace exprdet {

struct FuncInfo {
    const char* name;
    Func fn;
    int arity;
};

inline constexpr FuncInfo kFunctions[] = {
    {"sin", Func::Sin, 1},   {"cos", Func::Cos, 1},  {"exp", Func::Exp, 1},
    {"log", Func::Log, 1},   {"abs", Func::Abs, 1},  {"sign", Func::Sign, 1},
    {"step", Func::Step, 1}, {"min", Func::Min, 2},  {"max", Func::Max, 2},
};

inline const FuncInfo* find_function(std::string_view name) {
    for (const auto& f : kFunctions)
        if (name == f.name) return &f;
    return nullptr;
}

}  // namespace exprdet

inline bool is_function_name(std::string_view name) {
    return exprdet::find_function(name) != nullptr;
}

// --- node builders (used by the parser and the differentiator; the
// --- arithmetic builders fold constants and drop identity operands)

inline ExprPtr make_constant(double v) {
    auto n = std::make_shared<ExprNode>();
    n->kind = ExprKind::Constant;
    n->value = v;
    return n;
}

inline ExprPtr make_variable(std::string name, int slot) {
    auto n = std::make_shared<ExprNode>();
    n->kind = ExprKind::Variable;
    n->name = std::move(name);
    n->slot = slot;
    return n;
}

inline ExprPtr make_call(Func fn, std::vector<ExprPtr> args) {
    auto n = std::make_shared<ExprNode>();
    n->kind = ExprKind::Call;
    n->fn = fn;
    for (const auto& f : exprdet::kFunctions)
        if (f.fn == fn) n->name = f.name;
    n->args = std::move(args);
    return n;
}

inline bool is_constant(const ExprPtr& e, double v) {
    return e->kind == ExprKind::Constant && e->value == v;
}

inline ExprPtr make_unary_minus(ExprPtr child) {
    if (child->kind == ExprKind::Constant) return make_constant(-child->value);
    if (child->kind == ExprKind::Unary) return child->args[0];
    auto n = std::make_shared<ExprNode>();
    n->kind = ExprKind::Unary;
    n->op = '-';
    n->args = {std::move(child)};
    return n;
}

inline ExprPtr make_binary_raw(char op, ExprPtr lhs, ExprPtr rhs) {
    auto n = std::make_shared<ExprNode>();
    n->kind = ExprKind::Binary;
    n->op = op;
    n->args = {std::move(lhs), std::move(rhs)};
    return n;
}

inline ExprPtr make_add(ExprPtr a, ExprPtr b) {
    if (is_constant(a, 0.0)) return b;
    if (is_constant(b, 0.0)) return a;
    if (a->kind == ExprKind::Constant && b->kind == ExprKind::Constant)
        return make_constant(a->value + b->value);
    return make_binary_raw('+', std::move(a), std::move(b));
}

inline ExprPtr make_sub(ExprPtr a, ExprPtr b) {
    if (is_constant(b, 0.0)) return a;
    if (a->kind == ExprKind::Constant && b->kind == ExprKind::Constant)
        return make_constant(a->value - b->value);
    if (is_constant(a, 0.0)) return make_unary_minus(std::move(b));
    return make_binary_raw('-', std::move(a), std::move(b));
}

inline ExprPtr make_mul(ExprPtr a, ExprPtr b) {
    if (is_constant(a, 0.0) || is_constant(b, 0.0)) return make_constant(0.0);
    if (is_constant(a, 1.0)) return b;
    if (is_constant(b, 1.0)) return a;
    if (a->kind == ExprKind::Constant && b->kind == ExprKind::Constant)
        return make_constant(a->value * b->value);
    return make_binary_raw('*', std::move(a), std::move(b));
}

inline ExprPtr make_div(ExprPtr a, ExprPtr b) {
    if (is_constant(a, 0.0)) return make_constant(0.0);
    if (is_constant(b, 1.0)) return a;
    if (a->kind == ExprKind::Constant && b->kind == ExprKind::Constant && b->value != 0.0)
        return make_constant(a->value / b->value);
    return make_binary_raw('/', std::move(a), std::move(b));
}

inline ExprPtr make_pow(ExprPtr a, ExprPtr b) {
    if (a->kind == ExprKind::Constant && b->kind == ExprKind::Constant)
        return make_constant(std::pow(a->value, b->value));
    if (is_constant(b, 1.0)) return a;
    return make_binary_raw('^', std::move(a), std::move(b));
}

// --- parser -----------------------------------------------------------
//
// Grammar (see docs/expression-grammar.md):
//   sum     := product (('+' | '-') product)*
//   product := power (('*' | '/') power)*
//   power   := atom ('^' atom)*                  left-associative
//   atom    := '-' atom | NUMBER | IDENT | IDENT '(' sum (',' sum)* ')'
//            | '(' sum ')'
// Unary minus binds tighter than '^', so -x^2 means (-x)^2.

namespace exprdet {

struct Token {
    enum class Type { Number, Ident, Op, End };
    Type type;
    double number = 0.0;
    std::string text;
    char op = 0;
    int line = 1;
    int column = 1;
};

class Lexer {
public:
    Lexer(std::string_view src) : src_(src) {}

    Token next() {
        skip_space();
        Token tok;
        tok.line = line_;
        tok.column = column_;
        if (pos_ >= src_.size()) {
            tok.type = Token::Type::End;
            return tok;
        }
        const char c = src_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c))) return lex_number(tok);
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return lex_ident(tok);
        switch (c) {
            case '+': case '-': case '*': case '/': case '^':
            case '(': case ')': case ',':
                tok.type = Token::Type::Op;
                tok.op = c;
                advance();
                return tok;
            default:
                throw ParseError(std::string("unexpected character '") + c + "'", line_, column_);
        }
    }

private:
    void advance() {
        if (src_[pos_] == '\n') {
            ++line_;
            column_ = 1;
        } else {
            ++column_;
        }
        ++pos_;
    }

    void skip_space() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) advance();
    }

    Token lex_number(Token tok) {
        const std::size_t start = pos_;
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) advance();
        if (pos_ < src_.size() && src_[pos_] == '.') {
            advance();
            while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) advance();
        }
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            std::size_t mark = pos_;
            advance();
            if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) advance();
            if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
                while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) advance();
            } else {
                // not an exponent after all ("2e" followed by non-digit)
                while (pos_ > mark) { --pos_; --column_; }
            }
        }
        tok.type = Token::Type::Number;
        tok.text = std::string(src_.substr(start, pos_ - start));
        tok.number = std::strtod(tok.text.c_str(), nullptr);
        return tok;
    }

    Token lex_ident(Token tok) {
        const std::size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
            advance();
        tok.type = Token::Type::Ident;
        tok.text = std::string(src_.substr(start, pos_ - start));
        return tok;
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    int line_ = 1;
    int column_ = 1;
};

class Parser {
public:
    Parser(std::string_view src, std::span<const std::string> vars,
           const std::vector<std::pair<std::string, double>>* constants)
        : lexer_(src), vars_(vars), constants_(constants) {
        consume();
    }

    ExprPtr parse() {
        ExprPtr e = parse_sum();
        if (current_.type != Token::Type::End)
            throw ParseError("trailing input after expression", current_.line, current_.column);
        return e;
    }

private:
    void consume() { current_ = lexer_.next(); }

    bool accept_op(char c) {
        if (current_.type == Token::Type::Op && current_.op == c) {
            consume();
            return true;
        }
        return false;
    }

    void expect_op(char c, const char* what) {
        if (!accept_op(c))
            throw ParseError(std::string("expected '") + c + "' " + what, current_.line,
                             current_.column);
    }

    ExprPtr parse_sum() {
        ExprPtr lhs = parse_product();
        while (current_.type == Token::Type::Op && (current_.op == '+' || current_.op == '-')) {
            const char op = current_.op;
            consume();
            lhs = make_binary_raw(op, std::move(lhs), parse_product());
        }
        return lhs;
    }

    ExprPtr parse_product() {
        ExprPtr lhs = parse_power();
        while (current_.type == Token::Type::Op && (current_.op == '*' || current_.op == '/')) {
            const char op = current_.op;
            consume();
            lhs = make_binary_raw(op, std::move(lhs), parse_power());
        }
        return lhs;
    }

    ExprPtr parse_power() {
        ExprPtr lhs = parse_atom();
        while (current_.type == Token::Type::Op && current_.op == '^') {
            consume();
            lhs = make_binary_raw('^', std::move(lhs), parse_atom());
        }
        return lhs;
    }

    ExprPtr parse_atom() {
        if (accept_op('-')) {
            ExprPtr child = parse_atom();
            if (child->kind == ExprKind::Constant) return make_constant(-child->value);
            auto n = std::make_shared<ExprNode>();
            n->kind = ExprKind::Unary;
            n->op = '-';
            n->args = {std::move(child)};
            return n;
        }
        if (current_.type == Token::Type::Number) {
            ExprPtr e = make_constant(current_.number);
            consume();
            return e;
        }
        if (current_.type == Token::Type::Ident) {
            const Token tok = current_;
            consume();
            if (accept_op('(')) return parse_call(tok);
            return resolve_identifier(tok);
        }
        if (accept_op('(')) {
            ExprPtr e = parse_sum();
            expect_op(')', "to close parenthesis");
            return e;
        }
        throw ParseError("expected an expression", current_.line, current_.column);
    }

    ExprPtr parse_call(const Token& name_tok) {
        const FuncInfo* info = find_function(name_tok.text);
        if (!info)
            throw ParseError("unknown function '" + name_tok.text + "'", name_tok.line,
                             name_tok.column);
        std::vector<ExprPtr> args;
        args.push_back(parse_sum());
        while (accept_op(',')) args.push_back(parse_sum());
        expect_op(')', "to close argument list");
        if (static_cast<int>(args.size()) != info->arity)
            throw ParseError("function '" + name_tok.text + "' takes " +
                                 std::to_string(info->arity) + " argument(s), got " +
                                 std::to_string(args.size()),
                             name_tok.line, name_tok.column);
        return make_call(info->fn, std::move(args));
    }

    ExprPtr resolve_identifier(const Token& tok) {
        for (std::size_t i = 0; i < vars_.size(); ++i)
            if (vars_[i] == tok.text) return make_variable(tok.text, static_cast<int>(i));
        if (constants_) {
            for (const auto& [name, value] : *constants_)
                if (name == tok.text) return make_constant(value);
        }
        if (is_function_name(tok.text))
            throw ParseError("function '" + tok.text + "' used without argument list", tok.line,
                             tok.column);
        throw ParseError("undeclared identifier '" + tok.text + "'", tok.line, tok.column);
    }

    Lexer lexer_;
    Token current_;
    std::span<const std::string> vars_;
    const std::vector<std::pair<std::string, double>>* constants_;
};

}  // namespace exprdet

/// Parse an expression against a fixed variable layout. Variables get the
/// slot matching their position in `allowed_vars`; identifiers found in
/// `constants` are folded to literals at parse time, which keeps models
/// parameter-free after loading.
inline ExprPtr parse_expr(std::string_view source, std::span<const std::string> allowed_vars,
                          const std::vector<std::pair<std::string, double>>* constants = nullptr) {
    if (source.find_first_not_of(" \t\r\n") == std::string_view::npos)
        throw ParseError("empty expression", 1, 1);
    exprdet::Parser parser(source, allowed_vars, constants);
    return parser.parse();
}

// --- evaluation --------------------------------------------------------

inline double eval(const ExprNode& e, std::span<const double> env) {
    switch (e.kind) {
        case ExprKind::Constant:
            return e.value;
        case ExprKind::Variable:
            if (e.slot < 0 || static_cast<std::size_t>(e.slot) >= env.size())
                throw Error("unbound variable '" + e.name + "'");
            return env[static_cast<std::size_t>(e.slot)];
        case ExprKind::Unary:
            return -eval(*e.args[0], env);
        case ExprKind::Binary: {
            const double a = eval(*e.args[0], env);
            const double b = eval(*e.args[1], env);
            switch (e.op) {
                case '+': return a + b;
                case '-': return a - b;
                case '*': return a * b;
                case '/': return a / b;
                case '^': return std::pow(a, b);
            }
            throw Error("unknown binary operator");
        }
        case ExprKind::Call: {
            const double a = eval(*e.args[0], env);
            switch (e.fn) {
                case Func::Sin: return std::sin(a);
                case Func::Cos: return std::cos(a);
                case Func::Exp: return std::exp(a);
                case Func::Log: return std::log(a);
                case Func::Abs: return std::abs(a);
                case Func::Sign: return a > 0.0 ? 1.0 : (a < 0.0 ? -1.0 : 0.0);
                case Func::Step: return a >= 0.0 ? 1.0 : 0.0;
                case Func::Min: return std::min(a, eval(*e.args[1], env));
                case Func::Max: return std::max(a, eval(*e.args[1], env));
            }
            throw Error("unknown function");
        }
    }
    throw Error("malformed expression node");
}

inline double eval(const ExprPtr& e, std::span<const double> env) { return eval(*e, env); }

// --- differentiation ----------------------------------------------------

/// Symbolic derivative with respect to the variable occupying `slot`.
/// Conventions at kinks: d|u| uses sign(u) with sign(0) = 0; min/max
/// differentiate through the active branch with ties resolved to the
/// first argument (step(0) = 1 encodes the tie rule).
inline ExprPtr diff(const ExprPtr& e, int slot) {
    switch (e->kind) {
        case ExprKind::Constant:
            return make_constant(0.0);
        case ExprKind::Variable:
            return make_constant(e->slot == slot ? 1.0 : 0.0);
        case ExprKind::Unary:
            return make_unary_minus(diff(e->args[0], slot));
        case ExprKind::Binary: {
            const ExprPtr& u = e->args[0];
            const ExprPtr& v = e->args[1];
            switch (e->op) {
                case '+': return make_add(diff(u, slot), diff(v, slot));
                case '-': return make_sub(diff(u, slot), diff(v, slot));
                case '*':
                    return make_add(make_mul(diff(u, slot), v), make_mul(u, diff(v, slot)));
                case '/':
                    return make_div(make_sub(make_mul(diff(u, slot), v), make_mul(u, diff(v, slot))),
                                    make_mul(v, v));
                case '^': {
                    if (v->kind == ExprKind::Constant) {
                        // d u^c = c u^(c-1) u'
                        return make_mul(
                            make_mul(make_constant(v->value),
                                     make_pow(u, make_constant(v->value - 1.0))),
                            diff(u, slot));
                    }
                    // d u^v = u^v (v' log u + v u' / u)
                    return make_mul(make_pow(u, v),
                                    make_add(make_mul(diff(v, slot),
                                                      make_call(Func::Log, {u})),
                                             make_div(make_mul(v, diff(u, slot)), u)));
                }
            }
            throw Error("unknown binary operator");
        }
        case ExprKind::Call: {
            const ExprPtr& u = e->args[0];
            ExprPtr du = diff(u, slot);
            switch (e->fn) {
                case Func::Sin: return make_mul(make_call(Func::Cos, {u}), std::move(du));
                case Func::Cos:
                    return make_unary_minus(make_mul(make_call(Func::Sin, {u}), std::move(du)));
                case Func::Exp: return make_mul(make_call(Func::Exp, {u}), std::move(du));
                case Func::Log: return make_div(std::move(du), u);
                case Func::Abs: return make_mul(make_call(Func::Sign, {u}), std::move(du));
                case Func::Sign: return make_constant(0.0);
                case Func::Step: return make_constant(0.0);
                case Func::Min: {
                    const ExprPtr& v = e->args[1];
                    ExprPtr first_active = make_call(Func::Step, {make_sub(v, u)});
                    return make_add(make_mul(first_active, std::move(du)),
                                    make_mul(make_sub(make_constant(1.0), first_active),
                                             diff(v, slot)));
                }
                case Func::Max: {
                    const ExprPtr& v = e->args[1];
                    ExprPtr first_active = make_call(Func::Step, {make_sub(u, v)});
                    return make_add(make_mul(first_active, std::move(du)),
                                    make_mul(make_sub(make_constant(1.0), first_active),
                                             diff(v, slot)));
                }
            }
            throw Error("unknown function");
        }
    }
    throw Error("malformed expression node");
}

inline int find_variable_slot(std::span<const std::string> vars, std::string_view name) {
    for (std::size_t i = 0; i < vars.size(); ++i)
        if (vars[i] == name) return static_cast<int>(i);
    throw Error("unknown variable '" + std::string(name) + "'");
}

inline ExprPtr diff(const ExprPtr& e, std::string_view wrt, std::span<const std::string> vars) {
    return diff(e, find_variable_slot(vars, wrt));
}

// --- canonical printer ---------------------------------------------------

namespace exprdet {

inline int precedence(const ExprNode& e) {
    switch (e.kind) {
        case ExprKind::Binary:
            if (e.op == '+' || e.op == '-') return 1;
            if (e.op == '*' || e.op == '/') return 2;
            return 3;  // ^
        case ExprKind::Unary:
            return 4;
        default:
            return 5;
    }
}

inline void print_node(const ExprNode& e, std::string& out) {
    switch (e.kind) {
        case ExprKind::Constant: {
            char buf[40];
            std::snprintf(buf, sizeof buf, "%.17g", e.value);
            out += buf;
            return;
        }
        case ExprKind::Variable:
            out += e.name;
            return;
        case ExprKind::Unary: {
            out += '-';
            const bool parens = precedence(*e.args[0]) < precedence(e);
            if (parens) out += '(';
            print_node(*e.args[0], out);
            if (parens) out += ')';
            return;
        }
        case ExprKind::Binary: {
            const int prec = precedence(e);
            const bool lp = precedence(*e.args[0]) < prec;
            const bool rp = precedence(*e.args[1]) <= prec;
            if (lp) out += '(';
            print_node(*e.args[0], out);
            if (lp) out += ')';
            out += e.op;
            if (rp) out += '(';
            print_node(*e.args[1], out);
            if (rp) out += ')';
            return;
        }
        case ExprKind::Call: {
            out += e.name;
            out += '(';
            for (std::size_t i = 0; i < e.args.size(); ++i) {
                if (i) out += ',';
                print_node(*e.args[i], out);
            }
            out += ')';
            return;
        }
    }
}

}  // namespace exprdet

/// Render an AST to text that reparses to the same AST.
inline std::string print_expr(const ExprNode& e) {
    std::string out;
    exprdet::print_node(e, out);
    return out;
}

inline std::string print_expr(const ExprPtr& e) { return print_expr(*e); }

/// Structural equality (exact constants, same slots and shapes).
inline bool expr_equal(const ExprNode& a, const ExprNode& b) {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
        case ExprKind::Constant: return a.value == b.value;
        case ExprKind::Variable: return a.slot == b.slot && a.name == b.name;
        case ExprKind::Unary: return expr_equal(*a.args[0], *b.args[0]);
        case ExprKind::Binary:
            return a.op == b.op && expr_equal(*a.args[0], *b.args[0]) &&
                   expr_equal(*a.args[1], *b.args[1]);
        case ExprKind::Call:
            if (a.fn != b.fn || a.args.size() != b.args.size()) return false;
            for (std::size_t i = 0; i < a.args.size(); ++i)
                if (!expr_equal(*a.args[i], *b.args[i])) return false;
            return true;
    }
    return false;
}

inline bool expr_equal(const ExprPtr& a, const ExprPtr& b) { return expr_equal(*a, *b); }

/// True when the expression references no variables at all (after the
/// parse-time constant folding this means it is a single literal).
inline bool expr_is_constant(const ExprNode& e) {
    if (e.kind == ExprKind::Variable) return false;
    for (const auto& child : e.args)
        if (!expr_is_constant(*child)) return false;
    return true;
}

inline bool expr_is_constant(const ExprPtr& e) { return expr_is_constant(*e); }

}  // namespace contrakt
