#ifndef EXITGRID_EXPRESSION_HPP
#define EXITGRID_EXPRESSION_HPP

#include <cctype>
#include <cmath>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "exitgrid/util.hpp"

namespace exitgrid {

/// Parse failure with the 0-based character offset of the offending token.
class ParseError : public std::runtime_error {
  public:
    ParseError(const std::string& msg, std::size_t offset)
        : std::runtime_error(msg + " at offset " + std::to_string(offset)), offset_(offset) {}
    std::size_t offset() const { return offset_; }

  private:
    std::size_t offset_;
};

/// Evaluation outside the expression's real domain (sqrt of a negative, etc.).
class EvalError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

enum class ExprOp : std::uint8_t {
    Const,
    VarX,  // x1..xd
    VarU,  // u1..um
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Neg,
    Sin,
    Cos,
    Sqrt,
    Abs,
    Cbrt,
    Min,
    Max,
};

/// Arithmetic expression over state variables x1..xd and control variables
/// u1..um. Stored as a flat tree; eval() walks the postfix order with a
/// small value stack, so evaluation does no allocation.
class Expression {
  public:
    struct Node {
        ExprOp op;
        double value = 0.0;  // Const
        int index = 0;       // VarX/VarU (0-based)
        int a = -1, b = -1;  // children
    };

    Expression() = default;

    double eval(std::span<const double> x, std::span<const double> u = {}) const {
        if (prog_.empty()) throw EvalError("empty expression");
        double stack[kMaxStack];
        int top = -1;
        for (const auto& n : prog_) {
            switch (n.op) {
                case ExprOp::Const: stack[++top] = n.value; break;
                case ExprOp::VarX: stack[++top] = x[n.index]; break;
                case ExprOp::VarU: stack[++top] = u[n.index]; break;
                case ExprOp::Neg: stack[top] = -stack[top]; break;
                case ExprOp::Sin: stack[top] = std::sin(stack[top]); break;
                case ExprOp::Cos: stack[top] = std::cos(stack[top]); break;
                case ExprOp::Abs: stack[top] = std::fabs(stack[top]); break;
                case ExprOp::Cbrt: stack[top] = std::cbrt(stack[top]); break;
                case ExprOp::Sqrt:
                    if (stack[top] < 0.0) throw EvalError("sqrt of negative value");
                    stack[top] = std::sqrt(stack[top]);
                    break;
                case ExprOp::Add: --top; stack[top] += stack[top + 1]; break;
                case ExprOp::Sub: --top; stack[top] -= stack[top + 1]; break;
                case ExprOp::Mul: --top; stack[top] *= stack[top + 1]; break;
                case ExprOp::Div: --top; stack[top] /= stack[top + 1]; break;
                case ExprOp::Min: --top; stack[top] = std::min(stack[top], stack[top + 1]); break;
                case ExprOp::Max: --top; stack[top] = std::max(stack[top], stack[top + 1]); break;
                case ExprOp::Pow: {
                    --top;
                    double r = std::pow(stack[top], stack[top + 1]);
                    if (std::isnan(r)) throw EvalError("pow outside real domain");
                    stack[top] = r;
                    break;
                }
            }
        }
        return stack[0];
    }

    bool uses_state() const { return uses_x_; }
    bool uses_control() const { return uses_u_; }

    /// Canonical infix form; parse(print(e)) evaluates identically to e.
    std::string print() const { return print_node(root_); }

    static Expression parse(const std::string& text, int dim, int ctrl_dim);

  private:
    static constexpr int kMaxStack = 64;

    std::vector<Node> nodes_;   // tree form, for printing
    std::vector<Node> prog_;    // postfix program, for evaluation
    int root_ = -1;
    bool uses_x_ = false, uses_u_ = false;

    int push(Node n) {
        nodes_.push_back(n);
        return static_cast<int>(nodes_.size()) - 1;
    }

    void compile(int node, int depth) {
        if (depth > kMaxStack - 2) throw ParseError("expression too deep", 0);
        const Node& n = nodes_[node];
        if (n.a >= 0) compile(n.a, depth);
        if (n.b >= 0) compile(n.b, depth + 1);
        prog_.push_back(n);
        if (n.op == ExprOp::VarX) uses_x_ = true;
        if (n.op == ExprOp::VarU) uses_u_ = true;
    }

    static int precedence(ExprOp op) {
        switch (op) {
            case ExprOp::Add:
            case ExprOp::Sub: return 1;
            case ExprOp::Mul:
            case ExprOp::Div: return 2;
            case ExprOp::Neg: return 3;
            case ExprOp::Pow: return 4;
            default: return 5;
        }
    }

    std::string print_node(int idx) const {
        const Node& n = nodes_[idx];
        auto wrap = [&](int child, bool strict) {
            std::string s = print_node(child);
            int pc = precedence(nodes_[child].op);
            int pn = precedence(n.op);
            if (pc < pn || (strict && pc == pn)) return "(" + s + ")";
            return s;
        };
        switch (n.op) {
            case ExprOp::Const: {
                std::ostringstream os;
                os.precision(17);
                os << n.value;
                std::string s = os.str();
                return n.value < 0 ? "(" + s + ")" : s;
            }
            case ExprOp::VarX: return "x" + std::to_string(n.index + 1);
            case ExprOp::VarU: return "u" + std::to_string(n.index + 1);
            case ExprOp::Add: return wrap(n.a, false) + " + " + wrap(n.b, false);
            case ExprOp::Sub: return wrap(n.a, false) + " - " + wrap(n.b, true);
            case ExprOp::Mul: return wrap(n.a, false) + "*" + wrap(n.b, false);
            case ExprOp::Div: return wrap(n.a, false) + "/" + wrap(n.b, true);
            case ExprOp::Pow: return wrap(n.a, true) + "^" + wrap(n.b, false);
            case ExprOp::Neg: return "-" + wrap(n.a, true);
            case ExprOp::Sin: return "sin(" + print_node(n.a) + ")";
            case ExprOp::Cos: return "cos(" + print_node(n.a) + ")";
            case ExprOp::Sqrt: return "sqrt(" + print_node(n.a) + ")";
            case ExprOp::Abs: return "abs(" + print_node(n.a) + ")";
            case ExprOp::Cbrt: return "cbrt(" + print_node(n.a) + ")";
            case ExprOp::Min: return "min(" + print_node(n.a) + ", " + print_node(n.b) + ")";
            case ExprOp::Max: return "max(" + print_node(n.a) + ", " + print_node(n.b) + ")";
        }
        return "";
    }

    friend class ExprParser;
};

/// Recursive-descent parser. Grammar:
///   expr   := term (('+'|'-') term)*
///   term   := unary (('*'|'/') unary)*
///   unary  := '-' unary | power
///   power  := primary ('^' unary)?
///   primary:= number | ident '(' expr (',' expr)? ')' | ident | '(' expr ')'
class ExprParser {
  public:
    ExprParser(const std::string& text, int dim, int ctrl_dim, Expression& out)
        : text_(text), dim_(dim), ctrl_dim_(ctrl_dim), out_(out) {}

    void run() {
        if (text_.empty()) throw ParseError("empty expression", 0);
        out_.root_ = parse_expr();
        skip_ws();
        if (pos_ != text_.size()) throw ParseError("unexpected trailing input", pos_);
        out_.compile(out_.root_, 0);
    }

  private:
    const std::string& text_;
    std::size_t pos_ = 0;
    int dim_, ctrl_dim_;
    Expression& out_;

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }
    char peek() {
        skip_ws();
        return pos_ < text_.size() ? text_[pos_] : '\0';
    }
    bool accept(char c) {
        if (peek() == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    int parse_expr() {
        int lhs = parse_term();
        for (;;) {
            char c = peek();
            if (c == '+' || c == '-') {
                ++pos_;
                int rhs = parse_term();
                lhs = out_.push({c == '+' ? ExprOp::Add : ExprOp::Sub, 0, 0, lhs, rhs});
            } else {
                return lhs;
            }
        }
    }

    int parse_term() {
        int lhs = parse_unary();
        for (;;) {
            char c = peek();
            if (c == '*' || c == '/') {
                ++pos_;
                int rhs = parse_unary();
                lhs = out_.push({c == '*' ? ExprOp::Mul : ExprOp::Div, 0, 0, lhs, rhs});
            } else {
                return lhs;
            }
        }
    }

    int parse_unary() {
        if (accept('-')) {
            int a = parse_unary();
            return out_.push({ExprOp::Neg, 0, 0, a, -1});
        }
        return parse_power();
    }

    int parse_power() {
        int base = parse_primary();
        if (accept('^')) {
            int e = parse_unary();  // right-associative
            return out_.push({ExprOp::Pow, 0, 0, base, e});
        }
        return base;
    }

    int parse_primary() {
        skip_ws();
        if (pos_ >= text_.size()) throw ParseError("unexpected end of expression", pos_);
        char c = text_[pos_];
        if (c == '(') {
            ++pos_;
            int e = parse_expr();
            if (!accept(')')) throw ParseError("expected ')'", pos_);
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_ident();
        throw ParseError(std::string("syntax error near '") + c + "'", pos_);
    }

    int parse_number() {
        std::size_t start = pos_;
        const char* begin = text_.c_str() + pos_;
        char* end = nullptr;
        double v = std::strtod(begin, &end);
        if (end == begin) throw ParseError("malformed number", start);
        pos_ += static_cast<std::size_t>(end - begin);
        return out_.push({ExprOp::Const, v, 0, -1, -1});
    }

    int parse_ident() {
        std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
            ++pos_;
        std::string name = text_.substr(start, pos_ - start);

        struct Fn {
            const char* name;
            ExprOp op;
            int arity;
        };
        static const Fn fns[] = {{"sin", ExprOp::Sin, 1},   {"cos", ExprOp::Cos, 1},
                                 {"sqrt", ExprOp::Sqrt, 1}, {"abs", ExprOp::Abs, 1},
                                 {"cbrt", ExprOp::Cbrt, 1}, {"min", ExprOp::Min, 2},
                                 {"max", ExprOp::Max, 2}};
        for (const auto& f : fns) {
            if (name == f.name) {
                if (!accept('(')) throw ParseError("expected '(' after " + name, pos_);
                int a = parse_expr();
                int b = -1;
                if (f.arity == 2) {
                    if (!accept(',')) throw ParseError("expected ',' in " + name, pos_);
                    b = parse_expr();
                }
                if (!accept(')')) throw ParseError("expected ')'", pos_);
                return out_.push({f.op, 0, 0, a, b});
            }
        }
        if ((name[0] == 'x' || name[0] == 'u') && name.size() > 1 &&
            std::all_of(name.begin() + 1, name.end(),
                        [](char d) { return std::isdigit(static_cast<unsigned char>(d)); })) {
            int k = std::stoi(name.substr(1));
            int limit = name[0] == 'x' ? dim_ : ctrl_dim_;
            if (k < 1 || k > limit)
                throw ParseError("variable " + name + " out of range (1.." + std::to_string(limit) + ")",
                                 start);
            return out_.push({name[0] == 'x' ? ExprOp::VarX : ExprOp::VarU, 0, k - 1, -1, -1});
        }
        throw ParseError("unknown identifier '" + name + "'", start);
    }
};

inline Expression Expression::parse(const std::string& text, int dim, int ctrl_dim) {
    Expression e;
    ExprParser p(text, dim, ctrl_dim, e);
    p.run();
    return e;
}

inline Expression parse_expression(const std::string& text, int dim, int ctrl_dim) {
    return Expression::parse(text, dim, ctrl_dim);
}

}  // namespace exitgrid

#endif
