#include "gfbsde/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>

namespace gfbsde::expr {

double Program::eval(std::span<const double> vars) const {
    double stack[64];
    int sp = 0;
    for (const Instr& in : code_) {
        switch (in.op) {
        case Op::push_const: stack[sp++] = in.value; break;
        case Op::push_var: stack[sp++] = vars[static_cast<std::size_t>(in.var)]; break;
        case Op::add: --sp; stack[sp - 1] += stack[sp]; break;
        case Op::sub: --sp; stack[sp - 1] -= stack[sp]; break;
        case Op::mul: --sp; stack[sp - 1] *= stack[sp]; break;
        case Op::div: --sp; stack[sp - 1] /= stack[sp]; break;
        case Op::neg: stack[sp - 1] = -stack[sp - 1]; break;
        case Op::pow: --sp; stack[sp - 1] = std::pow(stack[sp - 1], stack[sp]); break;
        case Op::exp: stack[sp - 1] = std::exp(stack[sp - 1]); break;
        case Op::tanh: stack[sp - 1] = std::tanh(stack[sp - 1]); break;
        case Op::min: --sp; stack[sp - 1] = std::fmin(stack[sp - 1], stack[sp]); break;
        case Op::max: --sp; stack[sp - 1] = std::fmax(stack[sp - 1], stack[sp]); break;
        }
    }
    return stack[0];
}

namespace {

enum class Tok { number, ident, plus, minus, star, slash, lparen, rparen, comma, end };

struct Token {
    Tok kind;
    double value = 0.0;
    std::string text;
    int line = 1;
    int col = 1;
};

class Lexer {
public:
    Lexer(std::string_view src, int base_line, int base_col)
        : src_(src), line_(base_line), col_(base_col) {}

    Token next() {
        skip_ws();
        Token t;
        t.line = line_;
        t.col = col_;
        if (pos_ >= src_.size()) {
            t.kind = Tok::end;
            return t;
        }
        const char c = src_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            const char* begin = src_.data() + pos_;
            char* endp = nullptr;
            t.value = std::strtod(begin, &endp);
            if (endp == begin)
                throw ConfigError(line_, col_, "malformed number");
            advance(static_cast<std::size_t>(endp - begin));
            t.kind = Tok::number;
            return t;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t j = pos_;
            while (j < src_.size() &&
                   (std::isalnum(static_cast<unsigned char>(src_[j])) || src_[j] == '_'))
                ++j;
            t.text = std::string(src_.substr(pos_, j - pos_));
            advance(j - pos_);
            t.kind = Tok::ident;
            return t;
        }
        advance(1);
        switch (c) {
        case '+': t.kind = Tok::plus; return t;
        case '-': t.kind = Tok::minus; return t;
        case '*': t.kind = Tok::star; return t;
        case '/': t.kind = Tok::slash; return t;
        case '(': t.kind = Tok::lparen; return t;
        case ')': t.kind = Tok::rparen; return t;
        case ',': t.kind = Tok::comma; return t;
        default:
            throw ConfigError(t.line, t.col, std::string("unexpected character '") + c + "'");
        }
    }

private:
    void skip_ws() {
        while (pos_ < src_.size()) {
            const char c = src_[pos_];
            if (c == '\n') {
                ++line_;
                col_ = 1;
                ++pos_;
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                ++col_;
                ++pos_;
            } else {
                break;
            }
        }
    }
    void advance(std::size_t k) {
        col_ += static_cast<int>(k);
        pos_ += k;
    }
    std::string_view src_;
    std::size_t pos_ = 0;
    int line_;
    int col_;
};

class Parser {
public:
    Parser(std::string_view src, const VarResolver& vars, int base_line, int base_col)
        : lex_(src, base_line, base_col), vars_(vars) {
        cur_ = lex_.next();
    }

    void run() {
        parse_expr();
        if (cur_.kind != Tok::end)
            throw ConfigError(cur_.line, cur_.col, "trailing input after expression");
        if (depth_peak_ > 60)
            throw ConfigError(1, 1, "expression too deeply nested");
    }

    std::vector<Instr> code;
    std::uint32_t used_mask = 0;

private:
    void emit(Op op, int var = 0, double value = 0.0) {
        code.push_back(Instr{op, var, value});
        switch (op) {
        case Op::push_const:
        case Op::push_var:
            ++depth_;
            depth_peak_ = std::max(depth_peak_, depth_);
            break;
        case Op::neg:
        case Op::exp:
        case Op::tanh:
            break;
        default:
            --depth_;
            break;
        }
    }

    void advance() { cur_ = lex_.next(); }

    void expect(Tok k, const char* what) {
        if (cur_.kind != k)
            throw ConfigError(cur_.line, cur_.col, std::string("expected ") + what);
        advance();
    }

    void parse_expr() {
        parse_term();
        while (cur_.kind == Tok::plus || cur_.kind == Tok::minus) {
            const Tok op = cur_.kind;
            advance();
            parse_term();
            emit(op == Tok::plus ? Op::add : Op::sub);
        }
    }

    void parse_term() {
        parse_unary();
        while (cur_.kind == Tok::star || cur_.kind == Tok::slash) {
            const Tok op = cur_.kind;
            advance();
            parse_unary();
            emit(op == Tok::star ? Op::mul : Op::div);
        }
    }

    void parse_unary() {
        if (cur_.kind == Tok::minus) {
            advance();
            parse_unary();
            emit(Op::neg);
            return;
        }
        parse_primary();
    }

    void parse_primary() {
        if (cur_.kind == Tok::number) {
            emit(Op::push_const, 0, cur_.value);
            advance();
            return;
        }
        if (cur_.kind == Tok::lparen) {
            advance();
            parse_expr();
            expect(Tok::rparen, "')'");
            return;
        }
        if (cur_.kind == Tok::ident) {
            const Token name = cur_;
            advance();
            if (cur_.kind == Tok::lparen) {
                advance();
                parse_call(name);
                return;
            }
            const int idx = vars_(name.text);
            if (idx < 0)
                throw ConfigError(name.line, name.col,
                                  "unknown variable '" + name.text + "' in this context");
            if (idx >= 32)
                throw ConfigError(name.line, name.col, "variable slot out of range");
            used_mask |= (1u << idx);
            emit(Op::push_var, idx);
            return;
        }
        throw ConfigError(cur_.line, cur_.col, "expected expression");
    }

    void parse_call(const Token& name) {
        struct Fn {
            const char* name;
            Op op;
            int arity;
        };
        static constexpr Fn fns[] = {
            {"pow", Op::pow, 2},  {"exp", Op::exp, 1}, {"tanh", Op::tanh, 1},
            {"min", Op::min, 2},  {"max", Op::max, 2},
        };
        for (const Fn& f : fns) {
            if (name.text == f.name) {
                parse_expr();
                for (int k = 1; k < f.arity; ++k) {
                    expect(Tok::comma, "','");
                    parse_expr();
                }
                expect(Tok::rparen, "')'");
                emit(f.op);
                return;
            }
        }
        throw ConfigError(name.line, name.col, "unknown function '" + name.text + "'");
    }

    Lexer lex_;
    const VarResolver& vars_;
    Token cur_;
    int depth_ = 0;
    int depth_peak_ = 0;
};

} // namespace

Program parse(std::string_view src, const VarResolver& vars, int base_line, int base_col) {
    Parser parser(src, vars, base_line, base_col);
    parser.run();
    Program p;
    p.source_ = std::string(src);
    p.code_ = std::move(parser.code);
    p.used_mask_ = parser.used_mask;
    if (p.code_.empty())
        throw ConfigError(base_line, base_col, "empty expression");
    return p;
}

VarResolver coefficient_vars(int n, bool allow_t, bool allow_y, bool allow_z) {
    return [n, allow_t, allow_y, allow_z](std::string_view name) -> int {
        if (name == "t") return allow_t ? 0 : -1;
        if (name == "y") return allow_y ? n + 1 : -1;
        if (name == "z") return allow_z ? n + 2 : -1;
        if (name == "x" && n == 1) return 1;
        if (name.size() >= 2 && name[0] == 'x') {
            int idx = 0;
            for (std::size_t i = 1; i < name.size(); ++i) {
                if (!std::isdigit(static_cast<unsigned char>(name[i]))) return -1;
                idx = idx * 10 + (name[i] - '0');
            }
            if (idx >= 1 && idx <= n) return idx;
        }
        return -1;
    };
}

VarResolver single_var(std::string name) {
    return [name = std::move(name)](std::string_view q) -> int { return q == name ? 0 : -1; };
}

} // namespace gfbsde::expr
