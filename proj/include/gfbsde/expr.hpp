// Arithmetic expression language for model coefficients.
//
// Supported: decimal literals, + - * /, unary minus, parentheses, and the
// functions pow, exp, tanh, min, max. Variable names are supplied by the
// caller, so the same parser serves coefficient expressions (t, x1..xn, y, z)
// and the BDG-constant override (p). Expressions compile to a postfix program
// evaluated on a fixed-size stack.

#ifndef GFBSDE_EXPR_HPP
#define GFBSDE_EXPR_HPP

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gfbsde/common.hpp"

namespace gfbsde::expr {

enum class Op : std::uint8_t {
    push_const,
    push_var,
    add,
    sub,
    mul,
    div,
    neg,
    pow,
    exp,
    tanh,
    min,
    max,
};

struct Instr {
    Op op;
    int var = 0;
    double value = 0.0;
};

// Maps a variable name to its slot index, or -1 if the name is not allowed
// in the current context.
using VarResolver = std::function<int(std::string_view)>;

class Program {
public:
    double eval(std::span<const double> vars) const;

    bool uses_var(int idx) const { return (used_mask_ & (1u << idx)) != 0; }
    const std::string& source() const { return source_; }
    bool empty() const { return code_.empty(); }

private:
    friend Program parse(std::string_view, const VarResolver&, int, int);
    std::vector<Instr> code_;
    std::uint32_t used_mask_ = 0;
    int max_stack_ = 0;
    std::string source_;
};

// Parses `src` with names resolved through `vars`. Errors are reported as
// ConfigError with positions offset by (base_line, base_col) so messages
// point into the enclosing file.
Program parse(std::string_view src, const VarResolver& vars, int base_line = 1, int base_col = 1);

// Resolver for coefficient expressions over an n-dimensional state:
// t -> 0, x1..xn -> 1..n ("x" aliases "x1" when n == 1), y -> n+1, z -> n+2.
// allow_* gates reject variables that a coefficient may not reference.
VarResolver coefficient_vars(int n, bool allow_t, bool allow_y, bool allow_z);

// Resolver with a single variable name (slot 0).
VarResolver single_var(std::string name);

} // namespace gfbsde::expr

#endif // GFBSDE_EXPR_HPP
