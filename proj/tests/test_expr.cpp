#include <doctest.h>

#include <cmath>

#include "gfbsde/expr.hpp"

using namespace gfbsde;

namespace {
double eval1(const expr::Program& p, double x) {
    const double vars[4] = {0.0, x, 0.0, 0.0};
    return p.eval(std::span<const double>(vars, 4));
}
} // namespace

TEST_SUITE("expr") {

TEST_CASE("arithmetic and precedence") {
    auto vars = expr::coefficient_vars(1, true, true, true);
    const expr::Program p = expr::parse("1 + 2 * 3 - 4 / 2", vars);
    CHECK(eval1(p, 0.0) == doctest::Approx(5.0));
    const expr::Program q = expr::parse("-(x + 1) * 2", vars);
    CHECK(eval1(q, 2.0) == doctest::Approx(-6.0));
}

TEST_CASE("functions") {
    auto vars = expr::coefficient_vars(1, true, true, true);
    CHECK(eval1(expr::parse("pow(x, 3)", vars), 2.0) == doctest::Approx(8.0));
    CHECK(eval1(expr::parse("exp(0)", vars), 0.0) == doctest::Approx(1.0));
    CHECK(eval1(expr::parse("tanh(x)", vars), 0.3) == doctest::Approx(std::tanh(0.3)));
    CHECK(eval1(expr::parse("min(x, 2)", vars), 5.0) == doctest::Approx(2.0));
    CHECK(eval1(expr::parse("max(x - 1, 0)", vars), 0.25) == doctest::Approx(0.0));
}

TEST_CASE("variable slots and aliases") {
    auto vars = expr::coefficient_vars(2, true, true, true);
    const expr::Program p = expr::parse("x1 + 2 * x2 + y - z + t", vars);
    const double v[5] = {10.0, 1.0, 2.0, 3.0, 4.0}; // t, x1, x2, y, z
    CHECK(p.eval(std::span<const double>(v, 5)) == doctest::Approx(1 + 4 + 3 - 4 + 10));
    CHECK(p.uses_var(0));
    CHECK(p.uses_var(4));
    // "x" only aliases x1 in one dimension.
    CHECK_THROWS_AS(expr::parse("x", vars), ConfigError);
}

TEST_CASE("context gating") {
    // phi may not reference t, y or z.
    auto phi_vars = expr::coefficient_vars(1, false, false, false);
    CHECK_THROWS_AS(expr::parse("y + 1", phi_vars), ConfigError);
    CHECK_THROWS_AS(expr::parse("t", phi_vars), ConfigError);
    CHECK_NOTHROW(expr::parse("x * x", phi_vars));
    // forward coefficients may not reference z.
    auto fwd_vars = expr::coefficient_vars(1, true, true, false);
    CHECK_THROWS_AS(expr::parse("z", fwd_vars), ConfigError);
}

TEST_CASE("error positions") {
    auto vars = expr::coefficient_vars(1, true, true, true);
    try {
        expr::parse("1 + \n  foo(2)", vars, 10, 1);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.line == 11);
        CHECK(e.col == 3);
    }
    CHECK_THROWS_AS(expr::parse("1 +", vars), ConfigError);
    CHECK_THROWS_AS(expr::parse("(1", vars), ConfigError);
    CHECK_THROWS_AS(expr::parse("1 2", vars), ConfigError);
    CHECK_THROWS_AS(expr::parse("", vars), ConfigError);
}

TEST_CASE("division by zero propagates to eval, not parse") {
    auto vars = expr::coefficient_vars(1, true, true, true);
    const expr::Program p = expr::parse("1 / x", vars);
    CHECK(std::isinf(eval1(p, 0.0)));
}

} // TEST_SUITE
