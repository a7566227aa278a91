#include <doctest.h>

#include <cmath>

#include "gfbsde/rng.hpp"
#include "gfbsde/bsde.hpp"
#include "gfbsde/sde.hpp"

using namespace gfbsde;

namespace {

model::Problem zero_problem() {
    return model::parse_problem_string(R"([setting]
sigma_low = 0.9
sigma_high = 1.1
p = 2
beta = 4
n = 1
T = 0.5
x0 = 1.0

[coefficients]
b = 0
h = 0
sigma = 0
f = 0
g = 0
phi = 0
L1 = 0.1
L2 = 0.0
L3 = 0.1

[grid]
n_steps = 32
n_space = 65
)",
                                       "zero");
}

} // namespace

TEST_SUITE("sde") {

TEST_CASE("vanishing coefficients freeze the state") {
    const model::Problem prob = zero_problem();
    const gprocess::VolatilityControl c{std::vector<double>(32, 1.21), "high"};
    const auto ens = gprocess::sample_paths(prob.grid, prob.setting, c, 200, 1);
    const auto sol = sde::euler_forward(prob.coeffs, prob.grid, prob.setting, ens,
                                        sde::YInput::make_zero());
    for (long p = 0; p < 200; ++p)
        for (int i = 0; i <= 32; ++i) CHECK(sol.state(p, i)[0] == 1.0);
}

TEST_CASE("pure quadratic-variation drift lands in the band sandwich") {
    // h constant, b = sigma = 0: X_T = x0 + c <B>_T exactly on the grid.
    model::Problem prob = zero_problem();
    prob.coeffs.h[0] = expr::parse("0.7", expr::coefficient_vars(1, true, true, false));
    const auto fam = gprocess::ControlFamily::make(prob.setting, 32, 2);
    for (const auto& control : fam.controls) {
        const auto ens = gprocess::sample_paths(prob.grid, prob.setting, control, 50, 2);
        const auto sol = sde::euler_forward(prob.coeffs, prob.grid, prob.setting, ens,
                                            sde::YInput::make_zero());
        for (long p = 0; p < 50; ++p) {
            const double xT = sol.state(p, 32)[0];
            CHECK(xT == doctest::Approx(1.0 + 0.7 * ens.qv[32]).epsilon(1e-12));
            CHECK(xT >= 1.0 + 0.7 * 0.81 * 0.5 - 1e-12);
            CHECK(xT <= 1.0 + 0.7 * 1.21 * 0.5 + 1e-12);
        }
    }
}

TEST_CASE("classical arithmetic noise has the right terminal moments") {
    model::Problem prob = zero_problem();
    prob.setting.sigma_low = prob.setting.sigma_high = 1.0;
    prob.setting.classical_reduction = true;
    prob.coeffs.sigma[0] = expr::parse("1", expr::coefficient_vars(1, true, true, false));
    const gprocess::VolatilityControl c{std::vector<double>(32, 1.0), "unit"};
    const long n = 50000;
    const auto ens = gprocess::sample_paths(prob.grid, prob.setting, c, n, 3);
    const auto sol = sde::euler_forward(prob.coeffs, prob.grid, prob.setting, ens,
                                        sde::YInput::make_zero());
    std::vector<double> xT(static_cast<std::size_t>(n));
    for (long p = 0; p < n; ++p) xT[static_cast<std::size_t>(p)] = sol.state(p, 32)[0] - 1.0;
    const MeanSE ms = mean_se(xT);
    CHECK(std::abs(ms.mean) <= 5.0 * ms.se);
    double var = 0.0;
    for (double v : xT) var += (v - ms.mean) * (v - ms.mean);
    var /= static_cast<double>(n - 1);
    CHECK(var == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("pathwise determinism for identical inputs") {
    const model::Problem prob = model::catalog_entry("weakly-coupled");
    const gprocess::VolatilityControl c{
        std::vector<double>(static_cast<std::size_t>(prob.grid.n_steps), 1.0), "mid"};
    const auto ens = gprocess::sample_paths(prob.grid, prob.setting, c, 300, 9);
    const auto a = sde::euler_forward(prob.coeffs, prob.grid, prob.setting, ens,
                                      sde::YInput::make_constant(0.4));
    const auto b = sde::euler_forward(prob.coeffs, prob.grid, prob.setting, ens,
                                      sde::YInput::make_constant(0.4));
    CHECK(a.states == b.states);
}

TEST_CASE("non-finite states abort with a location") {
    model::Problem prob = zero_problem();
    // exp(x) drift with huge scale blows up within a few steps
    prob.coeffs.b[0] = expr::parse("exp(x * x) * 1e300",
                                   expr::coefficient_vars(1, true, true, false));
    const gprocess::VolatilityControl c{std::vector<double>(32, 1.0), "mid"};
    const auto ens = gprocess::sample_paths(prob.grid, prob.setting, c, 10, 4);
    CHECK_THROWS_AS(sde::euler_forward(prob.coeffs, prob.grid, prob.setting, ens,
                                       sde::YInput::make_zero()),
                    NumericalAbort);
}

TEST_CASE("strong half-order convergence on the multiplicative classical entry") {
    // Frozen y = 0 turns the classical-linear forward into an exactly
    // solvable multiplicative equation; Euler should lose about sqrt(2)
    // accuracy per step-doubling.
    const model::Problem base = model::catalog_entry("classical-linear");
    REQUIRE(base.analytic.has_value());
    const auto& exact = base.analytic->forward_xT;

    auto strong_error = [&](int n_steps) {
        model::Problem prob = base;
        prob.grid.n_steps = n_steps;
        const gprocess::VolatilityControl c{
            std::vector<double>(static_cast<std::size_t>(n_steps), 1.0), "unit"};
        const long n = 20000;
        const auto ens = gprocess::sample_paths(prob.grid, prob.setting, c, n, 17);
        const auto sol = sde::euler_forward(prob.coeffs, prob.grid, prob.setting, ens,
                                            sde::YInput::make_zero());
        std::vector<double> err(static_cast<std::size_t>(n));
        for (long p = 0; p < n; ++p) {
            double bT = 0.0;
            for (int i = 0; i < n_steps; ++i) bT += ens.increment(p, i);
            err[static_cast<std::size_t>(p)] =
                std::abs(sol.state(p, n_steps)[0] - exact(1.0, bT, ens.qv[static_cast<std::size_t>(n_steps)]));
        }
        return mean_se(err).mean;
    };
    const double e64 = strong_error(64);
    const double e128 = strong_error(128);
    const double ratio = e64 / e128;
    CHECK(ratio >= 1.2);
    CHECK(ratio <= 2.8);
}

TEST_CASE("two-dimensional state integrates and prices a linear terminal value") {
    const char* text = R"([setting]
sigma_low = 0.9
sigma_high = 1.1
p = 2
beta = 4
n = 2
T = 0.25
x0 = 1.0, -0.5

[coefficients]
b1 = 0.05 * tanh(x2)
b2 = 0
h1 = 0
h2 = 0
sigma1 = 1
sigma2 = 0.5
f = 0
g = 0
phi = x1 + x2
L1 = 0.1
L2 = 0.0
L3 = 1.5

[grid]
n_steps = 16
n_space = 41
)";
    const model::Problem prob = model::parse_problem_string(text, "planar");
    CHECK(model::validate_problem(prob.setting, prob.coeffs, &prob.grid).ok());
    const gprocess::VolatilityControl c{std::vector<double>(16, 1.0), "mid"};
    const auto ens = gprocess::sample_paths(prob.grid, prob.setting, c, 4000, 12);
    const auto sol = sde::euler_forward(prob.coeffs, prob.grid, prob.setting, ens,
                                        sde::YInput::make_zero());
    CHECK(sol.n == 2);
    // Both coordinates share the scalar driving increment (one-dimensional noise).
    const auto x0v = sol.state(7, 0);
    CHECK(x0v[0] == 1.0);
    CHECK(x0v[1] == -0.5);

    // Linear terminal value propagates through the planar lattice exactly.
    const auto bwd = bsde::dp_backward(prob.coeffs, prob.setting, prob.grid,
                                       sde::YInput::make_zero());
    // drift of x1 pushes the sum up slightly; at the start node the value is
    // x0_1 + x0_2 + O(drift * T)
    CHECK(bwd.y0 == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("stability estimate holds with common random numbers") {
    const model::Problem prob = model::catalog_entry("weakly-coupled");
    const auto fam = gprocess::ControlFamily::make(prob.setting, prob.grid.n_steps, 2);
    constants::Engine engine;

    SUBCASE("identical inputs give zero both sides") {
        const auto v = sde::sde_stability_check(prob, fam, sde::YInput::make_constant(0.3),
                                                sde::YInput::make_constant(0.3), 2.0, 500, 21,
                                                engine);
        CHECK(v.lhs == 0.0);
        CHECK(v.rhs == 0.0);
        CHECK(v.pass);
    }
    SUBCASE("decoupled coefficients ignore the y-inputs") {
        const model::Problem dec = model::catalog_entry("decoupled");
        const auto famd = gprocess::ControlFamily::make(dec.setting, dec.grid.n_steps, 2);
        const auto v = sde::sde_stability_check(dec, famd, sde::YInput::make_constant(-1.0),
                                                sde::YInput::make_constant(1.0), 2.0, 500, 22,
                                                engine);
        CHECK(v.lhs == 0.0);
        CHECK(v.rhs == 0.0);
        CHECK(v.pass);
    }
    SUBCASE("separated constant inputs pass with a large margin") {
        const auto v = sde::sde_stability_check(prob, fam, sde::YInput::make_constant(0.0),
                                                sde::YInput::make_constant(1.0), 2.0, 2000, 23,
                                                engine);
        CHECK(v.pass);
        CHECK(v.lhs > 0.0);
        CHECK(v.lhs < 0.05 * v.c1 * v.rhs); // the explicit constant is loose
    }
    SUBCASE("randomized pairs") {
        for (int k = 0; k < 20; ++k) {
            const double y1 = 2.0 * rng::uniform_at(99, static_cast<std::uint64_t>(2 * k)) - 1.0;
            const double y2 = 2.0 * rng::uniform_at(99, static_cast<std::uint64_t>(2 * k + 1)) - 1.0;
            const auto v = sde::sde_stability_check(prob, fam, sde::YInput::make_constant(y1),
                                                    sde::YInput::make_constant(y2), 2.0, 400,
                                                    100 + static_cast<std::uint64_t>(k), engine);
            CAPTURE(k);
            CHECK(v.pass);
        }
    }
}

} // TEST_SUITE
