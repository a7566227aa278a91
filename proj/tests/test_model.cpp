#include <doctest.h>

#include <cmath>

#include "gfbsde/model.hpp"

using namespace gfbsde;

namespace {

// Minimal valid problem text used as a template in the parser tests.
const char* kTemplate = R"([setting]
sigma_low = 0.9
sigma_high = 1.1
p = 2
beta = 4
n = 1
T = 0.5
x0 = 0.0

[coefficients]
b = 0.1 * tanh(x)
h = 0
sigma = 1
f = 0.1 * y
g = 0
phi = 0.5 * tanh(x)
L1 = 0.2
L2 = 0.1
L3 = 0.5
)";

} // namespace

TEST_SUITE("model") {

TEST_CASE("problem file parses with defaults") {
    const model::Problem prob = model::parse_problem_string(kTemplate, "tmpl");
    CHECK(prob.setting.n == 1);
    CHECK(prob.setting.horizon == doctest::Approx(0.5));
    CHECK(prob.grid.n_steps == 64);
    // Default box is x0 +- 6 sigma_high sqrt(T).
    const double half = 6.0 * 1.1 * std::sqrt(0.5);
    CHECK(prob.grid.space_min[0] == doctest::Approx(-half));
    CHECK(prob.grid.space_max[0] == doctest::Approx(half));
    CHECK_FALSE(prob.coeffs.sigma_depends_on_y);
}

TEST_CASE("parser rejects malformed input with locations") {
    std::string bad = kTemplate;
    bad += "\n[grid]\nn_steps = banana\n";
    CHECK_THROWS_AS(model::parse_problem_string(bad, "bad"), ConfigError);

    std::string unknown = kTemplate;
    unknown += "\nwhatever = 1\n";
    try {
        model::parse_problem_string(unknown, "unknown");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("unknown key") != std::string::npos);
    }

    // Malformed expression inside a value reports the file position.
    std::string badexpr = kTemplate;
    const std::size_t pos = badexpr.find("b = 0.1 * tanh(x)");
    badexpr.replace(pos, 17, "b = 0.1 * (x voodoo");
    CHECK_THROWS_AS(model::parse_problem_string(badexpr, "badexpr"), ConfigError);
}

TEST_CASE("affine problem with exact declared slopes validates") {
    const model::Problem prob = model::parse_problem_string(kTemplate, "tmpl");
    const model::ValidationReport rep =
        model::validate_problem(prob.setting, prob.coeffs, &prob.grid);
    CHECK(rep.ok());
}

TEST_CASE("understated Lipschitz constant is caught with a witness") {
    std::string cheat = kTemplate;
    // tanh has unit slope at the origin; declaring 0.5 for b = tanh(x) must fail.
    const std::size_t pos = cheat.find("b = 0.1 * tanh(x)");
    cheat.replace(pos, 17, "b = tanh(x)      ");
    model::Problem prob = model::parse_problem_string(cheat, "cheat");
    prob.coeffs.L1 = 0.5;
    const model::ValidationReport rep = model::validate_problem(prob.setting, prob.coeffs);
    CHECK_FALSE(rep.ok());
    bool found = false;
    for (const auto& c : rep.checks)
        if (!c.pass && c.name.find("L1") != std::string::npos) {
            found = true;
            CHECK(c.detail.find("witness") != std::string::npos);
        }
    CHECK(found);
}

TEST_CASE("degenerate band needs the classical flag") {
    model::Problem prob = model::parse_problem_string(kTemplate, "tmpl");
    prob.setting.sigma_low = prob.setting.sigma_high;
    CHECK_FALSE(model::validate_problem(prob.setting, prob.coeffs).ok());
    prob.setting.classical_reduction = true;
    CHECK(model::validate_problem(prob.setting, prob.coeffs).ok());
}

TEST_CASE("sigma y-independence declaration is enforced") {
    std::string lie = kTemplate;
    const std::size_t pos = lie.find("sigma = 1");
    lie.replace(pos, 9, "sigma = 1 + 0.05 * tanh(y)");
    model::Problem prob = model::parse_problem_string(lie, "lie");
    prob.coeffs.L2 = 0.2;
    CHECK_FALSE(prob.coeffs.sigma_depends_on_y);
    const model::ValidationReport rep = model::validate_problem(prob.setting, prob.coeffs);
    CHECK_FALSE(rep.ok());
}

TEST_CASE("catalog entries all validate and refinement does not change that") {
    for (const auto& entry : model::catalog()) {
        CAPTURE(entry.name);
        const model::ValidationReport rep =
            model::validate_problem(entry.setting, entry.coeffs, &entry.grid);
        if (!rep.ok()) MESSAGE(rep.summary());
        CHECK(rep.ok());
        model::DiscretizationGrid fine = entry.grid.refined();
        CHECK(model::validate_problem(entry.setting, entry.coeffs, &fine).ok());
    }
}

TEST_CASE("catalog contents match their contracts") {
    CHECK(model::catalog_entry("decoupled").coeffs.L2 == 0.0);

    const auto& lin = model::catalog_entry("classical-linear");
    CHECK(lin.setting.classical_reduction);
    CHECK(lin.setting.sigma_low == lin.setting.sigma_high);
    REQUIRE(lin.analytic.has_value());
    // Riccati closed form at the catalog horizon.
    const double y0 = lin.analytic->y0(1.0, lin.setting.horizon);
    CHECK(y0 == doctest::Approx(-2.5 * std::tanh(0.1 * 0.5)));

    const auto& mono = model::catalog_entry("monotone-pair");
    // phi non-decreasing, f and g non-increasing in x (sampled).
    for (int k = 0; k < 100; ++k) {
        const double a = -3.0 + 6.0 * k / 99.0;
        const double b = a + 0.05;
        const std::span<const double> sa(&a, 1), sb(&b, 1);
        CHECK(mono.coeffs.eval_phi(sb) >= mono.coeffs.eval_phi(sa) - 1e-12);
        CHECK(mono.coeffs.eval_f(0.1, sb, 0.3, -0.2) <= mono.coeffs.eval_f(0.1, sa, 0.3, -0.2) + 1e-12);
        CHECK(mono.coeffs.eval_g(0.1, sb, 0.3, -0.2) <= mono.coeffs.eval_g(0.1, sa, 0.3, -0.2) + 1e-12);
    }

    const auto& conv = model::catalog_entry("convex-terminal");
    const double x = 1.7;
    CHECK(conv.coeffs.eval_phi(std::span<const double>(&x, 1)) == doctest::Approx(x * x));
    CHECK(conv.coeffs.eval_f(0.0, std::span<const double>(&x, 1), 1.0, 1.0) == 0.0);
}

TEST_CASE("non-finite coefficients are rejected with the offending point") {
    std::string blow = kTemplate;
    const std::size_t pos = blow.find("f = 0.1 * y");
    blow.replace(pos, 11, "f = pow(0 - 1, 0.5)"); // NaN everywhere
    model::Problem prob = model::parse_problem_string(blow, "blow");
    const model::ValidationReport rep = model::validate_problem(prob.setting, prob.coeffs);
    CHECK_FALSE(rep.ok());
    bool named = false;
    for (const auto& c : rep.checks)
        if (!c.pass && c.detail.find("non-finite") != std::string::npos) named = true;
    CHECK(named);
}

} // TEST_SUITE
