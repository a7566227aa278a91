#include <doctest.h>

#include <cmath>

#include "gfbsde/gprocess.hpp"

using namespace gfbsde;

namespace {

model::GSetting band_setting() {
    model::GSetting s;
    s.sigma_low = 0.8;
    s.sigma_high = 1.2;
    s.p = 2.0;
    s.beta = 4.0;
    s.n = 1;
    s.horizon = 1.0;
    s.x0 = {0.0};
    return s;
}

model::DiscretizationGrid b_grid(const model::GSetting& s, int n_steps, int n_space) {
    return model::default_grid(s, n_steps, n_space);
}

expr::Program payoff(const std::string& src) {
    return expr::parse(src, expr::single_var("x"));
}

} // namespace

TEST_SUITE("gprocess") {

TEST_CASE("control family always contains both extremes") {
    const model::GSetting s = band_setting();
    const auto fam = gprocess::ControlFamily::make(s, 16, 2);
    REQUIRE(fam.size() == 6);
    for (double g : fam.controls[0].gamma) CHECK(g == doctest::Approx(0.64));
    for (double g : fam.controls[1].gamma) CHECK(g == doctest::Approx(1.44));
    // switched controls stay inside the band
    for (const auto& c : fam.controls)
        for (double g : c.gamma) {
            CHECK(g >= 0.64);
            CHECK(g <= 1.44);
        }
}

TEST_CASE("sampling determinism and the quadratic-variation identity") {
    const model::GSetting s = band_setting();
    const auto grid = b_grid(s, 32, 65);
    const auto fam = gprocess::ControlFamily::make(s, 32, 1);
    const auto& control = fam.controls[2];

    const auto e1 = gprocess::sample_paths(grid, s, control, 500, 42);
    const auto e2 = gprocess::sample_paths(grid, s, control, 500, 42);
    CHECK(e1.increments == e2.increments); // bitwise

    const double dt = grid.dt();
    for (int i = 0; i < 32; ++i) {
        CHECK(e1.qv_inc[static_cast<std::size_t>(i)] ==
              control.gamma[static_cast<std::size_t>(i)] * dt); // exact product
        CHECK(e1.qv_inc[static_cast<std::size_t>(i)] >= 0.64 * dt);
        CHECK(e1.qv_inc[static_cast<std::size_t>(i)] <= 1.44 * dt);
    }
    CHECK(e1.qv[32] == doctest::Approx(e1.qv[0] + 0.64 * dt * 16 + 1.44 * dt * 16));

    // out-of-band control is rejected
    gprocess::VolatilityControl bad = control;
    bad.gamma[3] = 2.0;
    CHECK_THROWS_AS(gprocess::sample_paths(grid, s, bad, 10, 1), DomainError);
}

TEST_CASE("sample moments stay within five standard errors") {
    const model::GSetting s = band_setting();
    const auto grid = b_grid(s, 16, 65);
    gprocess::VolatilityControl high{std::vector<double>(16, 1.44), "high"};
    const long n = 100000;
    const auto ens = gprocess::sample_paths(grid, s, high, n, 7);
    std::vector<double> bT(static_cast<std::size_t>(n));
    for (long p = 0; p < n; ++p) {
        double acc = 0.0;
        for (int i = 0; i < 16; ++i) acc += ens.increment(p, i);
        bT[static_cast<std::size_t>(p)] = acc;
    }
    const MeanSE ms = mean_se(bT);
    CHECK(std::abs(ms.mean) <= 5.0 * ms.se);
    // variance close to sigma_high^2 T
    double var = 0.0;
    for (double v : bT) var += (v - ms.mean) * (v - ms.mean);
    var /= static_cast<double>(n - 1);
    CHECK(var == doctest::Approx(1.44).epsilon(0.05));
}

TEST_CASE("lattice worst-case expectation of the three analytic payoffs") {
    const model::GSetting s = band_setting();
    const auto grid = b_grid(s, 200, 3001);
    const double id = gprocess::gexpect_lattice(payoff("x"), s, grid);
    CHECK(std::abs(id) < 1e-12);
    const double sq = gprocess::gexpect_lattice(payoff("x * x"), s, grid);
    CHECK(sq == doctest::Approx(1.44).epsilon(1e-3));
    const double nsq = gprocess::gexpect_lattice(payoff("0 - x * x"), s, grid);
    CHECK(nsq == doctest::Approx(-0.64).epsilon(1e-3));
}

TEST_CASE("lattice translation invariance and monotonicity") {
    const model::GSetting s = band_setting();
    const auto grid = b_grid(s, 40, 401);
    const double base = gprocess::gexpect_lattice(payoff("tanh(x)"), s, grid);
    const double shifted = gprocess::gexpect_lattice(payoff("tanh(x) + 2.5"), s, grid);
    CHECK(shifted - base == doctest::Approx(2.5).epsilon(1e-12));
    const double bigger = gprocess::gexpect_lattice(payoff("tanh(x) + max(x, 0)"), s, grid);
    CHECK(bigger >= base - 1e-12);
}

TEST_CASE("degenerate band reduces to the classical expectation") {
    model::GSetting s = band_setting();
    s.sigma_low = s.sigma_high = 1.0;
    s.classical_reduction = true;
    const auto grid = b_grid(s, 64, 2001);
    const double sq = gprocess::gexpect_lattice(payoff("x * x"), s, grid);
    CHECK(sq == doctest::Approx(1.0).epsilon(1e-3));
    // odd payoff stays zero
    CHECK(std::abs(gprocess::gexpect_lattice(payoff("x"), s, grid)) < 1e-12);
}

TEST_CASE("gauss-hermite quadrature reproduces the two-point analytics") {
    const model::GSetting s = band_setting();
    auto grid = b_grid(s, 64, 2001);
    grid.quadrature = model::Quadrature::gauss_hermite_3;
    CHECK(gprocess::gexpect_lattice(payoff("x * x"), s, grid) ==
          doctest::Approx(1.44).epsilon(2e-3));
    grid.quadrature = model::Quadrature::gauss_hermite_5;
    CHECK(gprocess::gexpect_lattice(payoff("0 - x * x"), s, grid) ==
          doctest::Approx(-0.64).epsilon(2e-3));
}

TEST_CASE("monte carlo estimator is a lower bound attained by the right control") {
    const model::GSetting s = band_setting();
    const auto grid = b_grid(s, 100, 65);
    const auto fam = gprocess::ControlFamily::make(s, 100, 1);
    const auto rep = gprocess::gexpect_mc(payoff("x * x"), s, grid, fam, 40000, 11);
    CHECK(rep.argmax == 1); // the constant top-of-band control
    CHECK(rep.value == doctest::Approx(1.44).epsilon(0.02));
    const double lattice = gprocess::gexpect_lattice(payoff("x * x"), s, b_grid(s, 200, 2001));
    CHECK(rep.value <= lattice + 5.0 * rep.se + 2e-3);

    // singleton family: plain classical Monte Carlo
    gprocess::ControlFamily lowfam;
    lowfam.controls.push_back(fam.controls[0]);
    const auto low = gprocess::gexpect_mc(payoff("x * x"), s, grid, lowfam, 40000, 11);
    CHECK(low.value == doctest::Approx(0.64).epsilon(0.02));
}

TEST_CASE("sup_over_family tie-breaking") {
    CHECK_THROWS_AS(gprocess::sup_over_family({}), DomainError);
    const std::vector<double> one{3.5};
    auto r = gprocess::sup_over_family(one);
    CHECK(r.argmax == 0);
    CHECK(r.value == 3.5);
    const std::vector<double> flat{2.0, 2.0, 2.0};
    CHECK(gprocess::sup_over_family(flat).argmax == 0);
    const std::vector<double> rising{1.0, 3.0, 2.0};
    CHECK(gprocess::sup_over_family(rising).argmax == 1);
}

TEST_CASE("bdg-type moment bound at p = 2") {
    // E[sup_t |B_t|^2] under the worst constant control vs the band bound
    // sigma_high^2 C(2) T with C(2) = 20.
    const model::GSetting s = band_setting();
    const auto grid = b_grid(s, 64, 65);
    gprocess::VolatilityControl high{std::vector<double>(64, 1.44), "high"};
    const auto ens = gprocess::sample_paths(grid, s, high, 20000, 3);
    std::vector<double> sup2(20000);
    for (long p = 0; p < 20000; ++p) {
        double b = 0.0, m = 0.0;
        for (int i = 0; i < 64; ++i) {
            b += ens.increment(p, i);
            m = std::fmax(m, std::abs(b));
        }
        sup2[static_cast<std::size_t>(p)] = m * m;
    }
    const MeanSE ms = mean_se(sup2);
    CHECK(ms.mean + 5.0 * ms.se <= 1.44 * 20.0 * 1.0);
}

} // TEST_SUITE
