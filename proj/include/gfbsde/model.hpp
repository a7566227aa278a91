// Problem definition: volatility band settings, coefficient functions with
// declared Lipschitz bounds, discretization grids, validation, and the
// built-in problem catalog.

#ifndef GFBSDE_MODEL_HPP
#define GFBSDE_MODEL_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gfbsde/common.hpp"
#include "gfbsde/expr.hpp"

namespace gfbsde::model {

// Volatility band and exponent data. The band is strict (sigma_low <
// sigma_high) unless classical_reduction is set, in which case the band may
// collapse and the driving noise becomes a scaled classical Brownian motion.
struct GSetting {
    double sigma_low = 0.0;
    double sigma_high = 0.0;
    double p = 2.0;
    double beta = 4.0;
    int n = 1;
    double horizon = 1.0; // T
    std::vector<double> x0;
    bool classical_reduction = false;
};

// The six problem functions with their declared Lipschitz data. The declared
// constants follow the grouping of the standing assumptions:
//   sum_j-wise |db_j|+|dh_j|+|dsigma_j| <= L1|dx| + L2|dy|   (per component j)
//   |df|+|dg| <= L3|dx| + L1(|dy|+|dz|)
//   |dphi|    <= L3|dx|
struct CoefficientSet {
    int n = 1;
    std::vector<expr::Program> b, h, sigma; // n components each
    expr::Program f, g, phi;
    double L1 = 0.0, L2 = 0.0, L3 = 0.0;
    bool sigma_depends_on_y = false;

    // Convenience evaluators. vars layout: [t, x1..xn, y, z].
    void eval_vec(const std::vector<expr::Program>& fn, double t, std::span<const double> x,
                  double y, std::span<double> out) const;
    double eval_f(double t, std::span<const double> x, double y, double z) const;
    double eval_g(double t, std::span<const double> x, double y, double z) const;
    double eval_phi(std::span<const double> x) const;
};

enum class Quadrature { two_point, gauss_hermite_3, gauss_hermite_5 };

struct DiscretizationGrid {
    int n_steps = 64;
    double horizon = 1.0;
    std::vector<double> space_min, space_max; // per state coordinate
    int n_space = 257;                        // lattice nodes per coordinate
    Quadrature quadrature = Quadrature::two_point;

    double dt() const { return horizon / n_steps; }
    double time_at(int i) const { return horizon * static_cast<double>(i) / n_steps; }
    double dx(int dim) const {
        return (space_max[static_cast<std::size_t>(dim)] - space_min[static_cast<std::size_t>(dim)]) /
               (n_space - 1);
    }
    DiscretizationGrid refined() const {
        DiscretizationGrid g = *this;
        g.n_steps *= 2;
        return g;
    }
};

// Spatial working box used for validation sampling and default lattices:
// x0 +- 6*sigma_high*sqrt(T) per coordinate.
void default_box(const GSetting& setting, std::vector<double>& lo, std::vector<double>& hi);

DiscretizationGrid default_grid(const GSetting& setting, int n_steps = 64, int n_space = 257);

// Optional closed forms attached to catalog entries.
struct AnalyticReference {
    std::string description;
    std::function<double(double x0, double T)> y0;
    std::function<double(double t, double x, double T)> value_fn; // u(t,x), n = 1
    std::function<double(double t, double x, double T)> z_fn;
    // Exact X_T for the frozen-y forward equation, classical band:
    // arguments (x0, B_T, <B>_T).
    std::function<double(double x0, double b_T, double qv_T)> forward_xT;
};

struct Problem {
    std::string name;
    GSetting setting;
    CoefficientSet coeffs;
    DiscretizationGrid grid;
    std::optional<AnalyticReference> analytic;
};

using ProblemCatalogEntry = Problem;

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct ValidationReport {
    std::vector<CheckResult> checks;
    bool ok() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return true;
    }
    std::string summary() const;
};

struct AuditOptions {
    int n_samples = 10000;
    std::uint64_t seed = 0x5eedau;
    double rel_slack = 1e-9;
};

// Checks setting invariants and runs the randomized Lipschitz audit on the
// working box. Quotients are sampled from a half local / half global mix of
// point pairs; a quotient above the declared constant (beyond rel_slack) is a
// hard failure and reports the witness pair.
ValidationReport validate_problem(const GSetting& setting, const CoefficientSet& coeffs,
                                  const DiscretizationGrid* grid = nullptr,
                                  const AuditOptions& opts = {});

// Built-in problems. Every entry passes validate_problem; see problems/ for
// the equivalent text configs.
const std::vector<ProblemCatalogEntry>& catalog();
const ProblemCatalogEntry& catalog_entry(const std::string& name);

// Problem-file parser ([setting] / [coefficients] / [grid] sections; see
// README for the grammar). Errors carry file line/column.
Problem parse_problem_string(const std::string& text, const std::string& name);
Problem parse_problem_file(const std::string& path);

} // namespace gfbsde::model

#endif // GFBSDE_MODEL_HPP
