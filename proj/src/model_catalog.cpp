// Built-in problem catalog. Entries are defined as text configs so the same
// definitions can be shipped as files under problems/.

#include <cmath>
#include <stdexcept>

#include "gfbsde/model.hpp"

namespace gfbsde::model {

namespace {

constexpr const char* kDecoupled = R"(# Forward coefficients ignore y entirely (L2 = 0).
[setting]
sigma_low = 0.9
sigma_high = 1.1
p = 2
beta = 4
n = 1
T = 0.5
x0 = 1.0

[coefficients]
b = 0.04 * tanh(x)
h = 0.01 * tanh(x)
sigma = 1 + 0.05 * tanh(x)
f = 0.1 * tanh(x) + 0.05 * y
g = 0.05 * tanh(x)
phi = 0.2 * tanh(x)
L1 = 0.1
L2 = 0.0
L3 = 0.2
sigma_depends_on_y = false

[grid]
n_steps = 64
n_space = 257
)";

constexpr const char* kClassicalLinear = R"(# Degenerate band, linear coefficients; Y0 known in closed form.
[setting]
sigma_low = 1.0
sigma_high = 1.0
classical_reduction = true
p = 2
beta = 4
n = 1
T = 0.5
x0 = 1.0

[coefficients]
b = 0.04 * y
h = 0
sigma = 0.3 * x
f = 0.25 * x
g = 0
phi = 0
L1 = 0.3
L2 = 0.04
L3 = 0.25
sigma_depends_on_y = false

[grid]
n_steps = 64
n_space = 321
)";

constexpr const char* kWeaklyCoupled = R"(# Nonlinear problem with coupling product below the certified threshold.
[setting]
sigma_low = 0.9
sigma_high = 1.1
p = 2
beta = 4
n = 1
T = 0.5
x0 = 1.0

[coefficients]
b = 0.02 * tanh(y)
h = 0
sigma = 1 + 0.03 * tanh(x) + 0.02 * tanh(y)
f = 0.03 * tanh(x) + 0.1 * tanh(y) - 0.05 * z
g = 0.02 * tanh(x)
phi = 0.05 * max(x - 1, 0)
L1 = 0.1
L2 = 0.05
L3 = 0.05
sigma_depends_on_y = true

[grid]
n_steps = 64
n_space = 257
)";

constexpr const char* kWeaklyCoupledP15 = R"(# Exponent p in (1,2); sigma independent of y as that regime requires.
[setting]
sigma_low = 0.95
sigma_high = 1.05
p = 1.5
beta = 2
n = 1
T = 0.25
x0 = 0.5

[coefficients]
b = 0.04 * tanh(y)
h = 0
sigma = 1 + 0.05 * tanh(x)
f = 0.2 * tanh(x) + 0.05 * y
g = 0
phi = 0.25 * tanh(x)
L1 = 0.05
L2 = 0.04
L3 = 0.25
sigma_depends_on_y = false

[grid]
n_steps = 64
n_space = 257
)";

constexpr const char* kMonotonePair = R"(# Monotone data: phi non-decreasing, f and g non-increasing in x.
[setting]
sigma_low = 0.95
sigma_high = 1.05
p = 2
beta = 4
n = 1
T = 0.25
x0 = 0.0

[coefficients]
b = 0.01 * tanh(y)
h = 0
sigma = 1 + 0.05 * tanh(x)
f = -0.2 * tanh(x) + 0.03 * y + 0.02 * z
g = -0.05 * tanh(x)
phi = 0.15 * tanh(x)
L1 = 0.05
L2 = 0.01
L3 = 0.25
sigma_depends_on_y = false

[grid]
n_steps = 64
n_space = 257
)";

constexpr const char* kConvexTerminal = R"(# Terminal value |x|^2 with zero drivers; worst case sits at the top of the band.
[setting]
sigma_low = 0.8
sigma_high = 1.2
p = 2
beta = 4
n = 1
T = 1.0
x0 = 0.0

[coefficients]
b = 0
h = 0
sigma = 1
f = 0
g = 0
phi = x * x
L1 = 0.1
L2 = 0.0
L3 = 15.0
sigma_depends_on_y = false

[grid]
n_steps = 200
n_space = 3001
)";

std::vector<ProblemCatalogEntry> build_catalog() {
    std::vector<ProblemCatalogEntry> out;

    out.push_back(parse_problem_string(kDecoupled, "decoupled"));

    {
        Problem p = parse_problem_string(kClassicalLinear, "classical-linear");
        // Value function u(t,x) = P(t) x with P solving the scalar Riccati
        // equation P' = q - c P^2, P(T) = 0, for b = c*y and f = q*x:
        //   P(t) = -sqrt(q/c) * tanh(sqrt(q c) (T - t)).
        const double c = 0.04, q = 0.25, svol = 0.3;
        const double amp = std::sqrt(q / c), rate = std::sqrt(q * c);
        AnalyticReference ar;
        ar.description = "linear Riccati closed form";
        ar.y0 = [amp, rate](double x0, double T) { return -amp * std::tanh(rate * T) * x0; };
        ar.value_fn = [amp, rate](double t, double x, double T) {
            return -amp * std::tanh(rate * (T - t)) * x;
        };
        ar.z_fn = [amp, rate, svol](double t, double x, double T) {
            return -amp * std::tanh(rate * (T - t)) * svol * x;
        };
        ar.forward_xT = [svol](double x0, double b_T, double qv_T) {
            return x0 * std::exp(svol * b_T - 0.5 * svol * svol * qv_T);
        };
        p.analytic = ar;
        out.push_back(std::move(p));
    }

    out.push_back(parse_problem_string(kWeaklyCoupled, "weakly-coupled"));
    out.push_back(parse_problem_string(kWeaklyCoupledP15, "weakly-coupled-p15"));
    out.push_back(parse_problem_string(kMonotonePair, "monotone-pair"));

    {
        Problem p = parse_problem_string(kConvexTerminal, "convex-terminal");
        AnalyticReference ar;
        ar.description = "worst-case heat value x^2 + sigma_high^2 (T - t)";
        ar.y0 = [](double x0, double T) { return x0 * x0 + 1.2 * 1.2 * T; };
        ar.value_fn = [](double t, double x, double T) { return x * x + 1.2 * 1.2 * (T - t); };
        ar.z_fn = [](double, double x, double) { return 2.0 * x; };
        p.analytic = ar;
        out.push_back(std::move(p));
    }

    return out;
}

} // namespace

const std::vector<ProblemCatalogEntry>& catalog() {
    static const std::vector<ProblemCatalogEntry> entries = build_catalog();
    return entries;
}

const ProblemCatalogEntry& catalog_entry(const std::string& name) {
    for (const auto& e : catalog())
        if (e.name == name) return e;
    throw Error("no catalog entry named '" + name + "'");
}

} // namespace gfbsde::model
