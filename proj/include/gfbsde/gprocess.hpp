// Discrete driving noise under volatility uncertainty: control families,
// path ensembles with exact quadratic variation, lattice and Monte Carlo
// evaluation of worst-case expectations.

#ifndef GFBSDE_GPROCESS_HPP
#define GFBSDE_GPROCESS_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gfbsde/kernels.hpp"
#include "gfbsde/model.hpp"

namespace gfbsde::gprocess {

using kernels::IncrementModel;

// Per-step squared volatility; admissible iff every entry sits in the band.
struct VolatilityControl {
    std::vector<double> gamma;
    std::string label;
};

// Finite stand-in for the full ambiguity set: always contains both constant
// extremes, optionally bang-bang switches at interior grid times. Worst-case
// estimates over the family are lower bounds for the true sup.
struct ControlFamily {
    std::vector<VolatilityControl> controls;

    std::size_t size() const { return controls.size(); }

    // Two constant extremes plus, per switch time, both switch orders.
    static ControlFamily make(const model::GSetting& setting, int n_steps, int n_switch_times);
};

struct PathEnsemble {
    long n_paths = 0;
    int n_steps = 0;
    std::vector<double> increments; // n_paths x n_steps
    std::vector<double> qv_inc;     // per step, exactly gamma_i * dt
    std::vector<double> qv;         // cumulative, size n_steps + 1
    VolatilityControl control;
    std::uint64_t seed = 0;
    IncrementModel model = IncrementModel::normal;

    double increment(long path, int step) const { return increments[path * n_steps + step]; }
};

// Deterministic in (seed, path index); the underlying unit draws do not
// depend on the control, so ensembles sampled with the same seed share
// random numbers across controls.
PathEnsemble sample_paths(const model::DiscretizationGrid& grid, const model::GSetting& setting,
                          const VolatilityControl& control, long n_paths, std::uint64_t seed,
                          IncrementModel model = IncrementModel::normal);

// Value carrier on a tensor lattice; piecewise-multilinear in space.
struct LatticeFunction {
    int n_dim = 1;
    int n_space = 0;
    int n_times = 0;
    std::vector<double> lo, hi;
    std::vector<double> values; // n_times x n_nodes

    long n_nodes() const {
        long m = 1;
        for (int d = 0; d < n_dim; ++d) m *= n_space;
        return m;
    }
    double* row(int t_idx) { return values.data() + static_cast<long>(t_idx) * n_nodes(); }
    const double* row(int t_idx) const {
        return values.data() + static_cast<long>(t_idx) * n_nodes();
    }
    double node_coord(int dim, int idx) const {
        return lo[static_cast<std::size_t>(dim)] +
               idx * (hi[static_cast<std::size_t>(dim)] - lo[static_cast<std::size_t>(dim)]) /
                   (n_space - 1);
    }
    void node_state(long node, std::span<double> out) const;
    double at(int t_idx, std::span<const double> x) const { return view().value(t_idx, x.data()); }

    kernels::LatticeView view() const {
        kernels::LatticeView v;
        v.values = values.data();
        v.n_times = n_times;
        v.n_nodes = n_nodes();
        v.n_dim = n_dim;
        v.n_space = n_space;
        v.lo = lo.data();
        v.hi = hi.data();
        return v;
    }

    static LatticeFunction make(const model::DiscretizationGrid& grid, int n_dim, int n_times);
};

// Worst-case expectation of payoff(B_T) by backward recursion on a lattice
// over the driving noise (started at 0). payoff is an expression in x.
double gexpect_lattice(const expr::Program& payoff, const model::GSetting& setting,
                       const model::DiscretizationGrid& grid);

struct McControlStat {
    double mean = 0.0;
    double se = 0.0;
};

struct GexpMcReport {
    std::vector<McControlStat> per_control;
    double value = 0.0; // max of means
    int argmax = 0;
    double se = 0.0; // standard error at the argmax control
};

GexpMcReport gexpect_mc(const expr::Program& payoff, const model::GSetting& setting,
                        const model::DiscretizationGrid& grid, const ControlFamily& family,
                        long n_paths, std::uint64_t seed,
                        IncrementModel model = IncrementModel::normal);

struct SupResult {
    double value = 0.0;
    int argmax = 0;
};

// Max and argmax; ties break to the lowest control index.
SupResult sup_over_family(std::span<const double> per_control);

} // namespace gfbsde::gprocess

#endif // GFBSDE_GPROCESS_HPP
