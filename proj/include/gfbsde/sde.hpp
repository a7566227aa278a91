// Forward Euler solver for the controlled state equation, plus the empirical
// stability check against the explicit stability constant.

#ifndef GFBSDE_SDE_HPP
#define GFBSDE_SDE_HPP

#include <string>
#include <vector>

#include "gfbsde/constants.hpp"
#include "gfbsde/gprocess.hpp"
#include "gfbsde/model.hpp"

namespace gfbsde::sde {

// Exogenous y-process feeding the forward coefficients. A lattice source is
// read at the current state by interpolation; a frozen source supplies values
// per (path, time).
struct YInput {
    enum class Kind { zero, constant, lattice, frozen };
    Kind kind = Kind::zero;
    double constant = 0.0;
    const gprocess::LatticeFunction* lattice = nullptr;
    const std::vector<double>* frozen = nullptr; // n_paths x (n_steps + 1)

    static YInput make_zero() { return YInput{}; }
    static YInput make_constant(double c) {
        YInput y;
        y.kind = Kind::constant;
        y.constant = c;
        return y;
    }
    static YInput make_lattice(const gprocess::LatticeFunction* fn) {
        YInput y;
        y.kind = Kind::lattice;
        y.lattice = fn;
        return y;
    }
    static YInput make_frozen(const std::vector<double>* values) {
        YInput y;
        y.kind = Kind::frozen;
        y.frozen = values;
        return y;
    }

    kernels::YSourceView view() const;
    std::string tag() const;
    // Value of the y-process along a realized path.
    double value(long path, int t_idx, int n_steps, std::span<const double> x) const;
};

struct ForwardSolution {
    long n_paths = 0;
    int n_steps = 0;
    int n = 1;
    std::vector<double> states; // n_paths x (n_steps+1) x n
    gprocess::VolatilityControl control;
    std::string y_source;

    std::span<const double> state(long path, int t_idx) const {
        return std::span<const double>(
            states.data() + (path * static_cast<long>(n_steps + 1) + t_idx) * n,
            static_cast<std::size_t>(n));
    }
};

// One Euler sweep over the ensemble. Throws NumericalAbort naming the first
// (step, path) that went non-finite.
ForwardSolution euler_forward(const model::CoefficientSet& coeffs,
                              const model::DiscretizationGrid& grid,
                              const model::GSetting& setting, const gprocess::PathEnsemble& ensemble,
                              const YInput& y_input, std::span<const double> x0_override = {});

struct StabilityVerdict {
    bool pass = false;
    double lhs = 0.0;       // worst-case mean of sup_t |X1 - X2|^p
    double rhs = 0.0;       // worst-case mean of the data bracket
    double c1 = 0.0;
    double se_budget = 0.0; // 5 * (se_lhs + c1 * se_rhs)
    double margin = 0.0;    // c1*rhs + budget - lhs
    int argmax_lhs = 0, argmax_rhs = 0;
    std::vector<double> lhs_per_control, rhs_per_control;
};

// Empirical check of the forward stability estimate: both sides estimated by
// worst-case-over-family Monte Carlo with common random numbers.
StabilityVerdict sde_stability_check(const model::Problem& problem,
                                     const gprocess::ControlFamily& family, const YInput& y1,
                                     const YInput& y2, double p, long n_paths, std::uint64_t seed,
                                     const constants::Engine& engine);

} // namespace gfbsde::sde

#endif // GFBSDE_SDE_HPP
