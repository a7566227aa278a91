// Coupled solver: alternate backward dynamic programming against the flow
// closed by the previous stage's value function with forward re-simulation,
// trace the stage distances against the certified geometric envelope, and
// run the perturbation experiments.

#ifndef GFBSDE_PICARD_HPP
#define GFBSDE_PICARD_HPP

#include <optional>
#include <string>
#include <vector>

#include "gfbsde/bsde.hpp"
#include "gfbsde/constants.hpp"

namespace gfbsde::picard {

struct TraceRow {
    int m = 0;
    double d_x = 0.0;     // worst-case mean of sup_t |X(m) - X(m-1)|^{p'}
    double d_y = 0.0;     // same for the value functions (0 for m = 1)
    double ratio = 0.0;   // d_x(m) / d_x(m-1), 0 for m = 1
    double envelope = 0.0; // lambda^{m-1} * d_x(1)
};

struct ContractionTrace {
    std::vector<TraceRow> rows;
    double p_used = 2.0;         // exponent of the distance estimates
    double contraction_factor = 0.0; // certified factor at p_used
};

enum class Backend { lattice, paths };

struct PicardOptions {
    double tol = 1e-4;
    int max_iter = 50;
    std::uint64_t seed = 0x9f1d5u;
    long n_paths = 2000;
    int family_switches = 2;
    bool force = false;
    std::optional<double> p_prime;
    const gprocess::LatticeFunction* initial_policy = nullptr; // overrides stage one
    Backend backend = Backend::lattice;
    int regression_degree = 3;
};

struct FBSDESolution {
    bsde::BackwardSolution backward;
    double y0 = 0.0;
    ContractionTrace trace;
    bool converged = false;
    int iterations = 0;
    std::string certificate;
    bool forced = false;

    // Forward ensemble under the family control whose mean terminal K is
    // closest to zero (the reference-measure candidate).
    sde::ForwardSolution x_solution;
    int reference_control = 0;
    double k_reference_mean = 0.0;
    double k_max_positive_increment = 0.0;
    double k_tol = 0.0;
    std::vector<double> k_terminal_means; // per control
};

FBSDESolution picard_solve(const model::Problem& problem, const gprocess::ControlFamily& family,
                           const PicardOptions& opts, const constants::Engine& engine);

// The exponent-below-two variant: requires sigma independent of y and the
// matching contraction certificate; otherwise identical output contract.
FBSDESolution picard_solve_p_lt2(const model::Problem& problem,
                                 const gprocess::ControlFamily& family, const PicardOptions& opts,
                                 const constants::Engine& engine);

struct ContractionReportRow {
    int m = 0;
    double d_x = 0.0;
    double envelope = 0.0;
    bool flagged = false;
};

struct ContractionReport {
    std::vector<ContractionReportRow> rows;
    int n_flagged = 0;
};

// Tabulates the trace against the geometric envelope; rows where the
// observed distance exceeds envelope + budget are flagged.
ContractionReport contraction_report(const ContractionTrace& trace, double error_budget);

struct PerturbationReport {
    double lhs = 0.0, rhs = 0.0, ratio = 0.0;
    double lhs_fine = 0.0, rhs_fine = 0.0, ratio_fine = 0.0;
    bool pass = false; // ratios finite and at most doubling under refinement
};

// Fitted-constant experiment for a pair of neighbouring problems (the
// estimates assert existence only, so the ratio is reported, not asserted
// against a formula). Solves both problems on the base grid and once
// refined.
PerturbationReport perturbation_experiment(const model::Problem& a, const model::Problem& b,
                                           double p, const PicardOptions& opts,
                                           const constants::Engine& engine);

} // namespace gfbsde::picard

#endif // GFBSDE_PICARD_HPP
