#include "gfbsde/sde.hpp"

#include <cmath>

namespace gfbsde::sde {

kernels::YSourceView YInput::view() const {
    kernels::YSourceView v;
    switch (kind) {
    case Kind::zero: v.kind = 0; break;
    case Kind::constant:
        v.kind = 1;
        v.constant = constant;
        break;
    case Kind::lattice:
        v.kind = 2;
        v.lattice = lattice->view();
        break;
    case Kind::frozen:
        v.kind = 3;
        v.frozen = frozen->data();
        break;
    }
    return v;
}

std::string YInput::tag() const {
    switch (kind) {
    case Kind::zero: return "zero";
    case Kind::constant: return "constant";
    case Kind::lattice: return "lattice";
    case Kind::frozen: return "frozen";
    }
    return "?";
}

double YInput::value(long path, int t_idx, int n_steps, std::span<const double> x) const {
    switch (kind) {
    case Kind::zero: return 0.0;
    case Kind::constant: return constant;
    case Kind::lattice: return lattice->at(t_idx, x);
    case Kind::frozen: return (*frozen)[static_cast<std::size_t>(path * (n_steps + 1) + t_idx)];
    }
    return 0.0;
}

ForwardSolution euler_forward(const model::CoefficientSet& coeffs,
                              const model::DiscretizationGrid& grid,
                              const model::GSetting& setting, const gprocess::PathEnsemble& ensemble,
                              const YInput& y_input, std::span<const double> x0_override) {
    const int n = coeffs.n;
    const int n_steps = grid.n_steps;
    if (ensemble.n_steps != n_steps)
        throw DomainError("ensemble and grid disagree on the number of steps");

    ForwardSolution sol;
    sol.n_paths = ensemble.n_paths;
    sol.n_steps = n_steps;
    sol.n = n;
    sol.control = ensemble.control;
    sol.y_source = y_input.tag();
    sol.states.resize(static_cast<std::size_t>(ensemble.n_paths) *
                      static_cast<std::size_t>(n_steps + 1) * static_cast<std::size_t>(n));

    std::vector<double> times(static_cast<std::size_t>(n_steps));
    for (int i = 0; i < n_steps; ++i) times[static_cast<std::size_t>(i)] = grid.time_at(i);

    const double* x0 = x0_override.empty() ? setting.x0.data() : x0_override.data();
    std::vector<int> bad(static_cast<std::size_t>(ensemble.n_paths));

    kernels::ForwardJob job;
    job.coeffs = &coeffs;
    job.n = n;
    job.n_paths = ensemble.n_paths;
    job.n_steps = n_steps;
    job.dt = grid.dt();
    job.times = times.data();
    job.gamma = ensemble.control.gamma.data();
    job.increments = ensemble.increments.data();
    job.x0 = x0;
    job.y_source = y_input.view();
    job.states = sol.states.data();
    job.first_bad_step = bad.data();
    kernels::forward_sweep(job);

    for (long p = 0; p < ensemble.n_paths; ++p) {
        if (bad[static_cast<std::size_t>(p)] >= 0)
            throw NumericalAbort(bad[static_cast<std::size_t>(p)], p,
                                 "forward state became non-finite");
    }
    return sol;
}

StabilityVerdict sde_stability_check(const model::Problem& problem,
                                     const gprocess::ControlFamily& family, const YInput& y1,
                                     const YInput& y2, double p, long n_paths, std::uint64_t seed,
                                     const constants::Engine& engine) {
    const model::CoefficientSet& c = problem.coeffs;
    const model::GSetting& s = problem.setting;
    const model::DiscretizationGrid& grid = problem.grid;
    const int n = c.n;
    const int n_steps = grid.n_steps;
    const double dt = grid.dt();

    StabilityVerdict v;
    v.c1 = engine.c1(p, s.horizon, n, c.L1, s.sigma_high);

    std::vector<double> lhs_vals(static_cast<std::size_t>(n_paths));
    std::vector<double> rhs_vals(static_cast<std::size_t>(n_paths));
    std::vector<double> ses_lhs, ses_rhs;

    double bbuf[kMaxDim], hbuf[kMaxDim], sbuf[kMaxDim];
    double b2[kMaxDim], h2[kMaxDim], s2[kMaxDim];

    for (const auto& control : family.controls) {
        gprocess::PathEnsemble ens = gprocess::sample_paths(grid, s, control, n_paths, seed);
        ForwardSolution x1 = euler_forward(c, grid, s, ens, y1);
        ForwardSolution x2 = euler_forward(c, grid, s, ens, y2);

        for (long path = 0; path < n_paths; ++path) {
            double sup = 0.0;
            double int_bh = 0.0, int_s2 = 0.0;
            for (int i = 0; i <= n_steps; ++i) {
                double d2 = 0.0;
                const auto xa = x1.state(path, i);
                const auto xb = x2.state(path, i);
                for (int j = 0; j < n; ++j) {
                    const double d = xa[static_cast<std::size_t>(j)] - xb[static_cast<std::size_t>(j)];
                    d2 += d * d;
                }
                sup = std::fmax(sup, d2);
                if (i == n_steps) break;
                // data terms evaluated along X2 with the two y-processes
                const double t = grid.time_at(i);
                const double ya = y1.value(path, i, n_steps, x1.state(path, i));
                const double yb = y2.value(path, i, n_steps, xb);
                c.eval_vec(c.b, t, xb, ya, std::span<double>(bbuf, static_cast<std::size_t>(n)));
                c.eval_vec(c.h, t, xb, ya, std::span<double>(hbuf, static_cast<std::size_t>(n)));
                c.eval_vec(c.sigma, t, xb, ya, std::span<double>(sbuf, static_cast<std::size_t>(n)));
                c.eval_vec(c.b, t, xb, yb, std::span<double>(b2, static_cast<std::size_t>(n)));
                c.eval_vec(c.h, t, xb, yb, std::span<double>(h2, static_cast<std::size_t>(n)));
                c.eval_vec(c.sigma, t, xb, yb, std::span<double>(s2, static_cast<std::size_t>(n)));
                double nb = 0.0, nh = 0.0, ns = 0.0;
                for (int j = 0; j < n; ++j) {
                    const double db = bbuf[j] - b2[j];
                    const double dh = hbuf[j] - h2[j];
                    const double ds = sbuf[j] - s2[j];
                    nb += db * db;
                    nh += dh * dh;
                    ns += ds * ds;
                }
                int_bh += (std::sqrt(nb) + std::sqrt(nh)) * dt;
                int_s2 += ns * dt;
            }
            lhs_vals[static_cast<std::size_t>(path)] = std::pow(sup, p / 2.0);
            rhs_vals[static_cast<std::size_t>(path)] =
                std::pow(int_bh, p) + std::pow(int_s2, p / 2.0);
        }
        const MeanSE ml = mean_se(lhs_vals);
        const MeanSE mr = mean_se(rhs_vals);
        v.lhs_per_control.push_back(ml.mean);
        v.rhs_per_control.push_back(mr.mean);
        ses_lhs.push_back(ml.se);
        ses_rhs.push_back(mr.se);
    }

    const auto sl = gprocess::sup_over_family(v.lhs_per_control);
    const auto sr = gprocess::sup_over_family(v.rhs_per_control);
    v.lhs = sl.value;
    v.rhs = sr.value;
    v.argmax_lhs = sl.argmax;
    v.argmax_rhs = sr.argmax;
    v.se_budget = 5.0 * (ses_lhs[static_cast<std::size_t>(sl.argmax)] +
                         v.c1 * ses_rhs[static_cast<std::size_t>(sr.argmax)]);
    v.margin = v.c1 * v.rhs + v.se_budget - v.lhs;
    v.pass = v.lhs <= v.c1 * v.rhs + v.se_budget;
    return v;
}

} // namespace gfbsde::sde
