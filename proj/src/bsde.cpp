#include "gfbsde/bsde.hpp"

#include <cmath>

namespace gfbsde::bsde {

namespace {

void band_ends(const model::GSetting& s, double& glo, double& ghi) {
    glo = s.sigma_low * s.sigma_low;
    ghi = s.sigma_high * s.sigma_high;
}

} // namespace

BackwardSolution dp_backward(const model::CoefficientSet& coeffs, const model::GSetting& setting,
                             const model::DiscretizationGrid& grid, const sde::YInput& y_policy,
                             std::span<const double> x0_for_y0) {
    const int n = coeffs.n;
    const int n_steps = grid.n_steps;

    BackwardSolution sol;
    sol.y_fn = gprocess::LatticeFunction::make(grid, n, n_steps + 1);
    sol.z_fn = gprocess::LatticeFunction::make(grid, n, n_steps + 1);
    const long nodes = sol.y_fn.n_nodes();

    // Terminal row: phi on the nodes.
    {
        double* term = sol.y_fn.row(n_steps);
        double xbuf[kMaxDim];
        for (long k = 0; k < nodes; ++k) {
            sol.y_fn.node_state(k, std::span<double>(xbuf, static_cast<std::size_t>(n)));
            term[k] = coeffs.eval_phi(std::span<const double>(xbuf, static_cast<std::size_t>(n)));
            if (!std::isfinite(term[k]))
                throw NumericalAbort(n_steps, k, "terminal condition non-finite on lattice");
        }
    }

    double glo, ghi;
    band_ends(setting, glo, ghi);
    const kernels::QuadratureRule rule = kernels::quadrature_rule(grid.quadrature);

    kernels::LatticeView next_view = sol.y_fn.view();
    next_view.n_times = 1;

    for (int i = n_steps - 1; i >= 0; --i) {
        next_view.values = sol.y_fn.row(i + 1);
        kernels::BackwardStepJob job;
        job.coeffs = &coeffs;
        job.n = n;
        job.n_nodes = nodes;
        job.n_space = grid.n_space;
        job.lo = sol.y_fn.lo.data();
        job.hi = sol.y_fn.hi.data();
        job.next_values = sol.y_fn.row(i + 1);
        job.next_view = next_view;
        job.y_policy = y_policy.view();
        job.step = i;
        job.t = grid.time_at(i);
        job.dt = grid.dt();
        job.gamma_low = glo;
        job.gamma_high = ghi;
        job.n_quad = rule.n;
        job.quad_x = rule.x;
        job.quad_w = rule.w;
        job.has_drivers = true;
        job.out_y = sol.y_fn.row(i);
        job.out_z = sol.z_fn.row(i);
        kernels::backward_step(job);
        for (long k = 0; k < nodes; ++k)
            if (!std::isfinite(sol.y_fn.row(i)[k]))
                throw NumericalAbort(i, k, "backward value non-finite on lattice");
    }
    // Terminal z row mirrors the last computed one (only rows < n_steps are
    // read by path integrals).
    if (n_steps >= 1) {
        const double* zsrc = sol.z_fn.row(n_steps - 1);
        double* zdst = sol.z_fn.row(n_steps);
        for (long k = 0; k < nodes; ++k) zdst[k] = zsrc[k];
    }

    const std::span<const double> x0 =
        x0_for_y0.empty() ? std::span<const double>(setting.x0) : x0_for_y0;
    sol.y0 = sol.y_fn.at(0, x0);
    return sol;
}

std::vector<double> scalar_backward(const model::CoefficientSet& coeffs,
                                    const model::GSetting& setting,
                                    const model::DiscretizationGrid& grid,
                                    std::span<const double> x_fixed) {
    const int n_steps = grid.n_steps;
    double glo, ghi;
    band_ends(setting, glo, ghi);
    std::vector<double> out(static_cast<std::size_t>(n_steps) + 1);
    out[static_cast<std::size_t>(n_steps)] = coeffs.eval_phi(x_fixed);
    const double dt = grid.dt();
    for (int i = n_steps - 1; i >= 0; --i) {
        const double next = out[static_cast<std::size_t>(i) + 1];
        const double t = grid.time_at(i);
        double best = 0.0;
        bool first = true;
        for (const double gamma : {glo, ghi}) {
            const double val = next - coeffs.eval_f(t, x_fixed, next, 0.0) * dt -
                               coeffs.eval_g(t, x_fixed, next, 0.0) * gamma * dt;
            if (first || val >= best) best = val;
            first = false;
            if (glo == ghi) break;
        }
        out[static_cast<std::size_t>(i)] = best;
    }
    return out;
}

gprocess::LatticeFunction broadcast_rows(const model::DiscretizationGrid& grid, int n_dim,
                                         std::span<const double> row_values) {
    gprocess::LatticeFunction fn =
        gprocess::LatticeFunction::make(grid, n_dim, static_cast<int>(row_values.size()));
    const long nodes = fn.n_nodes();
    for (int i = 0; i < fn.n_times; ++i) {
        double* row = fn.row(i);
        for (long k = 0; k < nodes; ++k) row[k] = row_values[static_cast<std::size_t>(i)];
    }
    return fn;
}

KPaths k_extract(const BackwardSolution& solution, const model::CoefficientSet& coeffs,
                 const model::DiscretizationGrid& grid, const gprocess::PathEnsemble& ensemble,
                 const sde::ForwardSolution& forward) {
    if (forward.n_steps != grid.n_steps || ensemble.n_steps != grid.n_steps)
        throw DomainError("k_extract inputs disagree on the grid");
    KPaths out;
    out.n_paths = forward.n_paths;
    out.n_steps = forward.n_steps;
    out.k.resize(static_cast<std::size_t>(out.n_paths) * static_cast<std::size_t>(out.n_steps + 1));

    std::vector<double> times(static_cast<std::size_t>(grid.n_steps));
    for (int i = 0; i < grid.n_steps; ++i) times[static_cast<std::size_t>(i)] = grid.time_at(i);
    std::vector<double> max_pos(static_cast<std::size_t>(out.n_paths));
    std::vector<double> y_sup(static_cast<std::size_t>(out.n_paths));
    std::vector<double> z_sup(static_cast<std::size_t>(out.n_paths));

    kernels::KExtractJob job;
    job.coeffs = &coeffs;
    job.n = forward.n;
    job.n_paths = forward.n_paths;
    job.n_steps = forward.n_steps;
    job.dt = grid.dt();
    job.times = times.data();
    job.gamma = ensemble.control.gamma.data();
    job.increments = ensemble.increments.data();
    job.states = forward.states.data();
    job.y_fn = solution.y_fn.view();
    job.z_fn = solution.z_fn.view();
    job.k_out = out.k.data();
    job.max_pos_inc = max_pos.data();
    job.abs_y_sup = y_sup.data();
    job.abs_z_sup = z_sup.data();
    kernels::k_extract(job);

    out.max_positive_increment = 0.0;
    for (double m : max_pos) out.max_positive_increment = std::fmax(out.max_positive_increment, m);
    std::vector<double> kT(static_cast<std::size_t>(out.n_paths));
    for (long p = 0; p < out.n_paths; ++p)
        kT[static_cast<std::size_t>(p)] =
            out.k[static_cast<std::size_t>(p) * (out.n_steps + 1) + out.n_steps];
    out.k_terminal = mean_se(kT);
    // K is extracted through both lattice readouts, so its noise scale
    // carries |Y| and |Z| alike.
    out.path_norm_scale = (pairwise_sum(y_sup) + pairwise_sum(z_sup)) /
                          static_cast<double>(out.n_paths);
    out.tol_k = 3.0 * std::sqrt(grid.dt()) * std::fmax(out.path_norm_scale, 1e-12);
    return out;
}

AprioriVerdict bsde_apriori_check(const model::Problem& problem, const XFlowSpec& flow1,
                                  const XFlowSpec& flow2, double p,
                                  const gprocess::ControlFamily& family, long n_paths,
                                  std::uint64_t seed, const constants::Engine& engine) {
    const model::CoefficientSet& c = problem.coeffs;
    const model::GSetting& s = problem.setting;
    const int n = c.n;

    // Per-flow grids recentred so each lattice covers its own start point.
    auto flow_grid = [&](const XFlowSpec& fl) {
        model::DiscretizationGrid g = problem.grid;
        for (int j = 0; j < n; ++j) {
            const double shift = fl.x0[static_cast<std::size_t>(j)] - s.x0[static_cast<std::size_t>(j)];
            g.space_min[static_cast<std::size_t>(j)] += shift;
            g.space_max[static_cast<std::size_t>(j)] += shift;
        }
        return g;
    };
    const model::DiscretizationGrid grid1 = flow_grid(flow1);
    const model::DiscretizationGrid grid2 = flow_grid(flow2);

    BackwardSolution u1 = dp_backward(c, s, grid1, flow1.y_input, flow1.x0);
    BackwardSolution u2 = dp_backward(c, s, grid2, flow2.y_input, flow2.x0);

    AprioriVerdict v;
    v.y0_1 = u1.y0;
    v.y0_2 = u2.y0;
    v.c2 = engine.c2(p, s.horizon, c.L1, s.sigma_high, s.sigma_low);
    v.lhs = std::pow(std::abs(u1.y0 - u2.y0), p);

    const int n_steps = problem.grid.n_steps;
    const double dt = problem.grid.dt();
    std::vector<double> vals(static_cast<std::size_t>(n_paths));
    std::vector<double> means, ses;
    for (const auto& control : family.controls) {
        gprocess::PathEnsemble ens = gprocess::sample_paths(problem.grid, s, control, n_paths, seed);
        sde::ForwardSolution x1 = sde::euler_forward(c, grid1, s, ens, flow1.y_input, flow1.x0);
        sde::ForwardSolution x2 = sde::euler_forward(c, grid2, s, ens, flow2.y_input, flow2.x0);
        kernels::for_each_index(n_paths, [&](long path) {
            double integral = 0.0;
            for (int i = 0; i < n_steps; ++i) {
                const double t = problem.grid.time_at(i);
                const auto xa = x1.state(path, i);
                const auto xb = x2.state(path, i);
                const double y2v = u2.y_fn.at(i, xb);
                const double z2v = u2.z_fn.at(i, xb);
                const double df = c.eval_f(t, xa, y2v, z2v) - c.eval_f(t, xb, y2v, z2v);
                const double dg = c.eval_g(t, xa, y2v, z2v) - c.eval_g(t, xb, y2v, z2v);
                integral += (std::abs(df) + std::abs(dg)) * dt;
            }
            const double dphi = c.eval_phi(x1.state(path, n_steps)) -
                                c.eval_phi(x2.state(path, n_steps));
            vals[static_cast<std::size_t>(path)] = std::pow(std::abs(dphi) + integral, p);
        });
        const MeanSE ms = mean_se(vals);
        means.push_back(ms.mean);
        ses.push_back(ms.se);
    }
    const auto sup = gprocess::sup_over_family(means);
    v.rhs = sup.value;
    v.se_budget = 5.0 * v.c2 * ses[static_cast<std::size_t>(sup.argmax)];
    v.margin = v.c2 * v.rhs + v.se_budget - v.lhs;
    v.pass = v.lhs <= v.c2 * v.rhs + v.se_budget;
    return v;
}

ZNormReport z_norm_check(const model::Problem& problem, const XFlowSpec& flow1,
                         const XFlowSpec& flow2, double p, const gprocess::ControlFamily& family,
                         long n_paths, std::uint64_t seed) {
    const model::CoefficientSet& c = problem.coeffs;
    const model::GSetting& s = problem.setting;
    const int n = c.n;
    const int n_steps = problem.grid.n_steps;
    const double dt = problem.grid.dt();

    auto flow_grid = [&](const XFlowSpec& fl) {
        model::DiscretizationGrid g = problem.grid;
        for (int j = 0; j < n; ++j) {
            const double shift = fl.x0[static_cast<std::size_t>(j)] - s.x0[static_cast<std::size_t>(j)];
            g.space_min[static_cast<std::size_t>(j)] += shift;
            g.space_max[static_cast<std::size_t>(j)] += shift;
        }
        return g;
    };
    const model::DiscretizationGrid grid1 = flow_grid(flow1);
    const model::DiscretizationGrid grid2 = flow_grid(flow2);
    BackwardSolution u1 = dp_backward(c, s, grid1, flow1.y_input, flow1.x0);
    BackwardSolution u2 = dp_backward(c, s, grid2, flow2.y_input, flow2.x0);

    std::vector<double> z_vals(static_cast<std::size_t>(n_paths));
    std::vector<double> ysup_vals(static_cast<std::size_t>(n_paths));
    std::vector<double> data_vals(static_cast<std::size_t>(n_paths));
    std::vector<double> z_means, ysup_means, data1_means, data2_means;

    for (const auto& control : family.controls) {
        gprocess::PathEnsemble ens = gprocess::sample_paths(problem.grid, s, control, n_paths, seed);
        sde::ForwardSolution x1 = sde::euler_forward(c, grid1, s, ens, flow1.y_input, flow1.x0);
        sde::ForwardSolution x2 = sde::euler_forward(c, grid2, s, ens, flow2.y_input, flow2.x0);
        kernels::for_each_index(n_paths, [&](long path) {
            double zint = 0.0, ysup = 0.0;
            for (int i = 0; i < n_steps; ++i) {
                const auto xa = x1.state(path, i);
                const auto xb = x2.state(path, i);
                const double dz = u1.z_fn.at(i, xa) - u2.z_fn.at(i, xb);
                zint += dz * dz * dt;
                ysup = std::fmax(ysup, std::abs(u1.y_fn.at(i, xa) - u2.y_fn.at(i, xb)));
            }
            ysup = std::fmax(ysup, std::abs(u1.y_fn.at(n_steps, x1.state(path, n_steps)) -
                                            u2.y_fn.at(n_steps, x2.state(path, n_steps))));
            z_vals[static_cast<std::size_t>(path)] = std::pow(zint, p / 2.0);
            ysup_vals[static_cast<std::size_t>(path)] = std::pow(ysup, p);
        });
        z_means.push_back(mean_se(z_vals).mean);
        ysup_means.push_back(mean_se(ysup_vals).mean);

        // Lambda data terms for each solution.
        auto lambda_term = [&](const sde::ForwardSolution& x, const BackwardSolution& u) {
            kernels::for_each_index(n_paths, [&](long path) {
                double ysup_i = 0.0, fint = 0.0;
                for (int i = 0; i <= n_steps; ++i) {
                    const auto xs = x.state(path, i);
                    ysup_i = std::fmax(ysup_i, std::abs(u.y_fn.at(i, xs)));
                    if (i == n_steps) break;
                    const double t = problem.grid.time_at(i);
                    fint += (std::abs(c.eval_f(t, xs, 0.0, 0.0)) +
                             std::abs(c.eval_g(t, xs, 0.0, 0.0))) *
                            dt;
                }
                data_vals[static_cast<std::size_t>(path)] =
                    std::pow(ysup_i, p) + std::pow(fint, p);
            });
            return mean_se(data_vals).mean;
        };
        data1_means.push_back(lambda_term(x1, u1));
        data2_means.push_back(lambda_term(x2, u2));
    }

    ZNormReport rep;
    rep.lhs = gprocess::sup_over_family(z_means).value;
    const double ysup_p = gprocess::sup_over_family(ysup_means).value;
    rep.lambda_data_1 = gprocess::sup_over_family(data1_means).value;
    rep.lambda_data_2 = gprocess::sup_over_family(data2_means).value;
    rep.bracket = ysup_p + std::sqrt(rep.lambda_data_1 + rep.lambda_data_2) * std::sqrt(ysup_p);
    rep.ratio = rep.bracket > 0.0 ? rep.lhs / rep.bracket : 0.0;
    return rep;
}

} // namespace gfbsde::bsde
