#include "gfbsde/picard.hpp"

#include <cmath>

#include "gfbsde/regress.hpp"

namespace gfbsde::picard {

namespace {

// Worst-case-over-family mean of sup_t |X_a - X_b|^p along common paths.
double sup_distance(const std::vector<sde::ForwardSolution>& a,
                    const std::vector<sde::ForwardSolution>& b, double p) {
    std::vector<double> means;
    std::vector<double> vals;
    for (std::size_t c = 0; c < a.size(); ++c) {
        const auto& xa = a[c];
        const auto& xb = b[c];
        vals.resize(static_cast<std::size_t>(xa.n_paths));
        kernels::for_each_index(xa.n_paths, [&](long path) {
            double sup2 = 0.0;
            for (int i = 0; i <= xa.n_steps; ++i) {
                const auto sa = xa.state(path, i);
                const auto sb = xb.state(path, i);
                double d2 = 0.0;
                for (int j = 0; j < xa.n; ++j) {
                    const double d = sa[static_cast<std::size_t>(j)] - sb[static_cast<std::size_t>(j)];
                    d2 += d * d;
                }
                sup2 = std::fmax(sup2, d2);
            }
            vals[static_cast<std::size_t>(path)] = std::pow(sup2, p / 2.0);
        });
        means.push_back(mean_se(vals).mean);
    }
    return gprocess::sup_over_family(means).value;
}

double value_fn_distance(const std::vector<sde::ForwardSolution>& along,
                         const gprocess::LatticeFunction& u_new,
                         const gprocess::LatticeFunction& u_old, double p) {
    std::vector<double> means;
    std::vector<double> vals;
    for (const auto& x : along) {
        vals.resize(static_cast<std::size_t>(x.n_paths));
        kernels::for_each_index(x.n_paths, [&](long path) {
            double sup = 0.0;
            for (int i = 0; i <= x.n_steps; ++i) {
                const auto xs = x.state(path, i);
                sup = std::fmax(sup, std::abs(u_new.at(i, xs) - u_old.at(i, xs)));
            }
            vals[static_cast<std::size_t>(path)] = std::pow(sup, p);
        });
        means.push_back(mean_se(vals).mean);
    }
    return gprocess::sup_over_family(means).value;
}

// Constant-in-space solution for the first stage, where the flow is frozen
// at the start point.
bsde::BackwardSolution first_stage(const model::Problem& prob) {
    const std::vector<double> rows =
        bsde::scalar_backward(prob.coeffs, prob.setting, prob.grid, prob.setting.x0);
    bsde::BackwardSolution sol;
    sol.y_fn = bsde::broadcast_rows(prob.grid, prob.coeffs.n, rows);
    sol.z_fn = gprocess::LatticeFunction::make(prob.grid, prob.coeffs.n, prob.grid.n_steps + 1);
    sol.y0 = rows[0];
    return sol;
}

// One backward stage of the path-level backend: per control, least-squares
// dynamic programming along the frozen previous-stage paths; the stage value
// function is the nodewise family maximum of the per-control fits.
bsde::BackwardSolution paths_stage(const model::Problem& prob,
                                   const gprocess::ControlFamily& family,
                                   const std::vector<gprocess::PathEnsemble>& ensembles,
                                   const std::vector<sde::ForwardSolution>& x_prev, int degree) {
    const model::CoefficientSet& c = prob.coeffs;
    const int n = c.n;
    const int n_steps = prob.grid.n_steps;
    const double dt = prob.grid.dt();
    const regress::PolyBasis basis = regress::PolyBasis::total_degree(n, degree);
    const long n_paths = x_prev.front().n_paths;

    struct StageFits {
        std::vector<regress::Fit> cont, slope; // per time step
    };
    std::vector<StageFits> fits(family.size());

    std::vector<double> y_path(static_cast<std::size_t>(n_paths));
    std::vector<double> zt(static_cast<std::size_t>(n_paths));
    std::vector<double> states(static_cast<std::size_t>(n_paths) * static_cast<std::size_t>(n));
    std::vector<double> design;

    for (std::size_t ci = 0; ci < family.size(); ++ci) {
        const auto& x = x_prev[ci];
        const auto& ens = ensembles[ci];
        fits[ci].cont.resize(static_cast<std::size_t>(n_steps));
        fits[ci].slope.resize(static_cast<std::size_t>(n_steps));
        for (long pth = 0; pth < n_paths; ++pth)
            y_path[static_cast<std::size_t>(pth)] = c.eval_phi(x.state(pth, n_steps));
        for (int i = n_steps - 1; i >= 0; --i) {
            const double gamma = ens.control.gamma[static_cast<std::size_t>(i)];
            const double gdt = gamma * dt;
            for (long pth = 0; pth < n_paths; ++pth) {
                const auto xs = x.state(pth, i);
                for (int j = 0; j < n; ++j)
                    states[static_cast<std::size_t>(pth) * n + j] = xs[static_cast<std::size_t>(j)];
                zt[static_cast<std::size_t>(pth)] =
                    y_path[static_cast<std::size_t>(pth)] * ens.increment(pth, i) / gdt;
            }
            regress::fill_design(basis, states, n_paths, design);
            fits[ci].slope[static_cast<std::size_t>(i)] =
                regress::least_squares(basis, design, n_paths, zt);
            fits[ci].cont[static_cast<std::size_t>(i)] =
                regress::least_squares(basis, design, n_paths, y_path);
            const double t = prob.grid.time_at(i);
            for (long pth = 0; pth < n_paths; ++pth) {
                const auto xs = x.state(pth, i);
                const double cont =
                    fits[ci].cont[static_cast<std::size_t>(i)].eval(basis, xs);
                const double slope =
                    fits[ci].slope[static_cast<std::size_t>(i)].eval(basis, xs);
                y_path[static_cast<std::size_t>(pth)] =
                    cont - c.eval_f(t, xs, cont, slope) * dt - c.eval_g(t, xs, cont, slope) * gdt;
            }
        }
    }

    bsde::BackwardSolution sol;
    sol.y_fn = gprocess::LatticeFunction::make(prob.grid, n, n_steps + 1);
    sol.z_fn = gprocess::LatticeFunction::make(prob.grid, n, n_steps + 1);
    const long nodes = sol.y_fn.n_nodes();
    double xbuf[kMaxDim];
    for (long k = 0; k < nodes; ++k) {
        sol.y_fn.node_state(k, std::span<double>(xbuf, static_cast<std::size_t>(n)));
        std::span<const double> xs(xbuf, static_cast<std::size_t>(n));
        sol.y_fn.row(n_steps)[k] = c.eval_phi(xs);
        for (int i = 0; i < n_steps; ++i) {
            const double t = prob.grid.time_at(i);
            double best = 0.0, best_z = 0.0;
            for (std::size_t ci = 0; ci < family.size(); ++ci) {
                const double gamma = ensembles[ci].control.gamma[static_cast<std::size_t>(i)];
                const double cont = fits[ci].cont[static_cast<std::size_t>(i)].eval(basis, xs);
                const double slope = fits[ci].slope[static_cast<std::size_t>(i)].eval(basis, xs);
                const double val = cont - c.eval_f(t, xs, cont, slope) * dt -
                                   c.eval_g(t, xs, cont, slope) * gamma * dt;
                if (ci == 0 || val > best) {
                    best = val;
                    best_z = slope;
                }
            }
            sol.y_fn.row(i)[k] = best;
            sol.z_fn.row(i)[k] = best_z;
        }
    }
    const double* zsrc = sol.z_fn.row(n_steps - 1);
    double* zdst = sol.z_fn.row(n_steps);
    for (long k = 0; k < nodes; ++k) zdst[k] = zsrc[k];
    sol.y0 = sol.y_fn.at(0, prob.setting.x0);
    return sol;
}

FBSDESolution solve_core(const model::Problem& prob, const gprocess::ControlFamily& family,
                         const PicardOptions& opts, const constants::Engine& engine) {
    const model::GSetting& s = prob.setting;
    const model::CoefficientSet& c = prob.coeffs;
    const model::DiscretizationGrid& grid = prob.grid;

    FBSDESolution out;
    const constants::CertificateReport cert = engine.certify(s, c);
    out.certificate = constants::verdict_name(cert.verdict);
    if (cert.verdict == constants::Verdict::not_certified) {
        if (!opts.force)
            throw PreconditionError(
                "problem is not certified (" + cert.reason +
                "); pass force to iterate anyway");
        out.forced = true;
    }

    const double p_used = opts.p_prime.value_or(
        cert.constants.p_prime.value_or(s.p));
    out.trace.p_used = p_used;
    const bool low_regime = s.p < 2.0;
    out.trace.contraction_factor =
        cert.verdict == constants::Verdict::not_certified
            ? std::numeric_limits<double>::infinity()
            : (low_regime ? engine.lambda_tilde_p(p_used, s.horizon, s.n, c.L1, c.L2, c.L3,
                                                  s.sigma_high, s.sigma_low)
                          : engine.lambda_p(p_used, s.horizon, s.n, c.L1, c.L2, c.L3,
                                            s.sigma_high, s.sigma_low));

    std::vector<gprocess::PathEnsemble> ensembles;
    for (const auto& control : family.controls)
        ensembles.push_back(gprocess::sample_paths(grid, s, control, opts.n_paths, opts.seed));

    // Stage zero: the flow frozen at the start point.
    std::vector<sde::ForwardSolution> x_prev;
    for (const auto& ens : ensembles) {
        sde::ForwardSolution flat;
        flat.n_paths = ens.n_paths;
        flat.n_steps = ens.n_steps;
        flat.n = c.n;
        flat.control = ens.control;
        flat.y_source = "start-point";
        flat.states.resize(static_cast<std::size_t>(ens.n_paths) *
                           static_cast<std::size_t>(ens.n_steps + 1) * static_cast<std::size_t>(c.n));
        kernels::for_each_index(ens.n_paths, [&](long path) {
            double* row = flat.states.data() +
                          static_cast<std::size_t>(path) * static_cast<std::size_t>(ens.n_steps + 1) * c.n;
            for (int i = 0; i <= ens.n_steps; ++i)
                for (int j = 0; j < c.n; ++j) row[i * c.n + j] = s.x0[static_cast<std::size_t>(j)];
        });
        x_prev.push_back(std::move(flat));
    }

    bsde::BackwardSolution u_cur;
    bsde::BackwardSolution u_prev;
    double d1 = 0.0, d_prev = 0.0;
    for (int m = 1; m <= opts.max_iter; ++m) {
        if (opts.backend == Backend::paths && m > 1) {
            u_cur = paths_stage(prob, family, ensembles, x_prev, opts.regression_degree);
        } else if (m == 1) {
            if (opts.initial_policy != nullptr)
                u_cur = bsde::dp_backward(c, s, grid, sde::YInput::make_lattice(opts.initial_policy));
            else if (opts.backend == Backend::paths)
                u_cur = paths_stage(prob, family, ensembles, x_prev, opts.regression_degree);
            else
                u_cur = first_stage(prob);
        } else {
            u_cur = bsde::dp_backward(c, s, grid, sde::YInput::make_lattice(&u_prev.y_fn));
        }

        std::vector<sde::ForwardSolution> x_cur;
        for (const auto& ens : ensembles)
            x_cur.push_back(
                sde::euler_forward(c, grid, s, ens, sde::YInput::make_lattice(&u_cur.y_fn)));

        TraceRow row;
        row.m = m;
        row.d_x = sup_distance(x_cur, x_prev, p_used);
        row.d_y = m >= 2 ? value_fn_distance(x_cur, u_cur.y_fn, u_prev.y_fn, p_used) : 0.0;
        row.ratio = m >= 2 && d_prev > 0.0 ? row.d_x / d_prev : 0.0;
        if (m == 1) d1 = row.d_x;
        row.envelope = d1 * std::pow(out.trace.contraction_factor, m - 1);
        out.trace.rows.push_back(row);

        x_prev = std::move(x_cur);
        u_prev = std::move(u_cur);
        d_prev = row.d_x;
        out.iterations = m;
        if (m >= 2 && std::pow(row.d_x, 1.0 / p_used) <= opts.tol) {
            out.converged = true;
            break;
        }
    }
    if (!std::isfinite(d_prev))
        throw NumericalAbort(out.iterations, -1, "stage distance non-finite");

    out.backward = std::move(u_prev);
    out.y0 = out.backward.y_fn.at(0, s.x0);

    // K diagnostics across the family; the reference control maximizes the
    // mean terminal K (closest to zero from below).
    double best = 0.0;
    int best_i = 0;
    double k_tol = 0.0;
    for (std::size_t ci = 0; ci < family.size(); ++ci) {
        const bsde::KPaths k =
            bsde::k_extract(out.backward, c, grid, ensembles[ci], x_prev[ci]);
        out.k_terminal_means.push_back(k.k_terminal.mean);
        out.k_max_positive_increment =
            std::fmax(out.k_max_positive_increment, k.max_positive_increment);
        k_tol = std::fmax(k_tol, k.tol_k);
        if (ci == 0 || k.k_terminal.mean > best) {
            best = k.k_terminal.mean;
            best_i = static_cast<int>(ci);
        }
    }
    out.k_tol = k_tol;
    out.reference_control = best_i;
    out.k_reference_mean = best;
    out.x_solution = std::move(x_prev[static_cast<std::size_t>(best_i)]);
    return out;
}

} // namespace

FBSDESolution picard_solve(const model::Problem& problem, const gprocess::ControlFamily& family,
                           const PicardOptions& opts, const constants::Engine& engine) {
    return solve_core(problem, family, opts, engine);
}

FBSDESolution picard_solve_p_lt2(const model::Problem& problem,
                                 const gprocess::ControlFamily& family, const PicardOptions& opts,
                                 const constants::Engine& engine) {
    if (!(problem.setting.p > 1.0 && problem.setting.p < 2.0))
        throw PreconditionError("picard_solve_p_lt2 requires p in (1,2)");
    if (problem.coeffs.sigma_depends_on_y)
        throw PreconditionError(
            "the exponent-below-two contraction needs sigma independent of y");
    return solve_core(problem, family, opts, engine);
}

ContractionReport contraction_report(const ContractionTrace& trace, double error_budget) {
    ContractionReport rep;
    for (const TraceRow& row : trace.rows) {
        ContractionReportRow r;
        r.m = row.m;
        r.d_x = row.d_x;
        r.envelope = row.envelope;
        r.flagged = row.d_x > row.envelope + error_budget;
        if (r.flagged) ++rep.n_flagged;
        rep.rows.push_back(r);
    }
    return rep;
}

PerturbationReport perturbation_experiment(const model::Problem& a, const model::Problem& b,
                                           double p, const PicardOptions& opts,
                                           const constants::Engine& engine) {
    if (a.coeffs.n != b.coeffs.n)
        throw PreconditionError("perturbation pair must share the state dimension");
    if (p < 2.0 && (a.coeffs.sigma_depends_on_y || b.coeffs.sigma_depends_on_y))
        throw PreconditionError("for p < 2 both problems need sigma independent of y");

    auto run = [&](const model::Problem& pa, const model::Problem& pb) {
        const gprocess::ControlFamily family =
            gprocess::ControlFamily::make(pa.setting, pa.grid.n_steps, opts.family_switches);
        FBSDESolution sa = picard_solve(pa, family, opts, engine);
        FBSDESolution sb = picard_solve(pb, family, opts, engine);

        const model::CoefficientSet& ca = pa.coeffs;
        const model::CoefficientSet& cb = pb.coeffs;
        const int n = ca.n;
        const int n_steps = pa.grid.n_steps;
        const double dt = pa.grid.dt();
        double xhat = 0.0;
        for (int j = 0; j < n; ++j) {
            const double d = pa.setting.x0[static_cast<std::size_t>(j)] -
                             pb.setting.x0[static_cast<std::size_t>(j)];
            xhat += d * d;
        }
        xhat = std::sqrt(xhat);

        std::vector<double> lhs_vals(static_cast<std::size_t>(opts.n_paths));
        std::vector<double> rhs_vals(static_cast<std::size_t>(opts.n_paths));
        std::vector<double> lhs_means, rhs_means;
        double abuf[kMaxDim], bbuf[kMaxDim];
        for (const auto& control : family.controls) {
            gprocess::PathEnsemble ens =
                gprocess::sample_paths(pa.grid, pa.setting, control, opts.n_paths, opts.seed);
            sde::ForwardSolution xa = sde::euler_forward(
                ca, pa.grid, pa.setting, ens, sde::YInput::make_lattice(&sa.backward.y_fn));
            sde::ForwardSolution xb = sde::euler_forward(
                cb, pb.grid, pb.setting, ens, sde::YInput::make_lattice(&sb.backward.y_fn));
            for (long path = 0; path < opts.n_paths; ++path) {
                double sup2 = 0.0, int_bhfg = 0.0, int_s2 = 0.0;
                for (int i = 0; i <= n_steps; ++i) {
                    const auto va = xa.state(path, i);
                    const auto vb = xb.state(path, i);
                    double d2 = 0.0;
                    for (int j = 0; j < n; ++j) {
                        const double d = va[static_cast<std::size_t>(j)] -
                                         vb[static_cast<std::size_t>(j)];
                        d2 += d * d;
                    }
                    sup2 = std::fmax(sup2, d2);
                    if (i == n_steps) break;
                    const double t = pa.grid.time_at(i);
                    const double yb = sb.backward.y_fn.at(i, vb);
                    const double zb = sb.backward.z_fn.at(i, vb);
                    double db = 0.0, dh = 0.0, ds = 0.0;
                    for (int pass = 0; pass < 3; ++pass) {
                        const auto& fa = pass == 0 ? ca.b : pass == 1 ? ca.h : ca.sigma;
                        const auto& fb = pass == 0 ? cb.b : pass == 1 ? cb.h : cb.sigma;
                        ca.eval_vec(fa, t, vb, yb, std::span<double>(abuf, static_cast<std::size_t>(n)));
                        cb.eval_vec(fb, t, vb, yb, std::span<double>(bbuf, static_cast<std::size_t>(n)));
                        double acc = 0.0;
                        for (int j = 0; j < n; ++j) {
                            const double d = abuf[j] - bbuf[j];
                            acc += d * d;
                        }
                        if (pass == 0)
                            db = std::sqrt(acc);
                        else if (pass == 1)
                            dh = std::sqrt(acc);
                        else
                            ds = acc; // squared for the diffusion integral
                    }
                    const double df = ca.eval_f(t, vb, yb, zb) - cb.eval_f(t, vb, yb, zb);
                    const double dg = ca.eval_g(t, vb, yb, zb) - cb.eval_g(t, vb, yb, zb);
                    int_bhfg += (db + dh + std::abs(df) + std::abs(dg)) * dt;
                    int_s2 += ds * dt;
                }
                const double dphi = ca.eval_phi(xb.state(path, n_steps)) -
                                    cb.eval_phi(xb.state(path, n_steps));
                lhs_vals[static_cast<std::size_t>(path)] = std::pow(sup2, p / 2.0);
                rhs_vals[static_cast<std::size_t>(path)] =
                    std::pow(xhat + std::abs(dphi) + int_bhfg, p) + std::pow(int_s2, p / 2.0);
            }
            lhs_means.push_back(mean_se(lhs_vals).mean);
            rhs_means.push_back(mean_se(rhs_vals).mean);
        }
        const double lhs = gprocess::sup_over_family(lhs_means).value;
        const double rhs = gprocess::sup_over_family(rhs_means).value;
        return std::pair<double, double>(lhs, rhs);
    };

    PerturbationReport rep;
    {
        const auto [lhs, rhs] = run(a, b);
        rep.lhs = lhs;
        rep.rhs = rhs;
        rep.ratio = rhs > 0.0 ? lhs / rhs : 0.0;
    }
    {
        model::Problem ar = a;
        ar.grid = a.grid.refined();
        model::Problem br = b;
        br.grid = b.grid.refined();
        const auto [lhs, rhs] = run(ar, br);
        rep.lhs_fine = lhs;
        rep.rhs_fine = rhs;
        rep.ratio_fine = rhs > 0.0 ? lhs / rhs : 0.0;
    }
    const bool finite = std::isfinite(rep.ratio) && std::isfinite(rep.ratio_fine);
    const double growth = rep.ratio > 0.0 ? rep.ratio_fine / rep.ratio : 0.0;
    rep.pass = finite && (rep.ratio_fine == 0.0 || growth <= 2.0);
    return rep;
}

} // namespace gfbsde::picard
