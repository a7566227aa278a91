#include "gfbsde/gprocess.hpp"

#include <cmath>

namespace gfbsde::gprocess {

ControlFamily ControlFamily::make(const model::GSetting& setting, int n_steps,
                                  int n_switch_times) {
    const double glo = setting.sigma_low * setting.sigma_low;
    const double ghi = setting.sigma_high * setting.sigma_high;
    ControlFamily fam;
    fam.controls.push_back(VolatilityControl{std::vector<double>(static_cast<std::size_t>(n_steps), glo), "const-low"});
    fam.controls.push_back(VolatilityControl{std::vector<double>(static_cast<std::size_t>(n_steps), ghi), "const-high"});
    for (int k = 1; k <= n_switch_times; ++k) {
        const int split = static_cast<int>(static_cast<long>(n_steps) * k / (n_switch_times + 1));
        VolatilityControl up{std::vector<double>(static_cast<std::size_t>(n_steps), glo),
                             "low-high@" + std::to_string(split)};
        VolatilityControl down{std::vector<double>(static_cast<std::size_t>(n_steps), ghi),
                               "high-low@" + std::to_string(split)};
        for (int i = split; i < n_steps; ++i) {
            up.gamma[static_cast<std::size_t>(i)] = ghi;
            down.gamma[static_cast<std::size_t>(i)] = glo;
        }
        fam.controls.push_back(std::move(up));
        fam.controls.push_back(std::move(down));
    }
    return fam;
}

PathEnsemble sample_paths(const model::DiscretizationGrid& grid, const model::GSetting& setting,
                          const VolatilityControl& control, long n_paths, std::uint64_t seed,
                          IncrementModel model) {
    const int n_steps = grid.n_steps;
    if (control.gamma.size() != static_cast<std::size_t>(n_steps))
        throw DomainError("control length does not match the grid");
    const double glo = setting.sigma_low * setting.sigma_low;
    const double ghi = setting.sigma_high * setting.sigma_high;
    for (double g : control.gamma)
        if (!(g >= glo && g <= ghi))
            throw DomainError("control leaves the volatility band");

    PathEnsemble ens;
    ens.n_paths = n_paths;
    ens.n_steps = n_steps;
    ens.control = control;
    ens.seed = seed;
    ens.model = model;
    const double dt = grid.dt();
    ens.qv_inc.resize(static_cast<std::size_t>(n_steps));
    ens.qv.resize(static_cast<std::size_t>(n_steps) + 1);
    ens.qv[0] = 0.0;
    std::vector<double> sqrt_gdt(static_cast<std::size_t>(n_steps));
    for (int i = 0; i < n_steps; ++i) {
        ens.qv_inc[static_cast<std::size_t>(i)] = control.gamma[static_cast<std::size_t>(i)] * dt;
        ens.qv[static_cast<std::size_t>(i) + 1] =
            ens.qv[static_cast<std::size_t>(i)] + ens.qv_inc[static_cast<std::size_t>(i)];
        sqrt_gdt[static_cast<std::size_t>(i)] = std::sqrt(ens.qv_inc[static_cast<std::size_t>(i)]);
    }
    ens.increments.resize(static_cast<std::size_t>(n_paths) * static_cast<std::size_t>(n_steps));

    kernels::IncrementJob job;
    job.seed = seed;
    job.n_paths = n_paths;
    job.n_steps = n_steps;
    job.sqrt_gdt = sqrt_gdt.data();
    job.model = model;
    job.out = ens.increments.data();
    kernels::fill_increments(job);
    return ens;
}

void LatticeFunction::node_state(long node, std::span<double> out) const {
    long rem = node;
    for (int d = n_dim - 1; d >= 0; --d) {
        const int idx = static_cast<int>(rem % n_space);
        rem /= n_space;
        out[static_cast<std::size_t>(d)] = node_coord(d, idx);
    }
}

LatticeFunction LatticeFunction::make(const model::DiscretizationGrid& grid, int n_dim,
                                      int n_times) {
    LatticeFunction f;
    f.n_dim = n_dim;
    f.n_space = grid.n_space;
    f.n_times = n_times;
    f.lo = grid.space_min;
    f.hi = grid.space_max;
    f.values.assign(static_cast<std::size_t>(f.n_nodes()) * static_cast<std::size_t>(n_times), 0.0);
    return f;
}

double gexpect_lattice(const expr::Program& payoff, const model::GSetting& setting,
                       const model::DiscretizationGrid& grid) {
    // Lattice over the driving noise: one dimension, started at zero.
    model::DiscretizationGrid bgrid = grid;
    const double half = 6.0 * setting.sigma_high * std::sqrt(setting.horizon);
    bgrid.space_min = {-half};
    bgrid.space_max = {half};

    LatticeFunction u = LatticeFunction::make(bgrid, 1, 2);
    const long nodes = u.n_nodes();
    double* terminal = u.row(1);
    for (long k = 0; k < nodes; ++k) {
        const double x = u.node_coord(0, static_cast<int>(k));
        terminal[k] = payoff.eval(std::span<const double>(&x, 1));
        if (!std::isfinite(terminal[k]))
            throw DomainError("payoff is not finite on the lattice at x=" + std::to_string(x));
    }

    const double glo = setting.sigma_low * setting.sigma_low;
    const double ghi = setting.classical_reduction && setting.sigma_low == setting.sigma_high
                           ? glo
                           : setting.sigma_high * setting.sigma_high;
    const kernels::QuadratureRule rule = kernels::quadrature_rule(grid.quadrature);

    std::vector<double> next(u.row(1), u.row(1) + nodes);
    std::vector<double> cur(static_cast<std::size_t>(nodes));
    std::vector<double> zscratch(static_cast<std::size_t>(nodes));
    kernels::LatticeView next_view = u.view();
    next_view.n_times = 1;

    for (int i = grid.n_steps - 1; i >= 0; --i) {
        next_view.values = next.data();
        kernels::BackwardStepJob job;
        job.coeffs = nullptr;
        job.n = 1;
        job.n_nodes = nodes;
        job.n_space = u.n_space;
        job.lo = u.lo.data();
        job.hi = u.hi.data();
        job.next_values = next.data();
        job.next_view = next_view;
        job.step = i;
        job.t = grid.time_at(i);
        job.dt = grid.dt();
        job.gamma_low = glo;
        job.gamma_high = ghi;
        job.n_quad = rule.n;
        job.quad_x = rule.x;
        job.quad_w = rule.w;
        job.has_drivers = false;
        job.out_y = cur.data();
        job.out_z = zscratch.data();
        kernels::backward_step(job);
        next.swap(cur);
    }

    kernels::LatticeView final_view = u.view();
    final_view.values = next.data();
    final_view.n_times = 1;
    const double origin = 0.0;
    return final_view.value(0, &origin);
}

GexpMcReport gexpect_mc(const expr::Program& payoff, const model::GSetting& setting,
                        const model::DiscretizationGrid& grid, const ControlFamily& family,
                        long n_paths, std::uint64_t seed, IncrementModel model) {
    if (family.controls.empty()) throw DomainError("empty control family");
    GexpMcReport rep;
    std::vector<double> vals(static_cast<std::size_t>(n_paths));
    std::vector<double> means;
    for (const VolatilityControl& control : family.controls) {
        PathEnsemble ens = sample_paths(grid, setting, control, n_paths, seed, model);
        kernels::for_each_index(n_paths, [&](long p) {
            double b = 0.0;
            const double* inc = ens.increments.data() + p * ens.n_steps;
            for (int i = 0; i < ens.n_steps; ++i) b += inc[i];
            vals[static_cast<std::size_t>(p)] = payoff.eval(std::span<const double>(&b, 1));
        });
        const MeanSE ms = mean_se(vals);
        rep.per_control.push_back(McControlStat{ms.mean, ms.se});
        means.push_back(ms.mean);
    }
    const SupResult sup = sup_over_family(means);
    rep.value = sup.value;
    rep.argmax = sup.argmax;
    rep.se = rep.per_control[static_cast<std::size_t>(sup.argmax)].se;
    return rep;
}

SupResult sup_over_family(std::span<const double> per_control) {
    if (per_control.empty()) throw DomainError("sup over empty family");
    SupResult r;
    r.value = per_control[0];
    r.argmax = 0;
    for (std::size_t i = 1; i < per_control.size(); ++i) {
        if (per_control[i] > r.value) {
            r.value = per_control[i];
            r.argmax = static_cast<int>(i);
        }
    }
    return r;
}

} // namespace gfbsde::gprocess
