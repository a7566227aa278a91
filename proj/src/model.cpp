#include "gfbsde/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gfbsde/rng.hpp"

namespace gfbsde::model {

void CoefficientSet::eval_vec(const std::vector<expr::Program>& fn, double t,
                              std::span<const double> x, double y, std::span<double> out) const {
    double vars[kMaxDim + 3];
    vars[0] = t;
    for (int j = 0; j < n; ++j) vars[1 + j] = x[static_cast<std::size_t>(j)];
    vars[n + 1] = y;
    vars[n + 2] = 0.0;
    for (int j = 0; j < n; ++j)
        out[static_cast<std::size_t>(j)] =
            fn[static_cast<std::size_t>(j)].eval(std::span<const double>(vars, static_cast<std::size_t>(n + 3)));
}

double CoefficientSet::eval_f(double t, std::span<const double> x, double y, double z) const {
    double vars[kMaxDim + 3];
    vars[0] = t;
    for (int j = 0; j < n; ++j) vars[1 + j] = x[static_cast<std::size_t>(j)];
    vars[n + 1] = y;
    vars[n + 2] = z;
    return f.eval(std::span<const double>(vars, static_cast<std::size_t>(n + 3)));
}

double CoefficientSet::eval_g(double t, std::span<const double> x, double y, double z) const {
    double vars[kMaxDim + 3];
    vars[0] = t;
    for (int j = 0; j < n; ++j) vars[1 + j] = x[static_cast<std::size_t>(j)];
    vars[n + 1] = y;
    vars[n + 2] = z;
    return g.eval(std::span<const double>(vars, static_cast<std::size_t>(n + 3)));
}

double CoefficientSet::eval_phi(std::span<const double> x) const {
    double vars[kMaxDim + 3];
    vars[0] = 0.0;
    for (int j = 0; j < n; ++j) vars[1 + j] = x[static_cast<std::size_t>(j)];
    vars[n + 1] = 0.0;
    vars[n + 2] = 0.0;
    return phi.eval(std::span<const double>(vars, static_cast<std::size_t>(n + 3)));
}

void default_box(const GSetting& setting, std::vector<double>& lo, std::vector<double>& hi) {
    const double half = 6.0 * setting.sigma_high * std::sqrt(setting.horizon);
    lo.resize(static_cast<std::size_t>(setting.n));
    hi.resize(static_cast<std::size_t>(setting.n));
    for (int j = 0; j < setting.n; ++j) {
        lo[static_cast<std::size_t>(j)] = setting.x0[static_cast<std::size_t>(j)] - half;
        hi[static_cast<std::size_t>(j)] = setting.x0[static_cast<std::size_t>(j)] + half;
    }
}

DiscretizationGrid default_grid(const GSetting& setting, int n_steps, int n_space) {
    DiscretizationGrid g;
    g.n_steps = n_steps;
    g.horizon = setting.horizon;
    g.n_space = n_space;
    default_box(setting, g.space_min, g.space_max);
    return g;
}

std::string ValidationReport::summary() const {
    std::ostringstream os;
    for (const auto& c : checks)
        os << (c.pass ? "[pass] " : "[FAIL] ") << c.name
           << (c.detail.empty() ? "" : ": " + c.detail) << "\n";
    return os.str();
}

namespace {

struct AuditPoint {
    double t;
    double x[kMaxDim];
    double y;
    double z;
};

// One worst-quotient record per (H2) group.
struct GroupWorst {
    double quotient = 0.0;
    AuditPoint a{}, b{};
    bool offending_nonfinite = false;
};

std::string point_str(const AuditPoint& p, int n) {
    std::ostringstream os;
    os << "t=" << p.t << " x=(";
    for (int j = 0; j < n; ++j) os << (j ? "," : "") << p.x[j];
    os << ") y=" << p.y << " z=" << p.z;
    return os.str();
}

double norm2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

} // namespace

ValidationReport validate_problem(const GSetting& setting, const CoefficientSet& coeffs,
                                  const DiscretizationGrid* grid, const AuditOptions& opts) {
    ValidationReport rep;
    auto add = [&rep](const std::string& name, bool pass, const std::string& detail = "") {
        rep.checks.push_back(CheckResult{name, pass, detail});
    };

    // Setting invariants.
    const bool band_pos = setting.sigma_low > 0.0 && std::isfinite(setting.sigma_high);
    if (setting.classical_reduction)
        add("band", band_pos && setting.sigma_low <= setting.sigma_high,
            "classical flag set; degenerate band allowed");
    else
        add("band", band_pos && setting.sigma_low < setting.sigma_high,
            setting.sigma_low < setting.sigma_high
                ? ""
                : "strict band sigma_low < sigma_high required without classical_reduction");
    add("exponents", setting.p > 1.0 && setting.p < setting.beta, "need 1 < p < beta");
    add("dimension", setting.n >= 1 && setting.n <= kMaxDim &&
                         setting.x0.size() == static_cast<std::size_t>(setting.n));
    add("horizon", setting.horizon > 0.0);
    add("lipschitz-nonneg", coeffs.L1 >= 0.0 && coeffs.L2 >= 0.0 && coeffs.L3 >= 0.0);

    if (grid != nullptr) {
        bool box_ok = grid->n_steps >= 1 && grid->n_space >= 2 &&
                      grid->space_min.size() == static_cast<std::size_t>(setting.n) &&
                      grid->space_max.size() == static_cast<std::size_t>(setting.n);
        const double margin = 4.0 * setting.sigma_high * std::sqrt(setting.horizon);
        if (box_ok) {
            for (int j = 0; j < setting.n; ++j) {
                const double x0j = setting.x0[static_cast<std::size_t>(j)];
                box_ok = box_ok && grid->space_min[static_cast<std::size_t>(j)] <= x0j - margin &&
                         grid->space_max[static_cast<std::size_t>(j)] >= x0j + margin;
            }
        }
        add("grid-box", box_ok, box_ok ? "" : "lattice box must contain x0 with margin 4*sigma_high*sqrt(T)");
        const double tprod = grid->dt() * grid->n_steps;
        add("grid-dt", std::abs(tprod - setting.horizon) <=
                           4.0 * std::numeric_limits<double>::epsilon() * setting.horizon);
    }
    if (!rep.ok()) return rep;

    // Randomized Lipschitz audit on the working box.
    std::vector<double> lo, hi;
    if (grid != nullptr && grid->space_min.size() == static_cast<std::size_t>(setting.n)) {
        lo = grid->space_min;
        hi = grid->space_max;
    } else {
        default_box(setting, lo, hi);
    }

    // y/z sampling range: scaled to the terminal data plus driver drift.
    double data_scale = 0.0;
    {
        double xbuf[kMaxDim];
        for (int k = 0; k < 128; ++k) {
            for (int j = 0; j < setting.n; ++j) {
                const double u = rng::uniform_at(opts.seed, static_cast<std::uint64_t>(k * kMaxDim + j));
                xbuf[j] = lo[static_cast<std::size_t>(j)] +
                          u * (hi[static_cast<std::size_t>(j)] - lo[static_cast<std::size_t>(j)]);
            }
            std::span<const double> xs(xbuf, static_cast<std::size_t>(setting.n));
            const double t = setting.horizon * rng::uniform_at(opts.seed ^ 0xabcdu, static_cast<std::uint64_t>(k));
            data_scale = std::max(data_scale, std::abs(coeffs.eval_phi(xs)));
            data_scale = std::max(data_scale, std::abs(coeffs.eval_f(t, xs, 0.0, 0.0)));
            data_scale = std::max(data_scale, std::abs(coeffs.eval_g(t, xs, 0.0, 0.0)));
        }
    }
    const double yz_range = std::clamp(
        2.0 * (1.0 + data_scale) * (1.0 + setting.horizon * (1.0 + setting.sigma_high * setting.sigma_high)),
        2.0, 100.0);

    const int n = setting.n;
    enum Group { gx_fwd = 0, gy_fwd, gx_drv, gyz_drv, gx_phi, n_groups };
    GroupWorst worst[n_groups];
    bool nonfinite = false;
    AuditPoint bad_point{};

    auto eval_all = [&](const AuditPoint& pt, double* fwd_vals, double& fv, double& gv,
                        double& phiv) -> bool {
        std::span<const double> xs(pt.x, static_cast<std::size_t>(n));
        coeffs.eval_vec(coeffs.b, pt.t, xs, pt.y, std::span<double>(fwd_vals, static_cast<std::size_t>(n)));
        coeffs.eval_vec(coeffs.h, pt.t, xs, pt.y, std::span<double>(fwd_vals + n, static_cast<std::size_t>(n)));
        coeffs.eval_vec(coeffs.sigma, pt.t, xs, pt.y,
                        std::span<double>(fwd_vals + 2 * n, static_cast<std::size_t>(n)));
        fv = coeffs.eval_f(pt.t, xs, pt.y, pt.z);
        gv = coeffs.eval_g(pt.t, xs, pt.y, pt.z);
        phiv = coeffs.eval_phi(xs);
        for (int j = 0; j < 3 * n; ++j)
            if (!std::isfinite(fwd_vals[j])) return false;
        return std::isfinite(fv) && std::isfinite(gv) && std::isfinite(phiv);
    };

    const double local_scale = 1e-4;
    for (int k = 0; k < opts.n_samples && !nonfinite; ++k) {
        const std::uint64_t base = static_cast<std::uint64_t>(k) * 64u;
        auto u = [&](int slot) { return rng::uniform_at(opts.seed ^ 0x11d7u, base + static_cast<std::uint64_t>(slot)); };

        AuditPoint a{};
        a.t = setting.horizon * u(0);
        for (int j = 0; j < n; ++j)
            a.x[j] = lo[static_cast<std::size_t>(j)] +
                     u(1 + j) * (hi[static_cast<std::size_t>(j)] - lo[static_cast<std::size_t>(j)]);
        a.y = yz_range * (2.0 * u(20) - 1.0);
        a.z = yz_range * (2.0 * u(21) - 1.0);

        const bool local = (k % 2) == 0;
        AuditPoint bpt = a;
        for (int j = 0; j < n; ++j) {
            const double width = hi[static_cast<std::size_t>(j)] - lo[static_cast<std::size_t>(j)];
            const double step = local ? local_scale * width * (2.0 * u(30 + j) - 1.0)
                                      : width * (2.0 * u(30 + j) - 1.0);
            bpt.x[j] = std::clamp(a.x[j] + step, lo[static_cast<std::size_t>(j)],
                                  hi[static_cast<std::size_t>(j)]);
        }
        const double ystep = local ? local_scale * yz_range * (2.0 * u(40) - 1.0)
                                   : yz_range * (2.0 * u(40) - 1.0);
        const double zstep = local ? local_scale * yz_range * (2.0 * u(41) - 1.0)
                                   : yz_range * (2.0 * u(41) - 1.0);
        bpt.y = std::clamp(a.y + ystep, -yz_range, yz_range);
        bpt.z = std::clamp(a.z + zstep, -yz_range, yz_range);

        double fa[3 * kMaxDim], fb[3 * kMaxDim];
        double f_a, g_a, phi_a, f_b, g_b, phi_b;
        if (!eval_all(a, fa, f_a, g_a, phi_a)) {
            nonfinite = true;
            bad_point = a;
            break;
        }
        if (!eval_all(bpt, fb, f_b, g_b, phi_b)) {
            nonfinite = true;
            bad_point = bpt;
            break;
        }

        double dx[kMaxDim];
        double box_norm = 0.0;
        for (int j = 0; j < n; ++j) {
            dx[j] = bpt.x[j] - a.x[j];
            const double w = hi[static_cast<std::size_t>(j)] - lo[static_cast<std::size_t>(j)];
            box_norm += w * w;
        }
        box_norm = std::sqrt(box_norm);
        const double dxn = norm2(std::span<const double>(dx, static_cast<std::size_t>(n)));
        const double dy = std::abs(bpt.y - a.y);
        const double dz = std::abs(bpt.z - a.z);
        // Steps below the cancellation floor would turn rounding noise into
        // spurious quotients.
        const double x_floor = 1e-6 * box_norm;
        const double yz_floor = 1e-6 * 2.0 * yz_range;

        auto consider = [&](Group grp, double q) {
            if (q > worst[grp].quotient) {
                worst[grp].quotient = q;
                worst[grp].a = a;
                worst[grp].b = bpt;
            }
        };

        // Forward block, x-direction: compare at equal (t,y,z).
        if (dxn > x_floor) {
            AuditPoint ax = a, bx = a;
            for (int j = 0; j < n; ++j) bx.x[j] = bpt.x[j];
            double va[3 * kMaxDim], vb[3 * kMaxDim];
            double f1, g1, p1, f2, g2, p2;
            if (!eval_all(ax, va, f1, g1, p1) || !eval_all(bx, vb, f2, g2, p2)) {
                nonfinite = true;
                bad_point = bx;
                break;
            }
            double fwd_sum = 0.0;
            for (int j = 0; j < n; ++j)
                fwd_sum = std::max(fwd_sum, std::abs(va[j] - vb[j]) + std::abs(va[n + j] - vb[n + j]) +
                                                std::abs(va[2 * n + j] - vb[2 * n + j]));
            consider(gx_fwd, fwd_sum / dxn);
            consider(gx_drv, (std::abs(f1 - f2) + std::abs(g1 - g2)) / dxn);
            consider(gx_phi, std::abs(p1 - p2) / dxn);
        }
        // Forward block, y-direction.
        if (dy > yz_floor) {
            AuditPoint ay = a, by = a;
            by.y = bpt.y;
            double va[3 * kMaxDim], vb[3 * kMaxDim];
            double f1, g1, p1, f2, g2, p2;
            if (!eval_all(ay, va, f1, g1, p1) || !eval_all(by, vb, f2, g2, p2)) {
                nonfinite = true;
                bad_point = by;
                break;
            }
            double fwd_sum = 0.0;
            for (int j = 0; j < n; ++j)
                fwd_sum = std::max(fwd_sum, std::abs(va[j] - vb[j]) + std::abs(va[n + j] - vb[n + j]) +
                                                std::abs(va[2 * n + j] - vb[2 * n + j]));
            consider(gy_fwd, fwd_sum / dy);
        }
        // Driver block, (y,z)-directions jointly.
        if (dy + dz > yz_floor) {
            AuditPoint ayz = a, byz = a;
            byz.y = bpt.y;
            byz.z = bpt.z;
            double va[3 * kMaxDim], vb[3 * kMaxDim];
            double f1, g1, p1, f2, g2, p2;
            if (!eval_all(ayz, va, f1, g1, p1) || !eval_all(byz, vb, f2, g2, p2)) {
                nonfinite = true;
                bad_point = byz;
                break;
            }
            consider(gyz_drv, (std::abs(f1 - f2) + std::abs(g1 - g2)) / (dy + dz));
        }
    }

    if (nonfinite) {
        add("finite-coefficients", false, "non-finite value at " + point_str(bad_point, n));
        return rep;
    }
    add("finite-coefficients", true);

    const double slack = opts.rel_slack;
    auto audit = [&](const std::string& name, Group grp, double declared) {
        const double bound = declared * (1.0 + slack) + 1e-12;
        const bool pass = worst[grp].quotient <= bound;
        std::ostringstream os;
        os << "max quotient " << worst[grp].quotient << " vs declared " << declared;
        if (!pass)
            os << "; witness " << point_str(worst[grp].a, n) << " -> " << point_str(worst[grp].b, n);
        add(name, pass, os.str());
    };
    audit("lipschitz-x(b,h,sigma)<=L1", gx_fwd, coeffs.L1);
    audit("lipschitz-y(b,h,sigma)<=L2", gy_fwd, coeffs.L2);
    audit("lipschitz-x(f,g)<=L3", gx_drv, coeffs.L3);
    audit("lipschitz-yz(f,g)<=L1", gyz_drv, coeffs.L1);
    audit("lipschitz-x(phi)<=L3", gx_phi, coeffs.L3);

    // Declared y-independence of sigma must hold exactly.
    if (!coeffs.sigma_depends_on_y) {
        bool same = true;
        double xbuf[kMaxDim], s1[kMaxDim], s2[kMaxDim];
        for (int k = 0; k < 256 && same; ++k) {
            for (int j = 0; j < n; ++j) {
                const double u = rng::uniform_at(opts.seed ^ 0x51u,
                                                 static_cast<std::uint64_t>(k) * 8u + static_cast<std::uint64_t>(j));
                xbuf[j] = lo[static_cast<std::size_t>(j)] +
                          u * (hi[static_cast<std::size_t>(j)] - lo[static_cast<std::size_t>(j)]);
            }
            const double t = setting.horizon *
                             rng::uniform_at(opts.seed ^ 0x52u, static_cast<std::uint64_t>(k));
            const double y1 = yz_range * (2.0 * rng::uniform_at(opts.seed ^ 0x53u, static_cast<std::uint64_t>(k)) - 1.0);
            const double y2 = yz_range * (2.0 * rng::uniform_at(opts.seed ^ 0x54u, static_cast<std::uint64_t>(k)) - 1.0);
            std::span<const double> xs(xbuf, static_cast<std::size_t>(n));
            coeffs.eval_vec(coeffs.sigma, t, xs, y1, std::span<double>(s1, static_cast<std::size_t>(n)));
            coeffs.eval_vec(coeffs.sigma, t, xs, y2, std::span<double>(s2, static_cast<std::size_t>(n)));
            for (int j = 0; j < n; ++j) same = same && s1[j] == s2[j];
        }
        add("sigma-y-independent", same,
            same ? "" : "sigma_depends_on_y=false but sigma varies with y");
    }

    return rep;
}

} // namespace gfbsde::model
