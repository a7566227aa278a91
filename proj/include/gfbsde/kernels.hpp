// Hot sweeps, each with a serial reference implementation and an OpenMP
// variant (kernels_serial.cpp / kernels_omp.cpp). Per-item bodies are shared
// inline functions, items write disjoint slots, and all reductions happen
// outside the kernels through pairwise sums, so both variants produce
// bit-identical results for any thread count.

#ifndef GFBSDE_KERNELS_HPP
#define GFBSDE_KERNELS_HPP

#include <cmath>
#include <cstdint>
#include <span>

#include "gfbsde/common.hpp"
#include "gfbsde/model.hpp"
#include "gfbsde/rng.hpp"

namespace gfbsde::kernels {

enum class Exec { serial, openmp };

Exec exec_mode();
void set_exec_mode(Exec mode);

enum class IncrementModel { normal, rademacher };

// ---------------------------------------------------------------------------
// Lattice geometry shared by the sweeps. Row-major nodes, last dim fastest.
// Multilinear interpolation; queries outside the box extrapolate linearly
// using the boundary cell (weights are left unclamped).
struct LatticeView {
    const double* values = nullptr; // n_times x n_nodes
    long n_times = 0;
    long n_nodes = 0;
    int n_dim = 1;
    int n_space = 0;
    const double* lo = nullptr;
    const double* hi = nullptr;

    double dx(int d) const { return (hi[d] - lo[d]) / (n_space - 1); }

    double value(long t_idx, const double* x) const {
        const double* row = values + t_idx * n_nodes;
        int cell[kMaxDim];
        double frac[kMaxDim];
        for (int d = 0; d < n_dim; ++d) {
            const double s = (x[d] - lo[d]) / dx(d);
            double fl = std::floor(s);
            fl = std::fmin(std::fmax(fl, 0.0), static_cast<double>(n_space - 2));
            cell[d] = static_cast<int>(fl);
            frac[d] = s - fl;
        }
        long stride[kMaxDim];
        stride[n_dim - 1] = 1;
        for (int d = n_dim - 2; d >= 0; --d) stride[d] = stride[d + 1] * n_space;
        double acc = 0.0;
        for (int corner = 0; corner < (1 << n_dim); ++corner) {
            double w = 1.0;
            long idx = 0;
            for (int d = 0; d < n_dim; ++d) {
                const int bit = (corner >> d) & 1;
                w *= bit ? frac[d] : 1.0 - frac[d];
                idx += (cell[d] + bit) * stride[d];
            }
            acc += w * row[idx];
        }
        return acc;
    }
};

// ---------------------------------------------------------------------------
// Increment generation: out[path][step] = sqrt_gdt[step] * xi(path, step).
struct IncrementJob {
    std::uint64_t seed = 0;
    long n_paths = 0;
    int n_steps = 0;
    const double* sqrt_gdt = nullptr;
    IncrementModel model = IncrementModel::normal;
    double* out = nullptr;
};

inline void increment_path(const IncrementJob& job, long path) {
    rng::Stream stream(job.seed, static_cast<std::uint64_t>(path));
    double* row = job.out + path * job.n_steps;
    if (job.model == IncrementModel::normal) {
        for (int i = 0; i < job.n_steps; ++i) row[i] = job.sqrt_gdt[i] * stream.next_normal();
    } else {
        for (int i = 0; i < job.n_steps; ++i) row[i] = job.sqrt_gdt[i] * stream.next_rademacher();
    }
}

void fill_increments_serial(const IncrementJob& job);
void fill_increments_omp(const IncrementJob& job);
void fill_increments(const IncrementJob& job);

// ---------------------------------------------------------------------------
// Forward Euler sweep.
struct YSourceView {
    // 0: zero, 1: constant, 2: lattice(t_idx, state), 3: frozen per-path rows
    int kind = 0;
    double constant = 0.0;
    LatticeView lattice;
    const double* frozen = nullptr; // n_paths x (n_steps + 1)

    double value(long path, int t_idx, int n_steps, const double* x) const {
        switch (kind) {
        case 1: return constant;
        case 2: return lattice.value(t_idx, x);
        case 3: return frozen[path * (n_steps + 1) + t_idx];
        default: return 0.0;
        }
    }
};

struct ForwardJob {
    const model::CoefficientSet* coeffs = nullptr;
    int n = 1;
    long n_paths = 0;
    int n_steps = 0;
    double dt = 0.0;
    const double* times = nullptr;      // size n_steps
    const double* gamma = nullptr;      // size n_steps
    const double* increments = nullptr; // n_paths x n_steps
    const double* x0 = nullptr;         // size n
    YSourceView y_source;
    double* states = nullptr;   // n_paths x (n_steps+1) x n
    int* first_bad_step = nullptr; // per path, -1 if clean
};

inline void forward_path(const ForwardJob& job, long path) {
    const int n = job.n;
    double x[kMaxDim], bv[kMaxDim], hv[kMaxDim], sv[kMaxDim];
    double* out = job.states + path * static_cast<long>(job.n_steps + 1) * n;
    for (int j = 0; j < n; ++j) {
        x[j] = job.x0[j];
        out[j] = x[j];
    }
    job.first_bad_step[path] = -1;
    const double* inc = job.increments + path * job.n_steps;
    for (int i = 0; i < job.n_steps; ++i) {
        const double t = job.times[i];
        const double y = job.y_source.value(path, i, job.n_steps, x);
        std::span<const double> xs(x, static_cast<std::size_t>(n));
        job.coeffs->eval_vec(job.coeffs->b, t, xs, y, std::span<double>(bv, static_cast<std::size_t>(n)));
        job.coeffs->eval_vec(job.coeffs->h, t, xs, y, std::span<double>(hv, static_cast<std::size_t>(n)));
        job.coeffs->eval_vec(job.coeffs->sigma, t, xs, y, std::span<double>(sv, static_cast<std::size_t>(n)));
        const double gdt = job.gamma[i] * job.dt;
        bool ok = true;
        for (int j = 0; j < n; ++j) {
            x[j] += bv[j] * job.dt + hv[j] * gdt + sv[j] * inc[i];
            ok = ok && std::isfinite(x[j]);
            out[(i + 1) * n + j] = x[j];
        }
        if (!ok) {
            job.first_bad_step[path] = i;
            for (int k = i + 1; k < job.n_steps; ++k)
                for (int j = 0; j < n; ++j) out[(k + 1) * n + j] = x[j];
            return;
        }
    }
}

void forward_sweep_serial(const ForwardJob& job);
void forward_sweep_omp(const ForwardJob& job);
void forward_sweep(const ForwardJob& job);

// ---------------------------------------------------------------------------
// One backward dynamic-programming step: writes row i of (y, z) from row i+1.
// Per node, the one-step expectation is taken under both band endpoints and
// the larger candidate wins (ties pick the top of the band; z follows the
// winning endpoint). With coeffs == nullptr the state is the driving noise
// itself (unit diffusion, no drift, no drivers).
struct BackwardStepJob {
    const model::CoefficientSet* coeffs = nullptr;
    int n = 1;
    long n_nodes = 0;
    int n_space = 0;
    const double* lo = nullptr;
    const double* hi = nullptr;
    const double* next_values = nullptr; // n_nodes
    LatticeView next_view;               // view over next_values for interpolation
    YSourceView y_policy;                // evaluated at (t_idx = step, node state)
    int step = 0;                        // time index i
    double t = 0.0;
    double dt = 0.0;
    double gamma_low = 0.0, gamma_high = 0.0;
    int n_quad = 2;
    const double* quad_x = nullptr;
    const double* quad_w = nullptr;
    bool has_drivers = true;
    double* out_y = nullptr;
    double* out_z = nullptr;
};

inline void backward_node(const BackwardStepJob& job, long node) {
    const int n = job.n;
    double x[kMaxDim], bv[kMaxDim], hv[kMaxDim], sv[kMaxDim], xq[kMaxDim];
    long rem = node;
    for (int d = n - 1; d >= 0; --d) {
        const int idx = static_cast<int>(rem % job.n_space);
        rem /= job.n_space;
        x[d] = job.lo[d] + idx * (job.hi[d] - job.lo[d]) / (job.n_space - 1);
    }
    std::span<const double> xs(x, static_cast<std::size_t>(n));
    if (job.coeffs != nullptr) {
        const double y_pol = job.y_policy.value(0, job.step, 0, x);
        job.coeffs->eval_vec(job.coeffs->b, job.t, xs, y_pol, std::span<double>(bv, static_cast<std::size_t>(n)));
        job.coeffs->eval_vec(job.coeffs->h, job.t, xs, y_pol, std::span<double>(hv, static_cast<std::size_t>(n)));
        job.coeffs->eval_vec(job.coeffs->sigma, job.t, xs, y_pol, std::span<double>(sv, static_cast<std::size_t>(n)));
    } else {
        for (int j = 0; j < n; ++j) {
            bv[j] = 0.0;
            hv[j] = 0.0;
            sv[j] = 1.0;
        }
    }

    double best_val = 0.0, best_z = 0.0;
    bool first = true;
    const bool degenerate = job.gamma_low == job.gamma_high;
    for (int side = degenerate ? 1 : 0; side < 2; ++side) {
        const double gamma = side == 0 ? job.gamma_low : job.gamma_high;
        const double sq = std::sqrt(gamma * job.dt);
        double e_val = 0.0, e_slope = 0.0;
        for (int k = 0; k < job.n_quad; ++k) {
            const double xi = job.quad_x[k];
            for (int j = 0; j < n; ++j)
                xq[j] = x[j] + bv[j] * job.dt + hv[j] * gamma * job.dt + sv[j] * sq * xi;
            const double u = job.next_view.value(0, xq);
            e_val += job.quad_w[k] * u;
            e_slope += job.quad_w[k] * xi * u;
        }
        const double z = e_slope / sq;
        double val = e_val;
        if (job.has_drivers) {
            val -= job.coeffs->eval_f(job.t, xs, e_val, z) * job.dt;
            val -= job.coeffs->eval_g(job.t, xs, e_val, z) * gamma * job.dt;
        }
        if (first || val >= best_val) {
            best_val = val;
            best_z = z;
            first = false;
        }
    }
    job.out_y[node] = best_val;
    job.out_z[node] = best_z;
}

void backward_step_serial(const BackwardStepJob& job);
void backward_step_omp(const BackwardStepJob& job);
void backward_step(const BackwardStepJob& job);

// ---------------------------------------------------------------------------
// K extraction along simulated paths: the residual of the backward equation
// accumulated from lattice readouts of (Y, Z).
struct KExtractJob {
    const model::CoefficientSet* coeffs = nullptr;
    int n = 1;
    long n_paths = 0;
    int n_steps = 0;
    double dt = 0.0;
    const double* times = nullptr;
    const double* gamma = nullptr;
    const double* increments = nullptr;
    const double* states = nullptr; // n_paths x (n_steps+1) x n
    LatticeView y_fn, z_fn;         // n_times = n_steps + 1
    double* k_out = nullptr;        // n_paths x (n_steps+1)
    double* max_pos_inc = nullptr;  // per path
    double* abs_y_sup = nullptr;    // per path sup_t |Y_t|
    double* abs_z_sup = nullptr;    // per path sup_t |Z_t|
};

inline void k_extract_path(const KExtractJob& job, long path) {
    const int n = job.n;
    const double* st = job.states + path * static_cast<long>(job.n_steps + 1) * n;
    const double* inc = job.increments + path * job.n_steps;
    double* k = job.k_out + path * (job.n_steps + 1);
    const double y0 = job.y_fn.value(0, st);
    double acc = 0.0; // integral terms + stochastic integral
    double max_inc = 0.0;
    double y_sup = std::abs(y0);
    double z_sup = 0.0;
    k[0] = 0.0;
    for (int i = 0; i < job.n_steps; ++i) {
        const double* x = st + static_cast<long>(i) * n;
        std::span<const double> xs(x, static_cast<std::size_t>(n));
        const double y = job.y_fn.value(i, x);
        const double z = job.z_fn.value(i, x);
        acc += job.coeffs->eval_f(job.times[i], xs, y, z) * job.dt;
        acc += job.coeffs->eval_g(job.times[i], xs, y, z) * job.gamma[i] * job.dt;
        acc += z * inc[i];
        const double y_next = job.y_fn.value(i + 1, st + static_cast<long>(i + 1) * n);
        const double k_next = y_next - y0 - acc;
        const double dk = k_next - k[i];
        if (dk > max_inc) max_inc = dk;
        k[i + 1] = k_next;
        y_sup = std::fmax(y_sup, std::abs(y_next));
        z_sup = std::fmax(z_sup, std::abs(z));
    }
    job.max_pos_inc[path] = max_inc;
    job.abs_y_sup[path] = y_sup;
    job.abs_z_sup[path] = z_sup;
}

void k_extract_serial(const KExtractJob& job);
void k_extract_omp(const KExtractJob& job);
void k_extract(const KExtractJob& job);

// ---------------------------------------------------------------------------
// Generic embarrassingly-parallel fill for the lighter sweeps.
template <class F>
void for_each_index(long count, F&& fn) {
    if (exec_mode() == Exec::openmp) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
        for (long i = 0; i < count; ++i) fn(i);
        return;
#endif
    }
    for (long i = 0; i < count; ++i) fn(i);
}

// Quadrature nodes/weights for the one-step expectation (unit variance).
struct QuadratureRule {
    int n = 2;
    const double* x = nullptr;
    const double* w = nullptr;
};
QuadratureRule quadrature_rule(model::Quadrature q);

} // namespace gfbsde::kernels

#endif // GFBSDE_KERNELS_HPP
