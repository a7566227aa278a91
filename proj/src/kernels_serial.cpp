// Serial reference sweeps. Kept deliberately plain: these are the ground
// truth the OpenMP variants are tested against, bit for bit.

#include "gfbsde/kernels.hpp"

namespace gfbsde::kernels {

namespace {
Exec g_mode = Exec::openmp;
}

Exec exec_mode() { return g_mode; }
void set_exec_mode(Exec mode) { g_mode = mode; }

void fill_increments_serial(const IncrementJob& job) {
    for (long p = 0; p < job.n_paths; ++p) increment_path(job, p);
}

void forward_sweep_serial(const ForwardJob& job) {
    for (long p = 0; p < job.n_paths; ++p) forward_path(job, p);
}

void backward_step_serial(const BackwardStepJob& job) {
    for (long node = 0; node < job.n_nodes; ++node) backward_node(job, node);
}

void k_extract_serial(const KExtractJob& job) {
    for (long p = 0; p < job.n_paths; ++p) k_extract_path(job, p);
}

void fill_increments(const IncrementJob& job) {
    if (g_mode == Exec::openmp)
        fill_increments_omp(job);
    else
        fill_increments_serial(job);
}

void forward_sweep(const ForwardJob& job) {
    if (g_mode == Exec::openmp)
        forward_sweep_omp(job);
    else
        forward_sweep_serial(job);
}

void backward_step(const BackwardStepJob& job) {
    if (g_mode == Exec::openmp)
        backward_step_omp(job);
    else
        backward_step_serial(job);
}

void k_extract(const KExtractJob& job) {
    if (g_mode == Exec::openmp)
        k_extract_omp(job);
    else
        k_extract_serial(job);
}

namespace {
constexpr double kTwoPointX[2] = {-1.0, 1.0};
constexpr double kTwoPointW[2] = {0.5, 0.5};
// Gauss-Hermite rules rescaled to unit-variance weight.
constexpr double kGh3X[3] = {-1.7320508075688772, 0.0, 1.7320508075688772};
constexpr double kGh3W[3] = {1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0};
constexpr double kGh5X[5] = {-2.8569700138728056, -1.3556261799742659, 0.0, 1.3556261799742659,
                             2.8569700138728056};
constexpr double kGh5W[5] = {0.011257411327720688, 0.22207592200561263, 0.5333333333333333,
                             0.22207592200561263, 0.011257411327720688};
} // namespace

QuadratureRule quadrature_rule(model::Quadrature q) {
    switch (q) {
    case model::Quadrature::gauss_hermite_3: return {3, kGh3X, kGh3W};
    case model::Quadrature::gauss_hermite_5: return {5, kGh5X, kGh5W};
    case model::Quadrature::two_point:
    default: return {2, kTwoPointX, kTwoPointW};
    }
}

} // namespace gfbsde::kernels
