// OpenMP variants of the hot sweeps. Every item writes only its own slots, so
// scheduling cannot change results; falls back to the serial loops when built
// without OpenMP.

#include "gfbsde/kernels.hpp"

namespace gfbsde::kernels {

void fill_increments_omp(const IncrementJob& job) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (long p = 0; p < job.n_paths; ++p) increment_path(job, p);
}

void forward_sweep_omp(const ForwardJob& job) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (long p = 0; p < job.n_paths; ++p) forward_path(job, p);
}

void backward_step_omp(const BackwardStepJob& job) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (long node = 0; node < job.n_nodes; ++node) backward_node(job, node);
}

void k_extract_omp(const KExtractJob& job) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (long p = 0; p < job.n_paths; ++p) k_extract_path(job, p);
}

} // namespace gfbsde::kernels
