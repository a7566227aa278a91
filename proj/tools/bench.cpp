// Timing comparison of the serial reference sweeps against the OpenMP
// variants on a synthetic problem. Run with --quick for smoke sizes.

#include <chrono>
#include <cstring>
#include <iostream>

#include "gfbsde/bsde.hpp"
#include "gfbsde/gprocess.hpp"

using namespace gfbsde;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
    fn(); // warm up
    const auto t0 = std::chrono::steady_clock::now();
    for (int r = 0; r < reps; ++r) fn();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void report_line(const char* name, double serial_ms, double omp_ms) {
    std::printf("%-22s serial %9.3f ms   openmp %9.3f ms   speedup %5.2fx\n", name, serial_ms,
                omp_ms, omp_ms > 0 ? serial_ms / omp_ms : 0.0);
}

} // namespace

int main(int argc, char** argv) {
    bool quick = false;
    for (int i = 1; i < argc; ++i)
        if (std::strcmp(argv[i], "--quick") == 0) quick = true;

    const long n_paths = quick ? 2000 : 200000;
    const int n_steps = quick ? 32 : 128;
    const int n_space = quick ? 257 : 2049;
    const int reps = quick ? 2 : 5;

    const model::Problem prob = model::catalog_entry("weakly-coupled");
    model::DiscretizationGrid grid = prob.grid;
    grid.n_steps = n_steps;
    grid.n_space = n_space;
    const gprocess::VolatilityControl control{
        std::vector<double>(static_cast<std::size_t>(n_steps),
                            prob.setting.sigma_high * prob.setting.sigma_high),
        "const-high"};

    std::printf("paths=%ld steps=%d nodes=%d reps=%d\n", n_paths, n_steps, n_space, reps);

    // Increment generation.
    {
        std::vector<double> sqrt_gdt(static_cast<std::size_t>(n_steps), 0.1);
        std::vector<double> out(static_cast<std::size_t>(n_paths) * n_steps);
        kernels::IncrementJob job;
        job.seed = 7;
        job.n_paths = n_paths;
        job.n_steps = n_steps;
        job.sqrt_gdt = sqrt_gdt.data();
        job.out = out.data();
        const double s = time_ms([&] { kernels::fill_increments_serial(job); }, reps);
        const double o = time_ms([&] { kernels::fill_increments_omp(job); }, reps);
        report_line("fill_increments", s, o);
    }

    const gprocess::PathEnsemble ens =
        gprocess::sample_paths(grid, prob.setting, control, n_paths, 7);

    // Forward Euler.
    sde::ForwardSolution fwd;
    {
        const auto run_serial = [&] {
            kernels::set_exec_mode(kernels::Exec::serial);
            fwd = sde::euler_forward(prob.coeffs, grid, prob.setting, ens,
                                     sde::YInput::make_constant(0.2));
        };
        const auto run_omp = [&] {
            kernels::set_exec_mode(kernels::Exec::openmp);
            fwd = sde::euler_forward(prob.coeffs, grid, prob.setting, ens,
                                     sde::YInput::make_constant(0.2));
        };
        const double s = time_ms(run_serial, reps);
        const double o = time_ms(run_omp, reps);
        report_line("euler_forward", s, o);
    }

    // Backward dynamic programming.
    bsde::BackwardSolution sol;
    {
        const auto run_serial = [&] {
            kernels::set_exec_mode(kernels::Exec::serial);
            sol = bsde::dp_backward(prob.coeffs, prob.setting, grid, sde::YInput::make_zero());
        };
        const auto run_omp = [&] {
            kernels::set_exec_mode(kernels::Exec::openmp);
            sol = bsde::dp_backward(prob.coeffs, prob.setting, grid, sde::YInput::make_zero());
        };
        const double s = time_ms(run_serial, reps);
        const double o = time_ms(run_omp, reps);
        report_line("dp_backward", s, o);
    }

    // K extraction.
    {
        const auto run_serial = [&] {
            kernels::set_exec_mode(kernels::Exec::serial);
            (void)bsde::k_extract(sol, prob.coeffs, grid, ens, fwd);
        };
        const auto run_omp = [&] {
            kernels::set_exec_mode(kernels::Exec::openmp);
            (void)bsde::k_extract(sol, prob.coeffs, grid, ens, fwd);
        };
        const double s = time_ms(run_serial, reps);
        const double o = time_ms(run_omp, reps);
        report_line("k_extract", s, o);
    }

    kernels::set_exec_mode(kernels::Exec::openmp);
    return 0;
}
