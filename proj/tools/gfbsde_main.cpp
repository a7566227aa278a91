// Command-line front end. Subcommands: certify, gexp, solve-sde, solve-bsde,
// solve-fbsde, compare, duality. Outputs are written atomically and carry a
// header with version, config hash, seed and the BDG formula in force; runs
// are reproducible byte-for-byte for a fixed config and seed regardless of
// the thread count.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "gfbsde/duality.hpp"
#include "gfbsde/report.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

using namespace gfbsde;

constexpr std::uint64_t kDefaultSeed = 20250807;

struct Common {
    std::string problem_spec;
    std::string out_path;
    std::uint64_t seed = kDefaultSeed;
    bool seed_from_env = false;
    std::string cp_formula = "pow(10 * p, p / 2)";
    int threads = 0;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

model::Problem load_problem(const std::string& spec, std::string& source_text) {
    if (spec.rfind("catalog:", 0) == 0) {
        source_text = spec;
        return model::catalog_entry(spec.substr(8));
    }
    source_text = read_file(spec);
    return model::parse_problem_file(spec);
}

std::uint64_t config_hash(const Common& c, const std::string& source_text,
                          const std::string& extra) {
    std::uint64_t h = fnv1a64(source_text);
    h = fnv1a64(c.cp_formula, h);
    h = fnv1a64(std::to_string(c.seed), h);
    h = fnv1a64(extra, h);
    return h;
}

void emit(const Common& c, const std::string& content) {
    if (c.out_path.empty())
        std::cout << content;
    else
        report::write_file_atomic(c.out_path, content);
}

int validate_or_fail(const model::Problem& prob) {
    const model::ValidationReport rep =
        model::validate_problem(prob.setting, prob.coeffs, &prob.grid);
    if (!rep.ok()) {
        std::cerr << "problem validation failed:\n" << rep.summary();
        return 2;
    }
    return 0;
}

int cmd_certify(const Common& c) {
    std::string src;
    const model::Problem prob = load_problem(c.problem_spec, src);
    if (int rc = validate_or_fail(prob)) return rc;
    const constants::Engine engine{constants::CpFormula(c.cp_formula)};
    const constants::CertificateReport cert = engine.certify(prob.setting, prob.coeffs);
    report::Header h{"certify-v1", config_hash(c, src, "certify"), c.seed, c.cp_formula};
    emit(c, report::constants_json(cert, h));
    std::cerr << "verdict: " << constants::verdict_name(cert.verdict) << "\n";
    return cert.verdict == constants::Verdict::not_certified ? 2 : 0;
}

int cmd_gexp(const Common& c, const std::string& payoff_src, long n_paths, int switches,
             const std::string& model_name) {
    std::string src;
    const model::Problem prob = load_problem(c.problem_spec, src);
    if (int rc = validate_or_fail(prob)) return rc;
    const expr::Program payoff = expr::parse(payoff_src, expr::single_var("x"));
    const gprocess::IncrementModel inc_model = model_name == "rademacher"
                                                   ? gprocess::IncrementModel::rademacher
                                                   : gprocess::IncrementModel::normal;

    const double lattice = gprocess::gexpect_lattice(payoff, prob.setting, prob.grid);
    const gprocess::ControlFamily family =
        gprocess::ControlFamily::make(prob.setting, prob.grid.n_steps, switches);
    const gprocess::GexpMcReport mc =
        gprocess::gexpect_mc(payoff, prob.setting, prob.grid, family, n_paths, c.seed, inc_model);

    report::Header h{"gexp-v1", config_hash(c, src, payoff_src + model_name), c.seed,
                     c.cp_formula};
    report::CsvBuilder csv(h, {"method", "control", "value", "stderr", "n_steps", "n_space",
                               "n_paths"});
    csv.row({"lattice", "-", report::fmt(lattice), "0", std::to_string(prob.grid.n_steps),
             std::to_string(prob.grid.n_space), "0"});
    for (std::size_t i = 0; i < family.size(); ++i)
        csv.row({"mc", family.controls[i].label, report::fmt(mc.per_control[i].mean),
                 report::fmt(mc.per_control[i].se), std::to_string(prob.grid.n_steps), "-",
                 std::to_string(n_paths)});
    csv.row({"mc-sup", family.controls[static_cast<std::size_t>(mc.argmax)].label,
             report::fmt(mc.value), report::fmt(mc.se), std::to_string(prob.grid.n_steps), "-",
             std::to_string(n_paths)});
    emit(c, csv.str());
    std::cerr << "lattice " << lattice << "  mc-sup " << mc.value << " (se " << mc.se << ")\n";
    return 0;
}

int cmd_solve_sde(const Common& c, double y_const, long n_paths, int switches) {
    std::string src;
    const model::Problem prob = load_problem(c.problem_spec, src);
    if (int rc = validate_or_fail(prob)) return rc;
    const gprocess::ControlFamily family =
        gprocess::ControlFamily::make(prob.setting, prob.grid.n_steps, switches);
    const sde::YInput y = sde::YInput::make_constant(y_const);

    report::Header h{"solve-sde-v1", config_hash(c, src, "sde" + report::fmt(y_const)), c.seed,
                     c.cp_formula};
    report::CsvBuilder csv(h, {"control", "t", "coord", "mean", "p05", "p50", "p95"});
    std::vector<double> buf(static_cast<std::size_t>(n_paths));
    for (const auto& control : family.controls) {
        const gprocess::PathEnsemble ens =
            gprocess::sample_paths(prob.grid, prob.setting, control, n_paths, c.seed);
        const sde::ForwardSolution sol =
            sde::euler_forward(prob.coeffs, prob.grid, prob.setting, ens, y);
        for (int i = 0; i <= prob.grid.n_steps; ++i) {
            for (int j = 0; j < prob.coeffs.n; ++j) {
                for (long path = 0; path < n_paths; ++path)
                    buf[static_cast<std::size_t>(path)] =
                        sol.state(path, i)[static_cast<std::size_t>(j)];
                const MeanSE ms = mean_se(buf);
                std::vector<double> sorted = buf;
                std::sort(sorted.begin(), sorted.end());
                auto quant = [&](double q) {
                    const std::size_t idx = static_cast<std::size_t>(
                        q * static_cast<double>(sorted.size() - 1));
                    return sorted[idx];
                };
                csv.row({control.label, report::fmt(prob.grid.time_at(i)), std::to_string(j + 1),
                         report::fmt(ms.mean), report::fmt(quant(0.05)), report::fmt(quant(0.5)),
                         report::fmt(quant(0.95))});
            }
        }
    }
    emit(c, csv.str());
    return 0;
}

int cmd_solve_bsde(const Common& c, double policy_const, long n_paths, int switches) {
    std::string src;
    const model::Problem prob = load_problem(c.problem_spec, src);
    if (int rc = validate_or_fail(prob)) return rc;
    const sde::YInput policy = sde::YInput::make_constant(policy_const);
    const bsde::BackwardSolution sol =
        bsde::dp_backward(prob.coeffs, prob.setting, prob.grid, policy);

    report::Header h{"solve-bsde-v1", config_hash(c, src, "bsde" + report::fmt(policy_const)),
                     c.seed, c.cp_formula};
    report::CsvBuilder csv(h, {"record", "control", "t", "x", "value", "aux"});
    const int stride = std::max(1, prob.grid.n_space / 33);
    for (int i = 0; i <= prob.grid.n_steps; i += std::max(1, prob.grid.n_steps / 8)) {
        for (int k = 0; k < prob.grid.n_space; k += stride) {
            const double x = sol.y_fn.node_coord(0, k);
            csv.row({"y", "-", report::fmt(prob.grid.time_at(i)), report::fmt(x),
                     report::fmt(sol.y_fn.row(i)[k]), report::fmt(sol.z_fn.row(i)[k])});
        }
    }
    const gprocess::ControlFamily family =
        gprocess::ControlFamily::make(prob.setting, prob.grid.n_steps, switches);
    for (const auto& control : family.controls) {
        const gprocess::PathEnsemble ens =
            gprocess::sample_paths(prob.grid, prob.setting, control, n_paths, c.seed);
        const sde::ForwardSolution x =
            sde::euler_forward(prob.coeffs, prob.grid, prob.setting, ens,
                               sde::YInput::make_lattice(&sol.y_fn));
        const bsde::KPaths k = bsde::k_extract(sol, prob.coeffs, prob.grid, ens, x);
        csv.row({"k-terminal-mean", control.label, report::fmt(prob.setting.horizon), "-",
                 report::fmt(k.k_terminal.mean), report::fmt(k.k_terminal.se)});
        csv.row({"k-max-pos-increment", control.label, "-", "-",
                 report::fmt(k.max_positive_increment), report::fmt(k.tol_k)});
    }
    csv.row({"y0", "-", "0", report::fmt(prob.setting.x0[0]), report::fmt(sol.y0), "-"});
    emit(c, csv.str());
    std::cerr << "y0 = " << sol.y0 << "\n";
    return 0;
}

int cmd_solve_fbsde(const Common& c, const std::string& backend, double tol, int max_iter,
                    double p_prime, bool force, long n_paths, int switches,
                    const std::string& trace_out) {
    std::string src;
    const model::Problem prob = load_problem(c.problem_spec, src);
    if (int rc = validate_or_fail(prob)) return rc;
    const constants::Engine engine{constants::CpFormula(c.cp_formula)};
    const gprocess::ControlFamily family =
        gprocess::ControlFamily::make(prob.setting, prob.grid.n_steps, switches);

    picard::PicardOptions opts;
    opts.tol = tol;
    opts.max_iter = max_iter;
    opts.seed = c.seed;
    opts.n_paths = n_paths;
    opts.family_switches = switches;
    opts.force = force;
    opts.backend = backend == "paths" ? picard::Backend::paths : picard::Backend::lattice;
    if (p_prime > 0.0) opts.p_prime = p_prime;

    const picard::FBSDESolution sol = prob.setting.p < 2.0
                                          ? picard::picard_solve_p_lt2(prob, family, opts, engine)
                                          : picard::picard_solve(prob, family, opts, engine);

    report::Header h{"solve-fbsde-v1", config_hash(c, src, backend + report::fmt(tol)), c.seed,
                     c.cp_formula};
    report::CsvBuilder csv(h, {"record", "t", "x", "value", "aux"});
    csv.row({"y0", "0", report::fmt(prob.setting.x0[0]), report::fmt(sol.y0), "-"});
    csv.row({"certificate", "-", "-", sol.certificate, sol.forced ? "forced" : "-"});
    csv.row({"converged", "-", "-", sol.converged ? "true" : "false",
             std::to_string(sol.iterations)});
    csv.row({"k-reference-mean", "-", "-", report::fmt(sol.k_reference_mean),
             std::to_string(sol.reference_control)});
    const int stride = std::max(1, prob.grid.n_space / 33);
    for (int i = 0; i <= prob.grid.n_steps; i += std::max(1, prob.grid.n_steps / 8)) {
        for (int k = 0; k < prob.grid.n_space; k += stride) {
            const double x = sol.backward.y_fn.node_coord(0, k);
            csv.row({"y", report::fmt(prob.grid.time_at(i)), report::fmt(x),
                     report::fmt(sol.backward.y_fn.row(i)[k]),
                     report::fmt(sol.backward.z_fn.row(i)[k])});
        }
    }
    emit(c, csv.str());

    report::CsvBuilder trace_csv(h, {"m", "d_x", "d_y", "ratio", "envelope"});
    for (const auto& row : sol.trace.rows)
        trace_csv.row({std::to_string(row.m), report::fmt(row.d_x), report::fmt(row.d_y),
                       report::fmt(row.ratio), report::fmt(row.envelope)});
    if (!trace_out.empty())
        report::write_file_atomic(trace_out, trace_csv.str());
    else if (!c.out_path.empty())
        report::write_file_atomic(c.out_path + ".trace.csv", trace_csv.str());
    else
        std::cout << trace_csv.str();

    std::cerr << "y0 = " << sol.y0 << " after " << sol.iterations << " stages ("
              << sol.certificate << ")\n";
    return sol.converged ? 0 : 2;
}

int cmd_compare(const Common& c, int theorem, int n_seeds, const std::string& grids_csv,
                long n_paths, int switches) {
    std::string src;
    const model::Problem prob = load_problem(c.problem_spec, src);
    if (int rc = validate_or_fail(prob)) return rc;
    const constants::Engine engine{constants::CpFormula(c.cp_formula)};

    duality::CompareOptions opts;
    opts.n_seeds = n_seeds;
    opts.n_paths = n_paths;
    opts.family_switches = switches;
    opts.seed0 = c.seed;
    if (!grids_csv.empty()) {
        opts.grid_steps.clear();
        std::stringstream ss(grids_csv);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            char* end = nullptr;
            const long v = std::strtol(tok.c_str(), &end, 10);
            if (end != tok.c_str() + tok.size() || v < 1)
                throw Error("--grids expects positive integers, got '" + tok + "'");
            opts.grid_steps.push_back(static_cast<int>(v));
        }
    }

    const std::vector<duality::CompareRow> rows =
        theorem == 41 ? duality::compare_thm41(prob, opts, engine)
                      : duality::compare_thm42(prob, opts, engine);

    report::Header h{"compare-v1", config_hash(c, src, "thm" + std::to_string(theorem)), c.seed,
                     c.cp_formula};
    report::CsvBuilder csv(h, {"seed", "n_steps", "y0_1", "y0_2", "margin", "eps_num", "l_min",
                               "residual", "budget", "p0", "x_hat", "verdict", "note"});
    int fails = 0;
    for (const auto& r : rows) {
        csv.row({std::to_string(r.seed), std::to_string(r.n_steps), report::fmt(r.y0_1),
                 report::fmt(r.y0_2), report::fmt(r.margin), report::fmt(r.eps_num),
                 report::fmt(r.l_min), report::fmt(r.residual), report::fmt(r.budget),
                 report::fmt(r.p0), report::fmt(r.x_hat), r.verdict, r.note});
        if (r.verdict == "FAIL") ++fails;
    }
    emit(c, csv.str());
    std::cerr << rows.size() << " battery rows, " << fails << " FAIL\n";
    return fails == 0 ? 0 : 2;
}

int cmd_duality(const Common& c, double phi_shift, long n_paths, int switches) {
    std::string src;
    const model::Problem base = load_problem(c.problem_spec, src);
    if (int rc = validate_or_fail(base)) return rc;
    const constants::Engine engine{constants::CpFormula(c.cp_formula)};

    model::Problem p1 = base;
    p1.coeffs.phi = expr::parse("(" + base.coeffs.phi.source() + ") + " + report::fmt(phi_shift),
                                expr::coefficient_vars(base.setting.n, false, false, false));
    const duality::CompareRow row = duality::run_duality_case(
        p1, base, 41, n_paths, switches, c.seed, 1e-6, engine);

    report::Header h{"duality-v1", config_hash(c, src, "duality" + report::fmt(phi_shift)),
                     c.seed, c.cp_formula};
    report::CsvBuilder csv(h, {"n_steps", "y0_1", "y0_2", "margin", "l_min", "residual",
                               "budget", "verdict", "note"});
    csv.row({std::to_string(row.n_steps), report::fmt(row.y0_1), report::fmt(row.y0_2),
             report::fmt(row.margin), report::fmt(row.l_min), report::fmt(row.residual),
             report::fmt(row.budget), row.verdict, row.note});
    emit(c, csv.str());
    std::cerr << "duality residual " << row.residual << " (budget " << row.budget << ") "
              << row.verdict << "\n";
    return row.verdict == "PASS" ? 0 : 2;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"G-driven forward-backward SDE laboratory"};
    app.require_subcommand(1);

    Common common;
    app.add_option("--threads", common.threads, "worker threads (0 = runtime default)");
    bool seed_set = false;
    app.add_option("--seed", common.seed, "master seed")->each([&](const std::string&) {
        seed_set = true;
    });
    app.add_option("--cp-formula", common.cp_formula, "BDG constant as an expression in p");

    std::string payoff = "x * x";
    long n_paths = 20000;
    int switches = 2;
    std::string inc_model = "normal";
    double y_const = 0.0;
    double policy_const = 0.0;
    std::string backend = "lattice";
    double tol = 1e-4;
    int max_iter = 50;
    double p_prime = 0.0;
    bool force = false;
    std::string trace_out;
    int theorem = 41;
    int n_seeds = 20;
    std::string grids_csv;
    double phi_shift = 0.1;

    auto add_common = [&](CLI::App* sub) {
        sub->fallthrough(); // let --seed / --threads / --cp-formula trail the subcommand
        sub->add_option("--problem", common.problem_spec,
                        "problem file path or catalog:<name>")
            ->required();
        sub->add_option("--out", common.out_path, "output file (stdout if omitted)");
    };

    CLI::App* certify = app.add_subcommand("certify", "constants report and solvability verdict");
    add_common(certify);

    CLI::App* gexp = app.add_subcommand("gexp", "worst-case expectation of a terminal payoff");
    add_common(gexp);
    gexp->add_option("--payoff", payoff, "payoff expression in x");
    gexp->add_option("--n-paths", n_paths, "Monte Carlo paths");
    gexp->add_option("--switches", switches, "bang-bang switch times in the family");
    gexp->add_option("--model", inc_model, "increment model: normal | rademacher");

    CLI::App* ssde = app.add_subcommand("solve-sde", "forward Euler statistics per control");
    add_common(ssde);
    ssde->add_option("--y-const", y_const, "constant exogenous y-process");
    ssde->add_option("--n-paths", n_paths, "Monte Carlo paths");
    ssde->add_option("--switches", switches, "bang-bang switch times in the family");

    CLI::App* sbsde = app.add_subcommand("solve-bsde", "backward solve with a frozen flow");
    add_common(sbsde);
    sbsde->add_option("--policy-const", policy_const, "constant y-policy closing the flow");
    sbsde->add_option("--n-paths", n_paths, "paths for the K diagnostics");
    sbsde->add_option("--switches", switches, "bang-bang switch times in the family");

    CLI::App* sfb = app.add_subcommand("solve-fbsde", "coupled solve with contraction trace");
    add_common(sfb);
    sfb->add_option("--backend", backend, "lattice | paths");
    sfb->add_option("--tol", tol, "stage-distance stopping tolerance");
    sfb->add_option("--max-iter", max_iter, "stage cap");
    sfb->add_option("--p-prime", p_prime, "distance exponent override");
    sfb->add_flag("--force", force, "iterate even when not certified");
    sfb->add_option("--n-paths", n_paths, "paths per control");
    sfb->add_option("--switches", switches, "bang-bang switch times in the family");
    sfb->add_option("--trace-out", trace_out, "contraction trace file");

    CLI::App* cmp = app.add_subcommand("compare", "ordering battery across seeds and grids");
    add_common(cmp);
    cmp->add_option("--theorem", theorem, "41 (terminal data) or 42 (start point)")
        ->check(CLI::IsMember({41, 42}));
    cmp->add_option("--seeds", n_seeds, "number of randomized pairs");
    cmp->add_option("--grids", grids_csv, "comma-separated step counts");
    cmp->add_option("--n-paths", n_paths, "paths per control");
    cmp->add_option("--switches", switches, "bang-bang switch times in the family");

    CLI::App* dual = app.add_subcommand("duality", "single dual-identity experiment");
    add_common(dual);
    dual->add_option("--phi-shift", phi_shift, "terminal shift defining the dominating problem");
    dual->add_option("--n-paths", n_paths, "paths per control");
    dual->add_option("--switches", switches, "bang-bang switch times in the family");

    CLI11_PARSE(app, argc, argv);

    if (!seed_set) {
        if (const char* env = std::getenv("GFBSDE_SEED")) {
            common.seed = std::strtoull(env, nullptr, 10);
            common.seed_from_env = true;
        }
    }
    if (common.threads == 1) {
        kernels::set_exec_mode(kernels::Exec::serial);
    } else if (common.threads > 1) {
#ifdef _OPENMP
        omp_set_num_threads(common.threads);
#endif
    }
    if (common.seed_from_env) std::cerr << "seed from GFBSDE_SEED: " << common.seed << "\n";

    try {
        if (certify->parsed()) return cmd_certify(common);
        if (gexp->parsed()) return cmd_gexp(common, payoff, n_paths, switches, inc_model);
        if (ssde->parsed()) return cmd_solve_sde(common, y_const, n_paths, switches);
        if (sbsde->parsed()) return cmd_solve_bsde(common, policy_const, n_paths, switches);
        if (sfb->parsed())
            return cmd_solve_fbsde(common, backend, tol, max_iter, p_prime, force, n_paths,
                                   switches, trace_out);
        if (cmp->parsed()) return cmd_compare(common, theorem, n_seeds, grids_csv, n_paths,
                                              switches);
        if (dual->parsed()) return cmd_duality(common, phi_shift, n_paths, switches);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const NumericalAbort& e) {
        std::cerr << "numerical abort: " << e.what() << "\n";
        return 3;
    } catch (const PreconditionError& e) {
        std::cerr << "precondition: " << e.what() << "\n";
        return 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
