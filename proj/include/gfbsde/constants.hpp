// Explicit constants behind the solvability certificate: the small-time patch
// constant, its Gronwall variant, the backward-stability constant, the
// contraction factors Lambda_p / Lambda~_p, and the closed-form coupling
// threshold. All formulas take the BDG constant C(p) as an input expression
// (default (10 p)^{p/2}); any upper bound for C(p) keeps the certificate
// sound, larger values only shrink the certified region.

#ifndef GFBSDE_CONSTANTS_HPP
#define GFBSDE_CONSTANTS_HPP

#include <optional>
#include <string>

#include "gfbsde/expr.hpp"
#include "gfbsde/model.hpp"

namespace gfbsde::constants {

class CpFormula {
public:
    CpFormula();                                   // (10 p)^{p/2}
    explicit CpFormula(const std::string& source); // expression in p
    double operator()(double p) const;
    const std::string& source() const { return source_; }

private:
    expr::Program prog_;
    std::string source_;
};

struct ConstantsReport {
    double p = 0, T = 0;
    int n = 1;
    double L1 = 0, L2 = 0, L3 = 0, sigma_high = 0, sigma_low = 0;

    double bdg_c = 0;
    double lambda2 = 0, lambda3 = 0, lambda4 = 0, lambda5 = 0;
    double delta0 = 0; // +inf when L1 == 0 (lambda1 vanishes identically)
    bool delta0_unbounded = false;
    double lambda1_at_delta0 = 0;
    double c1_patch = 0;
    std::optional<double> c1_gronwall; // defined for p >= 2 only
    double c1 = 0;                     // value used downstream (min of variants)
    double c2 = 0;
    double lambda_p = 0;
    double lambda_tilde_p = 0;
    double delta_threshold = 0; // bound on L2*L3 solving lambda_p = 1
    std::optional<double> p_prime;
    std::string cp_formula;
};

enum class Verdict { exists_unique_p_ge2, exists_unique_p_lt2, not_certified };

const char* verdict_name(Verdict v);

struct CertificateReport {
    ConstantsReport constants;
    Verdict verdict = Verdict::not_certified;
    std::string reason;
};

class Engine {
public:
    explicit Engine(CpFormula cp = CpFormula()) : cp_(std::move(cp)) {}

    const CpFormula& cp() const { return cp_; }
    double bdg_constant(double p) const; // domain error for p <= 1

    double lambda1(double delta, double p, int n, double L1, double sigma_high) const;
    double lambda2(double p, int n, double sigma_high) const;
    double lambda3(double p, double T, int n, double L1, double sigma_high) const;
    double lambda4(double p, int n, double sigma_high) const;
    double lambda5(double p, double L1, double sigma_high, double sigma_low) const;

    // Root of lambda1(delta) = 0.75, bisected to 1e-12 residual; +inf when
    // L1 == 0.
    double solve_delta0(double p, int n, double L1, double sigma_high) const;

    double c1_patch(double p, double T, int n, double L1, double sigma_high) const;
    double c1_gronwall(double p, double T, int n, double L1, double sigma_high) const;
    // min of the defined variants (patch only for p < 2).
    double c1(double p, double T, int n, double L1, double sigma_high) const;
    double c2(double p, double T, double L1, double sigma_high, double sigma_low) const;

    double lambda_p(double p, double T, int n, double L1, double L2, double L3,
                    double sigma_high, double sigma_low) const;
    double lambda_tilde_p(double p, double T, int n, double L1, double L2, double L3,
                          double sigma_high, double sigma_low) const;

    // Exact solution of lambda_p = 1 in the product L2*L3.
    double coupling_threshold(double p, double T, int n, double L1, double sigma_high,
                              double sigma_low) const;

    // Largest sampled p' in the admissible interval with a contraction factor
    // below one (64-point grid). Precondition: the factor at p is below one.
    std::optional<double> find_p_prime(const model::GSetting& setting, double L1, double L2,
                                       double L3, int grid_points = 64) const;

    ConstantsReport report(const model::GSetting& setting, const model::CoefficientSet& coeffs) const;
    CertificateReport certify(const model::GSetting& setting,
                              const model::CoefficientSet& coeffs) const;

    // Contraction factor of the dual linear system used by the comparison
    // experiments, obtained by feeding the linearized coefficient bounds
    // through the same Lambda formula (scalar forward component):
    //   L1_dual = n L1 (1+sh^2) max(1, 1/sl^2),
    //   L2_dual = n L2 (1+sh^2),  L3_dual = L3 (1+sh^2).
    double dual_lambda2(double T, int n, double L1, double L2, double L3, double sigma_high,
                        double sigma_low) const;
    // Matching bound on L2*L3 for dual solvability.
    double dual_coupling_threshold(double T, int n, double L1, double sigma_high,
                                   double sigma_low) const;

private:
    CpFormula cp_;
};

} // namespace gfbsde::constants

#endif // GFBSDE_CONSTANTS_HPP
