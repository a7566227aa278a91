#include "gfbsde/constants.hpp"

#include <cmath>
#include <limits>

namespace gfbsde::constants {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

CpFormula::CpFormula() : CpFormula("pow(10 * p, p / 2)") {}

CpFormula::CpFormula(const std::string& source)
    : prog_(expr::parse(source, expr::single_var("p"))), source_(source) {}

double CpFormula::operator()(double p) const {
    const double vars[1] = {p};
    const double c = prog_.eval(std::span<const double>(vars, 1));
    if (!(c > 0.0) || !std::isfinite(c))
        throw DomainError("BDG constant formula '" + source_ + "' must be positive and finite at p=" +
                          std::to_string(p));
    return c;
}

double Engine::bdg_constant(double p) const {
    if (!(p > 1.0))
        throw DomainError("BDG constant requires p > 1");
    return cp_(p);
}

double Engine::lambda1(double delta, double p, int n, double L1, double sigma_high) const {
    if (delta < 0.0) throw DomainError("lambda1 requires delta >= 0");
    const double cp = bdg_constant(p);
    const double s2p = std::pow(sigma_high, 2.0 * p);
    return std::pow(8.0, p - 1.0) *
           ((1.0 + s2p) * std::pow(n * L1 * delta, p) +
            2.0 * cp * std::pow(L1 * n * n * sigma_high, p) * std::pow(delta, p / 2.0));
}

double Engine::lambda2(double p, int n, double sigma_high) const {
    const double cp = bdg_constant(p);
    return std::pow(8.0, p - 1.0) *
           (1.0 + std::pow(sigma_high, 2.0 * p) + 2.0 * cp * std::pow(n * sigma_high, p));
}

double Engine::lambda3(double p, double T, int n, double L1, double sigma_high) const {
    const double cp = bdg_constant(p);
    const double s2p = std::pow(sigma_high, 2.0 * p);
    return std::pow(6.0, p - 1.0) *
           ((1.0 + s2p) * std::pow(n * L1, p) * std::pow(T, p - 1.0) +
            2.0 * cp * std::pow(L1 * n * n * sigma_high, p) * std::pow(T, (p - 2.0) / 2.0));
}

double Engine::lambda4(double p, int n, double sigma_high) const {
    const double cp = bdg_constant(p);
    return std::pow(6.0, p - 1.0) *
           (1.0 + std::pow(sigma_high, 2.0 * p) + 2.0 * cp * std::pow(n * sigma_high, p));
}

double Engine::lambda5(double p, double L1, double sigma_high, double sigma_low) const {
    if (!(sigma_low > 0.0))
        throw DomainError("lambda5 requires sigma_low > 0");
    const double s2 = sigma_high * sigma_high;
    const double inv = 1.0 + 1.0 / (sigma_low * sigma_low);
    const double branch = std::max(1.0 / (p - 1.0), 1.0);
    return p * L1 * (1.0 + s2) + 0.5 * p * L1 * L1 * s2 * inv * inv * branch;
}

double Engine::solve_delta0(double p, int n, double L1, double sigma_high) const {
    if (L1 == 0.0) return kInf; // lambda1 vanishes identically
    if (L1 < 0.0) throw DomainError("L1 must be nonnegative");
    const double target = 0.75;
    double hi = 1.0;
    while (lambda1(hi, p, n, L1, sigma_high) < target) {
        hi *= 2.0;
        if (!std::isfinite(hi)) throw DomainError("lambda1 never reaches 0.75");
    }
    double lo = 0.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        if (lambda1(mid, p, n, L1, sigma_high) < target)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

double Engine::c1_patch(double p, double T, int n, double L1, double sigma_high) const {
    if (!(p > 1.0)) throw DomainError("c1_patch requires p > 1");
    double delta0 = solve_delta0(p, n, L1, sigma_high);
    if (!std::isfinite(delta0)) delta0 = T; // L1 == 0: any patch length works
    const double l2 = lambda2(p, n, sigma_high);
    const double fourp = std::pow(4.0, p);
    const double bracket =
        (std::pow(4.0, p * (T + 2.0 * delta0) / delta0) - fourp) / (fourp - 1.0) - T / delta0;
    return 4.0 * l2 / (fourp - 1.0) * bracket;
}

double Engine::c1_gronwall(double p, double T, int n, double L1, double sigma_high) const {
    if (!(p >= 2.0))
        throw DomainError("the Gronwall variant of C1 is defined for p >= 2 only");
    return std::exp(lambda3(p, T, n, L1, sigma_high) * T) * lambda4(p, n, sigma_high);
}

double Engine::c1(double p, double T, int n, double L1, double sigma_high) const {
    const double patch = c1_patch(p, T, n, L1, sigma_high);
    if (p >= 2.0) return std::min(patch, c1_gronwall(p, T, n, L1, sigma_high));
    return patch;
}

double Engine::c2(double p, double T, double L1, double sigma_high, double sigma_low) const {
    if (!(p > 1.0)) throw DomainError("c2 requires p > 1");
    if (!(sigma_low > 0.0)) throw DomainError("c2 requires sigma_low > 0");
    const double s2 = sigma_high * sigma_high;
    const double l5 = lambda5(p, L1, sigma_high, sigma_low);
    return std::pow(2.0, p - 1.0) *
           (1.0 + std::pow(1.0 + s2, p) * std::exp(p * L1 * (1.0 + s2) * T)) * std::exp(l5 * T);
}

double Engine::lambda_p(double p, double T, int n, double L1, double L2, double L3,
                        double sigma_high, double sigma_low) const {
    const double c1v = c1(p, T, n, L1, sigma_high);
    const double c2v = c2(p, T, L1, sigma_high, sigma_low);
    return c1v * c2v * std::pow(n * L2 * L3, p) * (std::pow(T, p) + std::pow(T, p / 2.0)) *
           std::pow(1.0 + T, p);
}

double Engine::lambda_tilde_p(double p, double T, int n, double L1, double L2, double L3,
                              double sigma_high, double sigma_low) const {
    const double c1v = c1(p, T, n, L1, sigma_high);
    const double c2v = c2(p, T, L1, sigma_high, sigma_low);
    return c1v * c2v * std::pow(n * L2 * L3, p) * std::pow(T, p) * std::pow(1.0 + T, p);
}

double Engine::coupling_threshold(double p, double T, int n, double L1, double sigma_high,
                                  double sigma_low) const {
    const double c1v = c1(p, T, n, L1, sigma_high);
    const double c2v = c2(p, T, L1, sigma_high, sigma_low);
    const double base = c1v * c2v * (std::pow(T, p) + std::pow(T, p / 2.0)) * std::pow(1.0 + T, p);
    return std::pow(base, -1.0 / p) / n;
}

std::optional<double> Engine::find_p_prime(const model::GSetting& setting, double L1, double L2,
                                           double L3, int grid_points) const {
    const double p = setting.p;
    const bool low_regime = p < 2.0;
    const double hi = low_regime ? std::min(2.0, setting.beta) : setting.beta;
    auto factor = [&](double q) {
        return low_regime ? lambda_tilde_p(q, setting.horizon, setting.n, L1, L2, L3,
                                           setting.sigma_high, setting.sigma_low)
                          : lambda_p(q, setting.horizon, setting.n, L1, L2, L3,
                                     setting.sigma_high, setting.sigma_low);
    };
    if (!(factor(p) < 1.0))
        throw PreconditionError("find_p_prime requires a contraction factor below one at p");
    std::optional<double> best;
    for (int k = 1; k <= grid_points; ++k) {
        const double q = p + (hi - p) * static_cast<double>(k) / (grid_points + 1);
        if (factor(q) < 1.0) best = q;
    }
    return best;
}

ConstantsReport Engine::report(const model::GSetting& setting,
                               const model::CoefficientSet& coeffs) const {
    ConstantsReport r;
    r.p = setting.p;
    r.T = setting.horizon;
    r.n = setting.n;
    r.L1 = coeffs.L1;
    r.L2 = coeffs.L2;
    r.L3 = coeffs.L3;
    r.sigma_high = setting.sigma_high;
    r.sigma_low = setting.sigma_low;
    r.cp_formula = cp_.source();

    r.bdg_c = bdg_constant(r.p);
    r.lambda2 = lambda2(r.p, r.n, r.sigma_high);
    r.lambda3 = lambda3(r.p, r.T, r.n, r.L1, r.sigma_high);
    r.lambda4 = lambda4(r.p, r.n, r.sigma_high);
    r.lambda5 = lambda5(r.p, r.L1, r.sigma_high, r.sigma_low);
    r.delta0 = solve_delta0(r.p, r.n, r.L1, r.sigma_high);
    r.delta0_unbounded = !std::isfinite(r.delta0);
    r.lambda1_at_delta0 =
        r.delta0_unbounded ? 0.0 : lambda1(r.delta0, r.p, r.n, r.L1, r.sigma_high);
    r.c1_patch = c1_patch(r.p, r.T, r.n, r.L1, r.sigma_high);
    if (r.p >= 2.0) r.c1_gronwall = c1_gronwall(r.p, r.T, r.n, r.L1, r.sigma_high);
    r.c1 = c1(r.p, r.T, r.n, r.L1, r.sigma_high);
    r.c2 = c2(r.p, r.T, r.L1, r.sigma_high, r.sigma_low);
    r.lambda_p = lambda_p(r.p, r.T, r.n, r.L1, r.L2, r.L3, r.sigma_high, r.sigma_low);
    r.lambda_tilde_p =
        lambda_tilde_p(r.p, r.T, r.n, r.L1, r.L2, r.L3, r.sigma_high, r.sigma_low);
    r.delta_threshold = coupling_threshold(r.p, r.T, r.n, r.L1, r.sigma_high, r.sigma_low);
    return r;
}

CertificateReport Engine::certify(const model::GSetting& setting,
                                  const model::CoefficientSet& coeffs) const {
    CertificateReport out;
    out.constants = report(setting, coeffs);
    const ConstantsReport& r = out.constants;

    if (setting.p >= 2.0 && setting.beta > 2.0 && r.lambda_p < 1.0) {
        out.verdict = Verdict::exists_unique_p_ge2;
        out.reason = "p >= 2, beta > 2, lambda_p < 1";
    } else if (setting.p > 1.0 && setting.p < std::min(2.0, setting.beta) &&
               !coeffs.sigma_depends_on_y && r.lambda_tilde_p < 1.0) {
        out.verdict = Verdict::exists_unique_p_lt2;
        out.reason = "p in (1, 2^beta), sigma independent of y, lambda~_p < 1";
    } else {
        out.verdict = Verdict::not_certified;
        if (setting.p < 2.0 && coeffs.sigma_depends_on_y)
            out.reason = "p < 2 requires sigma independent of y";
        else
            out.reason = "contraction factor not below one";
    }
    if (out.verdict != Verdict::not_certified) {
        try {
            out.constants.p_prime = find_p_prime(setting, coeffs.L1, coeffs.L2, coeffs.L3);
        } catch (const PreconditionError&) {
            out.constants.p_prime.reset();
        }
    }
    return out;
}

double Engine::dual_lambda2(double T, int n, double L1, double L2, double L3, double sigma_high,
                            double sigma_low) const {
    const double s2 = sigma_high * sigma_high;
    const double grow = 1.0 + s2;
    const double L1d = n * L1 * grow * std::max(1.0, 1.0 / (sigma_low * sigma_low));
    const double L2d = n * L2 * grow;
    const double L3d = L3 * grow;
    return lambda_p(2.0, T, 1, L1d, L2d, L3d, sigma_high, sigma_low);
}

double Engine::dual_coupling_threshold(double T, int n, double L1, double sigma_high,
                                       double sigma_low) const {
    const double s2 = sigma_high * sigma_high;
    const double grow = 1.0 + s2;
    const double L1d = n * L1 * grow * std::max(1.0, 1.0 / (sigma_low * sigma_low));
    const double d = coupling_threshold(2.0, T, 1, L1d, sigma_high, sigma_low);
    return d / (n * grow * grow);
}

const char* verdict_name(Verdict v) {
    switch (v) {
    case Verdict::exists_unique_p_ge2: return "EXISTS_UNIQUE_P_GE2";
    case Verdict::exists_unique_p_lt2: return "EXISTS_UNIQUE_P_LT2";
    case Verdict::not_certified: return "NOT_CERTIFIED";
    }
    return "?";
}

} // namespace gfbsde::constants
