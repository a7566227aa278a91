#include "gfbsde/report.hpp"

#include <cstdio>
#include <fstream>

#include <json.hpp>

namespace gfbsde::report {

std::string fmt(double v) {
    char buf[40];
    // Shortest representation that round-trips.
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        double back = 0.0;
        std::sscanf(buf, "%lf", &back);
        if (back == v) break;
    }
    return buf;
}

std::string header_block(const Header& h) {
    std::string out;
    out += "# gfbsde ";
    out += kVersion;
    out += "\n# schema: " + h.schema + "\n";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h.config_hash));
    out += std::string("# config-hash: ") + buf + "\n";
    out += "# seed: " + std::to_string(h.seed) + "\n";
    out += "# cp-formula: " + h.cp_formula + "\n";
    return out;
}

void write_file_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot open output file: " + tmp);
        out << content;
        if (!out) throw Error("write failed: " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw Error("rename failed for: " + path);
}

CsvBuilder::CsvBuilder(const Header& h, std::vector<std::string> columns)
    : n_cols_(columns.size()) {
    out_ = header_block(h);
    for (std::size_t i = 0; i < columns.size(); ++i)
        out_ += (i ? "," : "") + columns[i];
    out_ += "\n";
}

void CsvBuilder::row(const std::vector<std::string>& cells) {
    if (cells.size() != n_cols_) throw Error("csv row width mismatch");
    for (std::size_t i = 0; i < cells.size(); ++i) out_ += (i ? "," : "") + cells[i];
    out_ += "\n";
}

namespace {

nlohmann::json num_or_string(double v) {
    if (std::isfinite(v)) return v;
    return v > 0 ? "+inf" : (v < 0 ? "-inf" : "nan");
}

} // namespace

std::string constants_json(const constants::CertificateReport& cert, const Header& h) {
    const constants::ConstantsReport& r = cert.constants;
    nlohmann::json j;
    j["version"] = kVersion;
    j["schema"] = h.schema;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h.config_hash));
    j["config_hash"] = buf;
    j["cp_formula"] = r.cp_formula;
    j["inputs"] = {{"p", r.p},   {"T", r.T},   {"n", r.n},
                   {"L1", r.L1}, {"L2", r.L2}, {"L3", r.L3},
                   {"sigma_high", r.sigma_high}, {"sigma_low", r.sigma_low}};
    nlohmann::json c;
    c["bdg_c"] = num_or_string(r.bdg_c);
    c["lambda2"] = num_or_string(r.lambda2);
    c["lambda3"] = num_or_string(r.lambda3);
    c["lambda4"] = num_or_string(r.lambda4);
    c["lambda5"] = num_or_string(r.lambda5);
    c["delta0"] = r.delta0_unbounded ? nlohmann::json("unbounded") : num_or_string(r.delta0);
    c["lambda1_at_delta0"] = num_or_string(r.lambda1_at_delta0);
    c["c1_patch"] = num_or_string(r.c1_patch);
    if (r.c1_gronwall)
        c["c1_gronwall"] = num_or_string(*r.c1_gronwall);
    else
        c["c1_gronwall"] = nullptr;
    c["c1"] = num_or_string(r.c1);
    c["c2"] = num_or_string(r.c2);
    c["lambda_p"] = num_or_string(r.lambda_p);
    c["lambda_tilde_p"] = num_or_string(r.lambda_tilde_p);
    c["delta_threshold"] = num_or_string(r.delta_threshold);
    if (r.p_prime)
        c["p_prime"] = num_or_string(*r.p_prime);
    else
        c["p_prime"] = nullptr;
    j["constants"] = c;
    j["verdict"] = constants::verdict_name(cert.verdict);
    j["reason"] = cert.reason;
    return j.dump(2) + "\n";
}

} // namespace gfbsde::report
