// Output emission: schema'd headers, atomic file writes, number formatting
// that round-trips doubles exactly.

#ifndef GFBSDE_REPORT_HPP
#define GFBSDE_REPORT_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "gfbsde/constants.hpp"

namespace gfbsde::report {

std::string fmt(double v); // shortest exact %.17g style

struct Header {
    std::string schema;
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;
    std::string cp_formula;
};

// Comment block carried by every emitted file: version, schema, config hash,
// seed and the BDG formula in force. Nothing environment-dependent.
std::string header_block(const Header& h);

// Write via temp file + rename in the target directory.
void write_file_atomic(const std::string& path, const std::string& content);

class CsvBuilder {
public:
    explicit CsvBuilder(const Header& h, std::vector<std::string> columns);
    void row(const std::vector<std::string>& cells);
    const std::string& str() const { return out_; }

private:
    std::string out_;
    std::size_t n_cols_;
};

std::string constants_json(const constants::CertificateReport& cert, const Header& h);

} // namespace gfbsde::report

#endif // GFBSDE_REPORT_HPP
