// Shared small utilities: error types, deterministic reductions, hashing.

#ifndef GFBSDE_COMMON_HPP
#define GFBSDE_COMMON_HPP

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gfbsde {

inline constexpr const char* kVersion = "0.1.0";

// Maximum supported forward state dimension (stack buffers in hot loops).
inline constexpr int kMaxDim = 16;

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Raised on malformed problem files / expressions; carries a 1-based location.
class ConfigError : public Error {
public:
    ConfigError(int line, int col, const std::string& what)
        : Error("line " + std::to_string(line) + ", col " + std::to_string(col) + ": " + what),
          line(line), col(col) {}
    int line;
    int col;
};

class DomainError : public Error {
public:
    explicit DomainError(const std::string& what) : Error(what) {}
};

class PreconditionError : public Error {
public:
    explicit PreconditionError(const std::string& what) : Error(what) {}
};

// Non-finite value produced while integrating; identifies the first offender.
class NumericalAbort : public Error {
public:
    NumericalAbort(long step, long path, const std::string& what)
        : Error("numerical abort at step " + std::to_string(step) + ", path " +
                std::to_string(path) + ": " + what),
          step(step), path(path) {}
    long step;
    long path;
};

// Order-independent summation: fixed recursion tree, so the result does not
// depend on how the input was produced (thread count, chunking).
inline double pairwise_sum(std::span<const double> v) {
    const std::size_t n = v.size();
    if (n <= 8) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

struct MeanSE {
    double mean = 0.0;
    double se = 0.0;
    std::size_t n = 0;
};

inline MeanSE mean_se(std::span<const double> v) {
    MeanSE r;
    r.n = v.size();
    if (r.n == 0) return r;
    r.mean = pairwise_sum(v) / static_cast<double>(r.n);
    if (r.n < 2) return r;
    std::vector<double> sq(r.n);
    for (std::size_t i = 0; i < r.n; ++i) {
        const double d = v[i] - r.mean;
        sq[i] = d * d;
    }
    const double var = pairwise_sum(sq) / static_cast<double>(r.n - 1);
    r.se = std::sqrt(var / static_cast<double>(r.n));
    return r;
}

inline std::uint64_t fnv1a64(std::span<const char> data, std::uint64_t h = 0xcbf29ce484222325ull) {
    for (char c : data) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t fnv1a64(const std::string& s, std::uint64_t h = 0xcbf29ce484222325ull) {
    return fnv1a64(std::span<const char>(s.data(), s.size()), h);
}

// Solves the symmetric positive semi-definite system (A + ridge*I) x = b in
// place via Cholesky. A is row-major n x n. Returns false if the pivot
// collapses even with the ridge.
bool solve_spd(std::vector<double>& a, std::vector<double>& b, int n, double ridge);

} // namespace gfbsde

#endif // GFBSDE_COMMON_HPP
