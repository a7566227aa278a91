// Counter-seeded PRNG streams for reproducible Monte Carlo.
//
// Each path gets its own xoshiro256** stream seeded from (master seed, path
// index) through SplitMix64, so draws depend only on the path index and never
// on thread scheduling.

#ifndef GFBSDE_RNG_HPP
#define GFBSDE_RNG_HPP

#include <cmath>
#include <cstdint>
#include <numbers>

namespace gfbsde::rng {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

class Stream {
public:
    Stream(std::uint64_t seed, std::uint64_t stream_id) {
        std::uint64_t sm = seed ^ (0x9e3779b97f4a7c15ull * (stream_id + 1));
        for (auto& w : s_) w = splitmix64(sm);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform on the open interval (0,1); never returns an exact endpoint.
    double next_uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller (one uniform pair per draw).
    double next_normal() {
        const double u1 = next_uniform();
        const double u2 = next_uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    // +1 or -1 with equal probability.
    double next_rademacher() {
        return (next_u64() >> 63) ? 1.0 : -1.0;
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }
    std::uint64_t s_[4];
};

// Stateless per-index uniform in (0,1), for order-independent sampling plans.
inline double uniform_at(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t sm = seed ^ (0x9e3779b97f4a7c15ull * (index + 1));
    return (static_cast<double>(splitmix64(sm) >> 11) + 0.5) * 0x1.0p-53;
}

} // namespace gfbsde::rng

#endif // GFBSDE_RNG_HPP
