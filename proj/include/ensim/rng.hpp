#pragma once

#include <cmath>
#include <cstdint>

namespace ensim {

// Counter-based RNG: every sample is a pure function of (seed, stream, index),
// so sampling is bitwise reproducible regardless of evaluation order or
// threading. Mixing function is splitmix64.

namespace detail {
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}
}  // namespace detail

struct CounterRng {
    uint64_t seed = 0;
    uint64_t stream = 0;

    uint64_t bits(uint64_t index) const {
        uint64_t h = detail::splitmix64(seed ^ 0x2545f4914f6cdd1dULL);
        h = detail::splitmix64(h ^ stream);
        return detail::splitmix64(h ^ index);
    }

    // uniform in [0, 1)
    double uniform(uint64_t index) const {
        return double(bits(index) >> 11) * 0x1.0p-53;
    }

    double uniform(uint64_t index, double lo, double hi) const {
        return lo + (hi - lo) * uniform(index);
    }

    // standard normal via Box-Muller; one value per index
    double gauss(uint64_t index) const {
        double u1 = uniform(2 * index);
        double u2 = uniform(2 * index + 1);
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }
};

}  // namespace ensim
