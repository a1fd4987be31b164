#pragma once

#include <cmath>
#include <cstdint>

namespace nplb {

// Counter-based splitmix64 generator. The integer stream depends only on the
// seed, so runs replay identically; float transforms are hand-rolled rather
// than delegated to <random> distributions, whose output differs between
// standard library implementations.
class RandomSource {
public:
    explicit RandomSource(uint64_t seed) : seed_(seed), state_(seed) {}

    uint64_t seed() const { return seed_; }

    uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ull;
        uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller; two draws per variate, no caching,
    // so the consumed stream length is predictable.
    double normal() {
        double u1 = 1.0 - uniform();  // (0, 1]
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Uniform integer in [0, n); multiply-shift, bias ~ n / 2^64.
    size_t index(size_t n) {
        return static_cast<size_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    // Independent sub-stream for a named purpose; used to fan a single CLI
    // seed out to init / sampling / shuffling without coupling their streams.
    RandomSource derive(uint64_t salt) const {
        uint64_t z = seed_ ^ (0xD1B54A32D192ED03ull * (salt + 1));
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return RandomSource(z ^ (z >> 31));
    }

private:
    uint64_t seed_;
    uint64_t state_;
};

}  // namespace nplb
