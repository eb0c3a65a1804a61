#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace sslvit {

// Counter-based deterministic RNG. A generator is a pure function of its key
// and draw counter, so independent streams can be derived per (seed, epoch,
// image, view) and regenerated bit-identically in any order. All sampling is
// done from raw bits; std::* distributions are avoided because their output
// is not specified across standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t key) : key_(key) {}

    // splitmix64 finalizer; decorrelates consecutive keys/counters.
    static std::uint64_t hash(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
        return hash(a ^ (0x9e3779b97f4a7c15ULL + (b << 6) + (b >> 2)));
    }

    // Derives a stream key by folding the given words into one another.
    static Rng derive(std::initializer_list<std::uint64_t> words) {
        std::uint64_t k = 0x5851f42d4c957f2dULL;
        for (std::uint64_t w : words) k = mix(k, w);
        return Rng(k);
    }

    std::uint64_t next_u64() { return hash(key_ ^ hash(counter_++)); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    float uniform_float(float lo, float hi) {
        return static_cast<float>(uniform(lo, hi));
    }

    // Unbiased integer in [0, n) via 128-bit multiply.
    std::size_t uniform_index(std::size_t n) {
        if (n <= 1) return 0;
        unsigned __int128 wide = static_cast<unsigned __int128>(next_u64());
        return static_cast<std::size_t>((wide * n) >> 64);
    }

    // Standard normal via Box-Muller; consumes two draws per call.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    float normal_float(float sigma) { return static_cast<float>(normal()) * sigma; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace sslvit
