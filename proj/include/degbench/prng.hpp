#pragma once

#include <cmath>
#include <cstdint>

namespace degbench {

// Counter-based splittable PRNG. The output at step n is a pure function of
// (seed, stream_id, n), so per-item streams can be derived up front and
// consumed in any order (or on any thread) with identical results.
class Prng {
public:
    explicit Prng(uint64_t seed, uint64_t stream_id = 0)
        : key_(mix(mix(seed) ^ (stream_id * 0xD6E8FEB86659FD93ULL + 0x632BE59BD9B4E019ULL))) {}

    uint64_t next_u64() { return mix(key_ ^ (++counter_ * 0x9E3779B97F4A7C15ULL)); }

    uint32_t next_u32() { return static_cast<uint32_t>(next_u64() >> 32); }

    // Uniform in [0,1) with 53 random bits.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    float next_float() { return static_cast<float>(next_u64() >> 40) * 0x1.0p-24f; }

    // Uniform integer in [0, n). n must be > 0.
    uint64_t next_below(uint64_t n) {
        const uint64_t limit = n * (~uint64_t(0) / n);
        uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % n;
    }

    double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Standard normal via Box-Muller; consumes two draws per call.
    double next_gaussian() {
        const double u1 = 1.0 - next_double();  // (0, 1]
        const double u2 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    // Independent child stream; does not advance this generator.
    Prng split(uint64_t child_id) const {
        Prng child(0);
        child.key_ = mix(key_ ^ mix(child_id + 0x8A5CD789635D2DFFULL));
        child.counter_ = 0;
        return child;
    }

private:
    static uint64_t mix(uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    uint64_t key_;
    uint64_t counter_ = 0;
};

}  // namespace degbench
