#pragma once

#include <cstdint>

namespace dpm {

/// Counter-free PCG32 generator. A (seed, stream) pair fully determines the
/// sequence; distinct streams from one seed are statistically independent,
/// which is what the tracer and trainer rely on for seed-stable parallelism.
class RngStream {
public:
    RngStream() : RngStream(0, 0) {}

    RngStream(std::uint64_t seed, std::uint64_t stream) {
        inc_ = (stream << 1u) | 1u;
        state_ = 0u;
        next_u32();
        state_ += seed;
        next_u32();
    }

    std::uint32_t next_u32() {
        std::uint64_t old = state_;
        state_ = old * 6364136223846793005ULL + inc_;
        std::uint32_t xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
        std::uint32_t rot = static_cast<std::uint32_t>(old >> 59u);
        return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
    }

    std::uint64_t next_u64() {
        std::uint64_t hi = next_u32();
        return (hi << 32) | next_u32();
    }

    /// Uniform in [0, 1) with 53 random bits.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    /// Uniform integer in [0, n), n >= 1. Unbiased via rejection.
    std::uint32_t next_below(std::uint32_t n) {
        std::uint32_t threshold = (-n) % n;
        for (;;) {
            std::uint32_t r = next_u32();
            if (r >= threshold) return r % n;
        }
    }

private:
    std::uint64_t state_;
    std::uint64_t inc_;
};

/// splitmix64 finalizer; derives decorrelated child seeds from (seed, salt).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Stream-id namespaces so independent subsystems never collide on one seed.
namespace stream {
constexpr std::uint64_t kSceneGen = 1;
constexpr std::uint64_t kTraceChunk = 2;  // + chunk index
constexpr std::uint64_t kPixel = 3;       // + pixel index
constexpr std::uint64_t kGtIteration = 4; // + iteration index
constexpr std::uint64_t kTraining = 5;
constexpr std::uint64_t kNetInit = 6;
constexpr std::uint64_t kBatch = 7;

inline std::uint64_t id(std::uint64_t domain, std::uint64_t index) {
    return (domain << 40) + index;
}
}  // namespace stream

}  // namespace dpm
