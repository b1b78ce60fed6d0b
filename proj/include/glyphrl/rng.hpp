#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace glyphrl {

// All randomness in the project flows through these helpers. mt19937_64 output
// is fully specified by the standard, and the transforms below are spelled out
// explicitly, so identical seeds give identical streams on every platform.
// (std::normal_distribution and friends are implementation-defined and must
// not be used anywhere determinism matters.)

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Derive a child seed from a parent seed and one or more stream tags.
// Hash-based (not sequential), so adding or removing one consumer never
// shifts the seeds of the others.
inline uint64_t derive_seed(uint64_t seed, uint64_t tag) {
    return splitmix64(seed ^ splitmix64(tag));
}
inline uint64_t derive_seed(uint64_t seed, uint64_t a, uint64_t b) {
    return derive_seed(derive_seed(seed, a), b);
}
inline uint64_t derive_seed(uint64_t seed, uint64_t a, uint64_t b, uint64_t c) {
    return derive_seed(derive_seed(seed, a, b), c);
}

// Stream tags for the named random consumers of a training run.
namespace seed_tag {
inline constexpr uint64_t kPolicyInit = 1;
inline constexpr uint64_t kInstance = 2;
inline constexpr uint64_t kGroup = 3;
inline constexpr uint64_t kDistortion = 4;
inline constexpr uint64_t kTrajectory = 5;
inline constexpr uint64_t kEval = 6;
inline constexpr uint64_t kPool = 7;
inline constexpr uint64_t kShuffle = 8;
}  // namespace seed_tag

class Rng {
  public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    // uniform in [0, 1) with 53 random bits
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    // standard normal via Box-Muller (one draw per uniform pair)
    double normal() {
        double u1 = 1.0 - uniform();  // (0, 1], keeps the log finite
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    // uniform integer in [0, n)
    int uniform_int(int n) {
        int v = static_cast<int>(uniform() * n);
        return v < n ? v : n - 1;
    }

    uint64_t raw() { return gen_(); }

  private:
    std::mt19937_64 gen_;
};

}  // namespace glyphrl
