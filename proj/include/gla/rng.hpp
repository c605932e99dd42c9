#pragma once

#include <cmath>
#include <cstdint>

namespace gla {

// Counter-based RNG built on the splitmix64 output function. Every draw is a
// pure function of (seed, counter), so streams can be split by counter range
// and replayed independently of call order.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

    static std::uint64_t mix(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ull;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
        return x ^ (x >> 31);
    }

    static std::uint64_t u64_at(std::uint64_t seed, std::uint64_t index) {
        return mix(seed + index * 0x9e3779b97f4a7c15ull);
    }

    // Uniform on [0, 1), 53-bit mantissa.
    static double uniform_at(std::uint64_t seed, std::uint64_t index) {
        return static_cast<double>(u64_at(seed, index) >> 11) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller; consumes counters 2*index and 2*index+1.
    static double normal_at(std::uint64_t seed, std::uint64_t index) {
        // u1 in (0, 1] keeps the log finite.
        const double u1 =
            static_cast<double>((u64_at(seed, 2 * index) >> 11) + 1) * 0x1.0p-53;
        const double u2 = uniform_at(seed, 2 * index + 1);
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    std::uint64_t next_u64() { return u64_at(seed_, counter_++); }

    double uniform() { return uniform_at(seed_, counter_++); }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal() {
        const double z = normal_at(seed_, counter_);
        ++counter_;
        return z;
    }

    double normal(double mean, double std) { return mean + std * normal(); }

    // Integer in [0, n), n >= 1. Modulo bias is negligible for n << 2^64.
    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t counter() const { return counter_; }
    void seek(std::uint64_t counter) { counter_ = counter; }

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
};

// Independent substream seed for a named purpose (layer index, datum index, ...).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    return CounterRng::mix(seed ^ CounterRng::mix(stream + 0x51ed2701ull));
}

} // namespace gla
