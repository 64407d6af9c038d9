#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace prbgan::rng {

// splitmix64 mixing step; used to derive independent sub-stream seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Deterministically derives a sub-seed from a root seed and a tag path.
// Every consumer of randomness in the project draws from a stream derived
// by (seed, purpose, step, sample-index, ...) so that replaying any single
// sample never disturbs the others.
inline std::uint64_t derive(std::uint64_t root, std::initializer_list<std::uint64_t> path) {
    std::uint64_t h = splitmix64(root);
    for (std::uint64_t t : path) h = splitmix64(h ^ (t + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2)));
    return h;
}

class Stream {
public:
    explicit Stream(std::uint64_t seed) : eng_(seed) {}

    double uniform(double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(eng_);
    }
    double gaussian(double mean, double stddev) {
        // One fresh distribution per draw keeps the stream stateless across calls.
        std::normal_distribution<double> d(mean, stddev);
        return d(eng_);
    }
    bool bernoulli(double p_true) {
        return std::uniform_real_distribution<double>(0.0, 1.0)(eng_) < p_true;
    }
    std::size_t index(std::size_t n) {
        return std::uniform_int_distribution<std::size_t>(0, n - 1)(eng_);
    }
    std::uint64_t next_u64() { return eng_(); }

private:
    std::mt19937_64 eng_;
};

inline Stream derive_stream(std::uint64_t root, std::initializer_list<std::uint64_t> path) {
    return Stream(derive(root, path));
}

} // namespace prbgan::rng
