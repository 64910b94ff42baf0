#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace splatcage {

// std::mt19937_64 is specified bit-for-bit by the standard; the standard
// distributions are not, so bounded draws are done by hand to keep seeded
// results identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, bound), unbiased by rejection.
    std::uint64_t below(std::uint64_t bound);

    /// Standard normal via Box-Muller.
    double normal();

private:
    std::mt19937_64 engine_;
};

/// `count` distinct indices from [0, population) in draw order (partial
/// Fisher-Yates). Requires count <= population.
std::vector<std::size_t> sample_without_replacement(std::size_t population, std::size_t count, Rng& rng);

/// `count` indices from [0, population), independent draws.
std::vector<std::size_t> sample_with_replacement(std::size_t population, std::size_t count, Rng& rng);

}  // namespace splatcage
