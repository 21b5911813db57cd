#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace mvp {

/// Deterministic RNG. The engine is the standardized mt19937_64 sequence and
/// every distribution is derived by hand from raw 64-bit draws, so generated
/// values never depend on the standard library's implementation-defined
/// samplers.
class Rng {
 public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    /// Uniform in [0,1) with 53 bits of mantissa.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Inclusive integer range.
    int uniform_int(int lo, int hi);

    /// Standard normal via Box-Muller.
    double normal();
    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    /// Knuth inversion; fine for the small rates used here.
    unsigned poisson(double rate);

    /// Fisher-Yates permutation of {0..n-1}.
    std::vector<int> permutation(int n);

 private:
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

/// Seed-splitting hash: independent stream i from a base seed
/// (splitmix64-style mixing).
std::uint64_t split_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace mvp
