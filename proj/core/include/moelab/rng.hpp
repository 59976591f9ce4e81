// rng.hpp - deterministic seeded random source
#pragma once

#include <cstdint>

#include "moelab/tensor.hpp"

namespace moelab {

// xoshiro256++ seeded through splitmix64. The integer stream is bit-exact across
// platforms by construction; that determinism is a hard requirement for golden tests.
// Normal deviates use the Marsaglia polar method, which consumes a data-dependent
// (but seed-deterministic) number of uniforms and relies on IEEE sqrt plus libm log.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();
    // Uniform in [0, 1): top 53 bits of the stream scaled by 2^-53.
    double next_double();
    // Uniform integer in [0, n): rejection sampling, unbiased.
    std::uint64_t next_below(std::uint64_t n);
    // Standard normal via the polar method; pairs are cached.
    double next_normal();

    double normal(double mean, double stddev) { return mean + stddev * next_normal(); }

    void fill_normal(Tensor& t, double mean, double stddev);
    void fill_uniform(Tensor& t, double lo, double hi);

    Tensor normal_tensor(std::vector<std::size_t> shape, double mean, double stddev);

private:
    std::uint64_t state_[4];
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace moelab
