#pragma once

#include <cstdint>

namespace fqte {

/// Deterministic xoshiro256** generator with splitmix64 seeding.
///
/// Distribution sampling (uniform, normal, bernoulli) is implemented here so
/// that streams are identical across platforms and standard-library versions.
/// Child streams are derived counter-style from (seed, stream), so replication
/// r of a simulation depends only on the pair and not on draw order elsewhere.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    /// Independent child stream for replication `stream` of master `seed`.
    static Rng child(std::uint64_t seed, std::uint64_t stream);

    std::uint64_t next_u64();

    /// Uniform on [0,1) with 53 random bits.
    double uniform01();

    /// Uniform on [a,b).
    double uniform(double a, double b);

    /// Standard normal via Box-Muller (two uniforms per draw, no caching).
    double normal();

    /// Returns 1 with probability p.
    int bernoulli(double p);

private:
    std::uint64_t state_[4];
};

/// splitmix64 finalizer, exposed for seed derivation in tests.
std::uint64_t splitmix64(std::uint64_t& state);

}  // namespace fqte
