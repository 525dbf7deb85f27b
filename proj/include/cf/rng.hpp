#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace cf {

// Seeded random stream with portable distributions. The std:: distributions are
// implementation-defined, so uniform/normal draws are done by hand on top of
// mt19937_64, whose output sequence is fixed by the standard.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 bits of mantissa.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [lo, hi] (inclusive), rejection-sampled to avoid modulo bias.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

    // Standard normal via Box-Muller; caches the second variate.
    double normal();

    bool bernoulli(double p) { return uniform() < p; }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Derives an independent seed for a named sub-stream ("sim", "split", "undersample",
// "noise", "init", "shuffle", "augment") so that reseeding one stage leaves others alone.
std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view stream);

// splitmix64 finalizer, exposed for combining seeds with indices.
std::uint64_t mix64(std::uint64_t x);

}  // namespace cf
