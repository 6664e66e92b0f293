#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "pnrlab/math.hpp"

namespace pnrlab {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace detail

/// Deterministic random stream.
///
/// Wraps std::mt19937_64 but hand-rolls every variate (uniform, index,
/// Bernoulli, normal), so a given seed produces the same sequence on every
/// platform; the standard leaves distribution algorithms unspecified.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n).
    int uniform_index(int n) {
        const int idx = static_cast<int>(uniform() * n);
        return idx < n ? idx : n - 1;
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Standard normal via Box-Muller; generates pairs, caches the spare.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * kPi * u2);
        has_spare_ = true;
        return r * std::cos(2.0 * kPi * u2);
    }

  private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Independent stream for (seed, stream_id), used by the partitioned-shot
/// scheme: each shot block owns one stream, so results do not depend on how
/// blocks are distributed over workers.
inline Rng derive_stream(std::uint64_t seed, std::uint64_t stream_id) {
    std::uint64_t state = seed ^ (0xA0761D6478BD642Full * (stream_id + 1));
    std::uint64_t mixed = detail::splitmix64(state);
    mixed ^= detail::splitmix64(state);
    return Rng(mixed);
}

}  // namespace pnrlab
