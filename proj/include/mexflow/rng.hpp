#pragma once

#include <cstdint>

namespace mex {

// SplitMix64 generator. Streams derived with split() are independent of the
// parent's draw position, so per-layer and per-video seeds do not depend on
// call order.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

    std::uint64_t next_u64();
    // Uniform in [0, 1).
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    // Uniform integer in [0, bound).
    std::uint64_t below(std::uint64_t bound);
    double normal();

    Rng split(std::uint64_t stream) const;
    std::uint64_t seed_state() const { return state_; }

private:
    std::uint64_t state_;
};

std::uint64_t mix64(std::uint64_t x);

}  // namespace mex
