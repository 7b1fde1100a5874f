#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "mexflow/layers.hpp"

namespace mex::nn {

struct AdamConfig {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Moment accumulators mirror the parameter list they were created for.
struct OptimState {
    AdamConfig config;
    std::uint64_t step = 0;
    std::vector<Tensor> first_moment;
    std::vector<Tensor> second_moment;
};

OptimState make_adam_state(std::span<Parameter* const> params, AdamConfig config = {});

class NonFiniteGradient : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bias-corrected Adam update using each parameter's accumulated grad.
// Throws NonFiniteGradient (leaving every parameter untouched) if any gradient is NaN/inf.
void adam_step(std::span<Parameter* const> params, OptimState& state);

}  // namespace mex::nn
