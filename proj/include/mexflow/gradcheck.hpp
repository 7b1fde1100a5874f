#pragma once

#include <cstdint>
#include <functional>
#include <span>

#include "mexflow/layers.hpp"

namespace mex::nn {

// Compares analytic gradients against central differences on `samples`
// randomly chosen scalar parameters.
//
// `loss` evaluates the scalar objective at the current parameter values.
// `compute_gradients` must zero and then fill every Parameter::grad.
// Returns max |analytic - numeric| / max(|analytic|, |numeric|, floor).
// The floor keeps coordinates whose true gradient is below the central
// difference round-off from dominating the result.
double grad_check(std::span<Parameter* const> params, const std::function<double()>& loss,
                  const std::function<void()>& compute_gradients, double epsilon, std::size_t samples,
                  std::uint64_t seed, double floor = 1e-12);

}  // namespace mex::nn
