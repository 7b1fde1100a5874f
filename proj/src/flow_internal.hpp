#pragma once

#include <vector>

#include "mexflow/flow.hpp"

namespace mex::flow::detail {

Field scaled_field(const img::GrayImage& image, double scale);
Field gaussian_blur(const Field& image, double sigma);
// Level 0 is the input; each further level is blurred and resized by `scale`.
std::vector<Field> build_pyramid(const Field& base, int levels, double scale);
void check_inputs(const img::GrayImage& onset, const img::GrayImage& apex, const FlowConfig& config);
void notify(const FlowConfig& config, const char* method, int level, int warp, int iteration, const FlowField& flow);

// Runs `solve(onset_level, apex_level, flow, level)` from coarsest to finest,
// upsampling the running estimate between levels.
template <class Solver>
FlowField coarse_to_fine(const Field& onset, const Field& apex, const FlowConfig& config, Solver&& solve) {
    const auto p0 = build_pyramid(onset, config.pyramid_levels, config.pyramid_scale);
    const auto p1 = build_pyramid(apex, config.pyramid_levels, config.pyramid_scale);
    FlowField flow(p0.back().width, p0.back().height);
    for (int level = config.pyramid_levels - 1; level >= 0; --level) {
        const Field& a = p0[static_cast<std::size_t>(level)];
        const Field& b = p1[static_cast<std::size_t>(level)];
        if (flow.width != a.width || flow.height != a.height) flow = resize_flow(flow, a.width, a.height);
        solve(a, b, flow, level);
    }
    return flow;
}

}  // namespace mex::flow::detail
