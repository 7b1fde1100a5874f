#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "mexflow/field.hpp"

namespace mex::deriv {

// Per-pixel channels derived from an onset->apex flow field.
struct DerivedChannels {
    Field p, q;
    Field rho;    // magnitude
    Field theta;  // orientation in (-pi, pi], 0 where the flow vanishes
    Field eps_mag;
    Field eps_xx, eps_yy, eps_xy, eps_yx;
};

enum class Channel { p, q, rho, theta, eps_mag, eps_xx, eps_yy, eps_xy, eps_yx };

std::string_view channel_name(Channel c);
Channel parse_channel(std::string_view name);
const Field& select(const DerivedChannels& d, Channel c);
std::vector<Channel> all_channels();

struct Polar {
    Field rho, theta;
};
Polar to_polar(const FlowField& flow);

struct Strain {
    Field eps_mag, eps_xx, eps_yy, eps_xy, eps_yx;
};
// Central differences with replicated borders; needs at least 3x3.
Strain compute_strain(const FlowField& flow);

DerivedChannels derive_channels(const FlowField& flow);

}  // namespace mex::deriv
