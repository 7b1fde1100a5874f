#include "mexflow/derivatives.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mex::deriv {

std::string_view channel_name(Channel c) {
    switch (c) {
        case Channel::p: return "p";
        case Channel::q: return "q";
        case Channel::rho: return "rho";
        case Channel::theta: return "theta";
        case Channel::eps_mag: return "eps_mag";
        case Channel::eps_xx: return "eps_xx";
        case Channel::eps_yy: return "eps_yy";
        case Channel::eps_xy: return "eps_xy";
        case Channel::eps_yx: return "eps_yx";
    }
    return "?";
}

std::vector<Channel> all_channels() {
    return {Channel::p,      Channel::q,      Channel::rho,    Channel::theta, Channel::eps_mag,
            Channel::eps_xx, Channel::eps_yy, Channel::eps_xy, Channel::eps_yx};
}

Channel parse_channel(std::string_view name) {
    for (auto c : all_channels())
        if (channel_name(c) == name) return c;
    throw std::invalid_argument("unknown channel '" + std::string(name) + "'");
}

const Field& select(const DerivedChannels& d, Channel c) {
    switch (c) {
        case Channel::p: return d.p;
        case Channel::q: return d.q;
        case Channel::rho: return d.rho;
        case Channel::theta: return d.theta;
        case Channel::eps_mag: return d.eps_mag;
        case Channel::eps_xx: return d.eps_xx;
        case Channel::eps_yy: return d.eps_yy;
        case Channel::eps_xy: return d.eps_xy;
        case Channel::eps_yx: return d.eps_yx;
    }
    throw std::invalid_argument("bad channel");
}

Polar to_polar(const FlowField& flow) {
    Polar out{Field(flow.width, flow.height), Field(flow.width, flow.height)};
    for (std::size_t i = 0; i < flow.size(); ++i) {
        const double p = flow.p[i], q = flow.q[i];
        out.rho.values[i] = std::sqrt(p * p + q * q);
        double t = (p == 0.0 && q == 0.0) ? 0.0 : std::atan2(q, p);
        // atan2 returns -pi for (negative, -0.0); fold onto the (-pi, pi] branch
        if (t <= -std::numbers::pi) t = std::numbers::pi;
        out.theta.values[i] = t;
    }
    return out;
}

Strain compute_strain(const FlowField& flow) {
    const std::size_t w = flow.width, h = flow.height;
    if (w < 3 || h < 3) throw std::invalid_argument("compute_strain: field " + extent_string(w, h) + " smaller than 3x3");
    Strain s{Field(w, h), Field(w, h), Field(w, h), Field(w, h), Field(w, h)};
    for (std::size_t y = 0; y < h; ++y) {
        const std::size_t ym = y ? y - 1 : 0, yp = std::min(y + 1, h - 1);
        for (std::size_t x = 0; x < w; ++x) {
            const std::size_t xm = x ? x - 1 : 0, xp = std::min(x + 1, w - 1);
            const double dpdx = 0.5 * (flow.p[y * w + xp] - flow.p[y * w + xm]);
            const double dpdy = 0.5 * (flow.p[yp * w + x] - flow.p[ym * w + x]);
            const double dqdx = 0.5 * (flow.q[y * w + xp] - flow.q[y * w + xm]);
            const double dqdy = 0.5 * (flow.q[yp * w + x] - flow.q[ym * w + x]);
            const std::size_t i = y * w + x;
            const double shear = 0.5 * (dpdy + dqdx);
            s.eps_xx.values[i] = dpdx;
            s.eps_yy.values[i] = dqdy;
            s.eps_xy.values[i] = shear;
            s.eps_yx.values[i] = shear;
            s.eps_mag.values[i] = std::sqrt(dpdx * dpdx + dqdy * dqdy + 2.0 * shear * shear);
        }
    }
    return s;
}

DerivedChannels derive_channels(const FlowField& flow) {
    for (std::size_t i = 0; i < flow.size(); ++i)
        if (!std::isfinite(flow.p[i]) || !std::isfinite(flow.q[i]))
            throw std::invalid_argument("derive_channels: non-finite flow");
    auto polar = to_polar(flow);
    auto strain = compute_strain(flow);
    return DerivedChannels{flow.p_field(),          flow.q_field(),         std::move(polar.rho),
                           std::move(polar.theta),  std::move(strain.eps_mag), std::move(strain.eps_xx),
                           std::move(strain.eps_yy), std::move(strain.eps_xy), std::move(strain.eps_yx)};
}

}  // namespace mex::deriv
