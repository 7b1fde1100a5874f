#include <cmath>

#include "flow_internal.hpp"

namespace mex::flow {

namespace {

constexpr double kIntensityScale = 255.0;

struct Linearisation {
    Field ix, iy, it;
};

// Gradients averaged over onset and warped apex; temporal term is the direct difference.
Linearisation linearise(const Field& onset, const Field& warped) {
    Linearisation l;
    Field gx0, gy0, gx1, gy1;
    central_gradient(onset, gx0, gy0);
    central_gradient(warped, gx1, gy1);
    l.ix = Field(onset.width, onset.height);
    l.iy = l.ix;
    l.it = l.ix;
    for (std::size_t i = 0; i < onset.size(); ++i) {
        l.ix.values[i] = 0.5 * (gx0.values[i] + gx1.values[i]);
        l.iy.values[i] = 0.5 * (gy0.values[i] + gy1.values[i]);
        l.it.values[i] = warped.values[i] - onset.values[i];
    }
    return l;
}

// One red-black Gauss-Seidel sweep. Each pixel update is the exact minimiser of
// the energy in that pixel's (u, v) with neighbours fixed, and same-colour
// pixels are never 4-neighbours, so the energy cannot increase.
void sweep(const Linearisation& lin, const FlowField& base, FlowField& flow, double alpha2) {
    const std::size_t w = flow.width, h = flow.height;
    for (std::size_t colour = 0; colour < 2; ++colour)
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = (y + colour) % 2; x < w; x += 2) {
                double su = 0, sv = 0;
                int n = 0;
                auto add = [&](std::size_t j) {
                    su += flow.p[j];
                    sv += flow.q[j];
                    ++n;
                };
                if (x > 0) add(y * w + x - 1);
                if (x + 1 < w) add(y * w + x + 1);
                if (y > 0) add((y - 1) * w + x);
                if (y + 1 < h) add((y + 1) * w + x);
                const std::size_t i = y * w + x;
                const double ubar = su / n, vbar = sv / n;
                const double ix = lin.ix.values[i], iy = lin.iy.values[i];
                const double c = alpha2 * n / 4.0;
                const double r = ix * (ubar - base.p[i]) + iy * (vbar - base.q[i]) + lin.it.values[i];
                const double denom = c + ix * ix + iy * iy;
                flow.p[i] = ubar - ix * r / denom;
                flow.q[i] = vbar - iy * r / denom;
            }
}

}  // namespace

FlowField horn_schunck(const img::GrayImage& onset, const img::GrayImage& apex, const FlowConfig& config) {
    detail::check_inputs(onset, apex, config);
    const double alpha2 = config.hs.alpha * config.hs.alpha;
    return detail::coarse_to_fine(
        detail::scaled_field(onset, kIntensityScale), detail::scaled_field(apex, kIntensityScale), config,
        [&](const Field& i0, const Field& i1, FlowField& flow, int level) {
            for (int warp = 0; warp < config.hs.warps; ++warp) {
                const Linearisation lin = linearise(i0, warp_image(i1, flow));
                const FlowField base = flow;
                for (int it = 0; it < config.hs.iterations; ++it) {
                    sweep(lin, base, flow, alpha2);
                    detail::notify(config, "horn_schunck", level, warp, it, flow);
                }
            }
        });
}

double horn_schunck_energy(const img::GrayImage& onset, const img::GrayImage& apex, const FlowField& flow, double alpha) {
    const Field i0 = detail::scaled_field(onset, kIntensityScale);
    const Field i1 = detail::scaled_field(apex, kIntensityScale);
    const Linearisation lin = linearise(i0, i1);
    const std::size_t w = flow.width, h = flow.height;
    double data = 0.0, smooth = 0.0;
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            const std::size_t i = y * w + x;
            const double r = lin.ix.values[i] * flow.p[i] + lin.iy.values[i] * flow.q[i] + lin.it.values[i];
            data += r * r;
            if (x + 1 < w) smooth += std::pow(flow.p[i] - flow.p[i + 1], 2) + std::pow(flow.q[i] - flow.q[i + 1], 2);
            if (y + 1 < h) smooth += std::pow(flow.p[i] - flow.p[i + w], 2) + std::pow(flow.q[i] - flow.q[i + w], 2);
        }
    return data + alpha * alpha / 4.0 * smooth;
}

}  // namespace mex::flow
