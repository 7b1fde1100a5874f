#include <cmath>

#include "flow_internal.hpp"

namespace mex::flow {

namespace {

constexpr double kIntensityScale = 255.0;
constexpr double kGradIsZero = 1e-10;

// Forward differences, zero on the last column/row.
void forward_gradient(const std::vector<double>& f, std::size_t w, std::size_t h, std::vector<double>& fx,
                      std::vector<double>& fy) {
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            const std::size_t i = y * w + x;
            fx[i] = x + 1 < w ? f[i + 1] - f[i] : 0.0;
            fy[i] = y + 1 < h ? f[i + w] - f[i] : 0.0;
        }
}

// Backward-difference divergence, adjoint of forward_gradient.
void divergence(const std::vector<double>& v1, const std::vector<double>& v2, std::size_t w, std::size_t h,
                std::vector<double>& div) {
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            const std::size_t i = y * w + x;
            double dx, dy;
            if (x == 0) dx = v1[i];
            else if (x + 1 == w) dx = -v1[i - 1];
            else dx = v1[i] - v1[i - 1];
            if (y == 0) dy = v2[i];
            else if (y + 1 == h) dy = -v2[i - w];
            else dy = v2[i] - v2[i - w];
            div[i] = dx + dy;
        }
}

void solve_level(const Field& i0, const Field& i1, FlowField& flow, int level, const FlowConfig& config) {
    const auto& prm = config.tvl1;
    const std::size_t w = i0.width, h = i0.height, n = i0.size();
    Field gx, gy;
    central_gradient(i1, gx, gy);
    std::vector<double> p11(n, 0.0), p12(n, 0.0), p21(n, 0.0), p22(n, 0.0);
    std::vector<double> div1(n), div2(n), ux(n), uy(n), vx(n), vy(n), rho_c(n), grad(n);
    std::vector<double> wx(n), wy(n), warped(n);
    const double lt = prm.lambda * prm.theta;
    const double taut = prm.tau / prm.theta;

    for (int warp = 0; warp < prm.warps; ++warp) {
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) {
                const std::size_t i = y * w + x;
                const double sx = static_cast<double>(x) + flow.p[i], sy = static_cast<double>(y) + flow.q[i];
                warped[i] = sample_bilinear(i1, sx, sy);
                wx[i] = sample_bilinear(gx, sx, sy);
                wy[i] = sample_bilinear(gy, sx, sy);
                grad[i] = wx[i] * wx[i] + wy[i] * wy[i];
                rho_c[i] = warped[i] - wx[i] * flow.p[i] - wy[i] * flow.q[i] - i0.values[i];
            }
        for (int it = 0; it < prm.inner_iterations; ++it) {
            // thresholding step: v = argmin of the linearised L1 data term
            for (std::size_t i = 0; i < n; ++i) {
                const double rho = rho_c[i] + wx[i] * flow.p[i] + wy[i] * flow.q[i];
                double d1 = 0, d2 = 0;
                if (rho < -lt * grad[i]) {
                    d1 = lt * wx[i];
                    d2 = lt * wy[i];
                } else if (rho > lt * grad[i]) {
                    d1 = -lt * wx[i];
                    d2 = -lt * wy[i];
                } else if (grad[i] > kGradIsZero) {
                    d1 = -rho * wx[i] / grad[i];
                    d2 = -rho * wy[i] / grad[i];
                }
                // stash v in u; the divergence update below completes the u-step
                flow.p[i] += d1;
                flow.q[i] += d2;
            }
            divergence(p11, p12, w, h, div1);
            divergence(p21, p22, w, h, div2);
            for (std::size_t i = 0; i < n; ++i) {
                flow.p[i] += prm.theta * div1[i];
                flow.q[i] += prm.theta * div2[i];
            }
            forward_gradient(flow.p, w, h, ux, uy);
            forward_gradient(flow.q, w, h, vx, vy);
            for (std::size_t i = 0; i < n; ++i) {
                const double ng1 = 1.0 + taut * std::sqrt(ux[i] * ux[i] + uy[i] * uy[i]);
                const double ng2 = 1.0 + taut * std::sqrt(vx[i] * vx[i] + vy[i] * vy[i]);
                p11[i] = (p11[i] + taut * ux[i]) / ng1;
                p12[i] = (p12[i] + taut * uy[i]) / ng1;
                p21[i] = (p21[i] + taut * vx[i]) / ng2;
                p22[i] = (p22[i] + taut * vy[i]) / ng2;
            }
        }
        detail::notify(config, "tvl1", level, warp, -1, flow);
    }
}

}  // namespace

FlowField tvl1(const img::GrayImage& onset, const img::GrayImage& apex, const FlowConfig& config) {
    detail::check_inputs(onset, apex, config);
    return detail::coarse_to_fine(detail::scaled_field(onset, kIntensityScale), detail::scaled_field(apex, kIntensityScale),
                                  config, [&](const Field& i0, const Field& i1, FlowField& flow, int level) {
                                      solve_level(i0, i1, flow, level, config);
                                  });
}

}  // namespace mex::flow
