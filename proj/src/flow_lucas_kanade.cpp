#include <cmath>

#include "flow_internal.hpp"

namespace mex::flow {

namespace {

// Summed-area table with one row/column of zero padding.
struct Integral {
    std::size_t w, h;
    std::vector<double> s;

    explicit Integral(const std::vector<double>& v, std::size_t width, std::size_t height)
        : w(width), h(height), s((width + 1) * (height + 1), 0.0) {
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x)
                s[(y + 1) * (w + 1) + x + 1] =
                    v[y * w + x] + s[y * (w + 1) + x + 1] + s[(y + 1) * (w + 1) + x] - s[y * (w + 1) + x];
    }
    // Sum over [x0, x1] x [y0, y1] inclusive.
    double box(std::size_t x0, std::size_t y0, std::size_t x1, std::size_t y1) const {
        return s[(y1 + 1) * (w + 1) + x1 + 1] - s[y0 * (w + 1) + x1 + 1] - s[(y1 + 1) * (w + 1) + x0] + s[y0 * (w + 1) + x0];
    }
};

struct LevelOutcome {
    std::vector<std::uint8_t> flagged;
    std::vector<double> min_eig;
};

LevelOutcome lk_iteration(const Field& i0, const Field& i1, FlowField& flow, const LucasKanadeParams& params) {
    const std::size_t w = i0.width, h = i0.height, n = i0.size();
    const Field warped = warp_image(i1, flow);
    Field gx0, gy0, gx1, gy1;
    central_gradient(i0, gx0, gy0);
    central_gradient(warped, gx1, gy1);
    std::vector<double> xx(n), xy(n), yy(n), xt(n), yt(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double ix = 0.5 * (gx0.values[i] + gx1.values[i]);
        const double iy = 0.5 * (gy0.values[i] + gy1.values[i]);
        const double it = warped.values[i] - i0.values[i];
        xx[i] = ix * ix;
        xy[i] = ix * iy;
        yy[i] = iy * iy;
        xt[i] = ix * it;
        yt[i] = iy * it;
    }
    const Integral sxx(xx, w, h), sxy(xy, w, h), syy(yy, w, h), sxt(xt, w, h), syt(yt, w, h);
    const auto r = static_cast<std::size_t>(params.window_radius);
    LevelOutcome out{std::vector<std::uint8_t>(n, 0), std::vector<double>(n, 0.0)};
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            const std::size_t x0 = x >= r ? x - r : 0, x1 = std::min(x + r, w - 1);
            const std::size_t y0 = y >= r ? y - r : 0, y1 = std::min(y + r, h - 1);
            const double count = static_cast<double>((x1 - x0 + 1) * (y1 - y0 + 1));
            const double a = sxx.box(x0, y0, x1, y1) / count;
            const double b = sxy.box(x0, y0, x1, y1) / count;
            const double c = syy.box(x0, y0, x1, y1) / count;
            const double bx = -sxt.box(x0, y0, x1, y1) / count;
            const double by = -syt.box(x0, y0, x1, y1) / count;
            const double half_tr = 0.5 * (a + c);
            const double disc = std::sqrt(0.25 * (a - c) * (a - c) + b * b);
            const double lmin = half_tr - disc;
            const std::size_t i = y * w + x;
            out.min_eig[i] = lmin;
            if (lmin < params.eigen_floor) {
                out.flagged[i] = 1;
                continue;
            }
            const double det = a * c - b * b;
            flow.p[i] += (c * bx - b * by) / det;
            flow.q[i] += (a * by - b * bx) / det;
        }
    return out;
}

}  // namespace

LucasKanadeResult lucas_kanade(const img::GrayImage& onset, const img::GrayImage& apex, const FlowConfig& config) {
    detail::check_inputs(onset, apex, config);
    LevelOutcome finest;
    FlowField flow = detail::coarse_to_fine(
        onset.to_field(), apex.to_field(), config, [&](const Field& i0, const Field& i1, FlowField& f, int level) {
            for (int it = 0; it < config.lk.iterations; ++it) {
                auto outcome = lk_iteration(i0, i1, f, config.lk);
                detail::notify(config, "lucas_kanade", level, it, -1, f);
                if (level == 0) finest = std::move(outcome);
            }
        });
    for (std::size_t i = 0; i < flow.size(); ++i)
        if (finest.flagged[i]) flow.p[i] = flow.q[i] = 0.0;
    return LucasKanadeResult{std::move(flow), std::move(finest.flagged), std::move(finest.min_eig)};
}

}  // namespace mex::flow
