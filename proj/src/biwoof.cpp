#include "mexflow/biwoof.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mex::biwoof {

Span block_span(std::size_t extent, std::size_t blocks, std::size_t index) {
    const std::size_t size = extent / blocks;
    return {index * size, index + 1 == blocks ? extent : (index + 1) * size};
}

std::size_t orientation_bin(double theta, std::size_t bins) {
    const double unit = (theta + std::numbers::pi) / (2.0 * std::numbers::pi);  // (0, 1]
    const auto b = static_cast<std::ptrdiff_t>(std::ceil(unit * static_cast<double>(bins))) - 1;
    return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(b, 0, static_cast<std::ptrdiff_t>(bins) - 1));
}

std::vector<double> extract_biwoof_raw(const deriv::DerivedChannels& ch, const BiwoofConfig& config) {
    const std::size_t B = config.blocks_per_side, bins = config.orientation_bins;
    if (B < 1) throw std::invalid_argument("biwoof: blocks_per_side must be >= 1");
    if (bins < 2) throw std::invalid_argument("biwoof: orientation_bins must be >= 2");
    const std::size_t w = ch.rho.width, h = ch.rho.height;
    if (!ch.theta.same_extent(ch.rho) || !ch.eps_mag.same_extent(ch.rho))
        throw std::invalid_argument("biwoof: channel extents differ (rho " + extent_string(w, h) + ", theta " +
                                    extent_string(ch.theta.width, ch.theta.height) + ", strain " +
                                    extent_string(ch.eps_mag.width, ch.eps_mag.height) + ")");
    if (w < B || h < B) throw std::invalid_argument("biwoof: " + extent_string(w, h) + " frame has fewer pixels than blocks");

    std::vector<double> out(B * B * bins, 0.0);
    for (std::size_t by = 0; by < B; ++by) {
        const Span ys = block_span(h, B, by);
        for (std::size_t bx = 0; bx < B; ++bx) {
            const Span xs = block_span(w, B, bx);
            double* hist = out.data() + (by * B + bx) * bins;
            double strain = 0.0;
            for (std::size_t y = ys.begin; y < ys.end; ++y)
                for (std::size_t x = xs.begin; x < xs.end; ++x) {
                    const std::size_t i = y * w + x;
                    hist[orientation_bin(ch.theta.values[i], bins)] += ch.rho.values[i];
                    strain += ch.eps_mag.values[i];
                }
            strain /= static_cast<double>((ys.end - ys.begin) * (xs.end - xs.begin));
            for (std::size_t k = 0; k < bins; ++k) hist[k] *= strain;
        }
    }
    return out;
}

FeatureVector extract_biwoof(const deriv::DerivedChannels& ch, const BiwoofConfig& config) {
    FeatureVector f{extract_biwoof_raw(ch, config), config};
    double norm = 0.0;
    for (double v : f.values) norm += v * v;
    norm = std::sqrt(norm);
    if (norm > 0)
        for (auto& v : f.values) v /= norm;
    return f;
}

}  // namespace mex::biwoof
