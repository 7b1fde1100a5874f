#include <algorithm>
#include <cmath>

#include "mexflow/dataset.hpp"

namespace mex::img {

Field resize_bilinear(const Field& source, std::size_t width, std::size_t height) {
    if (source.empty() || width == 0 || height == 0) throw std::invalid_argument("resize_bilinear: empty field");
    if (source.width == width && source.height == height) return source;
    Field out(width, height);
    const double sx = static_cast<double>(source.width) / static_cast<double>(width);
    const double sy = static_cast<double>(source.height) / static_cast<double>(height);
    for (std::size_t y = 0; y < height; ++y) {
        const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0, static_cast<double>(source.height - 1));
        const auto y0 = static_cast<std::size_t>(fy);
        const std::size_t y1 = std::min(y0 + 1, source.height - 1);
        const double wy = fy - static_cast<double>(y0);
        for (std::size_t x = 0; x < width; ++x) {
            const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0, static_cast<double>(source.width - 1));
            const auto x0 = static_cast<std::size_t>(fx);
            const std::size_t x1 = std::min(x0 + 1, source.width - 1);
            const double wx = fx - static_cast<double>(x0);
            const double top = source(x0, y0) * (1 - wx) + source(x1, y0) * wx;
            const double bottom = source(x0, y1) * (1 - wx) + source(x1, y1) * wx;
            out(x, y) = top * (1 - wy) + bottom * wy;
        }
    }
    return out;
}

nn::Tensor normalize_to_input(const Field& channel, std::size_t size) {
    if (channel.empty()) throw std::invalid_argument("normalize_to_input: empty field");
    for (double v : channel.values)
        if (!std::isfinite(v)) throw std::invalid_argument("normalize_to_input: non-finite value in field");
    const Field resized = resize_bilinear(channel, size, size);
    const auto [lo, hi] = std::minmax_element(resized.values.begin(), resized.values.end());
    const double span = *hi - *lo;
    nn::Tensor out({size, size, 1}, 0.0);
    if (span > 1e-12 * std::max(1.0, std::max(std::abs(*lo), std::abs(*hi))))
        for (std::size_t i = 0; i < resized.size(); ++i) out[i] = std::clamp(2.0 * (resized.values[i] - *lo) / span - 1.0, -1.0, 1.0);
    return out;
}

}  // namespace mex::img
