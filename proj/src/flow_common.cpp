#include <algorithm>
#include <cmath>
#include <fstream>

#include "flow_internal.hpp"
#include "mexflow/binary_io.hpp"
#include "mexflow/dataset.hpp"

namespace mex::flow {

void validate_config(const FlowConfig& c) {
    if (c.pyramid_levels < 1) throw std::invalid_argument("flow config: pyramid_levels must be >= 1");
    if (!(c.pyramid_scale > 0.0 && c.pyramid_scale < 1.0)) throw std::invalid_argument("flow config: pyramid_scale must be in (0, 1)");
    if (!(c.hs.alpha > 0) || c.hs.iterations < 1 || c.hs.warps < 1)
        throw std::invalid_argument("flow config: Horn-Schunck parameters must be positive");
    if (c.lk.window_radius < 1 || !(c.lk.eigen_floor > 0) || c.lk.iterations < 1)
        throw std::invalid_argument("flow config: Lucas-Kanade parameters must be positive");
    if (!(c.tvl1.lambda > 0) || !(c.tvl1.theta > 0) || !(c.tvl1.tau > 0) || c.tvl1.warps < 1 || c.tvl1.inner_iterations < 1)
        throw std::invalid_argument("flow config: TV-L1 parameters must be positive");
}

void central_gradient(const Field& im, Field& gx, Field& gy) {
    const std::size_t w = im.width, h = im.height;
    gx = Field(w, h);
    gy = Field(w, h);
    for (std::size_t y = 0; y < h; ++y) {
        const std::size_t ym = y ? y - 1 : 0, yp = std::min(y + 1, h - 1);
        for (std::size_t x = 0; x < w; ++x) {
            const std::size_t xm = x ? x - 1 : 0, xp = std::min(x + 1, w - 1);
            gx(x, y) = 0.5 * (im(xp, y) - im(xm, y));
            gy(x, y) = 0.5 * (im(x, yp) - im(x, ym));
        }
    }
}

double sample_bilinear(const Field& im, double x, double y) {
    x = std::clamp(x, 0.0, static_cast<double>(im.width - 1));
    y = std::clamp(y, 0.0, static_cast<double>(im.height - 1));
    const auto x0 = static_cast<std::size_t>(x);
    const auto y0 = static_cast<std::size_t>(y);
    const std::size_t x1 = std::min(x0 + 1, im.width - 1);
    const std::size_t y1 = std::min(y0 + 1, im.height - 1);
    const double ax = x - static_cast<double>(x0), ay = y - static_cast<double>(y0);
    return (im(x0, y0) * (1 - ax) + im(x1, y0) * ax) * (1 - ay) + (im(x0, y1) * (1 - ax) + im(x1, y1) * ax) * ay;
}

Field warp_image(const Field& im, const FlowField& flow) {
    Field out(im.width, im.height);
    for (std::size_t y = 0; y < im.height; ++y)
        for (std::size_t x = 0; x < im.width; ++x) {
            const std::size_t i = y * im.width + x;
            out.values[i] = sample_bilinear(im, static_cast<double>(x) + flow.p[i], static_cast<double>(y) + flow.q[i]);
        }
    return out;
}

FlowField resize_flow(const FlowField& flow, std::size_t width, std::size_t height) {
    const Field p = img::resize_bilinear(flow.p_field(), width, height);
    const Field q = img::resize_bilinear(flow.q_field(), width, height);
    const double sx = static_cast<double>(width) / static_cast<double>(flow.width);
    const double sy = static_cast<double>(height) / static_cast<double>(flow.height);
    FlowField out(width, height);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.p[i] = p.values[i] * sx;
        out.q[i] = q.values[i] * sy;
    }
    return out;
}

double mean_endpoint_error(const FlowField& a, const FlowField& b, std::size_t border) {
    if (a.width != b.width || a.height != b.height) throw std::invalid_argument("mean_endpoint_error: extent mismatch");
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t y = border; y + border < a.height; ++y)
        for (std::size_t x = border; x + border < a.width; ++x) {
            const std::size_t i = y * a.width + x;
            sum += std::hypot(a.p[i] - b.p[i], a.q[i] - b.q[i]);
            ++count;
        }
    return count ? sum / static_cast<double>(count) : 0.0;
}

namespace detail {

Field scaled_field(const img::GrayImage& image, double scale) {
    Field f = image.to_field();
    for (auto& v : f.values) v *= scale;
    return f;
}

Field gaussian_blur(const Field& im, double sigma) {
    if (sigma <= 0) return im;
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) sum += k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    for (auto& v : k) v /= sum;
    const auto w = static_cast<int>(im.width), h = static_cast<int>(im.height);
    Field tmp(im.width, im.height), out(im.width, im.height);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) acc += k[i + radius] * im(std::clamp(x + i, 0, w - 1), y);
            tmp(x, y) = acc;
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) acc += k[i + radius] * tmp(x, std::clamp(y + i, 0, h - 1));
            out(x, y) = acc;
        }
    return out;
}

std::vector<Field> build_pyramid(const Field& base, int levels, double scale) {
    std::vector<Field> pyr{base};
    const double sigma = 0.6 * std::sqrt(1.0 / (scale * scale) - 1.0);
    for (int l = 1; l < levels; ++l) {
        const Field& prev = pyr.back();
        const auto w = static_cast<std::size_t>(std::lround(static_cast<double>(prev.width) * scale));
        const auto h = static_cast<std::size_t>(std::lround(static_cast<double>(prev.height) * scale));
        pyr.push_back(img::resize_bilinear(gaussian_blur(prev, sigma), w, h));
    }
    return pyr;
}

void check_inputs(const img::GrayImage& onset, const img::GrayImage& apex, const FlowConfig& config) {
    validate_config(config);
    if (onset.width() != apex.width() || onset.height() != apex.height())
        throw FlowError("flow: onset " + extent_string(onset.width(), onset.height()) + " and apex " +
                        extent_string(apex.width(), apex.height()) + " differ in extent");
    for (const auto* im : {&onset, &apex})
        for (double v : im->pixels())
            if (!std::isfinite(v)) throw FlowError("flow: non-finite input pixel");
    double coarsest = static_cast<double>(std::min(onset.width(), onset.height()));
    for (int l = 1; l < config.pyramid_levels; ++l) coarsest = std::round(coarsest * config.pyramid_scale);
    if (coarsest < 8)
        throw FlowError("flow: coarsest pyramid level would be " + std::to_string(static_cast<int>(coarsest)) +
                        " px (< 8); reduce pyramid_levels");
}

void notify(const FlowConfig& config, const char* method, int level, int warp, int iteration, const FlowField& flow) {
    if (config.observer) config.observer(FlowEvent{method, level, warp, iteration, &flow});
}

}  // namespace detail

// ---- registry ----

FlowRegistry FlowRegistry::with_builtins() {
    FlowRegistry r;
    r.estimators_["horn_schunck"] = horn_schunck;
    r.estimators_["lucas_kanade"] = [](const img::GrayImage& a, const img::GrayImage& b, const FlowConfig& c) {
        return lucas_kanade(a, b, c).flow;
    };
    r.estimators_["tvl1"] = tvl1;
    return r;
}

void FlowRegistry::register_estimator(const std::string& name, Estimator estimator) {
    if (name.empty()) throw std::invalid_argument("flow registry: empty estimator name");
    if (!estimator) throw std::invalid_argument("flow registry: null estimator for " + name);
    if (estimators_.contains(name)) throw std::invalid_argument("flow registry: estimator '" + name + "' already registered");
    estimators_.emplace(name, std::move(estimator));
}

std::vector<std::string> FlowRegistry::names() const {
    std::vector<std::string> out;
    for (const auto& [k, _] : estimators_) out.push_back(k);
    return out;
}

FlowField FlowRegistry::estimate(const img::GrayImage& onset, const img::GrayImage& apex, const FlowConfig& config) const {
    const auto it = estimators_.find(config.method);
    if (it == estimators_.end()) throw FlowError("flow: unknown method '" + config.method + "'");
    FlowField f = it->second(onset, apex, config);
    if (f.width != onset.width() || f.height != onset.height() || f.p.size() != f.width * f.height ||
        f.q.size() != f.p.size())
        throw FlowError("flow: estimator '" + config.method + "' returned a field of the wrong extent");
    return f;
}

FlowField estimate_flow(const img::GrayImage& onset, const img::GrayImage& apex, const FlowConfig& config) {
    static const FlowRegistry builtins = FlowRegistry::with_builtins();
    return builtins.estimate(onset, apex, config);
}

// ---- file formats ----

void save_flow(const FlowField& flow, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    io::write_magic(out, "MEFL");
    io::write_u8(out, 1);
    io::write_u32(out, static_cast<std::uint32_t>(flow.width));
    io::write_u32(out, static_cast<std::uint32_t>(flow.height));
    for (std::size_t i = 0; i < flow.size(); ++i) {
        io::write_f32(out, static_cast<float>(flow.p[i]));
        io::write_f32(out, static_cast<float>(flow.q[i]));
    }
}

FlowField load_flow(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    io::Reader r(in, path.string());
    r.expect_magic("MEFL");
    if (r.u8() != 1) r.fail("unsupported MEFL version");
    const std::size_t w = r.u32(), h = r.u32();
    if (w == 0 || h == 0) r.fail("zero extent");
    FlowField f(w, h);
    for (std::size_t i = 0; i < f.size(); ++i) {
        f.p[i] = r.f32();
        f.q[i] = r.f32();
    }
    return f;
}

void save_channel(const Field& channel, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    io::write_magic(out, "MECH");
    io::write_u8(out, 1);
    io::write_u32(out, static_cast<std::uint32_t>(channel.width));
    io::write_u32(out, static_cast<std::uint32_t>(channel.height));
    for (double v : channel.values) io::write_f32(out, static_cast<float>(v));
}

Field load_channel(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    io::Reader r(in, path.string());
    r.expect_magic("MECH");
    if (r.u8() != 1) r.fail("unsupported MECH version");
    const std::size_t w = r.u32(), h = r.u32();
    if (w == 0 || h == 0) r.fail("zero extent");
    Field f(w, h);
    for (auto& v : f.values) v = r.f32();
    return f;
}

}  // namespace mex::flow
