#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace mex {

// Row-major scalar raster of doubles (flow components, derived channels, ...).
struct Field {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<double> values;

    Field() = default;
    Field(std::size_t w, std::size_t h, double fill = 0.0) : width(w), height(h), values(w * h, fill) {}

    double& operator()(std::size_t x, std::size_t y) { return values[y * width + x]; }
    double operator()(std::size_t x, std::size_t y) const { return values[y * width + x]; }
    std::size_t size() const { return values.size(); }
    bool empty() const { return values.empty(); }
    bool same_extent(const Field& o) const { return width == o.width && height == o.height; }

    friend bool operator==(const Field&, const Field&) = default;
};

// Dense displacement field: p horizontal, q vertical, in pixels.
struct FlowField {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<double> p;
    std::vector<double> q;

    FlowField() = default;
    FlowField(std::size_t w, std::size_t h) : width(w), height(h), p(w * h, 0.0), q(w * h, 0.0) {}

    std::size_t size() const { return p.size(); }
    Field p_field() const { return make(width, height, p); }
    Field q_field() const { return make(width, height, q); }

    friend bool operator==(const FlowField&, const FlowField&) = default;

private:
    static Field make(std::size_t w, std::size_t h, const std::vector<double>& v) {
        Field f;
        f.width = w;
        f.height = h;
        f.values = v;
        return f;
    }
};

inline std::string extent_string(std::size_t w, std::size_t h) {
    return std::to_string(w) + "x" + std::to_string(h);
}

}  // namespace mex
