#pragma once

#include <atomic>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>
#include <unistd.h>

#include "mexflow/image.hpp"
#include "mexflow/rng.hpp"
#include "mexflow/tensor.hpp"

namespace testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("mexflow_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline mex::nn::Tensor random_tensor(mex::nn::Shape shape, mex::Rng& rng, double lo = -1.0, double hi = 1.0) {
    mex::nn::Tensor t(std::move(shape));
    for (auto& v : t.data()) v = rng.uniform(lo, hi);
    return t;
}

// FNV-1a over sorted relative paths and file contents.
inline std::uint64_t hash_tree(const std::filesystem::path& root) {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::recursive_directory_iterator(root))
        if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::uint64_t h = 1469598103934665603ull;
    auto feed = [&](const std::string& bytes) {
        for (unsigned char c : bytes) h = (h ^ c) * 1099511628211ull;
    };
    for (const auto& f : files) {
        feed(f.lexically_relative(root).generic_string());
        std::ifstream in(f, std::ios::binary);
        feed(std::string(std::istreambuf_iterator<char>(in), {}));
    }
    return h;
}

// Smooth random blob texture sampled at (x - dx, y - dy), so the pair
// (texture(0, 0), texture(dx, dy)) moves by exactly (dx, dy) everywhere.
struct BlobTexture {
    struct Blob {
        double cx, cy, sigma, amplitude;
    };
    std::vector<Blob> blobs;

    BlobTexture(std::size_t size, std::uint64_t seed, std::size_t count = 60) {
        mex::Rng rng(seed);
        const double n = static_cast<double>(size);
        for (std::size_t i = 0; i < count; ++i)
            blobs.push_back({rng.uniform(-0.1, 1.1) * n, rng.uniform(-0.1, 1.1) * n, rng.uniform(2.5, 6.0), rng.uniform(-0.25, 0.25)});
    }

    mex::img::GrayImage render(std::size_t w, std::size_t h, double dx, double dy, double ox = 0, double oy = 0) const {
        std::vector<double> px(w * h);
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) {
                const double sx = static_cast<double>(x) + ox - dx, sy = static_cast<double>(y) + oy - dy;
                double v = 0.5;
                for (const auto& b : blobs)
                    v += b.amplitude * std::exp(-((sx - b.cx) * (sx - b.cx) + (sy - b.cy) * (sy - b.cy)) / (2 * b.sigma * b.sigma));
                px[y * w + x] = std::clamp(v, 0.0, 1.0);
            }
        return mex::img::GrayImage(w, h, std::move(px));
    }
};

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// 28x28x1 image in [-1, 1]: a class-specific bright spot over uniform noise.
inline mex::nn::Tensor class_image(std::size_t cls, mex::Rng& rng, double noise = 0.3) {
    static constexpr double centres[3][2] = {{7, 7}, {20, 7}, {14, 21}};
    mex::nn::Tensor t({28, 28, 1});
    for (std::size_t y = 0; y < 28; ++y)
        for (std::size_t x = 0; x < 28; ++x) {
            const double dx = static_cast<double>(x) - centres[cls][0], dy = static_cast<double>(y) - centres[cls][1];
            const double v = -1.0 + 2.0 * std::exp(-(dx * dx + dy * dy) / 18.0) + noise * rng.uniform(-1, 1);
            t[y * 28 + x] = std::clamp(v, -1.0, 1.0);
        }
    return t;
}

}  // namespace testing
