#include "mexflow/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <stdexcept>

#include "mexflow/binary_io.hpp"

namespace mex::img {

GrayImage::GrayImage(std::size_t width, std::size_t height, double fill)
    : width_(width), height_(height), pixels_(width * height, std::clamp(fill, 0.0, 1.0)) {
    if (width == 0 || height == 0) throw std::invalid_argument("GrayImage: extents must be positive");
}

GrayImage::GrayImage(std::size_t width, std::size_t height, std::vector<double> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
    if (width == 0 || height == 0) throw std::invalid_argument("GrayImage: extents must be positive");
    if (pixels_.size() != width * height)
        throw std::invalid_argument("GrayImage: " + std::to_string(pixels_.size()) + " pixels for extent " +
                                    extent_string(width, height));
    for (double v : pixels_)
        if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("GrayImage: pixel outside [0, 1]");
}

void GrayImage::set(std::size_t x, std::size_t y, double v) { pixels_[y * width_ + x] = std::clamp(v, 0.0, 1.0); }

Field GrayImage::to_field() const {
    Field f(width_, height_);
    f.values = pixels_;
    return f;
}

GrayImage GrayImage::from_field(const Field& f) {
    std::vector<double> px(f.values.size());
    std::transform(f.values.begin(), f.values.end(), px.begin(), [](double v) {
        return std::isfinite(v) ? std::clamp(v, 0.0, 1.0) : 0.0;
    });
    return GrayImage(f.width, f.height, std::move(px));
}

namespace {

struct HeaderParser {
    const std::vector<unsigned char>& bytes;
    const std::string& source;
    std::size_t pos = 0;

    [[noreturn]] void fail(const std::string& what) const {
        throw io::FormatError(source + ": " + what + " at byte offset " + std::to_string(pos));
    }

    void skip_space_and_comments() {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(bytes[pos])) {
                ++pos;
            } else {
                break;
            }
        }
    }

    std::size_t number(const char* what) {
        skip_space_and_comments();
        if (pos >= bytes.size() || !std::isdigit(bytes[pos])) fail(std::string("expected ") + what);
        std::size_t v = 0;
        while (pos < bytes.size() && std::isdigit(bytes[pos])) {
            v = v * 10 + (bytes[pos] - '0');
            if (v > (1u << 24)) fail(std::string(what) + " too large");
            ++pos;
        }
        return v;
    }
};

}  // namespace

GrayImage decode_pgm(const std::vector<unsigned char>& bytes, const std::string& source) {
    HeaderParser h{bytes, source};
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') h.fail("not a binary PGM (missing P5 magic)");
    h.pos = 2;
    const std::size_t width = h.number("width");
    const std::size_t height = h.number("height");
    const std::size_t maxval = h.number("maxval");
    if (width == 0 || height == 0) h.fail("zero image extent");
    if (maxval != 255) h.fail("unsupported maxval " + std::to_string(maxval) + " (only 255)");
    if (h.pos >= bytes.size() || !std::isspace(bytes[h.pos])) h.fail("expected whitespace after maxval");
    ++h.pos;
    const std::size_t need = width * height;
    if (bytes.size() - h.pos < need) {
        h.pos = bytes.size();
        h.fail("truncated payload: expected " + std::to_string(need) + " pixel bytes");
    }
    std::vector<double> px(need);
    for (std::size_t i = 0; i < need; ++i) px[i] = static_cast<double>(bytes[h.pos + i]) / 255.0;
    return GrayImage(width, height, std::move(px));
}

GrayImage load_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_pgm(bytes, path.string());
}

std::vector<unsigned char> encode_pgm(const GrayImage& image) {
    const std::string header =
        "P5\n" + std::to_string(image.width()) + " " + std::to_string(image.height()) + "\n255\n";
    std::vector<unsigned char> out(header.begin(), header.end());
    out.reserve(out.size() + image.size());
    for (double v : image.pixels()) out.push_back(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
    return out;
}

void save_pgm(const GrayImage& image, const std::filesystem::path& path) {
    const auto bytes = encode_pgm(image);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

GrayImage field_to_image(const Field& f) {
    if (f.empty()) throw std::invalid_argument("field_to_image: empty field");
    const auto [lo, hi] = std::minmax_element(f.values.begin(), f.values.end());
    const double span = *hi - *lo;
    std::vector<double> px(f.size(), 0.0);
    if (span > 0)
        for (std::size_t i = 0; i < f.size(); ++i) px[i] = (f.values[i] - *lo) / span;
    return GrayImage(f.width, f.height, std::move(px));
}

}  // namespace mex::img
