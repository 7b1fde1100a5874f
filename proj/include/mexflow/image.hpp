#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "mexflow/field.hpp"

namespace mex::img {

// Single-channel raster with intensities in [0, 1].
class GrayImage {
public:
    GrayImage() = default;
    GrayImage(std::size_t width, std::size_t height, double fill = 0.0);
    GrayImage(std::size_t width, std::size_t height, std::vector<double> pixels);

    std::size_t width() const { return width_; }
    std::size_t height() const { return height_; }
    std::size_t size() const { return pixels_.size(); }
    const std::vector<double>& pixels() const { return pixels_; }

    double operator()(std::size_t x, std::size_t y) const { return pixels_[y * width_ + x]; }
    // Stores the value clamped to [0, 1].
    void set(std::size_t x, std::size_t y, double v);

    Field to_field() const;
    // Clamps every value to [0, 1].
    static GrayImage from_field(const Field& f);

    friend bool operator==(const GrayImage&, const GrayImage&) = default;

private:
    std::size_t width_ = 0;
    std::size_t height_ = 0;
    std::vector<double> pixels_;
};

// Binary P5 PGM with maxval 255; pixel = byte / 255.
GrayImage load_pgm(const std::filesystem::path& path);
GrayImage decode_pgm(const std::vector<unsigned char>& bytes, const std::string& source = "<memory>");
void save_pgm(const GrayImage& image, const std::filesystem::path& path);
std::vector<unsigned char> encode_pgm(const GrayImage& image);

// Min-max stretch of an arbitrary field into an 8-bit-representable image.
GrayImage field_to_image(const Field& f);

}  // namespace mex::img
