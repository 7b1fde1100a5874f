#include "mexflow/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace mex::nn {

std::string shape_to_string(const Shape& shape) {
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out << 'x';
        out << shape[i];
    }
    out << ']';
    return out.str();
}

std::size_t shape_volume(const Shape& shape) {
    std::size_t v = 1;
    for (auto e : shape) v *= e;
    return v;
}

namespace {
void check_extents(const Shape& shape) {
    for (auto e : shape)
        if (e == 0) throw std::invalid_argument("tensor extents must be positive, got " + shape_to_string(shape));
}
}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
    check_extents(shape_);
    data_.assign(shape_volume(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_extents(shape_);
    if (data_.size() != shape_volume(shape_))
        throw std::invalid_argument("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                                    shape_to_string(shape_));
}

double& Tensor::at(std::size_t h, std::size_t w, std::size_t c) {
    return data_[(h * shape_[1] + w) * shape_[2] + c];
}
double Tensor::at(std::size_t h, std::size_t w, std::size_t c) const {
    return data_[(h * shape_[1] + w) * shape_[2] + c];
}
double& Tensor::at(std::size_t n, std::size_t h, std::size_t w, std::size_t c) {
    return data_[((n * shape_[1] + h) * shape_[2] + w) * shape_[3] + c];
}
double Tensor::at(std::size_t n, std::size_t h, std::size_t w, std::size_t c) const {
    return data_[((n * shape_[1] + h) * shape_[2] + w) * shape_[3] + c];
}

void Tensor::reshape(Shape shape) {
    check_extents(shape);
    if (shape_volume(shape) != data_.size())
        throw std::invalid_argument("cannot reshape " + shape_to_string(shape_) + " to " + shape_to_string(shape));
    shape_ = std::move(shape);
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace mex::nn
