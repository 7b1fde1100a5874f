#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mexflow/tensor.hpp"

namespace mex::nn {

struct PcaModel {
    std::vector<double> mean;       // D
    Tensor basis;                   // D x k, orthonormal columns
    std::vector<double> variances;  // k, non-increasing
    bool degenerate = false;        // all retained variances are zero

    std::size_t dim() const { return mean.size(); }
    std::size_t components() const { return variances.size(); }
    std::vector<double> project(std::span<const double> sample) const;
    // samples N x D -> N x k
    Tensor transform(const Tensor& samples) const;
    std::vector<double> reconstruct(std::span<const double> projected) const;
};

// samples: N x D with N >= 2 and k <= min(N - 1, D).
PcaModel pca_fit(const Tensor& samples, std::size_t k);

}  // namespace mex::nn
