#pragma once

// Batched layer primitives in NHWC layout. Rank-3 (H,W,C) inputs are accepted
// wherever a batch is expected and treated as a batch of one.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mexflow/tensor.hpp"

namespace mex::nn {

// Trainable tensor with its accumulated gradient.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;

    Parameter() = default;
    Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(value.shape(), 0.0) {}
    void zero_grad() { grad.fill(0.0); }
};

// Kernels are laid out (kH, kW, inC, outC); biases hold outC entries.
// Dense weights are (out, in) so that y = W x + b.
struct LayerParams {
    Parameter weights;
    Parameter biases;
};

// Glorot-uniform weights, zero biases.
LayerParams make_conv_params(const std::string& name, std::size_t kh, std::size_t kw, std::size_t in_c,
                             std::size_t out_c, std::uint64_t seed);
LayerParams make_dense_params(const std::string& name, std::size_t in, std::size_t out, std::uint64_t seed);

enum class Padding { same };

std::size_t same_output_extent(std::size_t extent, std::size_t stride);

Tensor conv2d(const Tensor& input, const LayerParams& params, std::size_t stride, Padding padding = Padding::same);

struct ConvGrads {
    Tensor d_input;
    Tensor d_kernel;
    Tensor d_bias;
};
ConvGrads conv2d_backward(const Tensor& input, const LayerParams& params, const Tensor& d_output,
                          std::size_t stride, bool need_input_grad = true);

struct PoolResult {
    Tensor output;
    std::vector<std::size_t> argmax;  // flat input index per output element
};
PoolResult maxpool2d_forward(const Tensor& input, std::size_t window = 2, std::size_t stride = 2);
Tensor maxpool2d(const Tensor& input, std::size_t window = 2, std::size_t stride = 2);
Tensor maxpool2d_backward(const Shape& input_shape, const PoolResult& forward, const Tensor& d_output);

// input (N, in) or (in); output (N, out) or (out).
Tensor dense(const Tensor& input, const LayerParams& params);
struct DenseGrads {
    Tensor d_input;
    Tensor d_weights;
    Tensor d_bias;
};
DenseGrads dense_backward(const Tensor& input, const LayerParams& params, const Tensor& d_output);

Tensor relu(const Tensor& x);
Tensor relu_backward(const Tensor& activated, const Tensor& d_output);
Tensor leaky_relu(const Tensor& x, double slope);
Tensor leaky_relu_backward(const Tensor& pre_activation, const Tensor& d_output, double slope);
Tensor tanh_activation(const Tensor& x);
Tensor tanh_backward(const Tensor& activated, const Tensor& d_output);
double sigmoid(double x);

// Nearest-neighbour x2 upsampling on NHWC.
Tensor upsample2x(const Tensor& input);
Tensor upsample2x_backward(const Tensor& d_output);

struct SoftmaxResult {
    double loss = 0.0;
    std::vector<double> probs;
};
SoftmaxResult softmax_xent(std::span<const double> logits, std::size_t label);

// Mean cross-entropy over a batch of logits (N, K); also returns d(loss)/d(logits).
struct BatchXent {
    double loss = 0.0;
    Tensor d_logits;
    std::size_t correct = 0;
};
BatchXent softmax_xent_batch(const Tensor& logits, std::span<const std::size_t> labels);

// Argmax with ties resolved to the lowest index.
std::size_t argmax(std::span<const double> values);

}  // namespace mex::nn
