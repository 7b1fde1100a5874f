#include "mexflow/layers.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mexflow/rng.hpp"

namespace mex::nn {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

// Views a rank-3 or rank-4 tensor as (N, H, W, C).
struct Nhwc {
    std::size_t n, h, w, c;
};

Nhwc as_nhwc(const Tensor& t, const char* what) {
    if (t.rank() == 4) return {t.extent(0), t.extent(1), t.extent(2), t.extent(3)};
    if (t.rank() == 3) return {1, t.extent(0), t.extent(1), t.extent(2)};
    throw std::invalid_argument(std::string(what) + ": expected HxWxC or NxHxWxC input, got " +
                                shape_to_string(t.shape()));
}

Shape like_input(const Tensor& input, std::size_t n, std::size_t h, std::size_t w, std::size_t c) {
    if (input.rank() == 3) return {h, w, c};
    return {n, h, w, c};
}

struct ConvGeometry {
    Nhwc in;
    std::size_t kh, kw, out_c, stride, oh, ow, pad_top, pad_left;
};

ConvGeometry conv_geometry(const Tensor& input, const LayerParams& params, std::size_t stride) {
    if (stride == 0) throw std::invalid_argument("conv2d: stride must be >= 1");
    const auto in = as_nhwc(input, "conv2d");
    const auto& k = params.weights.value;
    if (k.rank() != 4)
        throw std::invalid_argument("conv2d: kernel must be kHxkWxinCxoutC, got " + shape_to_string(k.shape()));
    if (k.extent(2) != in.c)
        throw std::invalid_argument("conv2d: input " + shape_to_string(input.shape()) + " does not match kernel " +
                                    shape_to_string(k.shape()));
    if (params.biases.value.size() != k.extent(3))
        throw std::invalid_argument("conv2d: bias " + shape_to_string(params.biases.value.shape()) +
                                    " does not match kernel " + shape_to_string(k.shape()));
    ConvGeometry g{in, k.extent(0), k.extent(1), k.extent(3), stride, 0, 0, 0, 0};
    g.oh = same_output_extent(in.h, stride);
    g.ow = same_output_extent(in.w, stride);
    const std::size_t pad_h = std::max<std::ptrdiff_t>(
        static_cast<std::ptrdiff_t>((g.oh - 1) * stride + g.kh) - static_cast<std::ptrdiff_t>(in.h), 0);
    const std::size_t pad_w = std::max<std::ptrdiff_t>(
        static_cast<std::ptrdiff_t>((g.ow - 1) * stride + g.kw) - static_cast<std::ptrdiff_t>(in.w), 0);
    g.pad_top = pad_h / 2;
    g.pad_left = pad_w / 2;
    return g;
}

// Rows: (n, oh, ow); columns: (kh, kw, c), matching the kernel's row-major layout.
RowMatrix im2col(const Tensor& input, const ConvGeometry& g) {
    const std::size_t patch = g.kh * g.kw * g.in.c;
    RowMatrix cols = RowMatrix::Zero(static_cast<Eigen::Index>(g.in.n * g.oh * g.ow), static_cast<Eigen::Index>(patch));
    const double* src = input.raw();
    for (std::size_t n = 0; n < g.in.n; ++n)
        for (std::size_t oy = 0; oy < g.oh; ++oy)
            for (std::size_t ox = 0; ox < g.ow; ++ox) {
                double* row = cols.data() + ((n * g.oh + oy) * g.ow + ox) * patch;
                for (std::size_t ky = 0; ky < g.kh; ++ky) {
                    const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad_top);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.in.h)) continue;
                    for (std::size_t kx = 0; kx < g.kw; ++kx) {
                        const auto ix =
                            static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad_left);
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.in.w)) continue;
                        const double* px = src + ((n * g.in.h + iy) * g.in.w + ix) * g.in.c;
                        std::copy(px, px + g.in.c, row + (ky * g.kw + kx) * g.in.c);
                    }
                }
            }
    return cols;
}

void col2im(const RowMatrix& cols, const ConvGeometry& g, Tensor& d_input) {
    const std::size_t patch = g.kh * g.kw * g.in.c;
    double* dst = d_input.raw();
    for (std::size_t n = 0; n < g.in.n; ++n)
        for (std::size_t oy = 0; oy < g.oh; ++oy)
            for (std::size_t ox = 0; ox < g.ow; ++ox) {
                const double* row = cols.data() + ((n * g.oh + oy) * g.ow + ox) * patch;
                for (std::size_t ky = 0; ky < g.kh; ++ky) {
                    const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad_top);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.in.h)) continue;
                    for (std::size_t kx = 0; kx < g.kw; ++kx) {
                        const auto ix =
                            static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad_left);
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.in.w)) continue;
                        double* px = dst + ((n * g.in.h + iy) * g.in.w + ix) * g.in.c;
                        const double* v = row + (ky * g.kw + kx) * g.in.c;
                        for (std::size_t c = 0; c < g.in.c; ++c) px[c] += v[c];
                    }
                }
            }
}

LayerParams glorot(const std::string& name, Shape wshape, std::size_t fan_in, std::size_t fan_out, std::size_t out,
                   std::uint64_t seed) {
    Rng rng(seed);
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Tensor w(std::move(wshape));
    for (auto& v : w.data()) v = rng.uniform(-limit, limit);
    return LayerParams{Parameter(name + ".w", std::move(w)), Parameter(name + ".b", Tensor({out}, 0.0))};
}

}  // namespace

LayerParams make_conv_params(const std::string& name, std::size_t kh, std::size_t kw, std::size_t in_c,
                             std::size_t out_c, std::uint64_t seed) {
    return glorot(name, {kh, kw, in_c, out_c}, kh * kw * in_c, kh * kw * out_c, out_c, seed);
}

LayerParams make_dense_params(const std::string& name, std::size_t in, std::size_t out, std::uint64_t seed) {
    return glorot(name, {out, in}, in, out, out, seed);
}

namespace {

// Row-by-row accumulation; a fixed order keeps results independent of buffer alignment.
void column_sums(const double* m, std::size_t rows, std::size_t cols, double* out) {
    std::fill_n(out, cols, 0.0);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) out[c] += m[r * cols + c];
}

}  // namespace

std::size_t same_output_extent(std::size_t extent, std::size_t stride) { return (extent + stride - 1) / stride; }

Tensor conv2d(const Tensor& input, const LayerParams& params, std::size_t stride, Padding) {
    const auto g = conv_geometry(input, params, stride);
    const RowMatrix cols = im2col(input, g);
    const std::size_t patch = g.kh * g.kw * g.in.c;
    ConstMatMap kernel(params.weights.value.raw(), static_cast<Eigen::Index>(patch), static_cast<Eigen::Index>(g.out_c));
    Tensor out(like_input(input, g.in.n, g.oh, g.ow, g.out_c));
    MatMap y(out.raw(), static_cast<Eigen::Index>(g.in.n * g.oh * g.ow), static_cast<Eigen::Index>(g.out_c));
    y.noalias() = cols * kernel;
    Eigen::Map<const Eigen::RowVectorXd> bias(params.biases.value.raw(), static_cast<Eigen::Index>(g.out_c));
    y.rowwise() += bias;
    return out;
}

ConvGrads conv2d_backward(const Tensor& input, const LayerParams& params, const Tensor& d_output,
                          std::size_t stride, bool need_input_grad) {
    const auto g = conv_geometry(input, params, stride);
    const std::size_t rows = g.in.n * g.oh * g.ow;
    if (d_output.size() != rows * g.out_c)
        throw std::invalid_argument("conv2d_backward: gradient " + shape_to_string(d_output.shape()) +
                                    " does not match output of " + shape_to_string(input.shape()));
    const std::size_t patch = g.kh * g.kw * g.in.c;
    const RowMatrix cols = im2col(input, g);
    ConstMatMap dy(d_output.raw(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(g.out_c));

    ConvGrads grads;
    grads.d_kernel = Tensor(params.weights.value.shape());
    MatMap dk(grads.d_kernel.raw(), static_cast<Eigen::Index>(patch), static_cast<Eigen::Index>(g.out_c));
    dk.noalias() = cols.transpose() * dy;
    grads.d_bias = Tensor({g.out_c});
    column_sums(d_output.raw(), rows, g.out_c, grads.d_bias.raw());

    if (need_input_grad) {
        ConstMatMap kernel(params.weights.value.raw(), static_cast<Eigen::Index>(patch),
                           static_cast<Eigen::Index>(g.out_c));
        const RowMatrix dcols = dy * kernel.transpose();
        grads.d_input = Tensor(input.shape(), 0.0);
        col2im(dcols, g, grads.d_input);
    }
    return grads;
}

PoolResult maxpool2d_forward(const Tensor& input, std::size_t window, std::size_t stride) {
    const auto in = as_nhwc(input, "maxpool2d");
    if (window == 0 || stride == 0) throw std::invalid_argument("maxpool2d: window and stride must be positive");
    if (in.h < window || in.w < window)
        throw std::invalid_argument("maxpool2d: input " + shape_to_string(input.shape()) + " smaller than window " +
                                    std::to_string(window));
    const std::size_t oh = same_output_extent(in.h, stride);
    const std::size_t ow = same_output_extent(in.w, stride);
    const std::size_t pad_top = std::max<std::ptrdiff_t>(
        static_cast<std::ptrdiff_t>((oh - 1) * stride + window) - static_cast<std::ptrdiff_t>(in.h), 0) / 2;
    const std::size_t pad_left = std::max<std::ptrdiff_t>(
        static_cast<std::ptrdiff_t>((ow - 1) * stride + window) - static_cast<std::ptrdiff_t>(in.w), 0) / 2;

    PoolResult r{Tensor(like_input(input, in.n, oh, ow, in.c)), {}};
    r.argmax.resize(r.output.size());
    const double* src = input.raw();
    std::size_t o = 0;
    for (std::size_t n = 0; n < in.n; ++n)
        for (std::size_t oy = 0; oy < oh; ++oy)
            for (std::size_t ox = 0; ox < ow; ++ox)
                for (std::size_t c = 0; c < in.c; ++c, ++o) {
                    double best = -std::numeric_limits<double>::infinity();
                    std::size_t best_idx = 0;
                    for (std::size_t ky = 0; ky < window; ++ky) {
                        const auto iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(pad_top);
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(in.h)) continue;
                        for (std::size_t kx = 0; kx < window; ++kx) {
                            const auto ix =
                                static_cast<std::ptrdiff_t>(ox * stride + kx) - static_cast<std::ptrdiff_t>(pad_left);
                            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(in.w)) continue;
                            const std::size_t idx = ((n * in.h + iy) * in.w + ix) * in.c + c;
                            if (src[idx] > best) {
                                best = src[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    r.output[o] = best;
                    r.argmax[o] = best_idx;
                }
    return r;
}

Tensor maxpool2d(const Tensor& input, std::size_t window, std::size_t stride) {
    return maxpool2d_forward(input, window, stride).output;
}

Tensor maxpool2d_backward(const Shape& input_shape, const PoolResult& forward, const Tensor& d_output) {
    if (d_output.size() != forward.argmax.size())
        throw std::invalid_argument("maxpool2d_backward: gradient " + shape_to_string(d_output.shape()) +
                                    " does not match pooled output " + shape_to_string(forward.output.shape()));
    Tensor d_input(input_shape, 0.0);
    for (std::size_t i = 0; i < forward.argmax.size(); ++i) d_input[forward.argmax[i]] += d_output[i];
    return d_input;
}

namespace {
std::pair<std::size_t, std::size_t> dense_rows(const Tensor& input, std::size_t in_dim) {
    const std::size_t total = input.size();
    if (input.rank() >= 2 && input.extent(0) * in_dim == total) return {input.extent(0), in_dim};
    if (total == in_dim) return {1, in_dim};
    throw std::invalid_argument("dense: input " + shape_to_string(input.shape()) + " does not match weight input dim " +
                                std::to_string(in_dim));
}
}  // namespace

Tensor dense(const Tensor& input, const LayerParams& params) {
    const auto& w = params.weights.value;
    if (w.rank() != 2) throw std::invalid_argument("dense: weights must be (out, in), got " + shape_to_string(w.shape()));
    const std::size_t out_dim = w.extent(0);
    const std::size_t in_dim = w.extent(1);
    const auto [n, d] = dense_rows(input, in_dim);
    if (params.biases.value.size() != out_dim)
        throw std::invalid_argument("dense: bias " + shape_to_string(params.biases.value.shape()) +
                                    " does not match weights " + shape_to_string(w.shape()));
    ConstMatMap x(input.raw(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    ConstMatMap wm(w.raw(), static_cast<Eigen::Index>(out_dim), static_cast<Eigen::Index>(in_dim));
    Tensor out(input.rank() == 1 ? Shape{out_dim} : Shape{n, out_dim});
    MatMap y(out.raw(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(out_dim));
    y.noalias() = x * wm.transpose();
    y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(params.biases.value.raw(), static_cast<Eigen::Index>(out_dim));
    return out;
}

DenseGrads dense_backward(const Tensor& input, const LayerParams& params, const Tensor& d_output) {
    const auto& w = params.weights.value;
    const std::size_t out_dim = w.extent(0);
    const std::size_t in_dim = w.extent(1);
    const auto [n, d] = dense_rows(input, in_dim);
    if (d_output.size() != n * out_dim)
        throw std::invalid_argument("dense_backward: gradient " + shape_to_string(d_output.shape()) +
                                    " does not match output width " + std::to_string(out_dim));
    ConstMatMap x(input.raw(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    ConstMatMap dy(d_output.raw(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(out_dim));
    ConstMatMap wm(w.raw(), static_cast<Eigen::Index>(out_dim), static_cast<Eigen::Index>(in_dim));
    DenseGrads g{Tensor(input.shape()), Tensor(w.shape()), Tensor({out_dim})};
    MatMap(g.d_input.raw(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(in_dim)).noalias() = dy * wm;
    MatMap(g.d_weights.raw(), static_cast<Eigen::Index>(out_dim), static_cast<Eigen::Index>(in_dim)).noalias() =
        dy.transpose() * x;
    column_sums(d_output.raw(), n, out_dim, g.d_bias.raw());
    return g;
}

Tensor relu(const Tensor& x) {
    Tensor y = x;
    for (auto& v : y.data()) v = v > 0.0 ? v : 0.0;
    return y;
}

Tensor relu_backward(const Tensor& activated, const Tensor& d_output) {
    Tensor d = d_output;
    for (std::size_t i = 0; i < d.size(); ++i)
        if (!(activated[i] > 0.0)) d[i] = 0.0;
    return d;
}

Tensor leaky_relu(const Tensor& x, double slope) {
    Tensor y = x;
    for (auto& v : y.data()) v = v > 0.0 ? v : slope * v;
    return y;
}

Tensor leaky_relu_backward(const Tensor& pre_activation, const Tensor& d_output, double slope) {
    Tensor d = d_output;
    for (std::size_t i = 0; i < d.size(); ++i)
        if (!(pre_activation[i] > 0.0)) d[i] *= slope;
    return d;
}

Tensor tanh_activation(const Tensor& x) {
    Tensor y = x;
    for (auto& v : y.data()) v = std::tanh(v);
    return y;
}

Tensor tanh_backward(const Tensor& activated, const Tensor& d_output) {
    Tensor d = d_output;
    for (std::size_t i = 0; i < d.size(); ++i) d[i] *= 1.0 - activated[i] * activated[i];
    return d;
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

Tensor upsample2x(const Tensor& input) {
    const auto in = as_nhwc(input, "upsample2x");
    Tensor out(like_input(input, in.n, in.h * 2, in.w * 2, in.c));
    for (std::size_t n = 0; n < in.n; ++n)
        for (std::size_t y = 0; y < in.h * 2; ++y)
            for (std::size_t x = 0; x < in.w * 2; ++x) {
                const double* s = input.raw() + ((n * in.h + y / 2) * in.w + x / 2) * in.c;
                std::copy(s, s + in.c, out.raw() + ((n * in.h * 2 + y) * in.w * 2 + x) * in.c);
            }
    return out;
}

Tensor upsample2x_backward(const Tensor& d_output) {
    const auto g = as_nhwc(d_output, "upsample2x_backward");
    if (g.h % 2 || g.w % 2)
        throw std::invalid_argument("upsample2x_backward: odd extents " + shape_to_string(d_output.shape()));
    Tensor d(like_input(d_output, g.n, g.h / 2, g.w / 2, g.c), 0.0);
    for (std::size_t n = 0; n < g.n; ++n)
        for (std::size_t y = 0; y < g.h; ++y)
            for (std::size_t x = 0; x < g.w; ++x) {
                const double* s = d_output.raw() + ((n * g.h + y) * g.w + x) * g.c;
                double* t = d.raw() + ((n * (g.h / 2) + y / 2) * (g.w / 2) + x / 2) * g.c;
                for (std::size_t c = 0; c < g.c; ++c) t[c] += s[c];
            }
    return d;
}

SoftmaxResult softmax_xent(std::span<const double> logits, std::size_t label) {
    if (logits.size() < 2) throw std::invalid_argument("softmax_xent: need at least 2 logits");
    if (label >= logits.size())
        throw std::invalid_argument("softmax_xent: label " + std::to_string(label) + " out of range for " +
                                    std::to_string(logits.size()) + " classes");
    for (double v : logits)
        if (!std::isfinite(v)) throw std::invalid_argument("softmax_xent: non-finite logit");
    const double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    SoftmaxResult r;
    r.probs.resize(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        r.probs[i] = std::exp(logits[i] - mx);
        sum += r.probs[i];
    }
    for (auto& p : r.probs) p /= sum;
    r.loss = -(logits[label] - mx - std::log(sum));
    return r;
}

BatchXent softmax_xent_batch(const Tensor& logits, std::span<const std::size_t> labels) {
    if (logits.rank() != 2 || logits.extent(0) != labels.size())
        throw std::invalid_argument("softmax_xent_batch: logits " + shape_to_string(logits.shape()) + " vs " +
                                    std::to_string(labels.size()) + " labels");
    const std::size_t n = logits.extent(0);
    const std::size_t k = logits.extent(1);
    BatchXent out{0.0, Tensor(logits.shape()), 0};
    for (std::size_t i = 0; i < n; ++i) {
        const std::span<const double> row(logits.raw() + i * k, k);
        const auto r = softmax_xent(row, labels[i]);
        out.loss += r.loss;
        if (argmax(row) == labels[i]) ++out.correct;
        for (std::size_t j = 0; j < k; ++j)
            out.d_logits[i * k + j] = (r.probs[j] - (j == labels[i] ? 1.0 : 0.0)) / static_cast<double>(n);
    }
    out.loss /= static_cast<double>(n);
    return out;
}

std::size_t argmax(std::span<const double> values) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] > values[best]) best = i;
    return best;
}

}  // namespace mex::nn
