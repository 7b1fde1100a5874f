#include "mexflow/pca.hpp"

#include <Eigen/Dense>
#include <stdexcept>

namespace mex::nn {

namespace {
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
}

PcaModel pca_fit(const Tensor& samples, std::size_t k) {
    if (samples.rank() != 2) throw std::invalid_argument("pca_fit: expected N x D samples, got " + shape_to_string(samples.shape()));
    const std::size_t n = samples.extent(0);
    const std::size_t d = samples.extent(1);
    if (n < 2) throw std::invalid_argument("pca_fit: need at least 2 samples");
    if (k == 0 || k > std::min(n - 1, d))
        throw std::invalid_argument("pca_fit: k=" + std::to_string(k) + " must be in [1, min(N-1, D)] for " +
                                    shape_to_string(samples.shape()));
    const Eigen::Map<const RowMatrix> x(samples.raw(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    // Plain loop: a vectorised reduction over the caller's buffer would depend on its alignment.
    Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(d));
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c) mean(static_cast<Eigen::Index>(c)) += samples.raw()[r * d + c];
    mean /= static_cast<double>(n);
    const Eigen::MatrixXd centered = x.rowwise() - mean;

    PcaModel model;
    model.mean.assign(mean.data(), mean.data() + d);
    model.basis = Tensor({d, k});
    model.variances.resize(k);

    Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV | Eigen::ComputeThinU);
    const auto& sv = svd.singularValues();
    const Eigen::MatrixXd& v = svd.matrixV();
    // Thin V holds min(N, D) columns. When D > N the trailing directions are
    // not spanned by the data; complete them to an orthonormal set if needed.
    Eigen::MatrixXd basis(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(k));
    const auto available = std::min<Eigen::Index>(v.cols(), static_cast<Eigen::Index>(k));
    basis.leftCols(available) = v.leftCols(available);
    for (Eigen::Index j = available; j < static_cast<Eigen::Index>(k); ++j) basis.col(j).setZero();

    const double scale = sv.size() ? sv(0) : 0.0;
    const double tol = std::max(1.0, scale) * 1e-12 * static_cast<double>(std::max(n, d));
    for (std::size_t j = 0; j < k; ++j) {
        const double s = static_cast<Eigen::Index>(j) < sv.size() ? sv(static_cast<Eigen::Index>(j)) : 0.0;
        model.variances[j] = s > tol ? s * s / static_cast<double>(n - 1) : 0.0;
    }
    model.degenerate = model.variances.front() == 0.0;
    if (model.degenerate) basis = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(k));

    // Sign convention: the largest-magnitude entry of each column is positive.
    for (Eigen::Index j = 0; j < basis.cols(); ++j) {
        Eigen::Index arg = 0;
        basis.col(j).cwiseAbs().maxCoeff(&arg);
        if (basis(arg, j) < 0) basis.col(j) *= -1.0;
    }
    for (std::size_t r = 0; r < d; ++r)
        for (std::size_t c = 0; c < k; ++c)
            model.basis[r * k + c] = basis(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    return model;
}

std::vector<double> PcaModel::project(std::span<const double> sample) const {
    if (sample.size() != dim())
        throw std::invalid_argument("pca project: sample length " + std::to_string(sample.size()) + " != " +
                                    std::to_string(dim()));
    const std::size_t k = components();
    std::vector<double> out(k, 0.0);
    for (std::size_t r = 0; r < dim(); ++r) {
        const double centered = sample[r] - mean[r];
        for (std::size_t c = 0; c < k; ++c) out[c] += centered * basis[r * k + c];
    }
    return out;
}

Tensor PcaModel::transform(const Tensor& samples) const {
    if (samples.rank() != 2 || samples.extent(1) != dim())
        throw std::invalid_argument("pca transform: expected N x " + std::to_string(dim()) + ", got " +
                                    shape_to_string(samples.shape()));
    const std::size_t n = samples.extent(0);
    Tensor out({n, components()});
    for (std::size_t i = 0; i < n; ++i) {
        const auto p = project(std::span<const double>(samples.raw() + i * dim(), dim()));
        std::copy(p.begin(), p.end(), out.raw() + i * components());
    }
    return out;
}

std::vector<double> PcaModel::reconstruct(std::span<const double> projected) const {
    const std::size_t k = components();
    if (projected.size() != k) throw std::invalid_argument("pca reconstruct: wrong component count");
    std::vector<double> out = mean;
    for (std::size_t r = 0; r < dim(); ++r)
        for (std::size_t c = 0; c < k; ++c) out[r] += projected[c] * basis[r * k + c];
    return out;
}

}  // namespace mex::nn
