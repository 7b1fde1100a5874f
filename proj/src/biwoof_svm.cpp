#include <fstream>
#include <numeric>
#include <set>

#include "mexflow/binary_io.hpp"
#include "mexflow/biwoof.hpp"
#include "mexflow/rng.hpp"

namespace mex::biwoof {

double SvmModel::score(std::size_t cls, std::span<const double> feature) const {
    const double* w = weights.data() + cls * dim;
    double s = biases[cls];
    for (std::size_t j = 0; j < dim; ++j) s += w[j] * feature[j];
    return s;
}

SvmModel train_svm(const std::vector<std::vector<double>>& features, std::span<const std::size_t> labels,
                   const SvmParams& params, std::size_t classes) {
    if (features.size() != labels.size()) throw std::invalid_argument("train_svm: feature/label count mismatch");
    if (features.empty()) throw std::invalid_argument("train_svm: empty training set");
    if (!(params.lambda > 0) || params.epochs == 0) throw std::invalid_argument("train_svm: lambda and epochs must be positive");
    const std::size_t dim = features.front().size();
    std::set<std::size_t> present;
    for (std::size_t i = 0; i < features.size(); ++i) {
        if (features[i].size() != dim) throw std::invalid_argument("train_svm: features have unequal lengths");
        if (labels[i] >= classes) throw std::invalid_argument("train_svm: label out of range");
        present.insert(labels[i]);
    }
    if (present.size() < 2) throw std::invalid_argument("train_svm: training set contains a single class");

    SvmModel m;
    m.classes = classes;
    m.dim = dim;
    m.params = params;
    m.weights.assign(classes * dim, 0.0);
    m.biases.assign(classes, 0.0);

    Rng rng(params.seed);
    std::vector<std::size_t> order(features.size());
    std::iota(order.begin(), order.end(), 0);
    std::uint64_t t = 0;
    for (std::size_t epoch = 0; epoch < params.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
        for (std::size_t idx : order) {
            ++t;
            const double eta = 1.0 / (params.lambda * static_cast<double>(t));
            const double shrink = 1.0 - eta * params.lambda;
            const auto& x = features[idx];
            for (std::size_t k = 0; k < classes; ++k) {
                const double y = labels[idx] == k ? 1.0 : -1.0;
                const double margin = y * m.score(k, x);
                double* w = m.weights.data() + k * dim;
                for (std::size_t j = 0; j < dim; ++j) w[j] *= shrink;
                m.biases[k] *= shrink;
                if (margin < 1.0) {
                    for (std::size_t j = 0; j < dim; ++j) w[j] += eta * y * x[j];
                    m.biases[k] += eta * y;
                }
            }
        }
    }
    return m;
}

SvmPrediction predict_svm(const SvmModel& model, std::span<const double> feature) {
    if (feature.size() != model.dim)
        throw std::invalid_argument("predict_svm: feature length " + std::to_string(feature.size()) +
                                    " does not match model dimension " + std::to_string(model.dim));
    SvmPrediction p{0, std::vector<double>(model.classes)};
    for (std::size_t k = 0; k < model.classes; ++k) {
        p.scores[k] = model.score(k, feature);
        if (p.scores[k] > p.scores[p.label]) p.label = k;
    }
    return p;
}

void write_svm(std::ostream& out, const SvmModel& m) {
    io::write_magic(out, "MSVM");
    io::write_u8(out, 1);
    io::write_u32(out, static_cast<std::uint32_t>(m.classes));
    io::write_u32(out, static_cast<std::uint32_t>(m.dim));
    for (std::size_t k = 0; k < m.classes; ++k) {
        for (std::size_t j = 0; j < m.dim; ++j) io::write_f32(out, static_cast<float>(m.weights[k * m.dim + j]));
        io::write_f32(out, static_cast<float>(m.biases[k]));
    }
}

SvmModel read_svm(std::istream& in, const std::string& source) {
    io::Reader r(in, source);
    r.expect_magic("MSVM");
    if (r.u8() != 1) r.fail("unsupported MSVM version");
    SvmModel m;
    m.classes = r.u32();
    m.dim = r.u32();
    if (m.classes < 2) r.fail("fewer than 2 classes");
    m.weights.resize(m.classes * m.dim);
    m.biases.resize(m.classes);
    for (std::size_t k = 0; k < m.classes; ++k) {
        for (std::size_t j = 0; j < m.dim; ++j) m.weights[k * m.dim + j] = r.f32();
        m.biases[k] = r.f32();
    }
    return m;
}

void save_svm(const SvmModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    write_svm(out, model);
}

SvmModel load_svm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return read_svm(in, path.string());
}

}  // namespace mex::biwoof
