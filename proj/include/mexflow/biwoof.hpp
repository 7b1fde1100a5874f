#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mexflow/derivatives.hpp"

namespace mex::biwoof {

struct BiwoofConfig {
    std::size_t blocks_per_side = 5;
    std::size_t orientation_bins = 8;
};

struct FeatureVector {
    std::vector<double> values;  // blocks_per_side^2 * orientation_bins
    BiwoofConfig config;
};

// Half-open pixel interval [begin, end) of block `index` when `extent` pixels
// are split into `blocks`; the last block absorbs the remainder.
struct Span {
    std::size_t begin, end;
};
Span block_span(std::size_t extent, std::size_t blocks, std::size_t index);

// Bin of an orientation in (-pi, pi] among `bins` equal sectors.
std::size_t orientation_bin(double theta, std::size_t bins);

// Block orientation histograms voted by magnitude, each scaled by the block's
// mean optical strain, concatenated row-major and L2-normalised.
FeatureVector extract_biwoof(const deriv::DerivedChannels& channels, const BiwoofConfig& config);
// Same, before the final normalisation.
std::vector<double> extract_biwoof_raw(const deriv::DerivedChannels& channels, const BiwoofConfig& config);

// ---- linear SVM, one-vs-rest ----

struct SvmParams {
    double lambda = 1e-3;
    std::size_t epochs = 200;
    std::uint64_t seed = 1;
};

struct SvmModel {
    std::size_t classes = 3;
    std::size_t dim = 0;
    std::vector<double> weights;  // classes x dim
    std::vector<double> biases;   // classes
    SvmParams params;

    double score(std::size_t cls, std::span<const double> feature) const;
};

struct SvmPrediction {
    std::size_t label;
    std::vector<double> scores;
};

// Primal hinge-loss training by seeded stochastic sub-gradient descent
// (Pegasos step sizes); the bias is learned as a regularised constant feature.
SvmModel train_svm(const std::vector<std::vector<double>>& features, std::span<const std::size_t> labels,
                   const SvmParams& params, std::size_t classes = 3);
SvmPrediction predict_svm(const SvmModel& model, std::span<const double> feature);

// "MSVM", u8 version 1, u32 classes, u32 dim, then per class dim weights and
// the bias as f32; little-endian.
void write_svm(std::ostream& out, const SvmModel& model);
SvmModel read_svm(std::istream& in, const std::string& source = "<stream>");
void save_svm(const SvmModel& model, const std::filesystem::path& path);
SvmModel load_svm(const std::filesystem::path& path);

}  // namespace mex::biwoof
