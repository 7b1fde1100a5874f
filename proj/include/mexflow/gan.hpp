#pragma once

// Conditional adversarial generator for 28x28 single-channel flow images,
// trained with source and class log-likelihood objectives.

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mexflow/derivatives.hpp"
#include "mexflow/layers.hpp"

namespace mex::gan {

inline constexpr std::size_t kImageSize = 28;
inline constexpr std::size_t kClasses = 3;

class GanError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct GanConfig {
    std::size_t noise_dim = 100;
    std::size_t k = 1;             // discriminator steps, then generator steps, per outer iteration
    std::size_t iterations = 2000; // outer iterations K
    std::size_t batch = 32;        // m
    double generator_lr = 2e-4;
    double discriminator_lr = 2e-4;
    std::uint64_t seed = 1;
};

void validate(const GanConfig& config);

// (z, class) -> N x 28 x 28 x 1 image in [-1, 1].
class Generator {
public:
    Generator(std::size_t noise_dim, std::uint64_t seed);

    std::size_t noise_dim() const { return noise_dim_; }
    std::vector<nn::Parameter*> parameters();
    std::vector<const nn::Parameter*> parameters() const;
    void zero_grad();

    struct Activations {
        nn::Tensor input, fc, up1, conv1, up2, output;
    };
    // z is (N, noise_dim).
    nn::Tensor forward(const nn::Tensor& z, std::span<const std::size_t> labels) const;
    nn::Tensor forward(const nn::Tensor& z, std::span<const std::size_t> labels, Activations& acts) const;
    void backward(const Activations& acts, const nn::Tensor& d_output);

    void save(const std::filesystem::path& dir) const;
    static Generator load(const std::filesystem::path& dir);

private:
    std::size_t noise_dim_;
    nn::LayerParams fc_, conv1_, conv2_;
};

struct DiscOutput {
    std::vector<double> source_logit;
    std::vector<double> source;  // P(S = real | x), in (0, 1)
    nn::Tensor class_logits;     // N x 3
};

class Discriminator {
public:
    explicit Discriminator(std::uint64_t seed);

    std::vector<nn::Parameter*> parameters();
    std::vector<const nn::Parameter*> parameters() const;
    void zero_grad();

    struct Activations {
        nn::Tensor input, a1, a2, flat, a3, l3;
    };
    DiscOutput forward(const nn::Tensor& images) const;
    DiscOutput forward(const nn::Tensor& images, Activations& acts) const;
    // Accumulates parameter gradients and returns d(loss)/d(images).
    nn::Tensor backward(const Activations& acts, std::span<const double> d_source_logit, const nn::Tensor& d_class_logits);

    void save(const std::filesystem::path& dir) const;
    static Discriminator load(const std::filesystem::path& dir);

private:
    nn::LayerParams conv1_, conv2_, fc_, source_, class_;
};

inline constexpr double kProbClamp = 1e-7;

struct AcganLosses {
    double source = 0.0;  // L_S
    double cls = 0.0;     // L_C
};

// L_S = mean log P(real|x_real) + mean log P(fake|x_fake);
// L_C = mean log P(c|x_real) + mean log P(c|x_fake). Probabilities are clamped
// to [1e-7, 1 - 1e-7] before the logarithm.
AcganLosses acgan_losses(const DiscOutput& real, std::span<const std::size_t> real_labels, const DiscOutput& fake,
                         std::span<const std::size_t> fake_labels);

struct TraceEntry {
    std::size_t iteration;
    double source_loss;  // L_S
    double class_loss;   // L_C
    double mean_real_score;
    double mean_fake_score;
};

struct LabeledImage {
    nn::Tensor image;  // 28 x 28 x 1 in [-1, 1]
    std::size_t label = 0;
};

struct GanResult {
    Generator generator;
    Discriminator discriminator;
    std::vector<TraceEntry> trace;
    std::size_t discriminator_updates = 0;
    std::size_t generator_updates = 0;
};

GanResult train_gan(std::span<const LabeledImage> real, const GanConfig& config);

// n images of class c from standard-normal noise drawn with `seed`.
std::vector<nn::Tensor> generate_samples(const Generator& gen, std::size_t cls, std::size_t n, std::uint64_t seed);

// Training sample with one 28x28x1 image per channel.
struct AugmentedSample {
    std::string id;
    std::size_t label = 0;
    std::vector<nn::Tensor> channels;
    bool fake = false;
};

// Appends fakes per class until every class reaches the largest real count.
// Each channel is drawn from its own generator.
std::vector<AugmentedSample> balance_dataset(std::vector<AugmentedSample> samples,
                                             const std::vector<deriv::Channel>& channels,
                                             const std::map<deriv::Channel, const Generator*>& generators,
                                             std::uint64_t seed);

// Index CSV (id,label,fake,files...) with one MXTN file per channel image.
void save_samples(const std::filesystem::path& dir, const std::vector<AugmentedSample>& samples);
std::vector<AugmentedSample> load_samples(const std::filesystem::path& dir);

// PGM per image plus samples.csv (path,class,seed,z_index).
void dump_fakes(const std::filesystem::path& dir, const std::vector<nn::Tensor>& images, std::size_t cls,
                std::uint64_t seed);

void write_trace_csv(const std::vector<TraceEntry>& trace, const std::filesystem::path& path);

}  // namespace mex::gan
