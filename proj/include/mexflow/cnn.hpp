#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mexflow/derivatives.hpp"
#include "mexflow/layers.hpp"

namespace mex::cnn {

inline constexpr std::size_t kInputSize = 28;
inline constexpr std::size_t kStreamFeatures = 7 * 7 * 16;  // 784
inline constexpr std::size_t kHiddenWidth = 1024;
inline constexpr std::size_t kClasses = 3;

enum class Fusion { concat, multiply };

std::string_view fusion_name(Fusion f);
Fusion parse_fusion(std::string_view name);

// One input channel per stream.
struct StreamSpec {
    std::vector<deriv::Channel> channels;
    Fusion fusion = Fusion::concat;

    std::size_t streams() const { return channels.size(); }
    // Width of the fused feature vector fed to FC1.
    std::size_t head_input() const { return fusion == Fusion::multiply ? kStreamFeatures : kStreamFeatures * streams(); }
};

// Throws std::invalid_argument for unsupported combinations.
void validate(const StreamSpec& spec);

struct StreamLayers {
    nn::LayerParams conv1;  // 5x5x1 -> 6
    nn::LayerParams conv2;  // 5x5x6 -> 16
};

// Per-sample inputs: one 28x28x1 tensor per stream.
using SampleInputs = std::vector<nn::Tensor>;

struct ForwardOutput {
    nn::Tensor logits;       // N x 3
    nn::Tensor penultimate;  // N x 1024 (FC2 activations)
};

class OffApexNet {
public:
    OffApexNet(StreamSpec spec, std::uint64_t seed);

    const StreamSpec& spec() const { return spec_; }
    std::vector<nn::Parameter*> parameters();
    std::vector<const nn::Parameter*> parameters() const;
    void zero_grad();

    // Each element of `batch` holds one (N, 28, 28, 1) tensor per stream.
    ForwardOutput forward(const std::vector<nn::Tensor>& batch) const;

    // Forward + backward of the mean cross-entropy; gradients accumulate into
    // the parameters. Returns per-sample losses and the batch logits.
    struct StepResult {
        std::vector<double> losses;
        nn::Tensor logits;
    };
    StepResult forward_backward(const std::vector<nn::Tensor>& batch, std::span<const std::size_t> labels);

    // Layer name -> output shape for a batch of one, produced by an actual forward pass.
    std::vector<std::pair<std::string, nn::Shape>> shape_chain() const;

    void save(const std::filesystem::path& dir) const;
    static OffApexNet load(const std::filesystem::path& dir);

private:
    struct Cache;
    ForwardOutput run(const std::vector<nn::Tensor>& batch, Cache* cache) const;

    StreamSpec spec_;
    std::vector<StreamLayers> streams_;
    nn::LayerParams fc1_, fc2_, out_;
};

OffApexNet build_network(const StreamSpec& spec, std::uint64_t seed);

// Stacks per-sample stream inputs into per-stream batch tensors.
std::vector<nn::Tensor> stack_batch(std::span<const SampleInputs* const> samples, std::size_t streams);

struct Sample {
    SampleInputs inputs;
    std::size_t label = 0;
};

struct TrainConfig {
    std::size_t epochs = 100;
    double learning_rate = 1e-4;
    std::size_t batch_size = 32;
    std::uint64_t seed = 1;
    std::vector<std::size_t> checkpoints;  // epochs (0 = before training) at which the callback fires
};

struct EpochStats {
    std::size_t epoch;
    double loss;
    double train_accuracy;
};

class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using CheckpointCallback = std::function<void(std::size_t epoch, const OffApexNet& net)>;

std::vector<EpochStats> train(OffApexNet& net, std::span<const Sample> data, const TrainConfig& config,
                              const CheckpointCallback& on_checkpoint = {});

std::size_t predict(const OffApexNet& net, const SampleInputs& inputs);
std::vector<std::size_t> predict_batch(const OffApexNet& net, std::span<const Sample> data);
// Row i holds the FC2 activations of data[i].
nn::Tensor extract_features(const OffApexNet& net, std::span<const Sample> data);

void write_trace_csv(const std::vector<EpochStats>& trace, const std::filesystem::path& path);

}  // namespace mex::cnn
