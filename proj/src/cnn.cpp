#include "mexflow/cnn.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <numeric>
#include <set>

#include "mexflow/optim.hpp"
#include "mexflow/rng.hpp"
#include "mexflow/tensor_io.hpp"

namespace mex::cnn {

using nn::Tensor;

std::string_view fusion_name(Fusion f) { return f == Fusion::multiply ? "multiply" : "concat"; }

Fusion parse_fusion(std::string_view name) {
    if (name == "concat") return Fusion::concat;
    if (name == "multiply") return Fusion::multiply;
    throw std::invalid_argument("unknown fusion '" + std::string(name) + "'");
}

void validate(const StreamSpec& spec) {
    if (spec.channels.empty() || spec.channels.size() > 3)
        throw std::invalid_argument("stream spec: 1 to 3 streams required, got " + std::to_string(spec.channels.size()));
    if (spec.fusion == Fusion::multiply && spec.channels.size() < 2)
        throw std::invalid_argument("stream spec: multiplicative fusion needs at least 2 streams");
    std::set<deriv::Channel> seen(spec.channels.begin(), spec.channels.end());
    if (seen.size() != spec.channels.size()) throw std::invalid_argument("stream spec: stream channels must be distinct");
}

OffApexNet::OffApexNet(StreamSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
    validate(spec_);
    const Rng root(seed);
    std::uint64_t layer = 0;
    auto next_seed = [&] { return root.split(layer++).next_u64(); };
    for (std::size_t s = 0; s < spec_.streams(); ++s) {
        const std::string prefix = "stream" + std::to_string(s);
        StreamLayers l{nn::make_conv_params(prefix + ".conv1", 5, 5, 1, 6, next_seed()),
                       nn::make_conv_params(prefix + ".conv2", 5, 5, 6, 16, next_seed())};
        streams_.push_back(std::move(l));
    }
    fc1_ = nn::make_dense_params("fc1", spec_.head_input(), kHiddenWidth, next_seed());
    fc2_ = nn::make_dense_params("fc2", kHiddenWidth, kHiddenWidth, next_seed());
    out_ = nn::make_dense_params("out", kHiddenWidth, kClasses, next_seed());
}

OffApexNet build_network(const StreamSpec& spec, std::uint64_t seed) { return OffApexNet(spec, seed); }

std::vector<nn::Parameter*> OffApexNet::parameters() {
    std::vector<nn::Parameter*> out;
    for (auto& s : streams_)
        for (auto* l : {&s.conv1, &s.conv2}) {
            out.push_back(&l->weights);
            out.push_back(&l->biases);
        }
    for (auto* l : {&fc1_, &fc2_, &out_}) {
        out.push_back(&l->weights);
        out.push_back(&l->biases);
    }
    return out;
}

std::vector<const nn::Parameter*> OffApexNet::parameters() const {
    auto mut = const_cast<OffApexNet*>(this)->parameters();
    return {mut.begin(), mut.end()};
}

void OffApexNet::zero_grad() {
    for (auto* p : parameters()) p->zero_grad();
}

struct OffApexNet::Cache {
    struct Stream {
        Tensor input, conv1, conv2;
        nn::PoolResult pool1, pool2;
    };
    std::vector<Stream> streams;
    Tensor fused, fc1, fc2;
};

ForwardOutput OffApexNet::run(const std::vector<Tensor>& batch, Cache* cache) const {
    if (batch.size() != spec_.streams())
        throw std::invalid_argument("OffApexNet: expected " + std::to_string(spec_.streams()) + " stream inputs, got " +
                                    std::to_string(batch.size()));
    const std::size_t n = batch.front().rank() == 4 ? batch.front().extent(0) : 1;
    std::vector<Tensor> pooled;
    if (cache) cache->streams.resize(spec_.streams());
    for (std::size_t s = 0; s < spec_.streams(); ++s) {
        Tensor x = batch[s];
        if (x.rank() == 3) x.reshape({1, x.extent(0), x.extent(1), x.extent(2)});
        if (x.rank() != 4 || x.extent(0) != n || x.extent(1) != kInputSize || x.extent(2) != kInputSize || x.extent(3) != 1)
            throw std::invalid_argument("OffApexNet: stream " + std::to_string(s) + " input " + nn::shape_to_string(x.shape()) +
                                        " is not N x 28 x 28 x 1");
        const auto& l = streams_[s];
        Tensor c1 = nn::relu(nn::conv2d(x, l.conv1, 1));
        auto p1 = nn::maxpool2d_forward(c1);
        Tensor c2 = nn::relu(nn::conv2d(p1.output, l.conv2, 1));
        auto p2 = nn::maxpool2d_forward(c2);
        pooled.push_back(p2.output);
        if (cache) cache->streams[s] = {std::move(x), std::move(c1), std::move(c2), std::move(p1), std::move(p2)};
    }

    Tensor fused({n, spec_.head_input()});
    if (spec_.fusion == Fusion::multiply) {
        fused.fill(1.0);
        for (const auto& p : pooled)
            for (std::size_t i = 0; i < fused.size(); ++i) fused[i] *= p[i];
    } else {
        const std::size_t width = spec_.head_input();
        for (std::size_t s = 0; s < pooled.size(); ++s)
            for (std::size_t r = 0; r < n; ++r)
                std::copy_n(pooled[s].raw() + r * kStreamFeatures, kStreamFeatures, fused.raw() + r * width + s * kStreamFeatures);
    }
    Tensor h1 = nn::relu(nn::dense(fused, fc1_));
    Tensor h2 = nn::relu(nn::dense(h1, fc2_));
    ForwardOutput out{nn::dense(h2, out_), h2};
    if (cache) {
        cache->fused = std::move(fused);
        cache->fc1 = std::move(h1);
        cache->fc2 = std::move(h2);
    }
    return out;
}

ForwardOutput OffApexNet::forward(const std::vector<Tensor>& batch) const { return run(batch, nullptr); }

namespace {
void accumulate(nn::Parameter& p, const Tensor& g) {
    for (std::size_t i = 0; i < g.size(); ++i) p.grad[i] += g[i];
}
}  // namespace

OffApexNet::StepResult OffApexNet::forward_backward(const std::vector<Tensor>& batch, std::span<const std::size_t> labels) {
    Cache cache;
    auto fwd = run(batch, &cache);
    const std::size_t n = fwd.logits.extent(0);
    if (labels.size() != n) throw std::invalid_argument("OffApexNet: label count does not match batch");
    StepResult result{std::vector<double>(n), fwd.logits};
    for (std::size_t i = 0; i < n; ++i)
        result.losses[i] = nn::softmax_xent(std::span<const double>(fwd.logits.raw() + i * kClasses, kClasses), labels[i]).loss;
    const auto xent = nn::softmax_xent_batch(fwd.logits, labels);

    auto g_out = nn::dense_backward(cache.fc2, out_, xent.d_logits);
    accumulate(out_.weights, g_out.d_weights);
    accumulate(out_.biases, g_out.d_bias);
    auto g_fc2 = nn::dense_backward(cache.fc1, fc2_, nn::relu_backward(cache.fc2, g_out.d_input));
    accumulate(fc2_.weights, g_fc2.d_weights);
    accumulate(fc2_.biases, g_fc2.d_bias);
    auto g_fc1 = nn::dense_backward(cache.fused, fc1_, nn::relu_backward(cache.fc1, g_fc2.d_input));
    accumulate(fc1_.weights, g_fc1.d_weights);
    accumulate(fc1_.biases, g_fc1.d_bias);
    const Tensor& d_fused = g_fc1.d_input;

    for (std::size_t s = 0; s < spec_.streams(); ++s) {
        auto& c = cache.streams[s];
        Tensor d_pool2(c.pool2.output.shape());
        if (spec_.fusion == Fusion::multiply) {
            for (std::size_t i = 0; i < d_pool2.size(); ++i) {
                double g = d_fused[i];
                for (std::size_t o = 0; o < spec_.streams(); ++o)
                    if (o != s) g *= cache.streams[o].pool2.output[i];
                d_pool2[i] = g;
            }
        } else {
            const std::size_t width = spec_.head_input();
            for (std::size_t r = 0; r < n; ++r)
                std::copy_n(d_fused.raw() + r * width + s * kStreamFeatures, kStreamFeatures, d_pool2.raw() + r * kStreamFeatures);
        }
        auto& l = streams_[s];
        Tensor d_c2 = nn::relu_backward(c.conv2, nn::maxpool2d_backward(c.conv2.shape(), c.pool2, d_pool2));
        auto g2 = nn::conv2d_backward(c.pool1.output, l.conv2, d_c2, 1);
        accumulate(l.conv2.weights, g2.d_kernel);
        accumulate(l.conv2.biases, g2.d_bias);
        Tensor d_c1 = nn::relu_backward(c.conv1, nn::maxpool2d_backward(c.conv1.shape(), c.pool1, g2.d_input));
        auto g1 = nn::conv2d_backward(c.input, l.conv1, d_c1, 1, false);
        accumulate(l.conv1.weights, g1.d_kernel);
        accumulate(l.conv1.biases, g1.d_bias);
    }
    return result;
}

std::vector<std::pair<std::string, nn::Shape>> OffApexNet::shape_chain() const {
    std::vector<std::pair<std::string, nn::Shape>> chain;
    const auto& l = streams_.front();
    Tensor x({1, kInputSize, kInputSize, 1}, 0.0);
    Tensor c1 = nn::conv2d(x, l.conv1, 1);
    chain.emplace_back("conv1", c1.shape());
    Tensor p1 = nn::maxpool2d(c1);
    chain.emplace_back("pool1", p1.shape());
    Tensor c2 = nn::conv2d(p1, l.conv2, 1);
    chain.emplace_back("conv2", c2.shape());
    Tensor p2 = nn::maxpool2d(c2);
    chain.emplace_back("pool2", p2.shape());
    std::vector<Tensor> batch(spec_.streams(), Tensor({1, kInputSize, kInputSize, 1}, 0.0));
    Cache cache;
    const auto out = run(batch, &cache);
    chain.emplace_back("fused", cache.fused.shape());
    chain.emplace_back("fc1", cache.fc1.shape());
    chain.emplace_back("fc2", cache.fc2.shape());
    chain.emplace_back("output", out.logits.shape());
    return chain;
}

void OffApexNet::save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    nlohmann::json channels = nlohmann::json::array();
    for (auto c : spec_.channels) channels.push_back(std::string(deriv::channel_name(c)));
    nlohmann::json files = nlohmann::json::object();
    for (const auto* p : parameters()) {
        const std::string file = p->name + ".mxtn";
        nn::save_tensor(dir / file, p->value, nn::StorageType::f64);
        files[p->name] = file;
    }
    nlohmann::json index = {{"model", "off-apexnet"}, {"channels", channels}, {"fusion", std::string(fusion_name(spec_.fusion))},
                            {"parameters", files}};
    std::ofstream out(dir / "index.json");
    if (!out) throw std::runtime_error("cannot write checkpoint index in " + dir.string());
    out << index.dump(2) << '\n';
}

OffApexNet OffApexNet::load(const std::filesystem::path& dir) {
    std::ifstream in(dir / "index.json");
    if (!in) throw std::runtime_error("cannot open checkpoint index " + (dir / "index.json").string());
    const auto index = nlohmann::json::parse(in);
    StreamSpec spec;
    for (const auto& c : index.at("channels")) spec.channels.push_back(deriv::parse_channel(c.get<std::string>()));
    spec.fusion = parse_fusion(index.at("fusion").get<std::string>());
    OffApexNet net(spec, 0);
    const auto& files = index.at("parameters");
    for (auto* p : net.parameters()) {
        if (!files.contains(p->name)) throw std::runtime_error("checkpoint missing parameter " + p->name);
        Tensor t = nn::load_tensor(dir / files.at(p->name).get<std::string>());
        if (t.shape() != p->value.shape())
            throw std::runtime_error("checkpoint parameter " + p->name + " has shape " + nn::shape_to_string(t.shape()) +
                                     ", expected " + nn::shape_to_string(p->value.shape()));
        p->value = std::move(t);
    }
    return net;
}

std::vector<Tensor> stack_batch(std::span<const SampleInputs* const> samples, std::size_t streams) {
    std::vector<Tensor> out;
    const std::size_t n = samples.size();
    const std::size_t per = kInputSize * kInputSize;
    for (std::size_t s = 0; s < streams; ++s) {
        Tensor t({n, kInputSize, kInputSize, 1});
        for (std::size_t i = 0; i < n; ++i) {
            const auto& in = (*samples[i]).at(s);
            if (in.size() != per)
                throw std::invalid_argument("stack_batch: sample input " + nn::shape_to_string(in.shape()) + " is not 28x28x1");
            std::copy_n(in.raw(), per, t.raw() + i * per);
        }
        out.push_back(std::move(t));
    }
    return out;
}

std::vector<EpochStats> train(OffApexNet& net, std::span<const Sample> data, const TrainConfig& config,
                              const CheckpointCallback& on_checkpoint) {
    if (config.epochs == 0) throw std::invalid_argument("train: epochs must be >= 1");
    if (config.batch_size == 0) throw std::invalid_argument("train: batch size must be >= 1");
    if (data.empty()) throw std::invalid_argument("train: empty dataset");
    const std::set<std::size_t> checkpoints(config.checkpoints.begin(), config.checkpoints.end());
    auto params = net.parameters();
    auto state = nn::make_adam_state(params, nn::AdamConfig{config.learning_rate, 0.9, 0.999, 1e-8});
    const Rng rng(config.seed);
    std::vector<std::size_t> order(data.size());
    std::vector<double> sample_loss(data.size());
    std::vector<std::uint8_t> sample_hit(data.size());
    std::vector<EpochStats> trace;

    if (on_checkpoint && checkpoints.contains(0)) on_checkpoint(0, net);
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        Rng shuffle = rng.split(epoch);
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(start + config.batch_size, order.size());
            std::vector<const SampleInputs*> inputs;
            std::vector<std::size_t> labels;
            for (std::size_t k = start; k < end; ++k) {
                inputs.push_back(&data[order[k]].inputs);
                labels.push_back(data[order[k]].label);
            }
            net.zero_grad();
            const auto step = net.forward_backward(stack_batch(inputs, net.spec().streams()), labels);
            for (std::size_t k = start; k < end; ++k) {
                const std::size_t row = k - start;
                sample_loss[order[k]] = step.losses[row];
                sample_hit[order[k]] =
                    nn::argmax(std::span<const double>(step.logits.raw() + row * kClasses, kClasses)) == labels[row];
            }
            try {
                nn::adam_step(params, state);
            } catch (const nn::NonFiniteGradient& e) {
                throw TrainingError("training aborted at epoch " + std::to_string(epoch) + ": " + e.what());
            }
        }
        double loss = 0.0;
        std::size_t hits = 0;
        for (std::size_t i = 0; i < data.size(); ++i) {
            loss += sample_loss[i];
            hits += sample_hit[i];
        }
        loss /= static_cast<double>(data.size());
        if (!std::isfinite(loss)) throw TrainingError("non-finite loss at epoch " + std::to_string(epoch));
        trace.push_back({epoch, loss, static_cast<double>(hits) / static_cast<double>(data.size())});
        if (on_checkpoint && checkpoints.contains(epoch)) on_checkpoint(epoch, net);
    }
    return trace;
}

std::size_t predict(const OffApexNet& net, const SampleInputs& inputs) {
    const SampleInputs* ptr = &inputs;
    const auto out = net.forward(stack_batch(std::span<const SampleInputs* const>(&ptr, 1), net.spec().streams()));
    return nn::argmax(std::span<const double>(out.logits.raw(), kClasses));
}

namespace {
template <class Fn>
void for_each_batch(const OffApexNet& net, std::span<const Sample> data, Fn&& fn) {
    constexpr std::size_t chunk = 64;
    for (std::size_t start = 0; start < data.size(); start += chunk) {
        const std::size_t end = std::min(start + chunk, data.size());
        std::vector<const SampleInputs*> inputs;
        for (std::size_t k = start; k < end; ++k) inputs.push_back(&data[k].inputs);
        fn(start, net.forward(stack_batch(inputs, net.spec().streams())));
    }
}
}  // namespace

std::vector<std::size_t> predict_batch(const OffApexNet& net, std::span<const Sample> data) {
    std::vector<std::size_t> out(data.size());
    for_each_batch(net, data, [&](std::size_t start, const ForwardOutput& f) {
        for (std::size_t r = 0; r < f.logits.extent(0); ++r)
            out[start + r] = nn::argmax(std::span<const double>(f.logits.raw() + r * kClasses, kClasses));
    });
    return out;
}

Tensor extract_features(const OffApexNet& net, std::span<const Sample> data) {
    if (data.empty()) throw std::invalid_argument("extract_features: empty dataset");
    Tensor out({data.size(), kHiddenWidth});
    for_each_batch(net, data, [&](std::size_t start, const ForwardOutput& f) {
        std::copy(f.penultimate.data().begin(), f.penultimate.data().end(), out.raw() + start * kHiddenWidth);
    });
    return out;
}

void write_trace_csv(const std::vector<EpochStats>& trace, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "epoch,loss,train_acc\n";
    out.precision(17);
    for (const auto& e : trace) out << e.epoch << ',' << e.loss << ',' << e.train_accuracy << '\n';
}

}  // namespace mex::cnn
