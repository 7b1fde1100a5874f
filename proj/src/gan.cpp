#include "mexflow/gan.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "mexflow/image.hpp"
#include "mexflow/optim.hpp"
#include "mexflow/rng.hpp"
#include "mexflow/tensor_io.hpp"

namespace mex::gan {

using nn::Tensor;

namespace {

constexpr std::size_t kSeedSize = 7;
constexpr std::size_t kSeedChannels = 32;
constexpr double kLeak = 0.2;

std::uint64_t layer_seed(std::uint64_t seed, std::uint64_t layer) { return Rng(seed).split(layer).next_u64(); }

template <class Params>
std::vector<const nn::Parameter*> const_view(Params mut) {
    return {mut.begin(), mut.end()};
}

void accumulate(nn::Parameter& p, const Tensor& g) {
    for (std::size_t i = 0; i < g.size(); ++i) p.grad[i] += g[i];
}

void accumulate(nn::LayerParams& l, const Tensor& dw, const Tensor& db) {
    accumulate(l.weights, dw);
    accumulate(l.biases, db);
}

void save_params(const std::filesystem::path& dir, const std::vector<const nn::Parameter*>& params, nlohmann::json index) {
    std::filesystem::create_directories(dir);
    nlohmann::json files = nlohmann::json::object();
    for (const auto* p : params) {
        const std::string file = p->name + ".mxtn";
        nn::save_tensor(dir / file, p->value, nn::StorageType::f64);
        files[p->name] = file;
    }
    index["parameters"] = files;
    std::ofstream out(dir / "index.json");
    if (!out) throw std::runtime_error("cannot write checkpoint index in " + dir.string());
    out << index.dump(2) << '\n';
}

nlohmann::json read_index(const std::filesystem::path& dir, std::string_view model) {
    std::ifstream in(dir / "index.json");
    if (!in) throw std::runtime_error("cannot open checkpoint index " + (dir / "index.json").string());
    auto index = nlohmann::json::parse(in);
    if (index.value("model", "") != model)
        throw std::runtime_error("checkpoint in " + dir.string() + " is not a " + std::string(model));
    return index;
}

void load_params(const std::filesystem::path& dir, const nlohmann::json& index, const std::vector<nn::Parameter*>& params) {
    const auto& files = index.at("parameters");
    for (auto* p : params) {
        if (!files.contains(p->name)) throw std::runtime_error("checkpoint missing parameter " + p->name);
        Tensor t = nn::load_tensor(dir / files.at(p->name).get<std::string>());
        if (t.shape() != p->value.shape())
            throw std::runtime_error("checkpoint parameter " + p->name + " has shape " + nn::shape_to_string(t.shape()));
        p->value = std::move(t);
    }
}

void check_labels(std::span<const std::size_t> labels, std::size_t n, const char* what) {
    if (labels.size() != n) throw std::invalid_argument(std::string(what) + ": label count does not match batch");
    for (auto l : labels)
        if (l >= kClasses) throw std::invalid_argument(std::string(what) + ": class " + std::to_string(l) + " out of range");
}

double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

}  // namespace

void validate(const GanConfig& c) {
    if (c.k < 1) throw std::invalid_argument("gan config: k must be >= 1");
    if (c.batch < 2) throw std::invalid_argument("gan config: batch m must be >= 2");
    if (c.noise_dim < 1) throw std::invalid_argument("gan config: noise_dim must be >= 1");
    if (!(c.generator_lr >= 0.0) || !(c.discriminator_lr >= 0.0))
        throw std::invalid_argument("gan config: learning rates must be non-negative");
}

// ---- generator ----

Generator::Generator(std::size_t noise_dim, std::uint64_t seed) : noise_dim_(noise_dim) {
    if (noise_dim == 0) throw std::invalid_argument("generator: noise_dim must be >= 1");
    fc_ = nn::make_dense_params("gen.fc", noise_dim + kClasses, kSeedSize * kSeedSize * kSeedChannels, layer_seed(seed, 0));
    conv1_ = nn::make_conv_params("gen.conv1", 3, 3, kSeedChannels, 16, layer_seed(seed, 1));
    conv2_ = nn::make_conv_params("gen.conv2", 3, 3, 16, 1, layer_seed(seed, 2));
}

std::vector<nn::Parameter*> Generator::parameters() {
    return {&fc_.weights, &fc_.biases, &conv1_.weights, &conv1_.biases, &conv2_.weights, &conv2_.biases};
}
std::vector<const nn::Parameter*> Generator::parameters() const {
    return const_view(const_cast<Generator*>(this)->parameters());
}
void Generator::zero_grad() {
    for (auto* p : parameters()) p->zero_grad();
}

Tensor Generator::forward(const Tensor& z, std::span<const std::size_t> labels) const {
    Activations acts;
    return forward(z, labels, acts);
}

Tensor Generator::forward(const Tensor& z, std::span<const std::size_t> labels, Activations& acts) const {
    if (z.rank() != 2 || z.extent(1) != noise_dim_)
        throw std::invalid_argument("generator: noise " + nn::shape_to_string(z.shape()) + " is not N x " +
                                    std::to_string(noise_dim_));
    const std::size_t n = z.extent(0);
    check_labels(labels, n, "generator");
    const std::size_t width = noise_dim_ + kClasses;
    acts.input = Tensor({n, width});
    for (std::size_t i = 0; i < n; ++i) {
        std::copy_n(z.raw() + i * noise_dim_, noise_dim_, acts.input.raw() + i * width);
        acts.input[i * width + noise_dim_ + labels[i]] = 1.0;
    }
    acts.fc = nn::relu(nn::dense(acts.input, fc_));
    Tensor seed_map = acts.fc;
    seed_map.reshape({n, kSeedSize, kSeedSize, kSeedChannels});
    acts.up1 = nn::upsample2x(seed_map);
    acts.conv1 = nn::relu(nn::conv2d(acts.up1, conv1_, 1));
    acts.up2 = nn::upsample2x(acts.conv1);
    acts.output = nn::tanh_activation(nn::conv2d(acts.up2, conv2_, 1));
    return acts.output;
}

void Generator::backward(const Activations& acts, const Tensor& d_output) {
    auto g2 = nn::conv2d_backward(acts.up2, conv2_, nn::tanh_backward(acts.output, d_output), 1);
    accumulate(conv2_, g2.d_kernel, g2.d_bias);
    Tensor d_c1 = nn::relu_backward(acts.conv1, nn::upsample2x_backward(g2.d_input));
    auto g1 = nn::conv2d_backward(acts.up1, conv1_, d_c1, 1);
    accumulate(conv1_, g1.d_kernel, g1.d_bias);
    Tensor d_seed = nn::upsample2x_backward(g1.d_input);
    d_seed.reshape(acts.fc.shape());
    auto gf = nn::dense_backward(acts.input, fc_, nn::relu_backward(acts.fc, d_seed));
    accumulate(fc_, gf.d_weights, gf.d_bias);
}

void Generator::save(const std::filesystem::path& dir) const {
    save_params(dir, parameters(), {{"model", "generator"}, {"noise_dim", noise_dim_}});
}

Generator Generator::load(const std::filesystem::path& dir) {
    const auto index = read_index(dir, "generator");
    Generator g(index.at("noise_dim").get<std::size_t>(), 0);
    load_params(dir, index, g.parameters());
    return g;
}

// ---- discriminator ----

Discriminator::Discriminator(std::uint64_t seed) {
    conv1_ = nn::make_conv_params("disc.conv1", 5, 5, 1, 16, layer_seed(seed, 0));
    conv2_ = nn::make_conv_params("disc.conv2", 5, 5, 16, 32, layer_seed(seed, 1));
    fc_ = nn::make_dense_params("disc.fc", 7 * 7 * 32, 256, layer_seed(seed, 2));
    source_ = nn::make_dense_params("disc.source", 256, 1, layer_seed(seed, 3));
    class_ = nn::make_dense_params("disc.class", 256, kClasses, layer_seed(seed, 4));
}

std::vector<nn::Parameter*> Discriminator::parameters() {
    return {&conv1_.weights, &conv1_.biases, &conv2_.weights, &conv2_.biases, &fc_.weights,
            &fc_.biases,     &source_.weights, &source_.biases, &class_.weights, &class_.biases};
}
std::vector<const nn::Parameter*> Discriminator::parameters() const {
    return const_view(const_cast<Discriminator*>(this)->parameters());
}
void Discriminator::zero_grad() {
    for (auto* p : parameters()) p->zero_grad();
}

DiscOutput Discriminator::forward(const Tensor& images) const {
    Activations acts;
    return forward(images, acts);
}

DiscOutput Discriminator::forward(const Tensor& images, Activations& acts) const {
    acts.input = images;
    if (acts.input.rank() == 3) acts.input.reshape({1, images.extent(0), images.extent(1), images.extent(2)});
    if (acts.input.rank() != 4 || acts.input.extent(1) != kImageSize || acts.input.extent(2) != kImageSize ||
        acts.input.extent(3) != 1)
        throw std::invalid_argument("discriminator: input " + nn::shape_to_string(images.shape()) + " is not N x 28 x 28 x 1");
    const std::size_t n = acts.input.extent(0);
    acts.a1 = nn::conv2d(acts.input, conv1_, 2);
    acts.a2 = nn::conv2d(nn::leaky_relu(acts.a1, kLeak), conv2_, 2);
    acts.flat = nn::leaky_relu(acts.a2, kLeak);
    acts.flat.reshape({n, 7 * 7 * 32});
    acts.a3 = nn::dense(acts.flat, fc_);
    acts.l3 = nn::leaky_relu(acts.a3, kLeak);
    DiscOutput out;
    const Tensor s = nn::dense(acts.l3, source_);
    out.source_logit.assign(s.data().begin(), s.data().end());
    for (double v : out.source_logit) out.source.push_back(nn::sigmoid(v));
    out.class_logits = nn::dense(acts.l3, class_);
    return out;
}

Tensor Discriminator::backward(const Activations& acts, std::span<const double> d_source_logit, const Tensor& d_class_logits) {
    const std::size_t n = acts.input.extent(0);
    Tensor d_s({n, 1}, std::vector<double>(d_source_logit.begin(), d_source_logit.end()));
    auto gs = nn::dense_backward(acts.l3, source_, d_s);
    accumulate(source_, gs.d_weights, gs.d_bias);
    auto gc = nn::dense_backward(acts.l3, class_, d_class_logits);
    accumulate(class_, gc.d_weights, gc.d_bias);
    Tensor d_l3 = gs.d_input;
    for (std::size_t i = 0; i < d_l3.size(); ++i) d_l3[i] += gc.d_input[i];
    auto gf = nn::dense_backward(acts.flat, fc_, nn::leaky_relu_backward(acts.a3, d_l3, kLeak));
    accumulate(fc_, gf.d_weights, gf.d_bias);
    Tensor d_flat = gf.d_input;
    d_flat.reshape(acts.a2.shape());
    const Tensor l1 = nn::leaky_relu(acts.a1, kLeak);
    auto g2 = nn::conv2d_backward(l1, conv2_, nn::leaky_relu_backward(acts.a2, d_flat, kLeak), 2);
    accumulate(conv2_, g2.d_kernel, g2.d_bias);
    auto g1 = nn::conv2d_backward(acts.input, conv1_, nn::leaky_relu_backward(acts.a1, g2.d_input, kLeak), 2);
    accumulate(conv1_, g1.d_kernel, g1.d_bias);
    return g1.d_input;
}

void Discriminator::save(const std::filesystem::path& dir) const {
    save_params(dir, parameters(), {{"model", "discriminator"}});
}

Discriminator Discriminator::load(const std::filesystem::path& dir) {
    const auto index = read_index(dir, "discriminator");
    Discriminator d(0);
    load_params(dir, index, d.parameters());
    return d;
}

// ---- objectives ----

namespace {

double class_log_prob(const Tensor& logits, std::size_t row, std::size_t label) {
    const double* l = logits.raw() + row * kClasses;
    const double mx = *std::max_element(l, l + kClasses);
    double sum = 0.0;
    for (std::size_t j = 0; j < kClasses; ++j) sum += std::exp(l[j] - mx);
    return std::log(clamp_prob(std::exp(l[label] - mx) / sum));
}

// d(-mean log softmax_label)/d(logits) scaled by `scale`.
Tensor class_grad(const Tensor& logits, std::span<const std::size_t> labels, double scale) {
    Tensor d(logits.shape());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double* l = logits.raw() + i * kClasses;
        const double mx = *std::max_element(l, l + kClasses);
        double sum = 0.0;
        for (std::size_t j = 0; j < kClasses; ++j) sum += std::exp(l[j] - mx);
        for (std::size_t j = 0; j < kClasses; ++j)
            d[i * kClasses + j] = scale * (std::exp(l[j] - mx) / sum - (j == labels[i] ? 1.0 : 0.0));
    }
    return d;
}

}  // namespace

AcganLosses acgan_losses(const DiscOutput& real, std::span<const std::size_t> real_labels, const DiscOutput& fake,
                         std::span<const std::size_t> fake_labels) {
    const std::size_t nr = real.source.size(), nf = fake.source.size();
    if (nr == 0 || nf == 0) throw std::invalid_argument("acgan_losses: empty batch");
    check_labels(real_labels, nr, "acgan_losses");
    check_labels(fake_labels, nf, "acgan_losses");
    if (real.class_logits.size() != nr * kClasses || fake.class_logits.size() != nf * kClasses)
        throw std::invalid_argument("acgan_losses: class logits do not match batch");
    double sr = 0.0, sf = 0.0, cr = 0.0, cf = 0.0;
    for (std::size_t i = 0; i < nr; ++i) {
        sr += std::log(clamp_prob(real.source[i]));
        cr += class_log_prob(real.class_logits, i, real_labels[i]);
    }
    for (std::size_t i = 0; i < nf; ++i) {
        sf += std::log(clamp_prob(1.0 - fake.source[i]));
        cf += class_log_prob(fake.class_logits, i, fake_labels[i]);
    }
    const double mr = static_cast<double>(nr), mf = static_cast<double>(nf);
    return {sr / mr + sf / mf, cr / mr + cf / mf};
}

// ---- training ----

namespace {

Tensor normal_noise(Rng& rng, std::size_t n, std::size_t dim) {
    Tensor z({n, dim});
    for (auto& v : z.data()) v = rng.normal();
    return z;
}

bool finite(const AcganLosses& l) { return std::isfinite(l.source) && std::isfinite(l.cls); }

}  // namespace

GanResult train_gan(std::span<const LabeledImage> real, const GanConfig& config) {
    validate(config);
    if (real.size() < config.batch)
        throw std::invalid_argument("train_gan: need at least m = " + std::to_string(config.batch) + " real samples, got " +
                                    std::to_string(real.size()));
    const std::size_t pixels = kImageSize * kImageSize;
    for (const auto& s : real) {
        if (s.image.size() != pixels) throw std::invalid_argument("train_gan: real image is not 28x28x1");
        if (s.label >= kClasses) throw std::invalid_argument("train_gan: class out of range");
    }
    const Rng root(config.seed);
    GanResult result{Generator(config.noise_dim, root.split(1).next_u64()), Discriminator(root.split(2).next_u64()), {}, 0, 0};
    auto& gen = result.generator;
    auto& disc = result.discriminator;
    auto gen_params = gen.parameters();
    auto disc_params = disc.parameters();
    auto gen_state = nn::make_adam_state(gen_params, {config.generator_lr, 0.5, 0.999, 1e-8});
    auto disc_state = nn::make_adam_state(disc_params, {config.discriminator_lr, 0.5, 0.999, 1e-8});
    const std::size_t m = config.batch;

    auto fake_labels = [&](Rng& rng) {
        std::vector<std::size_t> labels(m);
        for (auto& l : labels) l = real[rng.below(real.size())].label;
        return labels;
    };

    for (std::size_t it = 0; it < config.iterations; ++it) {
        Rng rng = root.split(100 + it);
        AcganLosses last{};
        double real_score = 0.0, fake_score = 0.0;
        auto abort = [&](const std::string& what) {
            throw GanError("gan training diverged at iteration " + std::to_string(it) + ": " + what);
        };

        for (std::size_t step = 0; step < config.k; ++step) {
            Tensor x_real({m, kImageSize, kImageSize, 1});
            std::vector<std::size_t> real_labels(m);
            for (std::size_t i = 0; i < m; ++i) {
                const auto& s = real[rng.below(real.size())];
                std::copy_n(s.image.raw(), pixels, x_real.raw() + i * pixels);
                real_labels[i] = s.label;
            }
            const auto labels = fake_labels(rng);
            const Tensor x_fake = gen.forward(normal_noise(rng, m, config.noise_dim), labels);

            Discriminator::Activations ar, af;
            const auto out_real = disc.forward(x_real, ar);
            const auto out_fake = disc.forward(x_fake, af);
            last = acgan_losses(out_real, real_labels, out_fake, labels);
            if (!finite(last)) abort("non-finite discriminator loss");
            real_score = fake_score = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                real_score += out_real.source[i] / static_cast<double>(m);
                fake_score += out_fake.source[i] / static_cast<double>(m);
            }

            // Minimise -(L_S + L_C).
            const double inv = 1.0 / static_cast<double>(m);
            std::vector<double> ds_real(m), ds_fake(m);
            for (std::size_t i = 0; i < m; ++i) {
                ds_real[i] = inv * (out_real.source[i] - 1.0);
                ds_fake[i] = inv * out_fake.source[i];
            }
            disc.zero_grad();
            disc.backward(ar, ds_real, class_grad(out_real.class_logits, real_labels, inv));
            disc.backward(af, ds_fake, class_grad(out_fake.class_logits, labels, inv));
            try {
                nn::adam_step(disc_params, disc_state);
            } catch (const nn::NonFiniteGradient& e) {
                abort(e.what());
            }
            ++result.discriminator_updates;
        }

        for (std::size_t step = 0; step < config.k; ++step) {
            const auto labels = fake_labels(rng);
            Generator::Activations ag;
            const Tensor x_fake = gen.forward(normal_noise(rng, m, config.noise_dim), labels, ag);
            Discriminator::Activations af;
            const auto out_fake = disc.forward(x_fake, af);

            // Minimise -(L_C - L_S); only the fake terms depend on the generator.
            const double inv = 1.0 / static_cast<double>(m);
            std::vector<double> ds(m);
            for (std::size_t i = 0; i < m; ++i) {
                ds[i] = -inv * out_fake.source[i];
                if (!std::isfinite(out_fake.source[i])) abort("non-finite generator loss");
            }
            const Tensor d_images = disc.backward(af, ds, class_grad(out_fake.class_logits, labels, inv));
            gen.zero_grad();
            gen.backward(ag, d_images);
            try {
                nn::adam_step(gen_params, gen_state);
            } catch (const nn::NonFiniteGradient& e) {
                abort(e.what());
            }
            ++result.generator_updates;
        }
        result.trace.push_back({it, last.source, last.cls, real_score, fake_score});
    }
    disc.zero_grad();
    gen.zero_grad();
    return result;
}

std::vector<Tensor> generate_samples(const Generator& gen, std::size_t cls, std::size_t n, std::uint64_t seed) {
    if (cls >= kClasses) throw std::invalid_argument("generate_samples: class out of range");
    std::vector<Tensor> out;
    if (n == 0) return out;
    Rng rng(seed);
    const Tensor z = normal_noise(rng, n, gen.noise_dim());
    const std::vector<std::size_t> labels(n, cls);
    const Tensor images = gen.forward(z, labels);
    const std::size_t pixels = kImageSize * kImageSize;
    for (std::size_t i = 0; i < n; ++i) {
        Tensor t({kImageSize, kImageSize, 1});
        std::copy_n(images.raw() + i * pixels, pixels, t.raw());
        out.push_back(std::move(t));
    }
    return out;
}

std::vector<AugmentedSample> balance_dataset(std::vector<AugmentedSample> samples, const std::vector<deriv::Channel>& channels,
                                             const std::map<deriv::Channel, const Generator*>& generators,
                                             std::uint64_t seed) {
    std::array<std::size_t, kClasses> counts{};
    for (const auto& s : samples) {
        if (s.label >= kClasses) throw std::invalid_argument("balance_dataset: class out of range");
        if (s.channels.size() != channels.size())
            throw std::invalid_argument("balance_dataset: sample " + s.id + " channel count does not match");
        if (!s.fake) ++counts[s.label];
    }
    const std::size_t target = *std::max_element(counts.begin(), counts.end());
    bool needed = false;
    for (auto c : counts) needed |= c < target;
    if (!needed) return samples;
    for (auto ch : channels) {
        auto it = generators.find(ch);
        if (it == generators.end() || it->second == nullptr)
            throw GanError("balance_dataset: no generator for channel " + std::string(deriv::channel_name(ch)));
    }
    const Rng root(seed);
    for (std::size_t cls = 0; cls < kClasses; ++cls) {
        const std::size_t deficit = target - counts[cls];
        if (deficit == 0) continue;
        std::vector<std::vector<Tensor>> per_channel;
        for (std::size_t c = 0; c < channels.size(); ++c) {
            const std::uint64_t s = root.split(cls * 16 + static_cast<std::size_t>(channels[c])).next_u64();
            per_channel.push_back(generate_samples(*generators.at(channels[c]), cls, deficit, s));
        }
        for (std::size_t i = 0; i < deficit; ++i) {
            AugmentedSample fake;
            fake.id = "fake:c" + std::to_string(cls) + "_" + std::to_string(i);
            fake.label = cls;
            fake.fake = true;
            for (auto& imgs : per_channel) fake.channels.push_back(std::move(imgs[i]));
            samples.push_back(std::move(fake));
        }
    }
    return samples;
}

void save_samples(const std::filesystem::path& dir, const std::vector<AugmentedSample>& samples) {
    std::filesystem::create_directories(dir);
    std::ofstream index(dir / "samples.csv");
    if (!index) throw std::runtime_error("cannot write " + (dir / "samples.csv").string());
    index << "id,label,fake,files\n";
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        if (s.id.find_first_of(",\n") != std::string::npos)
            throw std::invalid_argument("save_samples: id '" + s.id + "' contains a separator");
        index << s.id << ',' << s.label << ',' << (s.fake ? 1 : 0) << ',';
        for (std::size_t c = 0; c < s.channels.size(); ++c) {
            const std::string file = "sample_" + std::to_string(i) + "_" + std::to_string(c) + ".mxtn";
            nn::save_tensor(dir / file, s.channels[c], nn::StorageType::f64);
            index << (c ? ";" : "") << file;
        }
        index << '\n';
    }
}

std::vector<AugmentedSample> load_samples(const std::filesystem::path& dir) {
    std::ifstream index(dir / "samples.csv");
    if (!index) throw std::runtime_error("cannot open " + (dir / "samples.csv").string());
    std::string line;
    std::getline(index, line);
    std::vector<AugmentedSample> out;
    std::size_t row = 1;
    while (std::getline(index, line)) {
        ++row;
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::stringstream ss(line);
        for (std::string col; std::getline(ss, col, ',');) cols.push_back(col);
        if (cols.size() == 3) cols.emplace_back();
        if (cols.size() != 4) throw std::runtime_error("samples.csv row " + std::to_string(row) + ": expected 4 columns");
        AugmentedSample s;
        s.id = cols[0];
        s.label = std::stoul(cols[1]);
        s.fake = cols[2] == "1";
        std::stringstream files(cols[3]);
        for (std::string f; std::getline(files, f, ';');) s.channels.push_back(nn::load_tensor(dir / f));
        out.push_back(std::move(s));
    }
    return out;
}

void dump_fakes(const std::filesystem::path& dir, const std::vector<Tensor>& images, std::size_t cls, std::uint64_t seed) {
    std::filesystem::create_directories(dir);
    const auto csv_path = dir / "samples.csv";
    const bool fresh = !std::filesystem::exists(csv_path);
    std::ofstream csv(csv_path, std::ios::app);
    if (!csv) throw std::runtime_error("cannot write " + csv_path.string());
    if (fresh) csv << "path,class,seed,z_index\n";
    for (std::size_t i = 0; i < images.size(); ++i) {
        Field f(kImageSize, kImageSize);
        for (std::size_t p = 0; p < f.values.size(); ++p) f.values[p] = 0.5 * (images[i][p] + 1.0);
        const std::string name = "fake_c" + std::to_string(cls) + "_s" + std::to_string(seed) + "_" + std::to_string(i) + ".pgm";
        img::save_pgm(img::GrayImage::from_field(f), dir / name);
        csv << name << ',' << cls << ',' << seed << ',' << i << '\n';
    }
}

void write_trace_csv(const std::vector<TraceEntry>& trace, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "iteration,l_s,l_c,mean_real_score,mean_fake_score\n";
    out.precision(17);
    for (const auto& t : trace)
        out << t.iteration << ',' << t.source_loss << ',' << t.class_loss << ',' << t.mean_real_score << ','
            << t.mean_fake_score << '\n';
}

}  // namespace mex::gan
