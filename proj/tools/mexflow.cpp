// mexflow: command-line front end. Every subcommand reads a JSON config and
// writes into a fresh output directory that also receives the config it ran.

#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "mexflow/apex.hpp"
#include "mexflow/config.hpp"
#include "mexflow/parallel.hpp"
#include "mexflow/rng.hpp"
#include "mexflow/tensor_io.hpp"

namespace fs = std::filesystem;
using mex::config::ConfigError;
using mex::config::Json;

namespace {

struct Options {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> jobs;
    bool verbose = false;
};

struct Context {
    Json config;
    fs::path base;  // directory of the config file
    fs::path out;   // staging directory
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> jobs;
    bool verbose = false;

    void log(const std::string& msg) const {
        if (verbose) std::cerr << "[mexflow] " << msg << '\n';
    }
    fs::path resolve(const std::string& p) const { return fs::path(p).is_absolute() ? fs::path(p) : base / p; }
};

// Non-zero when some requested step failed but outputs are still meaningful.
using Command = std::function<int(const Context&)>;

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

void write_json(const fs::path& path, const Json& j) { open_out(path) << j.dump(2) << '\n'; }

std::optional<std::uint64_t> env_seed() {
    const char* v = std::getenv("MEXFLOW_SEED");
    if (!v || !*v) return std::nullopt;
    try {
        std::size_t used = 0;
        const auto s = std::stoull(v, &used);
        if (used != std::strlen(v)) throw std::invalid_argument(v);
        return s;
    } catch (const std::exception&) {
        throw ConfigError(std::string("MEXFLOW_SEED is not an unsigned integer: ") + v);
    }
}

const Json& section(const Context& ctx, const char* key) {
    static const Json empty = Json::object();
    return ctx.config.contains(key) ? ctx.config.at(key) : empty;
}

// ---- corpus ----

struct Corpus {
    std::vector<mex::img::SampleRecord> records;
    std::optional<mex::img::SyntheticTruth> truth;
    std::vector<std::vector<mex::img::GrayImage>> memory;  // synthetic frames

    mex::eval::FrameSource frames() const {
        return [this](std::size_t i) { return memory.empty() ? mex::img::load_frames(records.at(i)) : memory.at(i); };
    }
    const mex::img::SyntheticTruth* truth_ptr() const { return truth ? &*truth : nullptr; }
};

mex::img::SyntheticSpec synthetic_spec(const Context& ctx) {
    auto spec = mex::config::synthetic_spec_from(section(ctx, "synthetic"));
    if (ctx.seed) spec.seed = *ctx.seed;
    return spec;
}

Corpus load_corpus(const Context& ctx) {
    Corpus c;
    if (ctx.config.contains("manifest")) {
        const auto path = ctx.resolve(ctx.config.at("manifest").get<std::string>());
        ctx.log("loading manifest " + path.string());
        c.records = mex::img::load_manifest(path);
        if (ctx.config.contains("truth")) c.truth = mex::img::load_truth(ctx.resolve(ctx.config.at("truth").get<std::string>()));
    } else if (ctx.config.contains("synthetic")) {
        ctx.log("generating synthetic corpus");
        auto corpus = mex::img::generate_synthetic_corpus(synthetic_spec(ctx));
        c.records = std::move(corpus.records);
        c.truth = std::move(corpus.truth);
        c.memory = std::move(corpus.frames);
    } else {
        throw ConfigError("config needs a 'manifest' path or a 'synthetic' section");
    }
    return c;
}

mex::eval::ExperimentConfig experiment(const Context& ctx) {
    auto cfg = mex::config::experiment_config_from(section(ctx, "experiment"));
    if (ctx.seed) {
        cfg.seed = *ctx.seed;
        cfg.train.seed = *ctx.seed;
        cfg.svm.seed = *ctx.seed;
        cfg.gan.seed = *ctx.seed;
    }
    if (ctx.jobs) cfg.jobs = *ctx.jobs;
    return cfg;
}

mex::eval::PreparedSet prepare(const Context& ctx, const Corpus& corpus, const mex::eval::ExperimentConfig& cfg) {
    ctx.log("computing " + cfg.flow.method + " flow for " + std::to_string(corpus.records.size()) + " videos");
    auto prepared = mex::eval::prepare_samples(corpus.records, corpus.frames(), cfg, corpus.truth_ptr());
    for (const auto& f : prepared.failures) std::cerr << "mexflow: sample failed: " << f << '\n';
    return prepared;
}

void write_failures(const Context& ctx, const std::vector<std::string>& failures) {
    auto out = open_out(ctx.out / "failures.txt");
    for (const auto& f : failures) out << f << '\n';
}

mex::cnn::Sample cnn_sample(const mex::eval::PreparedSample& s, const mex::cnn::StreamSpec& spec) {
    mex::cnn::Sample out;
    for (auto c : spec.channels) out.inputs.push_back(mex::img::normalize_to_input(mex::deriv::select(s.channels, c)));
    out.label = s.label;
    return out;
}

// ---- subcommands ----

int cmd_generate(const Context& ctx) {
    const auto spec = synthetic_spec(ctx);
    ctx.log("generating " + std::to_string(spec.subjects * spec.videos_per_subject) + " videos");
    mex::img::write_corpus(mex::img::generate_synthetic_corpus(spec), ctx.out);
    return 0;
}

int cmd_flow(const Context& ctx) {
    const auto corpus = load_corpus(ctx);
    const auto cfg = experiment(ctx);
    const auto prepared = prepare(ctx, corpus, cfg);
    fs::create_directories(ctx.out / "flows");
    auto apex = open_out(ctx.out / "apex.csv");
    apex << "video_id,subject_id,label,apex\n";
    for (const auto& s : prepared.samples) {
        mex::FlowField flow(s.channels.p.width, s.channels.p.height);
        flow.p = s.channels.p.values;
        flow.q = s.channels.q.values;
        mex::flow::save_flow(flow, ctx.out / "flows" / (s.id + ".mefl"));
        const auto dir = ctx.out / "channels" / s.id;
        fs::create_directories(dir);
        for (auto c : mex::deriv::all_channels())
            mex::flow::save_channel(mex::deriv::select(s.channels, c), dir / (std::string(mex::deriv::channel_name(c)) + ".mech"));
        apex << s.id << ',' << s.subject << ',' << s.label << ',' << s.apex << '\n';
    }
    write_failures(ctx, prepared.failures);
    return prepared.failures.empty() ? 0 : 1;
}

int cmd_spot(const Context& ctx) {
    const auto corpus = load_corpus(ctx);
    const auto cfg = experiment(ctx);
    const auto frames = corpus.frames();
    const std::size_t n = corpus.records.size();
    std::vector<mex::apex::MotionSignal> signals(n);
    std::vector<mex::apex::ApexResult> results(n);
    std::vector<std::string> errors(n);
    ctx.log("spotting apex frames in " + std::to_string(n) + " videos");
    mex::parallel_for(n, cfg.jobs, [&](std::size_t i) {
        try {
            const auto video = frames(i);
            signals[i] = mex::apex::motion_signal(video, corpus.records[i].onset_index, cfg.flow);
            results[i] = mex::apex::spot_apex_dc(signals[i]);
        } catch (const std::exception& e) {
            errors[i] = corpus.records[i].video_id + ": " + e.what();
        }
    });
    auto apex = open_out(ctx.out / "apex.csv");
    apex << "video_id,onset,spotted,argmax,manifest_apex,truth_apex\n";
    auto sig = open_out(ctx.out / "signals.csv");
    sig << "video_id,frame,motion\n";
    sig.precision(17);
    std::vector<std::string> failures;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& r = corpus.records[i];
        if (!errors[i].empty()) {
            failures.push_back(errors[i]);
            continue;
        }
        apex << r.video_id << ',' << r.onset_index << ',' << results[i].apex_index << ','
             << mex::apex::spot_apex_bruteforce(signals[i]) << ',' << (r.apex_index ? std::to_string(*r.apex_index) : "") << ',';
        if (corpus.truth) apex << corpus.truth->find(r.video_id).apex_index;
        apex << '\n';
        for (std::size_t t = 0; t < signals[i].size(); ++t) sig << r.video_id << ',' << t << ',' << signals[i].values[t] << '\n';
    }
    write_failures(ctx, failures);
    return failures.empty() ? 0 : 1;
}

int cmd_extract(const Context& ctx) {
    const auto corpus = load_corpus(ctx);
    const auto cfg = experiment(ctx);
    const auto prepared = prepare(ctx, corpus, cfg);
    auto out = open_out(ctx.out / "features.csv");
    const std::size_t dim = cfg.biwoof.blocks_per_side * cfg.biwoof.blocks_per_side * cfg.biwoof.orientation_bins;
    out << "video_id,label";
    for (std::size_t k = 0; k < dim; ++k) out << ",f" << k;
    out << '\n';
    out.precision(17);
    for (const auto& s : prepared.samples) {
        out << s.id << ',' << s.label;
        for (double v : mex::biwoof::extract_biwoof(s.channels, cfg.biwoof).values) out << ',' << v;
        out << '\n';
    }
    write_failures(ctx, prepared.failures);
    return prepared.failures.empty() ? 0 : 1;
}

int cmd_train_svm(const Context& ctx) {
    const auto corpus = load_corpus(ctx);
    const auto cfg = experiment(ctx);
    const auto prepared = prepare(ctx, corpus, cfg);
    std::vector<std::vector<double>> features;
    std::vector<std::size_t> labels;
    for (const auto& s : prepared.samples) {
        features.push_back(mex::biwoof::extract_biwoof(s.channels, cfg.biwoof).values);
        labels.push_back(s.label);
    }
    ctx.log("training SVM on " + std::to_string(features.size()) + " samples");
    const auto model = mex::biwoof::train_svm(features, labels, cfg.svm);
    mex::biwoof::save_svm(model, ctx.out / "model.msvm");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < features.size(); ++i) hits += mex::biwoof::predict_svm(model, features[i]).label == labels[i];
    write_json(ctx.out / "summary.json",
               {{"samples", features.size()},
                {"dim", model.dim},
                {"train_accuracy", static_cast<double>(hits) / static_cast<double>(features.size())}});
    write_failures(ctx, prepared.failures);
    return prepared.failures.empty() ? 0 : 1;
}

int cmd_train_cnn(const Context& ctx) {
    const auto corpus = load_corpus(ctx);
    const auto cfg = experiment(ctx);
    const auto prepared = prepare(ctx, corpus, cfg);
    std::vector<mex::cnn::Sample> data;
    for (const auto& s : prepared.samples) data.push_back(cnn_sample(s, cfg.streams));
    mex::cnn::OffApexNet net(cfg.streams, cfg.train.seed);
    ctx.log("training network on " + std::to_string(data.size()) + " samples for " + std::to_string(cfg.train.epochs) +
            " epochs");
    const auto trace = mex::cnn::train(net, data, cfg.train, [&](std::size_t epoch, const mex::cnn::OffApexNet& n) {
        ctx.log("checkpoint at epoch " + std::to_string(epoch));
        n.save(ctx.out / "checkpoints" / ("epoch_" + std::to_string(epoch)));
    });
    net.save(ctx.out / "model");
    mex::cnn::write_trace_csv(trace, ctx.out / "trace.csv");
    write_failures(ctx, prepared.failures);
    return prepared.failures.empty() ? 0 : 1;
}

int cmd_train_gan(const Context& ctx) {
    const auto corpus = load_corpus(ctx);
    const auto cfg = experiment(ctx);
    const auto prepared = prepare(ctx, corpus, cfg);
    const std::size_t per_class = ctx.config.value("samples_per_class", std::size_t{4});
    for (std::size_t c = 0; c < cfg.streams.channels.size(); ++c) {
        const auto channel = cfg.streams.channels[c];
        const std::string name(mex::deriv::channel_name(channel));
        std::vector<mex::gan::LabeledImage> images;
        for (const auto& s : prepared.samples)
            images.push_back({mex::img::normalize_to_input(mex::deriv::select(s.channels, channel)), s.label});
        auto gcfg = cfg.gan;
        gcfg.seed = mex::Rng(cfg.gan.seed).split(c).next_u64();
        ctx.log("training GAN for channel " + name);
        const auto result = mex::gan::train_gan(images, gcfg);
        const auto dir = ctx.out / "gan" / name;
        result.generator.save(dir / "generator");
        result.discriminator.save(dir / "discriminator");
        mex::gan::write_trace_csv(result.trace, dir / "trace.csv");
        for (std::size_t cls = 0; cls < mex::gan::kClasses; ++cls) {
            const std::uint64_t seed = mex::Rng(gcfg.seed).split(100 + cls).next_u64();
            mex::gan::dump_fakes(dir / "fakes", mex::gan::generate_samples(result.generator, cls, per_class, seed), cls, seed);
        }
    }
    write_failures(ctx, prepared.failures);
    return prepared.failures.empty() ? 0 : 1;
}

int cmd_evaluate(const Context& ctx) {
    const auto corpus = load_corpus(ctx);
    const auto cfg = experiment(ctx);
    const auto prepared = prepare(ctx, corpus, cfg);
    ctx.log("running leave-one-subject-out experiment (" + std::string(mex::eval::extractor_name(cfg.extractor)) + ")");
    const auto report = mex::eval::run_experiment(prepared, cfg);
    mex::eval::emit_report(report, ctx.out);
    write_json(ctx.out / "report.json", mex::config::to_json(report));
    bool ok = report.ok();
    if (ctx.config.contains("sweep")) {
        const auto& sw = ctx.config.at("sweep");
        mex::config::expect_keys(sw, {"methods", "blocks"}, "sweep");
        const auto methods = sw.value("methods", std::vector<std::string>{"horn_schunck", "lucas_kanade", "tvl1"});
        const auto blocks = sw.value("blocks", std::vector<std::size_t>{5, 6, 7, 8, 9, 10});
        ctx.log("running block-size sweep");
        const auto rows = mex::eval::run_sweep(corpus.records, corpus.frames(), cfg, methods, blocks, corpus.truth_ptr());
        mex::eval::write_sweep_csv(rows, ctx.out / "sweep.csv");
    }
    const auto& h = report.headline();
    std::cout << "accuracy " << h.metrics.accuracy << " f1 " << h.metrics.macro_f1 << " folds " << report.folds.size()
              << " failures " << report.failures.size() << '\n';
    for (const auto& f : report.failures) std::cerr << "mexflow: " << f << '\n';
    for (const auto& a : report.audit_messages) std::cerr << "mexflow: audit: " << a << '\n';
    return ok ? 0 : 1;
}

int cmd_report(const Context& ctx) {
    const auto& rs = section(ctx, "report");
    mex::config::expect_keys(rs, {"input"}, "report");
    if (!rs.contains("input")) throw ConfigError("report: 'input' (path to report.json) is required");
    const auto path = ctx.resolve(rs.at("input").get<std::string>());
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    const auto report = mex::config::report_from(Json::parse(in));
    mex::eval::emit_report(report, ctx.out);
    auto md = open_out(ctx.out / "summary.md");
    md << "| epoch | accuracy | F1 | subject-mean accuracy |\n|---|---|---|---|\n";
    for (const auto& c : report.checkpoints) {
        char line[160];
        std::snprintf(line, sizeof line, "| %zu | %.4f | %.4f | %.4f |\n", c.epoch, c.metrics.accuracy, c.metrics.macro_f1,
                      c.subject_mean_accuracy);
        md << line;
    }
    for (const auto& s : report.scatter) {
        char line[120];
        std::snprintf(line, sizeof line, "\nsilhouette at epoch %zu: %.4f\n", s.epoch, s.silhouette);
        md << line;
    }
    return report.ok() ? 0 : 1;
}

// ---- driver ----

int run(const std::string& name, const Options& opt, const Command& command) {
    const fs::path out = opt.out;
    if (fs::exists(out) && (!fs::is_directory(out) || !fs::is_empty(out))) {
        std::cerr << "mexflow " << name << ": output directory " << out << " exists and is not empty\n";
        return 2;
    }
    Context ctx;
    try {
        std::ifstream in(opt.config);
        if (!in) throw ConfigError("cannot open config " + opt.config);
        try {
            ctx.config = Json::parse(in);
        } catch (const nlohmann::json::parse_error& e) {
            throw ConfigError(opt.config + ": " + e.what());
        }
        mex::config::expect_keys(ctx.config,
                                 {"seed", "synthetic", "manifest", "truth", "experiment", "sweep", "report", "samples_per_class"},
                                 "config");
        ctx.base = fs::absolute(opt.config).parent_path();
        if (opt.seed)
            ctx.seed = opt.seed;
        else if (ctx.config.contains("seed"))
            ctx.seed = ctx.config.at("seed").get<std::uint64_t>();
        else
            ctx.seed = env_seed();
        if (ctx.seed) ctx.config["seed"] = *ctx.seed;
        ctx.jobs = opt.jobs;
        ctx.verbose = opt.verbose;
    } catch (const std::exception& e) {
        std::cerr << "mexflow " << name << ": " << e.what() << "\nrun 'mexflow " << name << " --help' for usage\n";
        return 2;
    }

    const fs::path stage = out.parent_path() / ("." + out.filename().string() + ".partial");
    std::error_code ec;
    fs::remove_all(stage, ec);
    try {
        fs::create_directories(stage);
        ctx.out = stage;
        write_json(stage / "config.json", ctx.config);
        const int code = command(ctx);
        if (fs::exists(out)) fs::remove(out);
        fs::rename(stage, out);
        return code;
    } catch (const ConfigError& e) {
        fs::remove_all(stage, ec);
        std::cerr << "mexflow " << name << ": invalid config: " << e.what() << "\nrun 'mexflow " << name
                  << " --help' for usage\n";
        return 2;
    } catch (const std::exception& e) {
        fs::remove_all(stage, ec);
        std::cerr << "mexflow " << name << ": " << e.what() << '\n';
        return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Micro-expression recognition pipeline: flow, apex spotting, features, networks and evaluation"};
    app.require_subcommand(1);

    const std::vector<std::tuple<std::string, std::string, Command>> commands = {
        {"generate", "write a synthetic corpus (manifest, PGM frames, truth)", cmd_generate},
        {"flow", "onset-to-apex flow and derived channels per video", cmd_flow},
        {"spot", "apex spotting; writes apex.csv and signals.csv", cmd_spot},
        {"extract", "Bi-WOOF feature CSV", cmd_extract},
        {"train-svm", "train the linear SVM on every sample", cmd_train_svm},
        {"train-cnn", "train the flow network on every sample", cmd_train_cnn},
        {"train-gan", "train one conditional GAN per stream channel", cmd_train_gan},
        {"evaluate", "leave-one-subject-out experiment and report", cmd_evaluate},
        {"report", "re-render tables from a saved report.json", cmd_report},
    };

    Options opt;
    std::uint64_t seed = 0;
    std::size_t jobs = 1;
    std::string selected;
    Command command;
    for (const auto& [name, help, fn] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("-c,--config", opt.config, "JSON config file")->required()->check(CLI::ExistingFile);
        sub->add_option("-o,--out", opt.out, "output directory (created; must be absent or empty)")->required();
        sub->add_option("--seed", seed, "seed override (beats the config and MEXFLOW_SEED)");
        sub->add_option("-j,--jobs", jobs, "parallel workers")->check(CLI::PositiveNumber);
        sub->add_flag("-v,--verbose", opt.verbose, "progress on stderr");
        sub->callback([&, name = name, fn = fn] {
            selected = name;
            command = fn;
        });
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }
    for (auto* sub : app.get_subcommands()) {
        if (sub->count("--seed")) opt.seed = seed;
        if (sub->count("--jobs")) opt.jobs = jobs;
    }
    return run(selected, opt, command);
}
