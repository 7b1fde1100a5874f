// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <sys/wait.h>
#include <thread>

#include "mexflow/apex.hpp"
#include "mexflow/evaluation.hpp"
#include "mexflow/gradcheck.hpp"
#include "mexflow/parallel.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace mex;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        pass = pass && ok;
        if (!detail.empty()) detail += "; ";
        detail += what + (ok ? "" : " [x]");
    }
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::size_t g_jobs = 1;

// ---- 1: flow ----

Outcome flow_soundness() {
    Outcome o;
    constexpr std::size_t size = 64, border = 6;
    std::map<std::string, std::vector<double>> errors;
    Rng rng(2024);
    double identical = 0.0;
    for (int pair = 0; pair < 50; ++pair) {
        const testing::BlobTexture tex(size, 500 + static_cast<std::uint64_t>(pair));
        const double mag = rng.uniform(0, 2), ang = rng.uniform(0, 2 * M_PI);
        const double u = mag * std::cos(ang), v = mag * std::sin(ang);
        const auto a = tex.render(size, size, 0, 0), b = tex.render(size, size, u, v);
        auto collect = [&](const std::string& name, const FlowField& f, const std::vector<std::uint8_t>* skip) {
            for (std::size_t y = border; y + border < size; ++y)
                for (std::size_t x = border; x + border < size; ++x) {
                    const std::size_t i = y * size + x;
                    if (skip && (*skip)[i]) continue;
                    errors[name].push_back(std::hypot(f.p[i] - u, f.q[i] - v));
                }
        };
        flow::FlowConfig cfg;
        cfg.method = "horn_schunck";
        collect("HS", flow::horn_schunck(a, b, cfg), nullptr);
        cfg.method = "tvl1";
        collect("TV-L1", flow::tvl1(a, b, cfg), nullptr);
        cfg.method = "lucas_kanade";
        const auto lk = flow::lucas_kanade(a, b, cfg);
        collect("LK", lk.flow, &lk.ill_conditioned);
        if (pair < 5)
            for (const std::string m : {"horn_schunck", "lucas_kanade", "tvl1"}) {
                cfg.method = m;
                const auto z = flow::estimate_flow(a, a, cfg);
                for (std::size_t i = 0; i < z.size(); ++i) identical = std::max(identical, std::hypot(z.p[i], z.q[i]));
            }
    }
    for (const auto& [name, e] : errors) {
        const double med = testing::median(e);
        o.require(med < 0.2, name + " median EPE " + fmt("%.4f", med));
    }
    o.require(identical < 1e-3, "identical-frame sup " + fmt("%.2e", identical));
    return o;
}

// ---- 2: strain ----

Outcome strain_exactness() {
    Outcome o;
    Rng rng(77);
    double worst = 0.0, rigid = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t w = 8 + rng.below(40), h = 8 + rng.below(40);
        double a[6];
        for (auto& v : a) v = rng.uniform(-1, 1);
        FlowField f(w, h), t(w, h);
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) {
                const double xd = static_cast<double>(x), yd = static_cast<double>(y);
                f.p[y * w + x] = a[0] * xd + a[1] * yd + a[2];
                f.q[y * w + x] = a[3] * xd + a[4] * yd + a[5];
                t.p[y * w + x] = a[2];
                t.q[y * w + x] = a[5];
            }
        const auto s = deriv::compute_strain(f);
        const double shear = 0.5 * (a[1] + a[3]);
        const double mag = std::sqrt(a[0] * a[0] + a[4] * a[4] + 2 * shear * shear);
        for (std::size_t y = 1; y + 1 < h; ++y)
            for (std::size_t x = 1; x + 1 < w; ++x) {
                worst = std::max({worst, std::abs(s.eps_xx(x, y) - a[0]), std::abs(s.eps_yy(x, y) - a[4]),
                                  std::abs(s.eps_xy(x, y) - shear), std::abs(s.eps_yx(x, y) - shear),
                                  std::abs(s.eps_mag(x, y) - mag)});
            }
        const auto r = deriv::compute_strain(t);
        for (const auto* field : {&r.eps_mag, &r.eps_xx, &r.eps_yy, &r.eps_xy, &r.eps_yx})
            for (double v : field->values) rigid = std::max(rigid, std::abs(v));
    }
    o.require(worst < 1e-10, "affine max error " + fmt("%.2e", worst));
    o.require(rigid == 0.0, "translation strain " + fmt("%.1e", rigid));
    return o;
}

// ---- 3: apex ----

Outcome apex_recovery() {
    Outcome o;
    img::SyntheticSpec spec;
    spec.subjects = 20;
    spec.videos_per_subject = 3;
    spec.motion_amplitude = 1.0;
    spec.noise_sigma = 0.01;
    spec.seed = 31;
    const auto corpus = img::generate_synthetic_corpus(spec);
    flow::FlowConfig cfg;
    cfg.method = "tvl1";
    std::vector<int> within(corpus.records.size(), 0);
    parallel_for(corpus.records.size(), g_jobs, [&](std::size_t i) {
        const auto signal = apex::motion_signal(corpus.frames[i], corpus.records[i].onset_index, cfg);
        const auto spotted = apex::spot_apex_dc(signal).apex_index;
        const auto truth = corpus.truth.find(corpus.records[i].video_id).apex_index;
        within[i] = std::abs(static_cast<long>(spotted) - static_cast<long>(truth)) <= 2;
    });
    std::size_t hits = 0;
    for (int w : within) hits += static_cast<std::size_t>(w);
    const double frac = static_cast<double>(hits) / static_cast<double>(within.size());
    o.require(frac >= 0.9, std::to_string(hits) + "/" + std::to_string(within.size()) + " within 2 frames");

    Rng rng(9);
    std::size_t agree = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 3 + rng.below(200), peak = 1 + rng.below(n - 2);
        apex::MotionSignal s;
        double v = 0;
        for (std::size_t t = 0; t < n; ++t) {
            s.values.push_back(v);
            v += (t < peak ? 1 : -1) * rng.uniform(0.01, 1.0);
        }
        agree += apex::spot_apex_dc(s).apex_index == apex::spot_apex_bruteforce(s);
    }
    o.require(agree == 1000, std::to_string(agree) + "/1000 unimodal signals match argmax");
    return o;
}

// ---- 4: split ----

Outcome split_conformance() {
    Outcome o;
    const std::size_t mid = apex::split_point({0, 39});
    o.require(mid == 19, "40-frame split [0," + std::to_string(mid) + "]/[" + std::to_string(mid + 1) + ",39]");
    return o;
}

// ---- 5: network ----

std::vector<cnn::Sample> toy_set(std::size_t per_class, std::size_t streams, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<cnn::Sample> out;
    for (std::size_t i = 0; i < per_class * 3; ++i) {
        cnn::Sample s;
        s.label = i % 3;
        for (std::size_t k = 0; k < streams; ++k) s.inputs.push_back(testing::class_image(s.label, rng));
        out.push_back(std::move(s));
    }
    return out;
}

Outcome network_checks() {
    Outcome o;
    using deriv::Channel;
    const cnn::StreamSpec pq{{Channel::p, Channel::q}, cnn::Fusion::concat};
    const cnn::StreamSpec three{{Channel::p, Channel::q, Channel::eps_mag}, cnn::Fusion::multiply};
    const std::vector<std::pair<std::string, nn::Shape>> expect{
        {"conv1", {1, 28, 28, 6}}, {"pool1", {1, 14, 14, 6}}, {"conv2", {1, 14, 14, 16}}, {"pool2", {1, 7, 7, 16}},
        {"fused", {1, 1568}},      {"fc1", {1, 1024}},       {"fc2", {1, 1024}},         {"output", {1, 3}}};
    o.require(cnn::OffApexNet(pq, 1).shape_chain() == expect, "shape chain");
    o.require(cnn::OffApexNet(three, 1).shape_chain()[4].second == nn::Shape{1, 784}, "multiply head 784");

    double worst = 0.0;
    for (const auto& spec : {pq, three}) {
        cnn::OffApexNet net(spec, 10);
        Rng rng(11);
        for (auto* p : net.parameters())
            if (p->name.ends_with(".b"))
                for (auto& v : p->value.data()) v = rng.uniform(0.05, 0.2);
        const auto data = toy_set(1, spec.streams(), 12);
        std::vector<const cnn::SampleInputs*> ptrs;
        std::vector<std::size_t> labels;
        for (const auto& s : data) {
            ptrs.push_back(&s.inputs);
            labels.push_back(s.label);
        }
        const auto batch = cnn::stack_batch(ptrs, spec.streams());
        auto params = net.parameters();
        auto loss = [&] {
            const auto out = net.forward(batch);
            double total = 0;
            for (std::size_t i = 0; i < labels.size(); ++i)
                total += nn::softmax_xent(std::span<const double>(out.logits.raw() + 3 * i, 3), labels[i]).loss;
            return total / static_cast<double>(labels.size());
        };
        auto grads = [&] {
            net.zero_grad();
            net.forward_backward(batch, labels);
        };
        worst = std::max(worst, nn::grad_check(params, loss, grads, 1e-5, 400, 13, 1e-6));
    }
    o.require(worst < 1e-4, "gradient check " + fmt("%.2e", worst));

    const auto data = toy_set(10, 2, 21);
    cnn::OffApexNet net(pq, 22);
    cnn::TrainConfig tc;
    tc.epochs = 500;
    tc.batch_size = 32;
    for (std::size_t e = 1; e <= tc.epochs; ++e) tc.checkpoints.push_back(e);
    std::size_t reached = 0;
    cnn::train(net, data, tc, [&](std::size_t e, const cnn::OffApexNet& n) {
        if (reached) return;
        const auto pred = cnn::predict_batch(n, data);
        std::size_t ok = 0;
        for (std::size_t i = 0; i < data.size(); ++i) ok += pred[i] == data[i].label;
        if (ok == data.size()) reached = e;
    });
    o.require(reached > 0, reached ? "overfit at epoch " + std::to_string(reached) : "no overfit in 500 epochs");
    return o;
}

// ---- 6: end to end ----

img::SyntheticSpec twelve_subjects() {
    img::SyntheticSpec spec;
    spec.subjects = 12;
    spec.motion_amplitude = 1.0;
    spec.noise_sigma = 0.01;
    spec.seed = 1;
    return spec;
}

std::size_t g_epochs = 100;
std::vector<std::string> g_audits;

Outcome end_to_end() {
    Outcome o;
    const auto corpus = img::generate_synthetic_corpus(twelve_subjects());
    eval::ExperimentConfig cfg;
    cfg.apex_source = eval::ApexSource::spotted;
    cfg.flow.method = "tvl1";
    cfg.extractor = eval::Extractor::cnn;
    cfg.streams = {{deriv::Channel::p, deriv::Channel::q, deriv::Channel::eps_mag}, cnn::Fusion::multiply};
    cfg.train.epochs = g_epochs;
    cfg.jobs = g_jobs;
    const auto frames = [&](std::size_t i) { return corpus.frames[i]; };
    const auto prepared = eval::prepare_samples(corpus.records, frames, cfg, &corpus.truth);
    o.require(prepared.failures.empty(), std::to_string(prepared.samples.size()) + " samples prepared");
    const auto cnn_report = eval::run_experiment(prepared, cfg);
    const auto& m = cnn_report.headline().metrics;
    o.require(m.accuracy >= 0.8, "3-stream CNN accuracy " + fmt("%.3f", m.accuracy));
    o.require(m.macro_f1 >= 0.75, "F1 " + fmt("%.3f", m.macro_f1));
    for (const auto& a : cnn_report.audit_messages) g_audits.push_back(a);

    cfg.extractor = eval::Extractor::biwoof_svm;
    cfg.biwoof.blocks_per_side = 5;
    const auto svm_report = eval::run_experiment(prepared, cfg);
    o.require(svm_report.headline().metrics.accuracy >= 0.7,
              "Bi-WOOF B=5 accuracy " + fmt("%.3f", svm_report.headline().metrics.accuracy));
    for (const auto& a : svm_report.audit_messages) g_audits.push_back(a);
    return o;
}

// ---- 7: metrics ----

Outcome metric_oracle() {
    Outcome o;
    Rng rng(123);
    std::size_t exact = 0;
    for (int trial = 0; trial < 200; ++trial) {
        eval::ConfusionMatrix cm;
        for (auto& row : cm.counts)
            for (auto& v : row) v = rng.below(20);
        if (cm.total() == 0) cm.counts[0][0] = 1;
        const auto m = eval::compute_metrics(cm);
        // One-vs-rest recount from the flat list of (truth, predicted) pairs.
        std::vector<std::pair<std::size_t, std::size_t>> pairs;
        for (std::size_t t = 0; t < 3; ++t)
            for (std::size_t p = 0; p < 3; ++p)
                for (std::size_t k = 0; k < cm.counts[t][p]; ++k) pairs.emplace_back(t, p);
        bool same = true;
        double macro = 0, correct = 0;
        for (std::size_t c = 0; c < 3; ++c) {
            std::size_t tp = 0, fp = 0, fn = 0;
            for (const auto& [t, p] : pairs) {
                tp += t == c && p == c;
                fp += t != c && p == c;
                fn += t == c && p != c;
            }
            correct += static_cast<double>(tp);
            const double prec = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
            const double rec = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
            const double f1 = prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
            const auto& pc = m.per_class[c];
            same = same && pc.tp == tp && pc.fp == fp && pc.fn == fn && pc.tn == pairs.size() - tp - fp - fn &&
                   pc.precision == prec && pc.recall == rec && pc.f1 == f1;
            macro += f1;
        }
        same = same && m.macro_f1 == macro / 3 && m.accuracy == correct / static_cast<double>(pairs.size());
        exact += same;
    }
    o.require(exact == 200, std::to_string(exact) + "/200 matrices match the recount exactly");
    return o;
}

// ---- 8: adversarial ----

Outcome gan_behaviour() {
    Outcome o;
    gan::DiscOutput d;
    d.source_logit = {0, 0, 0};
    d.source = {0.5, 0.5, 0.5};
    d.class_logits = nn::Tensor({3, 3});
    const std::vector<std::size_t> labels{0, 1, 2};
    const auto l = gan::acgan_losses(d, labels, d, labels);
    const double es = std::abs(l.source - 2 * std::log(0.5)), ec = std::abs(l.cls - 2 * std::log(1.0 / 3.0));
    o.require(es < 1e-9 && ec < 1e-9, "closed forms " + fmt("%.1e", std::max(es, ec)));

    Rng rng(21);
    const nn::Tensor target = testing::class_image(1, rng, 0.05);
    std::vector<gan::LabeledImage> data(8, gan::LabeledImage{target, 1});
    gan::GanConfig gc;
    gc.noise_dim = 16;
    gc.batch = 8;
    gc.generator_lr = gc.discriminator_lr = 1e-3;
    gc.seed = 4;
    auto distance = [&](const gan::Generator& g) {
        double total = 0;
        for (const auto& img : gan::generate_samples(g, 1, 16, 99))
            for (std::size_t i = 0; i < img.size(); ++i) total += std::abs(img[i] - target[i]);
        return total / (16.0 * 784.0);
    };
    std::vector<double> dist;
    const Rng root(gc.seed);
    dist.push_back(distance(gan::Generator(gc.noise_dim, root.split(1).next_u64())));
    for (std::size_t iters : {100, 200, 300}) {
        gc.iterations = iters;
        dist.push_back(distance(gan::train_gan(data, gc).generator));
    }
    bool decreasing = true;
    for (std::size_t i = 1; i < dist.size(); ++i) decreasing = decreasing && dist[i] < dist[i - 1];
    o.require(decreasing, "memorization distance " + fmt("%.3f", dist.front()) + " -> " + fmt("%.3f", dist.back()));

    double lo = 0, hi = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        gan::Generator g(16, seed);
        Rng zr(seed);
        nn::Tensor z({4, 16});
        for (auto& v : z.data()) v = 30.0 * zr.normal();
        for (double v : g.forward(z, std::vector<std::size_t>{0, 1, 2, 0}).data()) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    o.require(lo >= -1.0 && hi <= 1.0, "outputs in [" + fmt("%.3f", lo) + ", " + fmt("%.3f", hi) + "]");

    img::SyntheticSpec spec;
    spec.subjects = 4;
    spec.videos_per_subject = 4;
    spec.frames_per_video = 16;
    spec.image_size = 48;
    spec.seed = 3;
    const auto corpus = img::generate_synthetic_corpus(spec);
    eval::ExperimentConfig cfg;
    cfg.flow.method = "tvl1";
    cfg.extractor = eval::Extractor::cnn;
    cfg.train.epochs = 10;
    cfg.augment = true;
    cfg.gan.iterations = 20;
    cfg.gan.batch = 8;
    cfg.jobs = g_jobs;
    const auto frames = [&](std::size_t i) { return corpus.frames[i]; };
    const auto prepared = eval::prepare_samples(corpus.records, frames, cfg, &corpus.truth);
    std::size_t generated = 0;
    for (const auto extractor : {eval::Extractor::cnn, eval::Extractor::biwoof_svm}) {
        cfg.extractor = extractor;
        const auto report = eval::run_experiment(prepared, cfg);
        for (const auto& f : report.folds) generated += f.generated;
        for (const auto& a : report.audit_messages) g_audits.push_back(a);
        if (!report.failures.empty()) g_audits.push_back("augmented run failed: " + report.failures.front());
    }
    o.require(g_audits.empty(), "audit clean on every run (" + std::to_string(generated) + " fakes in training folds)");
    return o;
}

// ---- 9: determinism ----

int run_cli(const std::string& args) {
    const std::string cmd = std::string(MEXFLOW_BIN) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome determinism() {
    Outcome o;
    testing::TempDir dir("accept_det");
    const std::string corpus = R"("synthetic": {"subjects": 3, "videos_per_subject": 3, "frames_per_video": 12, "image_size": 32}, "seed": 5)";
    std::ofstream(dir / "base.json") << "{" << corpus
                                     << R"(, "experiment": {"apex_source": "spotted", "flow": {"method": "tvl1"}, "biwoof": {"blocks_per_side": 3}}})";
    std::ofstream(dir / "cnn.json") << "{" << corpus << R"(, "experiment": {"extractor": "cnn", "flow": {"method": "horn_schunck"},
        "streams": {"channels": ["p", "q", "eps_mag"], "fusion": "multiply"},
        "train": {"epochs": 4, "batch_size": 4, "checkpoints": [0, 2]}, "pca_epochs": [0, 4]}})";
    std::ofstream(dir / "gan.json") << "{" << corpus << R"(, "samples_per_class": 2, "experiment": {"extractor": "cnn",
        "flow": {"method": "horn_schunck"}, "augment": true, "train": {"epochs": 3, "batch_size": 4},
        "gan": {"iterations": 4, "batch": 4, "noise_dim": 8}}})";
    const std::vector<std::pair<std::string, std::string>> runs{
        {"generate", "base"}, {"flow", "base"},      {"spot", "base"},      {"extract", "base"},  {"train-svm", "base"},
        {"evaluate", "base"}, {"train-cnn", "cnn"},  {"evaluate", "cnn"},   {"train-gan", "gan"}, {"evaluate", "gan"}};
    std::size_t same = 0;
    for (std::size_t r = 0; r < runs.size(); ++r) {
        const auto& [cmd, cfg] = runs[r];
        const std::string conf = (dir / (cfg + ".json")).string();
        const auto a = dir / ("r" + std::to_string(r) + "a"), b = dir / ("r" + std::to_string(r) + "b");
        const int ca = run_cli(cmd + " -c " + conf + " -o " + a.string());
        const int cb = run_cli(cmd + " -j 2 -c " + conf + " -o " + b.string());
        const bool ok = ca == 0 && cb == 0 && testing::hash_tree(a) == testing::hash_tree(b);
        if (ok)
            ++same;
        else
            o.require(false, cmd + " on " + cfg + " differs (exit " + std::to_string(ca) + "/" + std::to_string(cb) + ")");
    }
    // A saved report re-renders identically as well.
    std::ofstream(dir / "report.json") << R"({"report": {"input": ")" << (dir / "r7a" / "report.json").string() << "\"}}";
    const bool rep = run_cli("report -c " + (dir / "report.json").string() + " -o " + (dir / "ra").string()) == 0 &&
                     run_cli("report -c " + (dir / "report.json").string() + " -o " + (dir / "rb").string()) == 0 &&
                     testing::hash_tree(dir / "ra") == testing::hash_tree(dir / "rb");
    same += rep;
    o.require(same == runs.size() + 1, std::to_string(same) + "/" + std::to_string(runs.size() + 1) + " commands byte-identical");
    return o;
}

// ---- 10: feature separation ----

Outcome feature_trend() {
    Outcome o;
    auto spec = twelve_subjects();
    spec.distractors = 4;
    const auto corpus = img::generate_synthetic_corpus(spec);
    eval::ExperimentConfig cfg;
    cfg.apex_source = eval::ApexSource::truth;
    cfg.flow.method = "tvl1";
    cfg.jobs = g_jobs;
    const auto frames = [&](std::size_t i) { return corpus.frames[i]; };
    const auto prepared = eval::prepare_samples(corpus.records, frames, cfg, &corpus.truth);
    cnn::TrainConfig tc;
    tc.seed = 1;
    const std::vector<std::size_t> epochs{0, 600};
    const auto scatter = eval::feature_scatter(
        prepared, {{deriv::Channel::p, deriv::Channel::q, deriv::Channel::eps_mag}, cnn::Fusion::multiply}, tc, epochs);
    o.require(scatter.size() == 2 && scatter[0].silhouette < 0.1, "silhouette at epoch 0 " + fmt("%.3f", scatter[0].silhouette));
    o.require(scatter.size() == 2 && scatter[1].silhouette > 0.3, "at epoch 600 " + fmt("%.3f", scatter[1].silhouette));
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mexflow acceptance checks"};
    std::vector<int> only;
    app.add_option("--only", only, "criteria to run (default all)")->check(CLI::Range(1, 10));
    app.add_option("-j,--jobs", g_jobs, "parallel workers")->check(CLI::PositiveNumber);
    app.add_option("--epochs", g_epochs, "training epochs for the end-to-end experiment");
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"flow soundness", flow_soundness},     {"strain exactness", strain_exactness},
        {"apex recovery", apex_recovery},       {"40-frame split", split_conformance},
        {"network structure and training", network_checks}, {"end-to-end LOSOCV", end_to_end},
        {"metric oracle", metric_oracle},       {"adversarial augmentation", gan_behaviour},
        {"determinism", determinism},           {"feature separation", feature_trend}};
    const std::set<int> wanted(only.begin(), only.end());
    bool all = true;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!wanted.empty() && !wanted.contains(id)) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        all = all && o.pass;
        std::printf("criterion %2d %s: %s  (%s; %.1fs)\n", id, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                    o.detail.c_str(), secs);
        std::fflush(stdout);
    }
    return all ? 0 : 1;
}
