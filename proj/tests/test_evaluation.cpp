#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "mexflow/evaluation.hpp"
#include "mexflow/tensor_io.hpp"
#include "support.hpp"

using namespace mex;
using namespace mex::eval;

namespace {

std::vector<std::string> subjects_of(std::initializer_list<const char*> s) { return {s.begin(), s.end()}; }

// Direct per-class recount from the prediction pairs.
struct Recount {
    double accuracy, macro_f1;
    std::array<double, 3> f1;
};

Recount recount(const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
    Recount r{};
    std::size_t correct = 0;
    for (const auto& [t, p] : pairs) correct += t == p;
    r.accuracy = static_cast<double>(correct) / static_cast<double>(pairs.size());
    for (std::size_t c = 0; c < 3; ++c) {
        double tp = 0, predicted = 0, actual = 0;
        for (const auto& [t, p] : pairs) {
            tp += t == c && p == c;
            predicted += p == c;
            actual += t == c;
        }
        const double prec = predicted ? tp / predicted : 0, rec = actual ? tp / actual : 0;
        r.f1[c] = prec + rec ? 2 * prec * rec / (prec + rec) : 0;
        r.macro_f1 += r.f1[c] / 3;
    }
    return r;
}

double silhouette_oracle(const std::vector<std::vector<double>>& x, const std::vector<std::size_t>& labels) {
    const std::size_t n = x.size();
    auto dist = [&](std::size_t i, std::size_t j) {
        double s = 0;
        for (std::size_t k = 0; k < x[i].size(); ++k) s += (x[i][k] - x[j][k]) * (x[i][k] - x[j][k]);
        return std::sqrt(s);
    };
    if (std::all_of(labels.begin(), labels.end(), [&](std::size_t l) { return l == labels[0]; })) return 0.0;
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
        std::array<double, 3> sum{}, count{};
        for (std::size_t j = 0; j < n; ++j) {
            count[labels[j]] += 1;
            if (j != i) sum[labels[j]] += dist(i, j);
        }
        if (count[labels[i]] < 2) continue;
        const double a = sum[labels[i]] / (count[labels[i]] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < 3; ++c)
            if (c != labels[i] && count[c] > 0) b = std::min(b, sum[c] / count[c]);
        total += (b - a) / std::max(a, b);
    }
    return total / static_cast<double>(n);
}

img::SyntheticCorpus small_corpus(std::size_t videos_per_subject = 3) {
    img::SyntheticSpec spec;
    spec.subjects = 4;
    spec.videos_per_subject = videos_per_subject;
    spec.frames_per_video = 10;
    spec.image_size = 32;
    spec.motion_amplitude = 1.0;
    spec.seed = 12;
    return img::generate_synthetic_corpus(spec);
}

FrameSource memory_frames(const img::SyntheticCorpus& c) {
    return [&c](std::size_t i) { return c.frames[i]; };
}

}  // namespace

TEST_CASE("leave-one-subject-out folds") {
    const auto subjects = subjects_of({"b", "a", "b", "c", "a"});
    const auto plan = losocv_split(subjects);
    REQUIRE(plan.folds.size() == 3);
    CHECK(plan.folds[0].test_subject == "a");
    CHECK(plan.folds[0].test == std::vector<std::size_t>{1, 4});
    CHECK(plan.folds[0].train == std::vector<std::size_t>{0, 2, 3});
    CHECK(plan.folds[2].test == std::vector<std::size_t>{3});
    CHECK(audit_fold_plan(plan, subjects).empty());
    CHECK_THROWS_AS(losocv_split(subjects_of({"a", "a"})), std::invalid_argument);

    SUBCASE("audit catches leaks") {
        auto bad = plan;
        bad.folds[0].train.push_back(1);
        CHECK_FALSE(audit_fold_plan(bad, subjects).empty());
        bad = plan;
        bad.folds.pop_back();
        CHECK_FALSE(audit_fold_plan(bad, subjects).empty());
    }
    SUBCASE("random subject assignments always audit clean") {
        Rng rng(4);
        for (int trial = 0; trial < 100; ++trial) {
            const std::size_t n = 2 + rng.below(40), k = 2 + rng.below(6);
            std::vector<std::string> s(n);
            for (std::size_t i = 0; i < n; ++i) s[i] = "s" + std::to_string(i < k ? i : rng.below(k));
            const auto p = losocv_split(s);
            CHECK(p.folds.size() == std::min(n, k));
            CHECK(audit_fold_plan(p, s).empty());
        }
    }
}

TEST_CASE("confusion matrix counts") {
    const std::vector<std::pair<std::size_t, std::size_t>> pairs{{0, 0}, {0, 1}, {1, 1}, {2, 0}, {2, 2}, {2, 2}};
    const auto cm = accumulate(pairs);
    CHECK(cm.counts[0] == std::array<std::size_t, 3>{1, 1, 0});
    CHECK(cm.counts[1] == std::array<std::size_t, 3>{0, 1, 0});
    CHECK(cm.counts[2] == std::array<std::size_t, 3>{1, 0, 2});
    CHECK(cm.total() == 6);
    ConfusionMatrix sum = cm;
    sum += cm;
    CHECK(sum.counts[2][2] == 4);
    ConfusionMatrix e;
    CHECK_THROWS_AS(e.add(3, 0), std::out_of_range);
    CHECK_THROWS_AS(compute_metrics(e), std::invalid_argument);
}

TEST_CASE("metrics on hand-built matrices") {
    ConfusionMatrix cm;
    cm.counts = {{{5, 0, 0}, {0, 0, 0}, {0, 0, 5}}};
    const auto m = compute_metrics(cm);
    CHECK(m.accuracy == 1.0);
    CHECK(m.per_class[1].f1 == 0.0);
    CHECK(m.macro_f1 == doctest::Approx(2.0 / 3.0));

    cm.counts = {{{3, 1, 0}, {2, 2, 0}, {0, 0, 0}}};
    const auto n = compute_metrics(cm);
    CHECK(n.accuracy == doctest::Approx(5.0 / 8.0));
    CHECK(n.per_class[0].precision == doctest::Approx(3.0 / 5.0));
    CHECK(n.per_class[0].recall == doctest::Approx(3.0 / 4.0));
    CHECK(n.per_class[0].tn == 2);
    CHECK(n.per_class[1].fp == 1);
    CHECK(n.per_class[2].f1 == 0.0);
}

TEST_CASE("metrics agree with a direct recount on random predictions") {
    Rng rng(8);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::pair<std::size_t, std::size_t>> pairs(1 + rng.below(60));
        for (auto& p : pairs) p = {rng.below(3), rng.below(3)};
        const auto m = compute_metrics(accumulate(pairs));
        const auto r = recount(pairs);
        CHECK(std::abs(m.accuracy - r.accuracy) < 1e-12);
        CHECK(std::abs(m.macro_f1 - r.macro_f1) < 1e-12);
        for (std::size_t c = 0; c < 3; ++c) {
            CHECK(std::abs(m.per_class[c].f1 - r.f1[c]) < 1e-12);
            const auto& pc = m.per_class[c];
            CHECK(pc.tp + pc.fp + pc.fn + pc.tn == pairs.size());
        }
        CHECK(m.accuracy >= 0.0);
        CHECK(m.accuracy <= 1.0);

        // Relabelling classes permutes per-class rows and leaves the summaries alone.
        const std::array<std::size_t, 3> perm{2, 0, 1};
        auto relabelled = pairs;
        for (auto& [t, p] : relabelled) t = perm[t], p = perm[p];
        const auto q = compute_metrics(accumulate(relabelled));
        CHECK(std::abs(q.accuracy - m.accuracy) < 1e-12);
        CHECK(std::abs(q.macro_f1 - m.macro_f1) < 1e-12);
        for (std::size_t c = 0; c < 3; ++c) CHECK(std::abs(q.per_class[perm[c]].f1 - m.per_class[c].f1) < 1e-12);
    }
}

TEST_CASE("silhouette score") {
    // Points 0, 1 | 5, 6 on a line.
    const nn::Tensor line({4, 1}, {0, 1, 5, 6});
    const std::vector<std::size_t> two{0, 0, 1, 1};
    CHECK(silhouette_score(line, two) == doctest::Approx((4.5 / 5.5 + 3.5 / 4.5) / 2));
    CHECK(silhouette_score(line, std::vector<std::size_t>{0, 0, 0, 0}) == 0.0);
    CHECK_THROWS_AS(silhouette_score(line, std::vector<std::size_t>{0, 1}), std::invalid_argument);

    Rng rng(6);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 3 + rng.below(20), d = 1 + rng.below(5);
        std::vector<std::vector<double>> x(n, std::vector<double>(d));
        std::vector<std::size_t> labels(n);
        nn::Tensor f({n, d});
        for (std::size_t i = 0; i < n; ++i) {
            labels[i] = rng.below(3);
            for (std::size_t k = 0; k < d; ++k) f[i * d + k] = x[i][k] = rng.uniform(-2, 2) + static_cast<double>(labels[i]);
        }
        const double s = silhouette_score(f, labels);
        CHECK(std::abs(s - silhouette_oracle(x, labels)) < 1e-12);
        CHECK(s >= -1.0);
        CHECK(s <= 1.0);
    }
}

TEST_CASE("truth oracle scores perfectly") {
    const auto corpus = small_corpus();
    ExperimentConfig cfg;
    cfg.extractor = Extractor::truth_oracle;
    cfg.flow.method = "horn_schunck";
    const auto prepared = prepare_samples(corpus.records, memory_frames(corpus), cfg, &corpus.truth);
    CHECK(prepared.failures.empty());
    REQUIRE(prepared.samples.size() == 12);
    const auto report = run_experiment(prepared, cfg);
    CHECK(report.ok());
    CHECK(report.folds.size() == 4);
    CHECK(report.headline().metrics.accuracy == 1.0);
    CHECK(report.headline().metrics.macro_f1 == 1.0);

    // Without ground truth the oracle and the truth apex source both fail per sample.
    const auto blind = prepare_samples(corpus.records, memory_frames(corpus), cfg, nullptr);
    CHECK(blind.samples.empty());
    CHECK(blind.failures.size() == 12);
}

TEST_CASE("broken videos are reported without stopping the run") {
    const auto corpus = small_corpus();
    ExperimentConfig cfg;
    cfg.flow.method = "horn_schunck";
    FrameSource frames = [&](std::size_t i) {
        if (i == 4) return std::vector<img::GrayImage>{corpus.frames[i][0]};
        return corpus.frames[i];
    };
    const auto prepared = prepare_samples(corpus.records, frames, cfg, &corpus.truth);
    CHECK(prepared.samples.size() == 11);
    REQUIRE(prepared.failures.size() == 1);
    CHECK(prepared.failures[0].starts_with(corpus.records[4].video_id + ":"));
    const auto report = run_experiment(prepared, cfg);
    CHECK_FALSE(report.ok());
    CHECK(report.audit_passed);
    CHECK(report.headline().confusion.total() == 11);
}

TEST_CASE("augmentation never touches the test split") {
    const auto corpus = small_corpus(4);  // classes 0, 1, 2, 0 per subject
    ExperimentConfig cfg;
    cfg.flow.method = "horn_schunck";
    cfg.extractor = Extractor::cnn;
    cfg.streams = {{deriv::Channel::p, deriv::Channel::q}, cnn::Fusion::concat};
    cfg.train.epochs = 2;
    cfg.train.batch_size = 8;
    cfg.gan.iterations = 2;
    cfg.gan.batch = 4;
    cfg.gan.noise_dim = 8;
    const auto prepared = prepare_samples(corpus.records, memory_frames(corpus), cfg, &corpus.truth);
    const auto plain = run_experiment(prepared, cfg);
    cfg.augment = true;
    const auto augmented = run_experiment(prepared, cfg);
    REQUIRE(plain.folds.size() == augmented.folds.size());
    CHECK(augmented.ok());
    for (std::size_t f = 0; f < plain.folds.size(); ++f) {
        CHECK(plain.folds[f].test_input_hash == augmented.folds[f].test_input_hash);
        CHECK(plain.folds[f].test_ids == augmented.folds[f].test_ids);
        CHECK(plain.folds[f].generated == 0);
        // 3 training subjects with classes (2, 1, 1) each: 3 fakes per minority class.
        CHECK(augmented.folds[f].generated == 6);
        for (const auto& id : augmented.folds[f].test_ids) CHECK_FALSE(id.starts_with("fake:"));
    }
    CHECK(audit_report(augmented, prepared).empty());

    SUBCASE("audit flags a leaked fake or a cross-subject test sample") {
        auto leaked = augmented;
        leaked.folds[0].test_ids.push_back("fake:c1_0");
        CHECK_FALSE(audit_report(leaked, prepared).empty());
        leaked = augmented;
        leaked.folds[0].test_ids.push_back(augmented.folds[1].test_ids[0]);
        CHECK_FALSE(audit_report(leaked, prepared).empty());
    }
}

TEST_CASE("reports are deterministic and scatter files follow the requested epochs") {
    const auto corpus = small_corpus();
    ExperimentConfig cfg;
    cfg.flow.method = "horn_schunck";
    cfg.extractor = Extractor::cnn;
    cfg.streams = {{deriv::Channel::p, deriv::Channel::q, deriv::Channel::eps_mag}, cnn::Fusion::multiply};
    cfg.train.epochs = 3;
    cfg.train.checkpoints = {0, 1};
    cfg.train.batch_size = 4;
    cfg.jobs = 2;
    cfg.pca_epochs = {0, 2};
    const auto prepared = prepare_samples(corpus.records, memory_frames(corpus), cfg, &corpus.truth);
    const auto a = run_experiment(prepared, cfg);
    cfg.jobs = 1;
    const auto b = run_experiment(prepared, cfg);
    REQUIRE(a.checkpoints.size() == 3);
    CHECK(a.checkpoints[1].epoch == 1);
    for (std::size_t f = 0; f < a.folds.size(); ++f) CHECK(a.folds[f].predictions == b.folds[f].predictions);

    testing::TempDir da("reporta"), db("reportb");
    emit_report(a, da.path());
    emit_report(b, db.path());
    CHECK(testing::hash_tree(da.path()) == testing::hash_tree(db.path()));
    for (const char* f : {"tables.csv", "confusion.csv", "per_class.csv", "folds.csv", "failures.txt", "pca_epoch_0.csv",
                          "pca_epoch_2.csv", "silhouette.csv"})
        CHECK(std::filesystem::exists(da / f));

    // Files hold the fitted projection and its coordinates exactly.
    REQUIRE(a.scatter.size() == 2);
    const auto& s = a.scatter[1];
    const nn::Tensor basis = nn::load_tensor(da / "pca_epoch_2" / "basis.mxtn");
    CHECK(basis == s.pca.basis);
    REQUIRE(basis.extent(1) == 2);
    double dot = 0, n0 = 0;
    for (std::size_t r = 0; r < basis.extent(0); ++r) {
        dot += basis[r * 2] * basis[r * 2 + 1];
        n0 += basis[r * 2] * basis[r * 2];
    }
    CHECK(std::abs(dot) < 1e-9);
    CHECK(n0 == doctest::Approx(1.0));
    std::ifstream csv(da / "pca_epoch_2.csv");
    std::string line;
    std::getline(csv, line);
    CHECK(line == "sample_id,class,pc1,pc2");
    std::getline(csv, line);
    std::stringstream row(line);
    std::string id, cls, pc1;
    std::getline(row, id, ',');
    std::getline(row, cls, ',');
    std::getline(row, pc1, ',');
    CHECK(std::stod(pc1) == s.points[0].pc1);

    cfg.pca_epochs.clear();
    const auto c = run_experiment(prepared, cfg);
    CHECK(c.scatter.empty());
    testing::TempDir dc("reportc");
    emit_report(c, dc.path());
    CHECK_FALSE(std::filesystem::exists(dc / "pca_epoch_0.csv"));
    CHECK_FALSE(std::filesystem::exists(dc / "silhouette.csv"));
}
