#include "mexflow/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <set>

#include "mexflow/apex.hpp"
#include "mexflow/parallel.hpp"
#include "mexflow/rng.hpp"
#include "mexflow/tensor_io.hpp"

namespace mex::eval {

// ---- folds ----

FoldPlan losocv_split(std::span<const std::string> subject_of_sample) {
    std::map<std::string, Fold> by_subject;
    for (std::size_t i = 0; i < subject_of_sample.size(); ++i) by_subject[subject_of_sample[i]].test.push_back(i);
    if (by_subject.size() < 2)
        throw std::invalid_argument("losocv_split: need at least 2 subjects, got " + std::to_string(by_subject.size()));
    FoldPlan plan;
    for (auto& [subject, fold] : by_subject) {
        fold.test_subject = subject;
        for (std::size_t i = 0; i < subject_of_sample.size(); ++i)
            if (subject_of_sample[i] != subject) fold.train.push_back(i);
        plan.folds.push_back(std::move(fold));
    }
    return plan;
}

FoldPlan losocv_split(std::span<const img::SampleRecord> samples) {
    std::vector<std::string> subjects;
    for (const auto& s : samples) subjects.push_back(s.subject_id);
    return losocv_split(subjects);
}

std::vector<std::string> audit_fold_plan(const FoldPlan& plan, std::span<const std::string> subject_of_sample) {
    std::vector<std::string> problems;
    const std::size_t n = subject_of_sample.size();
    std::vector<std::size_t> tested(n, 0);
    std::set<std::string> subjects(subject_of_sample.begin(), subject_of_sample.end());
    std::map<std::string, std::size_t> fold_count;
    for (const auto& f : plan.folds) {
        ++fold_count[f.test_subject];
        std::set<std::size_t> train(f.train.begin(), f.train.end());
        for (auto i : f.test) {
            if (i >= n) {
                problems.push_back("fold " + f.test_subject + ": test index out of range");
                continue;
            }
            ++tested[i];
            if (train.contains(i)) problems.push_back("fold " + f.test_subject + ": sample " + std::to_string(i) + " in train and test");
            if (subject_of_sample[i] != f.test_subject)
                problems.push_back("fold " + f.test_subject + ": test sample " + std::to_string(i) + " belongs to " + subject_of_sample[i]);
        }
        for (auto i : f.train)
            if (i < n && subject_of_sample[i] == f.test_subject)
                problems.push_back("fold " + f.test_subject + ": training sample " + std::to_string(i) + " from the test subject");
        if (f.train.size() + f.test.size() != n) problems.push_back("fold " + f.test_subject + ": train and test do not cover the dataset");
    }
    for (const auto& s : subjects)
        if (fold_count[s] != 1) problems.push_back("subject " + s + " tested " + std::to_string(fold_count[s]) + " times");
    for (std::size_t i = 0; i < n; ++i)
        if (tested[i] != 1) problems.push_back("sample " + std::to_string(i) + " tested " + std::to_string(tested[i]) + " times");
    return problems;
}

// ---- metrics ----

void ConfusionMatrix::add(std::size_t truth, std::size_t predicted) {
    if (truth >= kClasses || predicted >= kClasses)
        throw std::out_of_range("confusion matrix: class pair (" + std::to_string(truth) + ", " + std::to_string(predicted) +
                                ") out of range");
    ++counts[truth][predicted];
}

std::size_t ConfusionMatrix::total() const {
    std::size_t t = 0;
    for (const auto& row : counts)
        for (auto v : row) t += v;
    return t;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
    for (std::size_t i = 0; i < kClasses; ++i)
        for (std::size_t j = 0; j < kClasses; ++j) counts[i][j] += other.counts[i][j];
    return *this;
}

ConfusionMatrix accumulate(std::span<const std::pair<std::size_t, std::size_t>> predictions) {
    ConfusionMatrix cm;
    for (const auto& [t, p] : predictions) cm.add(t, p);
    return cm;
}

MetricsReport compute_metrics(const ConfusionMatrix& cm) {
    const std::size_t total = cm.total();
    if (total == 0) throw std::invalid_argument("compute_metrics: empty confusion matrix");
    MetricsReport r;
    std::size_t diag = 0;
    for (std::size_t c = 0; c < kClasses; ++c) {
        diag += cm.counts[c][c];
        auto& m = r.per_class[c];
        m.tp = cm.counts[c][c];
        for (std::size_t o = 0; o < kClasses; ++o) {
            if (o == c) continue;
            m.fn += cm.counts[c][o];
            m.fp += cm.counts[o][c];
        }
        m.tn = total - m.tp - m.fn - m.fp;
        m.precision = m.tp + m.fp ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp) : 0.0;
        m.recall = m.tp + m.fn ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn) : 0.0;
        m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
        r.macro_f1 += m.f1;
    }
    r.macro_f1 /= static_cast<double>(kClasses);
    r.accuracy = static_cast<double>(diag) / static_cast<double>(total);
    return r;
}

double silhouette_score(const nn::Tensor& features, std::span<const std::size_t> labels) {
    if (features.rank() != 2 || features.extent(0) != labels.size())
        throw std::invalid_argument("silhouette_score: features must be N x D with one label per row");
    const std::size_t n = labels.size(), d = features.extent(1);
    if (n == 0) throw std::invalid_argument("silhouette_score: no samples");
    std::vector<double> dist(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                const double v = features[i * d + k] - features[j * d + k];
                s += v * v;
            }
            dist[i * n + j] = dist[j * n + i] = std::sqrt(s);
        }
    std::map<std::size_t, std::size_t> class_size;
    for (auto l : labels) ++class_size[l];
    if (class_size.size() < 2) return 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (class_size[labels[i]] < 2) continue;
        std::map<std::size_t, double> sums;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) sums[labels[j]] += dist[i * n + j];
        const double a = sums[labels[i]] / static_cast<double>(class_size[labels[i]] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (const auto& [c, size] : class_size)
            if (c != labels[i]) b = std::min(b, sums[c] / static_cast<double>(size));
        const double m = std::max(a, b);
        if (m > 0.0) total += (b - a) / m;
    }
    return total / static_cast<double>(n);
}

// ---- names ----

std::string_view apex_source_name(ApexSource s) {
    switch (s) {
        case ApexSource::truth: return "truth";
        case ApexSource::spotted: return "spotted";
        case ApexSource::manifest: return "manifest";
    }
    return "?";
}

ApexSource parse_apex_source(std::string_view s) {
    if (s == "truth") return ApexSource::truth;
    if (s == "spotted") return ApexSource::spotted;
    if (s == "manifest") return ApexSource::manifest;
    throw std::invalid_argument("unknown apex source '" + std::string(s) + "'");
}

std::string_view extractor_name(Extractor e) {
    switch (e) {
        case Extractor::biwoof_svm: return "biwoof_svm";
        case Extractor::cnn: return "cnn";
        case Extractor::truth_oracle: return "truth_oracle";
    }
    return "?";
}

Extractor parse_extractor(std::string_view s) {
    if (s == "biwoof_svm") return Extractor::biwoof_svm;
    if (s == "cnn") return Extractor::cnn;
    if (s == "truth_oracle") return Extractor::truth_oracle;
    throw std::invalid_argument("unknown extractor '" + std::string(s) + "'");
}

void validate(const ExperimentConfig& c) {
    flow::validate_config(c.flow);
    if (c.extractor == Extractor::cnn) cnn::validate(c.streams);
    if (c.biwoof.blocks_per_side < 1 || c.biwoof.orientation_bins < 2) throw std::invalid_argument("invalid Bi-WOOF config");
    if (c.train.epochs < 1 || c.train.batch_size < 1) throw std::invalid_argument("train: epochs and batch size must be >= 1");
    if (c.augment) gan::validate(c.gan);
    if (c.augment && c.extractor == Extractor::truth_oracle)
        throw std::invalid_argument("augmentation has no effect on the truth oracle");
    if (c.jobs < 1) throw std::invalid_argument("jobs must be >= 1");
}

// ---- preparation ----

namespace {

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}
constexpr std::uint64_t kFnvBasis = 14695981039346656037ull;

std::uint64_t hash_values(std::uint64_t h, std::span<const double> v) { return fnv1a(h, v.data(), v.size_bytes()); }

}  // namespace

PreparedSet prepare_samples(std::span<const img::SampleRecord> records, const FrameSource& frames,
                            const ExperimentConfig& config, const img::SyntheticTruth* truth) {
    flow::validate_config(config.flow);
    std::vector<std::optional<PreparedSample>> slots(records.size());
    std::vector<std::string> errors(records.size());
    parallel_for(records.size(), config.jobs, [&](std::size_t i) {
        const auto& r = records[i];
        try {
            const auto video = frames(i);
            if (video.size() < 2) throw std::runtime_error("fewer than 2 frames");
            if (r.onset_index >= video.size()) throw std::runtime_error("onset index out of range");
            PreparedSample s;
            s.id = r.video_id;
            s.subject = r.subject_id;
            s.label = static_cast<std::size_t>(r.emotion);
            const img::VideoTruth* vt = truth ? &truth->find(r.video_id) : nullptr;
            if (vt) s.truth_region = static_cast<std::size_t>(vt->region);
            switch (config.apex_source) {
                case ApexSource::truth:
                    if (!vt) throw std::runtime_error("apex source 'truth' needs ground truth");
                    s.apex = vt->apex_index;
                    break;
                case ApexSource::manifest:
                    if (!r.apex_index) throw std::runtime_error("manifest has no apex index");
                    s.apex = *r.apex_index;
                    break;
                case ApexSource::spotted: {
                    const auto signal = apex::motion_signal(video, r.onset_index, config.flow);
                    s.apex = apex::spot_apex_dc(signal).apex_index;
                    break;
                }
            }
            if (s.apex >= video.size()) throw std::runtime_error("apex index " + std::to_string(s.apex) + " out of range");
            s.channels = deriv::derive_channels(flow::estimate_flow(video[r.onset_index], video[s.apex], config.flow));
            slots[i] = std::move(s);
        } catch (const std::exception& e) {
            errors[i] = r.video_id + ": " + e.what();
        }
    });
    PreparedSet out;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (slots[i])
            out.samples.push_back(std::move(*slots[i]));
        else
            out.failures.push_back(errors[i]);
    }
    return out;
}

// ---- folds ----

namespace {

std::vector<std::size_t> checkpoint_epochs(const ExperimentConfig& c) {
    if (c.extractor != Extractor::cnn) return {0};
    std::set<std::size_t> e(c.train.checkpoints.begin(), c.train.checkpoints.end());
    e.insert(c.train.epochs);
    std::vector<std::size_t> out;
    for (auto v : e)
        if (v <= c.train.epochs) out.push_back(v);
    return out;
}

struct FoldSeeds {
    std::uint64_t net, shuffle, svm, gan, balance;
};

FoldSeeds fold_seeds(std::uint64_t seed, std::size_t fold) {
    const Rng r = Rng(seed).split(fold);
    return {r.split(1).next_u64(), r.split(2).next_u64(), r.split(3).next_u64(), r.split(4).next_u64(),
            r.split(5).next_u64()};
}

// Trains one generator per channel on the fold's real training images.
std::map<deriv::Channel, gan::Generator> train_generators(const std::vector<gan::AugmentedSample>& real,
                                                          const std::vector<deriv::Channel>& channels,
                                                          const gan::GanConfig& base, std::uint64_t seed) {
    std::map<deriv::Channel, gan::Generator> out;
    for (std::size_t c = 0; c < channels.size(); ++c) {
        std::vector<gan::LabeledImage> images;
        for (const auto& s : real) images.push_back({s.channels[c], s.label});
        gan::GanConfig cfg = base;
        cfg.seed = Rng(seed).split(c).next_u64();
        out.emplace(channels[c], gan::train_gan(images, cfg).generator);
    }
    return out;
}

std::vector<gan::AugmentedSample> augment(std::vector<gan::AugmentedSample> real, const std::vector<deriv::Channel>& channels,
                                          const ExperimentConfig& config, const FoldSeeds& seeds) {
    const auto gens = train_generators(real, channels, config.gan, seeds.gan);
    std::map<deriv::Channel, const gan::Generator*> ptrs;
    for (const auto& [c, g] : gens) ptrs[c] = &g;
    return gan::balance_dataset(std::move(real), channels, ptrs, seeds.balance);
}

void run_fold(const Fold& fold, std::size_t fold_index, const PreparedSet& prepared, const ExperimentConfig& config,
              std::size_t checkpoints, FoldResult& result) {
    const auto& samples = prepared.samples;
    result.test_subject = fold.test_subject;
    for (auto i : fold.test) {
        result.test_ids.push_back(samples[i].id);
        result.test_labels.push_back(samples[i].label);
    }
    result.predictions.assign(checkpoints, {});
    const FoldSeeds seeds = fold_seeds(config.seed, fold_index);
    std::uint64_t hash = kFnvBasis;
    for (const auto& id : result.test_ids) hash = fnv1a(hash, id.data(), id.size());

    if (config.extractor == Extractor::truth_oracle) {
        for (auto i : fold.train) result.train_ids.push_back(samples[i].id);
        for (auto i : fold.test) {
            if (!samples[i].truth_region) throw std::runtime_error("truth oracle needs synthetic ground truth");
            result.predictions[0].push_back(*samples[i].truth_region);
        }
        result.test_input_hash = hash;
        return;
    }

    const std::vector<deriv::Channel> gan_channels =
        config.extractor == Extractor::cnn ? config.streams.channels
                                           : std::vector<deriv::Channel>{deriv::Channel::p, deriv::Channel::q};
    auto to_aug = [&](std::size_t i) {
        gan::AugmentedSample a{samples[i].id, samples[i].label, {}, false};
        for (auto c : gan_channels) a.channels.push_back(img::normalize_to_input(deriv::select(samples[i].channels, c)));
        return a;
    };

    if (config.extractor == Extractor::biwoof_svm) {
        std::vector<std::vector<double>> features;
        std::vector<std::size_t> labels;
        for (auto i : fold.train) {
            features.push_back(biwoof::extract_biwoof(samples[i].channels, config.biwoof).values);
            labels.push_back(samples[i].label);
            result.train_ids.push_back(samples[i].id);
        }
        if (config.augment) {
            std::vector<gan::AugmentedSample> real;
            for (auto i : fold.train) real.push_back(to_aug(i));
            for (auto& s : augment(std::move(real), gan_channels, config, seeds)) {
                if (!s.fake) continue;
                FlowField f(gan::kImageSize, gan::kImageSize);
                std::copy(s.channels[0].data().begin(), s.channels[0].data().end(), f.p.begin());
                std::copy(s.channels[1].data().begin(), s.channels[1].data().end(), f.q.begin());
                features.push_back(biwoof::extract_biwoof(deriv::derive_channels(f), config.biwoof).values);
                labels.push_back(s.label);
                result.train_ids.push_back(s.id);
                ++result.generated;
            }
        }
        biwoof::SvmParams params = config.svm;
        params.seed = seeds.svm;
        const auto model = biwoof::train_svm(features, labels, params);
        for (auto i : fold.test) {
            const auto f = biwoof::extract_biwoof(samples[i].channels, config.biwoof);
            hash = hash_values(hash, f.values);
            result.predictions[0].push_back(biwoof::predict_svm(model, f.values).label);
        }
        result.test_input_hash = hash;
        return;
    }

    // cnn
    std::vector<gan::AugmentedSample> train_set;
    for (auto i : fold.train) train_set.push_back(to_aug(i));
    if (config.augment) train_set = augment(std::move(train_set), gan_channels, config, seeds);
    std::vector<cnn::Sample> train_data;
    std::array<std::size_t, kClasses> seen{};
    for (auto& s : train_set) {
        result.train_ids.push_back(s.id);
        result.generated += s.fake;
        ++seen[s.label];
        train_data.push_back({std::move(s.channels), s.label});
    }
    for (std::size_t c = 0; c < kClasses; ++c)
        if (seen[c] == 0) throw std::runtime_error("training split has no sample of class " + std::to_string(c));
    std::vector<cnn::Sample> test_data;
    for (auto i : fold.test) {
        auto a = to_aug(i);
        for (const auto& t : a.channels) hash = hash_values(hash, t.data());
        test_data.push_back({std::move(a.channels), a.label});
    }
    result.test_input_hash = hash;

    cnn::OffApexNet net(config.streams, seeds.net);
    cnn::TrainConfig tc = config.train;
    tc.seed = seeds.shuffle;
    tc.checkpoints = checkpoint_epochs(config);
    std::size_t slot = 0;
    cnn::train(net, train_data, tc, [&](std::size_t, const cnn::OffApexNet& n) {
        result.predictions[slot++] = cnn::predict_batch(n, test_data);
    });
}

}  // namespace

ExperimentReport run_experiment(const PreparedSet& prepared, const ExperimentConfig& config) {
    validate(config);
    ExperimentReport report;
    report.config = config;
    report.failures = prepared.failures;
    std::vector<std::string> subjects;
    for (const auto& s : prepared.samples) subjects.push_back(s.subject);
    const FoldPlan plan = losocv_split(subjects);
    if (auto problems = audit_fold_plan(plan, subjects); !problems.empty())
        throw std::logic_error("fold plan audit failed: " + problems.front());
    const auto epochs = checkpoint_epochs(config);

    report.folds.resize(plan.folds.size());
    parallel_for(plan.folds.size(), config.jobs, [&](std::size_t f) {
        try {
            run_fold(plan.folds[f], f, prepared, config, epochs.size(), report.folds[f]);
        } catch (const std::exception& e) {
            report.folds[f].error = e.what();
        }
    });

    report.checkpoints = aggregate_checkpoints(report.folds, epochs);
    for (const auto& fold : report.folds)
        if (fold.error) report.failures.push_back("fold " + fold.test_subject + ": " + *fold.error);

    report.audit_messages = audit_report(report, prepared);
    report.audit_passed = report.audit_messages.empty();

    if (config.extractor == Extractor::cnn && !config.pca_epochs.empty()) {
        cnn::TrainConfig tc = config.train;
        tc.seed = Rng(config.seed).split(1u << 20).next_u64();
        report.scatter = feature_scatter(prepared, config.streams, tc, config.pca_epochs);
    }
    return report;
}

std::vector<CheckpointMetrics> aggregate_checkpoints(const std::vector<FoldResult>& folds,
                                                     std::span<const std::size_t> epochs) {
    std::vector<CheckpointMetrics> out;
    for (std::size_t c = 0; c < epochs.size(); ++c) {
        CheckpointMetrics cm;
        cm.epoch = epochs[c];
        double fold_acc = 0.0;
        std::size_t ok = 0;
        for (const auto& fold : folds) {
            if (fold.error || fold.test_ids.empty()) continue;
            ConfusionMatrix local;
            for (std::size_t i = 0; i < fold.test_ids.size(); ++i) local.add(fold.test_labels.at(i), fold.predictions.at(c).at(i));
            cm.confusion += local;
            fold_acc += compute_metrics(local).accuracy;
            ++ok;
        }
        if (cm.confusion.total() > 0) cm.metrics = compute_metrics(cm.confusion);
        cm.subject_mean_accuracy = ok ? fold_acc / static_cast<double>(ok) : 0.0;
        out.push_back(cm);
    }
    return out;
}

std::vector<std::string> audit_report(const ExperimentReport& report, const PreparedSet& prepared) {
    std::map<std::string, std::string> subject_of;
    for (const auto& s : prepared.samples) subject_of[s.id] = s.subject;
    std::vector<std::string> problems;
    std::map<std::string, std::size_t> tested;
    bool all_ok = true;
    for (const auto& f : report.folds) {
        if (f.error) {
            all_ok = false;
            continue;
        }
        std::set<std::string> train(f.train_ids.begin(), f.train_ids.end());
        for (const auto& id : f.test_ids) {
            auto it = subject_of.find(id);
            if (it == subject_of.end())
                problems.push_back("fold " + f.test_subject + ": test sample " + id + " is not a real sample");
            else if (it->second != f.test_subject)
                problems.push_back("fold " + f.test_subject + ": test sample " + id + " belongs to " + it->second);
            if (train.contains(id)) problems.push_back("fold " + f.test_subject + ": sample " + id + " in train and test");
            ++tested[id];
        }
        for (const auto& id : f.train_ids) {
            auto it = subject_of.find(id);
            if (it != subject_of.end() && it->second == f.test_subject)
                problems.push_back("fold " + f.test_subject + ": training sample " + id + " from the test subject");
        }
    }
    if (all_ok)
        for (const auto& [id, _] : subject_of)
            if (tested[id] != 1) problems.push_back("sample " + id + " tested " + std::to_string(tested[id]) + " times");
    return problems;
}

std::vector<FeatureScatter> feature_scatter(const PreparedSet& prepared, const cnn::StreamSpec& streams,
                                            const cnn::TrainConfig& train, std::span<const std::size_t> epochs) {
    std::vector<FeatureScatter> out;
    if (epochs.empty()) return out;
    if (prepared.samples.size() < 3) throw std::invalid_argument("feature_scatter: need at least 3 samples");
    std::vector<cnn::Sample> data;
    std::vector<std::size_t> labels;
    for (const auto& s : prepared.samples) {
        cnn::SampleInputs in;
        for (auto c : streams.channels) in.push_back(img::normalize_to_input(deriv::select(s.channels, c)));
        data.push_back({std::move(in), s.label});
        labels.push_back(s.label);
    }
    auto snapshot = [&](std::size_t epoch, const cnn::OffApexNet& net) {
        FeatureScatter fs;
        fs.epoch = epoch;
        const nn::Tensor features = cnn::extract_features(net, data);
        fs.pca = nn::pca_fit(features, 2);
        const nn::Tensor proj = fs.pca.transform(features);
        for (std::size_t i = 0; i < data.size(); ++i)
            fs.points.push_back({prepared.samples[i].id, labels[i], proj[i * 2], proj[i * 2 + 1]});
        fs.silhouette = silhouette_score(features, labels);
        out.push_back(std::move(fs));
    };
    std::set<std::size_t> wanted(epochs.begin(), epochs.end());
    cnn::OffApexNet net(streams, train.seed);
    const std::size_t last = *wanted.rbegin();
    if (last == 0) {
        snapshot(0, net);
        return out;
    }
    cnn::TrainConfig tc = train;
    tc.epochs = last;
    tc.checkpoints.assign(wanted.begin(), wanted.end());
    cnn::train(net, data, tc, snapshot);
    return out;
}

// ---- sweep ----

std::vector<SweepRow> run_sweep(std::span<const img::SampleRecord> records, const FrameSource& frames,
                                const ExperimentConfig& base, std::span<const std::string> methods,
                                std::span<const std::size_t> blocks, const img::SyntheticTruth* truth) {
    std::vector<SweepRow> rows;
    for (const auto& m : methods) {
        ExperimentConfig cfg = base;
        cfg.extractor = Extractor::biwoof_svm;
        cfg.flow.method = m;
        const PreparedSet prepared = prepare_samples(records, frames, cfg, truth);
        for (auto b : blocks) {
            cfg.biwoof.blocks_per_side = b;
            const auto report = run_experiment(prepared, cfg);
            rows.push_back({m, b, report.headline().metrics.accuracy, report.headline().metrics.macro_f1});
        }
    }
    return rows;
}

namespace {

std::string fixed(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::string exact(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

}  // namespace

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "method,blocks,accuracy,f1\n";
    for (const auto& r : rows) out << r.method << ',' << r.blocks << ',' << fixed(r.accuracy) << ',' << fixed(r.macro_f1) << '\n';
}

void emit_report(const ExperimentReport& report, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    {
        auto out = open_out(dir / "tables.csv");
        out << "epoch,accuracy,f1,subject_mean_accuracy\n";
        for (const auto& c : report.checkpoints)
            out << c.epoch << ',' << fixed(c.metrics.accuracy) << ',' << fixed(c.metrics.macro_f1) << ','
                << fixed(c.subject_mean_accuracy) << '\n';
    }
    if (!report.checkpoints.empty()) {
        const auto& h = report.headline();
        auto out = open_out(dir / "confusion.csv");
        out << "true\\predicted";
        for (std::size_t c = 0; c < kClasses; ++c) out << ',' << img::emotion_name(img::emotion_from_index(static_cast<int>(c)));
        out << '\n';
        for (std::size_t t = 0; t < kClasses; ++t) {
            out << img::emotion_name(img::emotion_from_index(static_cast<int>(t)));
            for (std::size_t p = 0; p < kClasses; ++p) out << ',' << h.confusion.counts[t][p];
            out << '\n';
        }
        auto pc = open_out(dir / "per_class.csv");
        pc << "class,tp,fp,fn,tn,precision,recall,f1\n";
        for (std::size_t c = 0; c < kClasses; ++c) {
            const auto& m = h.metrics.per_class[c];
            pc << img::emotion_name(img::emotion_from_index(static_cast<int>(c))) << ',' << m.tp << ',' << m.fp << ','
               << m.fn << ',' << m.tn << ',' << fixed(m.precision) << ',' << fixed(m.recall) << ',' << fixed(m.f1) << '\n';
        }
    }
    {
        auto out = open_out(dir / "folds.csv");
        out << "subject,test_samples,generated,accuracy,error\n";
        auto pred = open_out(dir / "predictions.csv");
        pred << "subject,video_id,label,predicted\n";
        for (const auto& f : report.folds) {
            std::size_t hits = 0;
            const bool ok = !f.error && !f.predictions.empty() && f.predictions.back().size() == f.test_ids.size();
            if (ok)
                for (std::size_t i = 0; i < f.test_ids.size(); ++i) {
                    hits += f.predictions.back()[i] == f.test_labels[i];
                    pred << f.test_subject << ',' << f.test_ids[i] << ',' << f.test_labels[i] << ',' << f.predictions.back()[i] << '\n';
                }
            out << f.test_subject << ',' << f.test_ids.size() << ',' << f.generated << ','
                << (ok && !f.test_ids.empty() ? fixed(static_cast<double>(hits) / static_cast<double>(f.test_ids.size())) : "")
                << ',';
            if (f.error) {
                std::string e = *f.error;
                std::replace(e.begin(), e.end(), ',', ';');
                std::replace(e.begin(), e.end(), '\n', ' ');
                out << e;
            }
            out << '\n';
        }
    }
    {
        auto out = open_out(dir / "failures.txt");
        for (const auto& f : report.failures) out << f << '\n';
        for (const auto& a : report.audit_messages) out << "audit: " << a << '\n';
    }
    for (const auto& s : report.scatter) {
        const std::string stem = "pca_epoch_" + std::to_string(s.epoch);
        auto out = open_out(dir / (stem + ".csv"));
        out << "sample_id,class,pc1,pc2\n";
        for (const auto& p : s.points) out << p.id << ',' << p.label << ',' << exact(p.pc1) << ',' << exact(p.pc2) << '\n';
        std::filesystem::create_directories(dir / stem);
        nn::save_tensor(dir / stem / "mean.mxtn", nn::Tensor({s.pca.mean.size()}, s.pca.mean), nn::StorageType::f64);
        nn::save_tensor(dir / stem / "basis.mxtn", s.pca.basis, nn::StorageType::f64);
    }
    if (!report.scatter.empty()) {
        auto out = open_out(dir / "silhouette.csv");
        out << "epoch,silhouette\n";
        for (const auto& s : report.scatter) out << s.epoch << ',' << fixed(s.silhouette) << '\n';
    }
}

}  // namespace mex::eval
