#pragma once

// Leave-one-subject-out experiments, confusion matrices, metrics and report files.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mexflow/biwoof.hpp"
#include "mexflow/cnn.hpp"
#include "mexflow/dataset.hpp"
#include "mexflow/derivatives.hpp"
#include "mexflow/flow.hpp"
#include "mexflow/gan.hpp"
#include "mexflow/pca.hpp"

namespace mex::eval {

inline constexpr std::size_t kClasses = 3;

struct Fold {
    std::string test_subject;
    std::vector<std::size_t> train;  // sample indices
    std::vector<std::size_t> test;
};

struct FoldPlan {
    std::vector<Fold> folds;
};

// One fold per distinct subject, subjects in lexicographic order.
FoldPlan losocv_split(std::span<const img::SampleRecord> samples);
FoldPlan losocv_split(std::span<const std::string> subject_of_sample);

// Empty when every subject is tested exactly once, train and test are
// disjoint within a fold and the test sets cover all n samples.
std::vector<std::string> audit_fold_plan(const FoldPlan& plan, std::span<const std::string> subject_of_sample);

struct ConfusionMatrix {
    std::array<std::array<std::size_t, kClasses>, kClasses> counts{};  // [true][predicted]

    void add(std::size_t truth, std::size_t predicted);
    std::size_t total() const;
    ConfusionMatrix& operator+=(const ConfusionMatrix& other);
    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

ConfusionMatrix accumulate(std::span<const std::pair<std::size_t, std::size_t>> predictions);

struct ClassMetrics {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    double precision = 0.0, recall = 0.0, f1 = 0.0;
};

struct MetricsReport {
    double accuracy = 0.0;
    std::array<ClassMetrics, kClasses> per_class{};
    double macro_f1 = 0.0;
};

// Throws on an empty matrix. Zero denominators give 0.
MetricsReport compute_metrics(const ConfusionMatrix& cm);

// Mean silhouette coefficient over all samples (Euclidean).
// Samples in singleton classes contribute 0.
double silhouette_score(const nn::Tensor& features, std::span<const std::size_t> labels);

// ---- experiments ----

enum class ApexSource { truth, spotted, manifest };
enum class Extractor { biwoof_svm, cnn, truth_oracle };

std::string_view apex_source_name(ApexSource s);
ApexSource parse_apex_source(std::string_view s);
std::string_view extractor_name(Extractor e);
Extractor parse_extractor(std::string_view s);

struct ExperimentConfig {
    ApexSource apex_source = ApexSource::truth;
    flow::FlowConfig flow;
    Extractor extractor = Extractor::biwoof_svm;
    cnn::StreamSpec streams{{deriv::Channel::p, deriv::Channel::q}, cnn::Fusion::concat};
    mex::biwoof::BiwoofConfig biwoof;
    mex::biwoof::SvmParams svm;
    cnn::TrainConfig train;
    bool augment = false;
    gan::GanConfig gan;
    std::vector<std::size_t> pca_epochs;  // checkpoints for the whole-corpus feature scatter
    std::size_t jobs = 1;
    std::uint64_t seed = 1;
};

// Throws std::invalid_argument when the combination is unusable.
void validate(const ExperimentConfig& config);

// Per-video onset -> apex flow products shared by every fold.
struct PreparedSample {
    std::string id;
    std::string subject;
    std::size_t label = 0;
    std::size_t apex = 0;
    std::optional<std::size_t> truth_region;  // synthetic ground truth when available
    deriv::DerivedChannels channels;
};

struct PreparedSet {
    std::vector<PreparedSample> samples;
    std::vector<std::string> failures;  // "video: reason" for samples that could not be prepared
};

// Frames for record i; called concurrently with distinct i.
using FrameSource = std::function<std::vector<img::GrayImage>(std::size_t)>;

PreparedSet prepare_samples(std::span<const img::SampleRecord> records, const FrameSource& frames,
                            const ExperimentConfig& config, const img::SyntheticTruth* truth = nullptr);

struct FoldResult {
    std::string test_subject;
    std::vector<std::string> train_ids;  // includes generated samples when augmenting
    std::vector<std::string> test_ids;
    std::vector<std::size_t> test_labels;
    std::vector<std::vector<std::size_t>> predictions;  // per checkpoint, parallel to test_ids
    std::uint64_t test_input_hash = 0;
    std::size_t generated = 0;
    std::optional<std::string> error;
};

struct CheckpointMetrics {
    std::size_t epoch = 0;  // 0 for non-iterative extractors
    ConfusionMatrix confusion;
    MetricsReport metrics;
    double subject_mean_accuracy = 0.0;
};

struct ScatterPoint {
    std::string id;
    std::size_t label;
    double pc1, pc2;
};

struct FeatureScatter {
    std::size_t epoch = 0;
    std::vector<ScatterPoint> points;
    nn::PcaModel pca;
    double silhouette = 0.0;
};

struct ExperimentReport {
    ExperimentConfig config;
    std::vector<FoldResult> folds;
    std::vector<CheckpointMetrics> checkpoints;  // headline = back()
    std::vector<FeatureScatter> scatter;
    std::vector<std::string> failures;
    bool audit_passed = true;
    std::vector<std::string> audit_messages;

    const CheckpointMetrics& headline() const { return checkpoints.back(); }
    bool ok() const { return failures.empty() && audit_passed; }
};

ExperimentReport run_experiment(const PreparedSet& prepared, const ExperimentConfig& config);

// Pools successful folds per checkpoint; epochs[c] labels predictions[c].
std::vector<CheckpointMetrics> aggregate_checkpoints(const std::vector<FoldResult>& folds,
                                                     std::span<const std::size_t> epochs);

// Penultimate features of one network trained on every prepared sample,
// projected on two principal components at each requested epoch.
std::vector<FeatureScatter> feature_scatter(const PreparedSet& prepared, const cnn::StreamSpec& streams,
                                            const cnn::TrainConfig& train, std::span<const std::size_t> epochs);

// Checks that no generated or other-subject sample reached a test split and
// that train and test never share a sample.
std::vector<std::string> audit_report(const ExperimentReport& report, const PreparedSet& prepared);

struct SweepRow {
    std::string method;
    std::size_t blocks;
    double accuracy;
    double macro_f1;
};

// Bi-WOOF + SVM over every flow method and block count.
std::vector<SweepRow> run_sweep(std::span<const img::SampleRecord> records, const FrameSource& frames,
                                const ExperimentConfig& base, std::span<const std::string> methods,
                                std::span<const std::size_t> blocks, const img::SyntheticTruth* truth = nullptr);
void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path);

// tables.csv, confusion.csv, per_class.csv, folds.csv, failures.txt and
// pca_epoch_<e>.csv / pca_epoch_<e>/ for each scatter.
void emit_report(const ExperimentReport& report, const std::filesystem::path& dir);

}  // namespace mex::eval
