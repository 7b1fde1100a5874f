#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mexflow/field.hpp"
#include "mexflow/image.hpp"
#include "mexflow/tensor.hpp"

namespace mex::img {

enum class Emotion : std::uint8_t { negative = 0, positive = 1, surprise = 2 };
inline constexpr std::size_t kNumClasses = 3;

std::string_view emotion_name(Emotion e);
Emotion emotion_from_index(int index);

// Metadata for one video. Frame paths are absolute after load_manifest.
struct SampleRecord {
    std::string subject_id;
    std::string video_id;
    Emotion emotion = Emotion::negative;
    std::vector<std::string> frame_paths;
    std::size_t onset_index = 0;
    std::optional<std::size_t> apex_index;
    std::string source_db;

    std::size_t frame_count() const { return frame_paths.size(); }
};

// Empty when the record satisfies its invariants.
std::vector<std::string> validate_record(const SampleRecord& record);

class ManifestError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// JSON manifest: {"samples":[{"subject_id","video_id","emotion","frames",
// "onset_index","apex_index","source_db"}]}. Relative frame paths resolve
// against the manifest directory; subject ids become "source_db:subject_id".
std::vector<SampleRecord> load_manifest(const std::filesystem::path& path);
// Writes records with frame paths made relative to the manifest directory.
void save_manifest(const std::vector<SampleRecord>& records, const std::filesystem::path& path);

std::vector<GrayImage> load_frames(const SampleRecord& record);

// Bilinear resize to size x size followed by min-max scaling into [-1, 1];
// constant fields map to zeros. Returns a size x size x 1 tensor.
nn::Tensor normalize_to_input(const Field& channel, std::size_t size = 28);
Field resize_bilinear(const Field& source, std::size_t width, std::size_t height);

// ---- synthetic corpus ----

struct SyntheticSpec {
    std::size_t subjects = 6;
    std::size_t videos_per_subject = 3;
    std::size_t frames_per_video = 40;
    std::size_t image_size = 64;
    double motion_amplitude = 1.5;
    double noise_sigma = 0.005;
    // Nuisance movements per video: bumps at random sites and directions that
    // share the expression's time profile but carry no class information.
    std::size_t distractors = 0;
    double distractor_gain = 1.0;  // relative to motion_amplitude
    std::uint64_t seed = 1;
};

void validate_spec(const SyntheticSpec& spec);

// One Gaussian-profiled displacement bump; the full motion at frame t is
// profile[t] * sum_b direction_b * exp(-|x - center_b|^2 / (2 sigma_b^2)).
struct MotionBump {
    double cx = 0, cy = 0, sigma = 1;
    double dx = 0, dy = 0;  // direction times relative gain
};

struct VideoTruth {
    std::string video_id;
    std::size_t apex_index = 0;
    Emotion region = Emotion::negative;
    std::vector<double> profile;           // peak displacement (px) per frame
    std::vector<double> mean_displacement;  // mean |d| over the image per frame
    std::vector<MotionBump> bumps;
    std::size_t image_size = 0;
};

struct SyntheticTruth {
    std::vector<VideoTruth> videos;

    const VideoTruth& find(std::string_view video_id) const;
    // Ground-truth displacement from the onset frame to `frame`.
    static FlowField displacement(const VideoTruth& video, std::size_t frame);
};

struct SyntheticCorpus {
    std::vector<SampleRecord> records;
    SyntheticTruth truth;
    std::vector<std::vector<GrayImage>> frames;  // parallel to records
};

SyntheticCorpus generate_synthetic_corpus(const SyntheticSpec& spec);

// Writes manifest.json, frames/<video>/frame_###.pgm and truth.json under dir.
void write_corpus(const SyntheticCorpus& corpus, const std::filesystem::path& dir);
SyntheticTruth load_truth(const std::filesystem::path& path);

}  // namespace mex::img
