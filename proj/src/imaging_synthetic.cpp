#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <numbers>
#include <sstream>

#include "mexflow/dataset.hpp"
#include "mexflow/rng.hpp"

namespace mex::img {

namespace {

constexpr double kRegionSigma = 0.13;

struct Blob {
    double cx, cy, sigma, amplitude;
};

// Smooth face-like texture: fixed facial landmarks (jittered per subject)
// plus seeded random blobs.
struct Texture {
    std::vector<Blob> blobs;

    double operator()(double x, double y) const {
        double v = 0.5;
        for (const auto& b : blobs) {
            const double dx = x - b.cx, dy = y - b.cy;
            v += b.amplitude * std::exp(-(dx * dx + dy * dy) / (2.0 * b.sigma * b.sigma));
        }
        return std::clamp(v, 0.02, 0.98);
    }
};

struct Landmarks {
    double left_brow_x, right_brow_x, brow_y, eye_y, mouth_left_x, mouth_right_x, mouth_y;
};

Landmarks subject_landmarks(double size, Rng& rng) {
    auto jitter = [&] { return rng.uniform(-1.5, 1.5) * size / 64.0; };
    return {0.36 * size + jitter(), 0.64 * size + jitter(), 0.28 * size + jitter(), 0.38 * size + jitter(),
            0.34 * size + jitter(), 0.66 * size + jitter(), 0.72 * size + jitter()};
}

Texture subject_texture(double size, const Landmarks& lm, Rng& rng) {
    const double s = size / 64.0;
    Texture t;
    // brows, eyes, nose, mouth
    for (double bx : {lm.left_brow_x, lm.right_brow_x}) {
        t.blobs.push_back({bx - 3 * s, lm.brow_y, 2.2 * s, -0.22});
        t.blobs.push_back({bx + 3 * s, lm.brow_y + 0.5 * s, 2.2 * s, -0.20});
        t.blobs.push_back({bx, lm.eye_y, 2.6 * s, -0.28});
        t.blobs.push_back({bx + 1.2 * s, lm.eye_y - 0.6 * s, 1.0 * s, 0.25});
    }
    t.blobs.push_back({0.5 * size, 0.55 * size, 3.5 * s, 0.12});
    for (double mx : {lm.mouth_left_x, lm.mouth_right_x}) {
        t.blobs.push_back({mx, lm.mouth_y, 2.0 * s, -0.25});
        t.blobs.push_back({mx + (mx < 0.5 * size ? 3.5 : -3.5) * s, lm.mouth_y + 1.0 * s, 2.2 * s, -0.18});
    }
    t.blobs.push_back({0.5 * size, lm.mouth_y + 1.5 * s, 2.5 * s, -0.15});
    for (int i = 0; i < 40; ++i) {
        t.blobs.push_back({rng.uniform(0.05, 0.95) * size, rng.uniform(0.05, 0.95) * size, rng.uniform(1.5, 3.5) * s,
                           rng.uniform(-0.3, 0.3)});
    }
    return t;
}

std::vector<MotionBump> class_bumps(Emotion e, double size, const Landmarks& lm) {
    const double sigma = kRegionSigma * size;
    switch (e) {
        case Emotion::negative:  // brow lowerer: brows pulled down and together
            return {{lm.left_brow_x, lm.brow_y, sigma, 0.6, 0.8}, {lm.right_brow_x, lm.brow_y, sigma, -0.6, 0.8}};
        case Emotion::positive:  // lip corner puller: corners move up and out
            return {{lm.mouth_left_x, lm.mouth_y, sigma, -0.8, -0.6}, {lm.mouth_right_x, lm.mouth_y, sigma, 0.8, -0.6}};
        case Emotion::surprise:  // upper face widening: brows and lids raised
            return {{lm.left_brow_x, 0.5 * (lm.brow_y + lm.eye_y), 1.3 * sigma, -0.3, -0.954},
                    {lm.right_brow_x, 0.5 * (lm.brow_y + lm.eye_y), 1.3 * sigma, 0.3, -0.954}};
    }
    return {};
}

// Rises as (t/apex)^2 to 1 at the apex, then decays towards a small residual.
double time_profile(std::size_t t, std::size_t apex) {
    if (t <= apex) {
        const double r = static_cast<double>(t) / static_cast<double>(apex);
        return r * r;
    }
    constexpr double residual = 0.03, tau = 3.0;
    return residual + (1.0 - residual) * std::exp(-static_cast<double>(t - apex) / tau);
}

void bump_displacement(const std::vector<MotionBump>& bumps, double scale, double x, double y, double& dx, double& dy) {
    dx = dy = 0.0;
    for (const auto& b : bumps) {
        const double ex = x - b.cx, ey = y - b.cy;
        const double w = scale * std::exp(-(ex * ex + ey * ey) / (2.0 * b.sigma * b.sigma));
        dx += w * b.dx;
        dy += w * b.dy;
    }
}

std::string two_digit(std::size_t v, int width) {
    std::ostringstream s;
    s << std::setw(width) << std::setfill('0') << v;
    return s.str();
}

}  // namespace

void validate_spec(const SyntheticSpec& s) {
    if (s.subjects == 0 || s.videos_per_subject == 0) throw std::invalid_argument("synthetic spec: subjects and videos must be positive");
    if (s.frames_per_video < 4) throw std::invalid_argument("synthetic spec: frames_per_video must be >= 4");
    if (s.image_size < 16) throw std::invalid_argument("synthetic spec: image_size must be >= 16");
    if (s.motion_amplitude < 0 || s.motion_amplitude > static_cast<double>(s.image_size) / 8.0)
        throw std::invalid_argument("synthetic spec: motion_amplitude must be in [0, image_size/8]");
    if (s.noise_sigma < 0) throw std::invalid_argument("synthetic spec: noise_sigma must be >= 0");
    if (s.distractor_gain < 0) throw std::invalid_argument("synthetic spec: distractor_gain must be >= 0");
}

const VideoTruth& SyntheticTruth::find(std::string_view video_id) const {
    for (const auto& v : videos)
        if (v.video_id == video_id) return v;
    throw std::out_of_range("no synthetic truth for video " + std::string(video_id));
}

FlowField SyntheticTruth::displacement(const VideoTruth& video, std::size_t frame) {
    const std::size_t n = video.image_size;
    FlowField f(n, n);
    const double scale = video.profile.at(frame);
    for (std::size_t y = 0; y < n; ++y)
        for (std::size_t x = 0; x < n; ++x)
            bump_displacement(video.bumps, scale, static_cast<double>(x), static_cast<double>(y), f.p[y * n + x], f.q[y * n + x]);
    return f;
}

SyntheticCorpus generate_synthetic_corpus(const SyntheticSpec& spec) {
    validate_spec(spec);
    const Rng root(spec.seed);
    const double size = static_cast<double>(spec.image_size);
    const std::size_t n = spec.image_size;
    const std::size_t frames = spec.frames_per_video;
    SyntheticCorpus corpus;

    for (std::size_t s = 0; s < spec.subjects; ++s) {
        Rng subject_rng = root.split(s);
        const Landmarks lm = subject_landmarks(size, subject_rng);
        const Texture texture = subject_texture(size, lm, subject_rng);
        const std::string subject = "synthetic:s" + two_digit(s, 2);

        for (std::size_t v = 0; v < spec.videos_per_subject; ++v) {
            Rng video_rng = subject_rng.split(1000 + v);
            const auto emotion = static_cast<Emotion>(v % kNumClasses);
            const std::size_t lo = frames / 4;
            const std::size_t hi = (3 * frames) / 4;  // exclusive
            const std::size_t apex = lo + static_cast<std::size_t>(video_rng.below(hi - lo));

            VideoTruth truth;
            truth.video_id = "s" + two_digit(s, 2) + "_v" + two_digit(v, 2);
            truth.apex_index = apex;
            truth.region = emotion;
            truth.bumps = class_bumps(emotion, size, lm);
            Rng nuisance = video_rng.split(500);
            for (std::size_t d = 0; d < spec.distractors; ++d) {
                const double angle = nuisance.uniform(-std::numbers::pi, std::numbers::pi);
                truth.bumps.push_back({nuisance.uniform(0.2, 0.8) * size, nuisance.uniform(0.2, 0.8) * size,
                                       kRegionSigma * size, spec.distractor_gain * std::cos(angle),
                                       spec.distractor_gain * std::sin(angle)});
            }
            truth.image_size = n;

            SampleRecord rec;
            rec.subject_id = subject;
            rec.video_id = truth.video_id;
            rec.emotion = emotion;
            rec.onset_index = 0;
            rec.apex_index = apex;
            rec.source_db = "synthetic";

            std::vector<GrayImage> video;
            for (std::size_t t = 0; t < frames; ++t) {
                const double scale = spec.motion_amplitude * time_profile(t, apex);
                truth.profile.push_back(scale);
                Rng noise = video_rng.split(t);
                std::vector<double> px(n * n);
                double mag_sum = 0.0;
                for (std::size_t y = 0; y < n; ++y)
                    for (std::size_t x = 0; x < n; ++x) {
                        double dx, dy;
                        bump_displacement(truth.bumps, scale, static_cast<double>(x), static_cast<double>(y), dx, dy);
                        mag_sum += std::hypot(dx, dy);
                        double value = texture(static_cast<double>(x) - dx, static_cast<double>(y) - dy);
                        if (spec.noise_sigma > 0) value += spec.noise_sigma * noise.normal();
                        px[y * n + x] = std::round(std::clamp(value, 0.0, 1.0) * 255.0) / 255.0;
                    }
                truth.mean_displacement.push_back(mag_sum / static_cast<double>(n * n));
                video.push_back(GrayImage(n, n, std::move(px)));
                rec.frame_paths.push_back("frames/" + truth.video_id + "/frame_" + two_digit(t, 3) + ".pgm");
            }
            corpus.records.push_back(std::move(rec));
            corpus.truth.videos.push_back(std::move(truth));
            corpus.frames.push_back(std::move(video));
        }
    }
    return corpus;
}

void write_corpus(const SyntheticCorpus& corpus, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (std::size_t i = 0; i < corpus.records.size(); ++i) {
        const auto& rec = corpus.records[i];
        for (std::size_t t = 0; t < rec.frame_paths.size(); ++t) {
            const auto path = dir / rec.frame_paths[t];
            std::filesystem::create_directories(path.parent_path());
            save_pgm(corpus.frames[i][t], path);
        }
    }
    save_manifest(corpus.records, dir / "manifest.json");

    nlohmann::json videos = nlohmann::json::array();
    for (const auto& v : corpus.truth.videos) {
        nlohmann::json bumps = nlohmann::json::array();
        for (const auto& b : v.bumps) bumps.push_back({b.cx, b.cy, b.sigma, b.dx, b.dy});
        videos.push_back({{"video_id", v.video_id},
                          {"apex_index", v.apex_index},
                          {"region", static_cast<int>(v.region)},
                          {"image_size", v.image_size},
                          {"profile", v.profile},
                          {"mean_displacement", v.mean_displacement},
                          {"bumps", bumps}});
    }
    std::ofstream out(dir / "truth.json");
    out << nlohmann::json{{"videos", videos}}.dump(1) << '\n';
}

SyntheticTruth load_truth(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open truth file " + path.string());
    const auto doc = nlohmann::json::parse(in);
    SyntheticTruth truth;
    for (const auto& v : doc.at("videos")) {
        VideoTruth t;
        t.video_id = v.at("video_id").get<std::string>();
        t.apex_index = v.at("apex_index").get<std::size_t>();
        t.region = emotion_from_index(v.at("region").get<int>());
        t.image_size = v.at("image_size").get<std::size_t>();
        t.profile = v.at("profile").get<std::vector<double>>();
        t.mean_displacement = v.at("mean_displacement").get<std::vector<double>>();
        for (const auto& b : v.at("bumps")) t.bumps.push_back({b[0], b[1], b[2], b[3], b[4]});
        truth.videos.push_back(std::move(t));
    }
    return truth;
}

}  // namespace mex::img
