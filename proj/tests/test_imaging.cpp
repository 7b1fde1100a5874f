#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <set>

#include "mexflow/binary_io.hpp"
#include "mexflow/dataset.hpp"
#include "mexflow/image.hpp"
#include "mexflow/rng.hpp"
#include "support.hpp"

using namespace mex;
using namespace mex::img;

namespace {

std::string pgm(std::size_t w, std::size_t h, int maxval, const std::string& payload) {
    return "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n" + std::to_string(maxval) + "\n" + payload;
}

// Pixel-centre aligned bilinear sample with edge clamping.
double bilinear_oracle(const Field& f, double x, double y) {
    x = std::clamp(x, 0.0, static_cast<double>(f.width - 1));
    y = std::clamp(y, 0.0, static_cast<double>(f.height - 1));
    const double x0 = std::floor(x), y0 = std::floor(y);
    const auto at = [&](double xx, double yy) {
        return f(static_cast<std::size_t>(std::min(xx, static_cast<double>(f.width - 1))),
                 static_cast<std::size_t>(std::min(yy, static_cast<double>(f.height - 1))));
    };
    const double ax = x - x0, ay = y - y0;
    return (1 - ax) * (1 - ay) * at(x0, y0) + ax * (1 - ay) * at(x0 + 1, y0) + (1 - ax) * ay * at(x0, y0 + 1) +
           ax * ay * at(x0 + 1, y0 + 1);
}

SyntheticSpec small_spec() {
    SyntheticSpec s;
    s.subjects = 2;
    s.videos_per_subject = 3;
    s.frames_per_video = 12;
    s.image_size = 32;
    s.motion_amplitude = 1.5;
    s.seed = 11;
    return s;
}

}  // namespace

TEST_CASE("GrayImage invariants") {
    CHECK_THROWS_AS(GrayImage(0, 3), std::invalid_argument);
    CHECK_THROWS_AS(GrayImage(2, 2, std::vector<double>{0, 0.5, 1.2, 0}), std::invalid_argument);
    CHECK_THROWS_AS(GrayImage(2, 2, std::vector<double>{0, 0.5, 1}), std::invalid_argument);
    GrayImage g(3, 2);
    g.set(1, 1, 7.0);
    g.set(0, 0, -1.0);
    CHECK(g(1, 1) == 1.0);
    CHECK(g(0, 0) == 0.0);
}

TEST_CASE("PGM decoding and encoding") {
    SUBCASE("2x2 known bytes") {
        const std::string payload{'\x00', '\x80', '\xff', '\x40'};
        const auto bytes = pgm(2, 2, 255, payload);
        const GrayImage g = decode_pgm({bytes.begin(), bytes.end()});
        CHECK(g.width() == 2);
        CHECK(g(0, 0) == 0.0);
        CHECK(g(1, 0) == 128.0 / 255.0);
        CHECK(g(0, 1) == 1.0);
        CHECK(g(1, 1) == 64.0 / 255.0);
    }
    SUBCASE("header comments are skipped") {
        const std::string bytes = "P5\n# made by hand\n1 1\n255\n\x7f";
        CHECK(decode_pgm({bytes.begin(), bytes.end()})(0, 0) == 127.0 / 255.0);
    }
    SUBCASE("round trip is exact on 8-bit content") {
        testing::TempDir dir("pgm");
        Rng rng(1);
        std::vector<double> px(17 * 9);
        for (auto& v : px) v = static_cast<double>(rng.below(256)) / 255.0;
        const GrayImage g(17, 9, px);
        save_pgm(g, dir / "a.pgm");
        CHECK(load_pgm(dir / "a.pgm") == g);
        CHECK(encode_pgm(load_pgm(dir / "a.pgm")) == encode_pgm(g));
    }
    SUBCASE("rejections carry byte offsets") {
        const auto bad_max = pgm(1, 1, 65535, "\x01\x02");
        CHECK_THROWS_WITH_AS(decode_pgm({bad_max.begin(), bad_max.end()}), doctest::Contains("byte offset"), io::FormatError);
        const std::string bad_magic = "P2\n1 1\n255\n0";
        CHECK_THROWS_AS(decode_pgm({bad_magic.begin(), bad_magic.end()}), io::FormatError);
        const auto truncated = pgm(4, 4, 255, "abc");
        CHECK_THROWS_WITH_AS(decode_pgm({truncated.begin(), truncated.end()}), doctest::Contains("byte offset"),
                             io::FormatError);
        CHECK_THROWS(load_pgm("/nonexistent/file.pgm"));
    }
}

TEST_CASE("manifest loading") {
    testing::TempDir dir("manifest");
    std::filesystem::create_directories(dir / "f");
    const GrayImage frame(4, 4, 0.5);
    for (int i = 0; i < 3; ++i) save_pgm(frame, dir / "f" / (std::to_string(i) + ".pgm"));
    auto sample = [](const std::string& video, const std::string& subject, const std::string& db, nlohmann::json apex) {
        return nlohmann::json{{"subject_id", subject},
                              {"video_id", video},
                              {"emotion", 1},
                              {"frames", {"f/0.pgm", "f/1.pgm", "f/2.pgm"}},
                              {"onset_index", 0},
                              {"apex_index", apex},
                              {"source_db", db}};
    };
    auto write = [&](const nlohmann::json& samples) {
        std::ofstream(dir / "m.json") << nlohmann::json{{"samples", samples}}.dump();
        return dir / "m.json";
    };

    SUBCASE("valid two-record manifest resolves paths") {
        const auto recs = load_manifest(write({sample("v1", "01", "casme2", 1), sample("v2", "01", "casme2", nullptr)}));
        REQUIRE(recs.size() == 2);
        CHECK(recs[0].apex_index == 1u);
        CHECK_FALSE(recs[1].apex_index.has_value());
        CHECK(std::filesystem::path(recs[0].frame_paths[0]).is_absolute() == std::filesystem::path(dir.path()).is_absolute());
        CHECK(std::filesystem::exists(recs[0].frame_paths[2]));
        CHECK(load_frames(recs[0]).size() == 3);
    }
    SUBCASE("apex equal to onset is rejected naming the video") {
        CHECK_THROWS_WITH_AS(load_manifest(write(nlohmann::json::array({sample("bad_video", "01", "smic", 0)}))), doctest::Contains("bad_video"),
                             ManifestError);
    }
    SUBCASE("missing field and missing frame file") {
        auto s = sample("v1", "01", "smic", 1);
        s.erase("emotion");
        CHECK_THROWS_WITH_AS(load_manifest(write(nlohmann::json::array({s}))), doctest::Contains("emotion"), ManifestError);
        auto t = sample("v2", "01", "smic", 1);
        t["frames"][1] = "f/none.pgm";
        CHECK_THROWS_WITH_AS(load_manifest(write(nlohmann::json::array({t}))), doctest::Contains("does not exist"), ManifestError);
    }
    SUBCASE("composite databases namespace subjects and never collide") {
        const std::vector<std::pair<std::string, std::string>> ids{{"smic", "01"}, {"casme2", "01"}, {"samm", "01"},
                                                                   {"smic", "02"}, {"casme2", "17"}, {"samm", "006"}};
        nlohmann::json samples = nlohmann::json::array();
        for (std::size_t i = 0; i < ids.size(); ++i)
            samples.push_back(sample("v" + std::to_string(i), ids[i].second, ids[i].first, 2));
        const auto recs = load_manifest(write(samples));
        std::set<std::string> subjects;
        for (const auto& r : recs) subjects.insert(r.subject_id);
        CHECK(subjects.size() == ids.size());
        CHECK(recs[0].subject_id == "smic:01");
        CHECK(recs[1].subject_id == "casme2:01");
    }
    SUBCASE("save then load preserves records") {
        const auto recs = load_manifest(write(nlohmann::json::array({sample("v1", "01", "casme2", 2)})));
        save_manifest(recs, dir / "copy.json");
        const auto again = load_manifest(dir / "copy.json");
        CHECK(again[0].subject_id == recs[0].subject_id);
        CHECK(again[0].frame_paths == recs[0].frame_paths);
        CHECK(again[0].apex_index == recs[0].apex_index);
    }
}

TEST_CASE("normalize_to_input") {
    SUBCASE("constant field maps to zeros") {
        const auto t = normalize_to_input(Field(40, 33, 3.7));
        CHECK(t.shape() == nn::Shape{28, 28, 1});
        for (double v : t.data()) CHECK(v == 0.0);
    }
    SUBCASE("28x28 input is only rescaled") {
        Rng rng(2);
        Field f(28, 28);
        for (auto& v : f.values) v = rng.uniform(-5, 9);
        const auto t = normalize_to_input(f);
        const auto [lo, hi] = std::minmax_element(f.values.begin(), f.values.end());
        for (std::size_t i = 0; i < f.size(); ++i) CHECK(t[i] == doctest::Approx(2 * (f.values[i] - *lo) / (*hi - *lo) - 1).epsilon(1e-12));
    }
    SUBCASE("56x56 checkerboard against a bilinear oracle") {
        Field f(56, 56);
        for (std::size_t y = 0; y < 56; ++y)
            for (std::size_t x = 0; x < 56; ++x) f(x, y) = ((x / 3 + y / 5) % 2) ? 1.0 : 0.0;
        const Field r = resize_bilinear(f, 28, 28);
        for (std::size_t y = 0; y < 28; ++y)
            for (std::size_t x = 0; x < 28; ++x)
                CHECK(r(x, y) == doctest::Approx(bilinear_oracle(f, 2.0 * x + 0.5, 2.0 * y + 0.5)).epsilon(1e-12));
    }
    SUBCASE("range and affine intensity invariance") {
        Rng rng(3);
        for (int trial = 0; trial < 10; ++trial) {
            Field f(20 + rng.below(40), 20 + rng.below(40));
            for (auto& v : f.values) v = rng.normal();
            Field g = f;
            const double a = rng.uniform(0.1, 10), b = rng.uniform(-50, 50);
            for (auto& v : g.values) v = a * v + b;
            const auto tf = normalize_to_input(f), tg = normalize_to_input(g);
            for (std::size_t i = 0; i < tf.size(); ++i) {
                CHECK(tf[i] >= -1.0);
                CHECK(tf[i] <= 1.0);
                CHECK(tf[i] == doctest::Approx(tg[i]).epsilon(1e-9));
            }
        }
    }
    SUBCASE("empty and non-finite fields are rejected") {
        CHECK_THROWS(normalize_to_input(Field()));
        Field f(4, 4);
        f(1, 1) = NAN;
        CHECK_THROWS(normalize_to_input(f));
    }
}

TEST_CASE("synthetic corpus") {
    SUBCASE("counting and class balance") {
        SyntheticSpec s;
        s.subjects = 6;
        s.videos_per_subject = 3;
        s.frames_per_video = 40;
        s.image_size = 32;
        const auto c = generate_synthetic_corpus(s);
        CHECK(c.records.size() == 18);
        std::array<int, 3> counts{};
        for (const auto& r : c.records) ++counts[static_cast<int>(r.emotion)];
        CHECK(counts == std::array<int, 3>{6, 6, 6});
        for (const auto& r : c.records) {
            CHECK(validate_record(r).empty());
            CHECK(r.frame_count() == 40);
            CHECK(*r.apex_index >= 10);
            CHECK(*r.apex_index < 30);
        }
    }
    SUBCASE("truth displacement is unimodal with its maximum at the apex") {
        const auto c = generate_synthetic_corpus(small_spec());
        for (const auto& v : c.truth.videos) {
            const auto& m = v.mean_displacement;
            for (std::size_t t = 1; t <= v.apex_index; ++t) CHECK(m[t] > m[t - 1]);
            for (std::size_t t = v.apex_index + 1; t < m.size(); ++t) CHECK(m[t] < m[t - 1]);
        }
    }
    SUBCASE("fixed seed gives identical corpora and files") {
        const auto a = generate_synthetic_corpus(small_spec());
        const auto b = generate_synthetic_corpus(small_spec());
        CHECK(a.frames == b.frames);
        testing::TempDir d1("corpus1"), d2("corpus2");
        write_corpus(a, d1.path());
        write_corpus(b, d2.path());
        CHECK(testing::hash_tree(d1.path()) == testing::hash_tree(d2.path()));
        auto other = small_spec();
        other.seed = 12;
        CHECK(generate_synthetic_corpus(other).frames != a.frames);
    }
    SUBCASE("zero amplitude gives identical frames up to noise") {
        auto s = small_spec();
        s.motion_amplitude = 0.0;
        s.noise_sigma = 0.0;
        const auto c = generate_synthetic_corpus(s);
        for (const auto& video : c.frames)
            for (const auto& f : video) CHECK(f == video.front());
        for (const auto& v : c.truth.videos) CHECK(v.apex_index > 0);
    }
    SUBCASE("written corpus loads back through the manifest") {
        const auto c = generate_synthetic_corpus(small_spec());
        testing::TempDir d("corpus");
        write_corpus(c, d.path());
        const auto recs = load_manifest(d / "manifest.json");
        REQUIRE(recs.size() == c.records.size());
        CHECK(recs[0].subject_id == c.records[0].subject_id);
        CHECK(load_frames(recs[4]) == c.frames[4]);
        const auto truth = load_truth(d / "truth.json");
        CHECK(truth.find(recs[4].video_id).apex_index == c.truth.videos[4].apex_index);
    }
    SUBCASE("no distractors leaves only the two expression bumps") {
        const auto c = generate_synthetic_corpus(small_spec());
        for (const auto& v : c.truth.videos) CHECK(v.bumps.size() == 2);
        auto s = small_spec();
        s.distractors = 3;
        const auto d = generate_synthetic_corpus(s);
        for (const auto& v : d.truth.videos) CHECK(v.bumps.size() == 5);
        CHECK(d.truth.videos[0].apex_index == c.truth.videos[0].apex_index);
    }
    SUBCASE("spec validation") {
        auto s = small_spec();
        s.frames_per_video = 3;
        CHECK_THROWS(generate_synthetic_corpus(s));
        s = small_spec();
        s.motion_amplitude = 5.0;  // image_size 32 allows at most 4
        CHECK_THROWS(generate_synthetic_corpus(s));
    }
}
