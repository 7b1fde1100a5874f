#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "mexflow/dataset.hpp"

namespace mex::img {

using nlohmann::json;

std::string_view emotion_name(Emotion e) {
    switch (e) {
        case Emotion::negative: return "negative";
        case Emotion::positive: return "positive";
        case Emotion::surprise: return "surprise";
    }
    return "unknown";
}

Emotion emotion_from_index(int index) {
    if (index < 0 || index >= static_cast<int>(kNumClasses))
        throw std::invalid_argument("emotion index " + std::to_string(index) + " outside {0,1,2}");
    return static_cast<Emotion>(index);
}

std::vector<std::string> validate_record(const SampleRecord& r) {
    std::vector<std::string> errors;
    if (r.subject_id.empty()) errors.push_back("empty subject_id");
    if (r.video_id.empty()) errors.push_back("empty video_id");
    if (r.frame_paths.size() < 2) errors.push_back("needs at least 2 frames, has " + std::to_string(r.frame_paths.size()));
    if (r.onset_index >= r.frame_paths.size()) errors.push_back("onset_index " + std::to_string(r.onset_index) + " out of range");
    if (r.apex_index) {
        if (*r.apex_index <= r.onset_index)
            errors.push_back("apex_index " + std::to_string(*r.apex_index) + " must exceed onset_index " +
                             std::to_string(r.onset_index));
        if (*r.apex_index >= r.frame_paths.size())
            errors.push_back("apex_index " + std::to_string(*r.apex_index) + " beyond frame count " +
                             std::to_string(r.frame_paths.size()));
    }
    return errors;
}

namespace {

std::string namespaced_subject(const std::string& db, const std::string& subject) {
    if (db.empty() || subject.rfind(db + ":", 0) == 0) return subject;
    return db + ":" + subject;
}

}  // namespace

std::vector<SampleRecord> load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ManifestError("cannot open manifest " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ManifestError(path.string() + ": invalid JSON: " + e.what());
    }
    if (!doc.is_object() || !doc.contains("samples") || !doc["samples"].is_array())
        throw ManifestError(path.string() + ": top-level object with a \"samples\" array required");

    const auto base = path.parent_path();
    std::vector<SampleRecord> records;
    std::vector<std::string> diagnostics;
    std::set<std::string> seen_videos;
    std::size_t index = 0;
    for (const auto& item : doc["samples"]) {
        const std::string label = "sample " + std::to_string(index++);
        std::vector<std::string> errs;
        SampleRecord r;
        auto need = [&](const char* key) -> const json* {
            if (!item.is_object() || !item.contains(key)) {
                errs.push_back(std::string("missing field \"") + key + "\"");
                return nullptr;
            }
            return &item.at(key);
        };
        try {
            if (auto* v = need("video_id")) r.video_id = v->get<std::string>();
            if (auto* v = need("subject_id")) r.subject_id = v->get<std::string>();
            if (auto* v = need("source_db")) r.source_db = v->get<std::string>();
            if (auto* v = need("emotion")) r.emotion = emotion_from_index(v->get<int>());
            if (auto* v = need("onset_index")) r.onset_index = v->get<std::size_t>();
            if (auto* v = need("apex_index"); v && !v->is_null()) r.apex_index = v->get<std::size_t>();
            if (auto* v = need("frames")) {
                for (const auto& f : *v) {
                    std::filesystem::path fp = f.get<std::string>();
                    if (fp.is_relative()) fp = base / fp;
                    r.frame_paths.push_back(fp.lexically_normal().string());
                }
            }
        } catch (const std::exception& e) {
            errs.push_back(e.what());
        }
        if (errs.empty()) {
            errs = validate_record(r);
            for (const auto& f : r.frame_paths)
                if (!std::filesystem::exists(f)) errs.push_back("frame file does not exist: " + f);
            if (!seen_videos.insert(r.source_db + "/" + r.video_id).second) errs.push_back("duplicate video_id");
        }
        r.subject_id = namespaced_subject(r.source_db, r.subject_id);
        const std::string who = r.video_id.empty() ? label : "video " + r.video_id;
        for (const auto& e : errs) diagnostics.push_back(who + ": " + e);
        records.push_back(std::move(r));
    }
    if (!diagnostics.empty()) {
        std::ostringstream msg;
        msg << path.string() << ": " << diagnostics.size() << " manifest error(s)";
        for (const auto& d : diagnostics) msg << "\n  " << d;
        throw ManifestError(msg.str());
    }
    return records;
}

void save_manifest(const std::vector<SampleRecord>& records, const std::filesystem::path& path) {
    const auto base = std::filesystem::absolute(path).parent_path();
    json samples = json::array();
    for (const auto& r : records) {
        json frames = json::array();
        for (const auto& f : r.frame_paths) {
            std::filesystem::path fp = f;
            frames.push_back(fp.is_absolute() ? fp.lexically_relative(base).generic_string() : fp.generic_string());
        }
        json item = {{"subject_id", r.subject_id},
                     {"video_id", r.video_id},
                     {"emotion", static_cast<int>(r.emotion)},
                     {"frames", frames},
                     {"onset_index", r.onset_index},
                     {"apex_index", r.apex_index ? json(*r.apex_index) : json(nullptr)},
                     {"source_db", r.source_db}};
        samples.push_back(std::move(item));
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write manifest " + path.string());
    out << json{{"samples", samples}}.dump(2) << '\n';
}

std::vector<GrayImage> load_frames(const SampleRecord& record) {
    std::vector<GrayImage> frames;
    frames.reserve(record.frame_paths.size());
    for (const auto& f : record.frame_paths) frames.push_back(load_pgm(f));
    for (const auto& f : frames)
        if (f.width() != frames.front().width() || f.height() != frames.front().height())
            throw std::runtime_error("video " + record.video_id + ": frames have differing extents");
    return frames;
}

}  // namespace mex::img
