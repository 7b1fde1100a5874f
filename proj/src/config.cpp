#include "mexflow/config.hpp"

#include <algorithm>

namespace mex::config {

void expect_keys(const Json& j, std::initializer_list<std::string_view> allowed, std::string_view where) {
    if (!j.is_object()) throw ConfigError(std::string(where) + ": expected a JSON object");
    for (const auto& [key, _] : j.items())
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw ConfigError(std::string(where) + ": unknown key '" + key + "'");
}

namespace {

template <class T>
void read(const Json& j, const char* key, T& out, std::string_view where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(std::string(where) + "." + key + ": wrong type");
    }
}

const Json& sub(const Json& j, const char* key) {
    static const Json empty = Json::object();
    return j.contains(key) ? j.at(key) : empty;
}

}  // namespace

Json to_json(const img::SyntheticSpec& s) {
    return {{"subjects", s.subjects},          {"videos_per_subject", s.videos_per_subject},
            {"frames_per_video", s.frames_per_video}, {"image_size", s.image_size},
            {"motion_amplitude", s.motion_amplitude}, {"noise_sigma", s.noise_sigma},
            {"distractors", s.distractors},       {"distractor_gain", s.distractor_gain},
            {"seed", s.seed}};
}

img::SyntheticSpec synthetic_spec_from(const Json& j) {
    const char* w = "synthetic";
    expect_keys(j, {"subjects", "videos_per_subject", "frames_per_video", "image_size", "motion_amplitude", "noise_sigma", "distractors",
                   "distractor_gain", "seed"},
                w);
    img::SyntheticSpec s;
    read(j, "subjects", s.subjects, w);
    read(j, "videos_per_subject", s.videos_per_subject, w);
    read(j, "frames_per_video", s.frames_per_video, w);
    read(j, "image_size", s.image_size, w);
    read(j, "motion_amplitude", s.motion_amplitude, w);
    read(j, "noise_sigma", s.noise_sigma, w);
    read(j, "distractors", s.distractors, w);
    read(j, "distractor_gain", s.distractor_gain, w);
    read(j, "seed", s.seed, w);
    try {
        img::validate_spec(s);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return s;
}

Json to_json(const flow::FlowConfig& c) {
    return {{"method", c.method},
            {"pyramid_levels", c.pyramid_levels},
            {"pyramid_scale", c.pyramid_scale},
            {"horn_schunck", {{"alpha", c.hs.alpha}, {"iterations", c.hs.iterations}, {"warps", c.hs.warps}}},
            {"lucas_kanade",
             {{"window_radius", c.lk.window_radius}, {"eigen_floor", c.lk.eigen_floor}, {"iterations", c.lk.iterations}}},
            {"tvl1",
             {{"lambda", c.tvl1.lambda},
              {"theta", c.tvl1.theta},
              {"tau", c.tvl1.tau},
              {"warps", c.tvl1.warps},
              {"inner_iterations", c.tvl1.inner_iterations}}}};
}

flow::FlowConfig flow_config_from(const Json& j) {
    expect_keys(j, {"method", "pyramid_levels", "pyramid_scale", "horn_schunck", "lucas_kanade", "tvl1"}, "flow");
    flow::FlowConfig c;
    read(j, "method", c.method, "flow");
    read(j, "pyramid_levels", c.pyramid_levels, "flow");
    read(j, "pyramid_scale", c.pyramid_scale, "flow");
    const auto& hs = sub(j, "horn_schunck");
    expect_keys(hs, {"alpha", "iterations", "warps"}, "flow.horn_schunck");
    read(hs, "alpha", c.hs.alpha, "flow.horn_schunck");
    read(hs, "iterations", c.hs.iterations, "flow.horn_schunck");
    read(hs, "warps", c.hs.warps, "flow.horn_schunck");
    const auto& lk = sub(j, "lucas_kanade");
    expect_keys(lk, {"window_radius", "eigen_floor", "iterations"}, "flow.lucas_kanade");
    read(lk, "window_radius", c.lk.window_radius, "flow.lucas_kanade");
    read(lk, "eigen_floor", c.lk.eigen_floor, "flow.lucas_kanade");
    read(lk, "iterations", c.lk.iterations, "flow.lucas_kanade");
    const auto& tv = sub(j, "tvl1");
    expect_keys(tv, {"lambda", "theta", "tau", "warps", "inner_iterations"}, "flow.tvl1");
    read(tv, "lambda", c.tvl1.lambda, "flow.tvl1");
    read(tv, "theta", c.tvl1.theta, "flow.tvl1");
    read(tv, "tau", c.tvl1.tau, "flow.tvl1");
    read(tv, "warps", c.tvl1.warps, "flow.tvl1");
    read(tv, "inner_iterations", c.tvl1.inner_iterations, "flow.tvl1");
    try {
        flow::validate_config(c);
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    return c;
}

Json to_json(const biwoof::BiwoofConfig& c) {
    return {{"blocks_per_side", c.blocks_per_side}, {"orientation_bins", c.orientation_bins}};
}

biwoof::BiwoofConfig biwoof_config_from(const Json& j) {
    expect_keys(j, {"blocks_per_side", "orientation_bins"}, "biwoof");
    biwoof::BiwoofConfig c;
    read(j, "blocks_per_side", c.blocks_per_side, "biwoof");
    read(j, "orientation_bins", c.orientation_bins, "biwoof");
    if (c.blocks_per_side < 1 || c.orientation_bins < 2)
        throw ConfigError("biwoof: blocks_per_side must be >= 1 and orientation_bins >= 2");
    return c;
}

Json to_json(const biwoof::SvmParams& p) { return {{"lambda", p.lambda}, {"epochs", p.epochs}, {"seed", p.seed}}; }

biwoof::SvmParams svm_params_from(const Json& j) {
    expect_keys(j, {"lambda", "epochs", "seed"}, "svm");
    biwoof::SvmParams p;
    read(j, "lambda", p.lambda, "svm");
    read(j, "epochs", p.epochs, "svm");
    read(j, "seed", p.seed, "svm");
    if (!(p.lambda > 0.0) || p.epochs < 1) throw ConfigError("svm: lambda must be > 0 and epochs >= 1");
    return p;
}

Json to_json(const cnn::StreamSpec& s) {
    Json channels = Json::array();
    for (auto c : s.channels) channels.push_back(std::string(deriv::channel_name(c)));
    return {{"channels", channels}, {"fusion", std::string(cnn::fusion_name(s.fusion))}};
}

cnn::StreamSpec stream_spec_from(const Json& j) {
    expect_keys(j, {"channels", "fusion"}, "streams");
    cnn::StreamSpec s;
    try {
        if (j.contains("channels")) {
            s.channels.clear();
            for (const auto& c : j.at("channels")) s.channels.push_back(deriv::parse_channel(c.get<std::string>()));
        } else {
            s.channels = {deriv::Channel::p, deriv::Channel::q};
        }
        if (j.contains("fusion")) s.fusion = cnn::parse_fusion(j.at("fusion").get<std::string>());
        cnn::validate(s);
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("streams: ") + e.what());
    }
    return s;
}

Json to_json(const cnn::TrainConfig& c) {
    return {{"epochs", c.epochs},
            {"learning_rate", c.learning_rate},
            {"batch_size", c.batch_size},
            {"seed", c.seed},
            {"checkpoints", c.checkpoints}};
}

cnn::TrainConfig train_config_from(const Json& j) {
    expect_keys(j, {"epochs", "learning_rate", "batch_size", "seed", "checkpoints"}, "train");
    cnn::TrainConfig c;
    read(j, "epochs", c.epochs, "train");
    read(j, "learning_rate", c.learning_rate, "train");
    read(j, "batch_size", c.batch_size, "train");
    read(j, "seed", c.seed, "train");
    read(j, "checkpoints", c.checkpoints, "train");
    if (c.epochs < 1 || c.batch_size < 1 || !(c.learning_rate >= 0.0))
        throw ConfigError("train: epochs and batch_size must be >= 1, learning_rate >= 0");
    for (auto e : c.checkpoints)
        if (e > c.epochs) throw ConfigError("train: checkpoint " + std::to_string(e) + " exceeds epochs");
    return c;
}

Json to_json(const gan::GanConfig& c) {
    return {{"noise_dim", c.noise_dim},         {"k", c.k},
            {"iterations", c.iterations},       {"batch", c.batch},
            {"generator_lr", c.generator_lr},   {"discriminator_lr", c.discriminator_lr},
            {"seed", c.seed}};
}

gan::GanConfig gan_config_from(const Json& j) {
    const char* w = "gan";
    expect_keys(j, {"noise_dim", "k", "iterations", "batch", "generator_lr", "discriminator_lr", "seed"}, w);
    gan::GanConfig c;
    read(j, "noise_dim", c.noise_dim, w);
    read(j, "k", c.k, w);
    read(j, "iterations", c.iterations, w);
    read(j, "batch", c.batch, w);
    read(j, "generator_lr", c.generator_lr, w);
    read(j, "discriminator_lr", c.discriminator_lr, w);
    read(j, "seed", c.seed, w);
    try {
        gan::validate(c);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return c;
}

// Worker count is left out so results do not depend on how they were computed.
Json to_json(const eval::ExperimentConfig& c) {
    return {{"apex_source", std::string(eval::apex_source_name(c.apex_source))},
            {"flow", to_json(c.flow)},
            {"extractor", std::string(eval::extractor_name(c.extractor))},
            {"streams", to_json(c.streams)},
            {"biwoof", to_json(c.biwoof)},
            {"svm", to_json(c.svm)},
            {"train", to_json(c.train)},
            {"augment", c.augment},
            {"gan", to_json(c.gan)},
            {"pca_epochs", c.pca_epochs},
            {"seed", c.seed}};
}

eval::ExperimentConfig experiment_config_from(const Json& j) {
    const char* w = "experiment";
    expect_keys(j, {"apex_source", "flow", "extractor", "streams", "biwoof", "svm", "train", "augment", "gan", "pca_epochs", "jobs", "seed"}, w);
    eval::ExperimentConfig c;
    try {
        if (j.contains("apex_source")) c.apex_source = eval::parse_apex_source(j.at("apex_source").get<std::string>());
        if (j.contains("extractor")) c.extractor = eval::parse_extractor(j.at("extractor").get<std::string>());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("experiment: ") + e.what());
    }
    c.flow = flow_config_from(sub(j, "flow"));
    c.streams = stream_spec_from(sub(j, "streams"));
    c.biwoof = biwoof_config_from(sub(j, "biwoof"));
    c.svm = svm_params_from(sub(j, "svm"));
    c.train = train_config_from(sub(j, "train"));
    c.gan = gan_config_from(sub(j, "gan"));
    read(j, "augment", c.augment, w);
    read(j, "pca_epochs", c.pca_epochs, w);
    read(j, "jobs", c.jobs, w);
    read(j, "seed", c.seed, w);
    try {
        eval::validate(c);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("experiment: ") + e.what());
    }
    return c;
}

}  // namespace mex::config

namespace mex::config {

namespace {

Json tensor_json(const nn::Tensor& t) { return {{"shape", t.shape()}, {"data", t.storage()}}; }

nn::Tensor tensor_from(const Json& j) {
    return nn::Tensor(j.at("shape").get<nn::Shape>(), j.at("data").get<std::vector<double>>());
}

}  // namespace

Json to_json(const eval::ExperimentReport& r) {
    Json folds = Json::array();
    for (const auto& f : r.folds) {
        Json jf = {{"test_subject", f.test_subject}, {"train_ids", f.train_ids},   {"test_ids", f.test_ids},
                   {"test_labels", f.test_labels},   {"predictions", f.predictions}, {"test_input_hash", f.test_input_hash},
                   {"generated", f.generated}};
        jf["error"] = f.error ? Json(*f.error) : Json(nullptr);
        folds.push_back(jf);
    }
    Json checkpoints = Json::array();
    for (const auto& c : r.checkpoints) checkpoints.push_back(c.epoch);
    Json scatter = Json::array();
    for (const auto& s : r.scatter) {
        Json points = Json::array();
        for (const auto& p : s.points) points.push_back({{"id", p.id}, {"label", p.label}, {"pc1", p.pc1}, {"pc2", p.pc2}});
        scatter.push_back({{"epoch", s.epoch},
                           {"silhouette", s.silhouette},
                           {"points", points},
                           {"pca",
                            {{"mean", s.pca.mean},
                             {"basis", tensor_json(s.pca.basis)},
                             {"variances", s.pca.variances},
                             {"degenerate", s.pca.degenerate}}}});
    }
    return {{"config", to_json(r.config)}, {"checkpoints", checkpoints}, {"folds", folds},
            {"scatter", scatter},          {"failures", r.failures},     {"audit_messages", r.audit_messages}};
}

eval::ExperimentReport report_from(const Json& j) {
    eval::ExperimentReport r;
    try {
        r.config = experiment_config_from(j.at("config"));
        for (const auto& jf : j.at("folds")) {
            eval::FoldResult f;
            f.test_subject = jf.at("test_subject").get<std::string>();
            f.train_ids = jf.at("train_ids").get<std::vector<std::string>>();
            f.test_ids = jf.at("test_ids").get<std::vector<std::string>>();
            f.test_labels = jf.at("test_labels").get<std::vector<std::size_t>>();
            f.predictions = jf.at("predictions").get<std::vector<std::vector<std::size_t>>>();
            f.test_input_hash = jf.at("test_input_hash").get<std::uint64_t>();
            f.generated = jf.at("generated").get<std::size_t>();
            if (!jf.at("error").is_null()) f.error = jf.at("error").get<std::string>();
            r.folds.push_back(std::move(f));
        }
        const auto epochs = j.at("checkpoints").get<std::vector<std::size_t>>();
        r.checkpoints = eval::aggregate_checkpoints(r.folds, epochs);
        for (const auto& js : j.at("scatter")) {
            eval::FeatureScatter s;
            s.epoch = js.at("epoch").get<std::size_t>();
            s.silhouette = js.at("silhouette").get<double>();
            for (const auto& p : js.at("points"))
                s.points.push_back({p.at("id").get<std::string>(), p.at("label").get<std::size_t>(), p.at("pc1").get<double>(),
                                    p.at("pc2").get<double>()});
            const auto& pca = js.at("pca");
            s.pca.mean = pca.at("mean").get<std::vector<double>>();
            s.pca.basis = tensor_from(pca.at("basis"));
            s.pca.variances = pca.at("variances").get<std::vector<double>>();
            s.pca.degenerate = pca.at("degenerate").get<bool>();
            r.scatter.push_back(std::move(s));
        }
        r.failures = j.at("failures").get<std::vector<std::string>>();
        r.audit_messages = j.at("audit_messages").get<std::vector<std::string>>();
        r.audit_passed = r.audit_messages.empty();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("report: ") + e.what());
    }
    return r;
}

}  // namespace mex::config
