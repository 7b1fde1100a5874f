#pragma once

// JSON forms of every run configuration. Parsers reject unknown keys and fill
// missing ones with defaults.

#include <json.hpp>
#include <stdexcept>

#include "mexflow/biwoof.hpp"
#include "mexflow/cnn.hpp"
#include "mexflow/dataset.hpp"
#include "mexflow/evaluation.hpp"
#include "mexflow/flow.hpp"
#include "mexflow/gan.hpp"

namespace mex::config {

using Json = nlohmann::ordered_json;

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

Json to_json(const img::SyntheticSpec& s);
Json to_json(const flow::FlowConfig& c);
Json to_json(const biwoof::BiwoofConfig& c);
Json to_json(const biwoof::SvmParams& p);
Json to_json(const cnn::StreamSpec& s);
Json to_json(const cnn::TrainConfig& c);
Json to_json(const gan::GanConfig& c);
Json to_json(const eval::ExperimentConfig& c);

img::SyntheticSpec synthetic_spec_from(const Json& j);
flow::FlowConfig flow_config_from(const Json& j);
biwoof::BiwoofConfig biwoof_config_from(const Json& j);
biwoof::SvmParams svm_params_from(const Json& j);
cnn::StreamSpec stream_spec_from(const Json& j);
cnn::TrainConfig train_config_from(const Json& j);
gan::GanConfig gan_config_from(const Json& j);
eval::ExperimentConfig experiment_config_from(const Json& j);

// Full experiment report, including fold predictions and PCA models.
Json to_json(const eval::ExperimentReport& r);
eval::ExperimentReport report_from(const Json& j);

// Throws ConfigError naming `where` and the first key not in `allowed`.
void expect_keys(const Json& j, std::initializer_list<std::string_view> allowed, std::string_view where);

}  // namespace mex::config
