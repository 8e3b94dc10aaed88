#pragma once

#include <string>

#include <json.hpp>

#include "cropcast/runner.hpp"

namespace cropcast::cli {

// Config file is a single JSON object; every key can be overridden by a
// command-line flag.
runner::RunConfig config_from_json(const nlohmann::json &j);

ingest::CsvSchema schema_from_json(const nlohmann::json &j);

// "seed=7,train=30,test=10,profile=seasonal,artifacts=pre_season_spike:0.3+post_season_spike:0.3"
runner::SyntheticSpec parse_synthetic_spec(const std::string &text);

// "pre_season_spike:0.3+over_bias:0.1"
std::vector<ingest::ArtifactSpec> parse_artifact_list(const std::string &text);

// Accepts either a CSV path or an inline "synthetic:..." spec.
void apply_dataset_flag(runner::RunConfig &config, const std::string &dataset);

// Inline JSON text or a path to a JSON file.
ingest::CsvSchema schema_from_flag(const std::string &flag_value);

} // namespace cropcast::cli
