#pragma once

#include <memory>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "cropcast/agent.hpp"
#include "cropcast/evaluation.hpp"
#include "cropcast/ingest.hpp"
#include "cropcast/selection.hpp"

namespace cropcast::runner {

struct SyntheticSpec {
	std::uint64_t seed = 7;
	int n_train = 30;
	int n_test = 10;
	ingest::SyntheticProfile profile = ingest::SyntheticProfile::seasonal;
	std::vector<ingest::ArtifactSpec> artifacts;
};

struct RunConfig {
	// dataset: either a CSV path with a schema, or a synthetic spec
	std::string dataset_path;
	ingest::CsvSchema schema;
	bool use_synthetic = false;
	SyntheticSpec synthetic;
	std::string artifacts_path; // resolved baseline artifacts for CSV datasets
	bool apply_normalization = true;

	// baseline source: external predictions CSV, or the builtin forecaster
	std::string predictions_path;

	// policy
	std::string policy = "rule"; // rule | remote
	agent::RemoteEndpoint endpoint;

	int horizon = 2;
	int k = 50;
	std::set<trace::ToolName> enabled_tools{trace::kAllTools.begin(), trace::kAllTools.end()};
	int reflection_interval = 10;
	std::uint64_t profile_sample_seed = 1;
	bool per_plot_bias = false; // scope the position-bias table per plot

	std::string out_dir;   // empty: nothing written
	std::string cache_path; // DTW ranking cache; defaults into out_dir
	bool write_memory_dump = false;

	nlohmann::json echo() const;
};

struct RunReport {
	std::vector<trace::CorrectionRecord> records;
	double naive_scale = 0.0;
	int skipped_predictions = 0;
	std::string dataset_profile;
	double normalization_scale = 1.0;
	selection::SimilarityRanking ranking;
	nlohmann::json config_echo;
	nlohmann::json summary; // metrics, per-entity table, tool usage

	std::string records_jsonl() const;
};

enum class Eligibility { correct, passthrough };

// Correction is withheld until at least one lagged actual has been recorded
// for the entity.
Eligibility eligibility(const ingest::Entity &entity, int week, const memory::MemoryStore &mem);

RunReport run_season(const RunConfig &config);

void write_report(const RunReport &report, const std::string &out_dir);
std::vector<trace::CorrectionRecord> load_records_jsonl(const std::string &path);

} // namespace cropcast::runner
