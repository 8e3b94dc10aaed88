#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cropcast/common.hpp"

namespace cropcast::ingest {

enum class Split { train, test };

struct Observation {
	int week_index = 0; // 0-based position in the entity's timeline
	int iso_week = 0;   // 1..53
	int year = 0;       // ISO week-based year
	double yield_value = 0.0;
	bool forward_filled = false; // reporting gap filled before differencing
};

struct Entity {
	std::string entity_id;
	std::map<std::string, std::string> metadata;
	std::vector<Observation> observations; // sorted, week_index strictly increasing
	Split split = Split::train;
};

// Anomalies injected on the baseline side of synthetic runs. Spikes are
// additive at one week; biases are multiplicative over every week.
enum class ArtifactKind { pre_season_spike, post_season_spike, over_bias, under_bias };

struct ArtifactSpec {
	ArtifactKind kind = ArtifactKind::pre_season_spike;
	double magnitude = 0.0; // spikes: fraction of entity amplitude; biases: fraction
};

struct ResolvedArtifact {
	std::string entity_id;
	int week_index = -1; // -1 for whole-series biases
	ArtifactKind kind = ArtifactKind::pre_season_spike;
	double magnitude = 0.0; // spikes: yield units; biases: fraction
};

struct EntityCollection {
	std::vector<Entity> entities;
	std::string dataset_name;
	double normalization_scale = 1.0; // divisor applied by normalize()
	std::vector<ResolvedArtifact> baseline_artifacts;

	std::vector<const Entity *> train_entities() const;
	std::vector<const Entity *> test_entities() const;
	const Entity *find(const std::string &id) const;
};

struct Quantiles {
	double q10 = 0.0;
	double q50 = 0.0;
	double q90 = 0.0;
};

class PredictionTable {
public:
	void insert(const std::string &entity_id, int week_index, Quantiles q);
	std::optional<Quantiles> lookup(const std::string &entity_id, int week_index) const;
	std::size_t size() const { return rows_.size(); }

private:
	std::map<std::pair<std::string, int>, Quantiles> rows_;
};

// Column mapping for long-format CSV ingestion. Either `date_column` or both
// `year_column` and `week_column` must be set.
struct CsvSchema {
	std::string entity_column;
	std::string yield_column;
	std::string date_column;                  // e.g. "Week Ending"
	std::string year_column;                  // alternative to date_column
	std::string week_column;                  //   "
	std::vector<std::string> metadata_columns;
	int train_year_max = 0;                   // split cutoff: year <= cutoff -> train
	bool cumulative = false;                  // difference per (entity, year) on load
};

std::string artifact_kind_name(ArtifactKind kind);
ArtifactKind artifact_kind_from_name(const std::string &name);

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

EntityCollection load_long_csv(const std::string &path, const CsvSchema &schema);

// Week-by-week rate from a cumulative series. Negative revisions floor at 0.
std::vector<double> difference_cumulative(const std::vector<double> &cumulative);

// Divides every yield (and additive artifact magnitudes) by the maximum
// training yield; records the divisor. Test values may exceed 1.0.
EntityCollection normalize(EntityCollection collection);

enum class SyntheticProfile { seasonal, continuous };

EntityCollection generate_synthetic(std::uint64_t seed, int n_train, int n_test,
                                    SyntheticProfile profile,
                                    const std::vector<ArtifactSpec> &artifacts);

PredictionTable load_external_predictions(const std::string &path);

// CSV writers used by the gen-synthetic subcommand.
void write_dataset_csv(const EntityCollection &collection, const std::string &path);
void write_artifacts_csv(const std::vector<ResolvedArtifact> &artifacts, const std::string &path);
std::vector<ResolvedArtifact> load_artifacts_csv(const std::string &path);

} // namespace cropcast::ingest
