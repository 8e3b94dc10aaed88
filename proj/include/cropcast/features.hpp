#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "cropcast/common.hpp"
#include "cropcast/ingest.hpp"
#include "cropcast/policy.hpp"

namespace cropcast::features {

enum class GrowthPattern { peak_middle, increasing, decreasing, flat };

std::string growth_pattern_name(GrowthPattern p);

struct HarvestWindow {
	int start_iso_week = 0; // 0 when the series never leaves zero
	int peak_iso_week = 0;
	int end_iso_week = 0;
};

/// Per-entity curve geometry stored on each knowledge-graph node.
struct CurveShapeFeatures {
	double mean = 0.0;
	double std_dev = 0.0;       // population
	double cv = 0.0;            // std/mean, 0 when mean is 0
	double volatility = 0.0;    // population std of week-on-week differences
	double peak_position = 0.0; // argmax index / N, earliest tie
	double zero_fraction = 0.0;
	double early_mean = 0.0;
	double mid_mean = 0.0;
	double late_mean = 0.0;
	GrowthPattern growth_pattern = GrowthPattern::flat;
	HarvestWindow harvest_window;
};

// Retrieval vector for similarity search:
// [cv, t_peak, t_trough, min(n_peaks,5)/5, y_peak/mean, mean/y_peak].
// The spikiness pair is 0 when the mean is 0.
struct ShapeVector {
	std::array<double, 6> v{};

	double distance(const ShapeVector &other) const;
};

ShapeVector compute_shape_vector(const std::vector<double> &series);

struct KgNode {
	std::map<std::string, std::string> metadata;
	CurveShapeFeatures features;
	ShapeVector shape;
	std::map<int, double> year_zero_fractions;
};

// Feature store over training entities only; test entities are rejected.
class KnowledgeGraph {
public:
	void insert(const std::string &entity_id, KgNode node);
	const KgNode *find(const std::string &entity_id) const;
	const std::map<std::string, KgNode> &nodes() const { return nodes_; }
	bool empty() const { return nodes_.empty(); }
	std::size_t size() const { return nodes_.size(); }

	std::string to_json_string() const;
	static KnowledgeGraph from_json_string(const std::string &text);
	void save(const std::string &path) const;
	static KnowledgeGraph load(const std::string &path);

private:
	std::map<std::string, KgNode> nodes_; // sorted by entity_id
};

enum class DatasetKind { zero_valley, positive_floor };

std::string dataset_kind_name(DatasetKind k);

struct DatasetProfile {
	DatasetKind kind = DatasetKind::zero_valley;
	// (entity_id, year) -> zero fraction for the sampled entities
	std::vector<std::tuple<std::string, int, double>> evidence;
	// Declining-phase projections below this (normalized) value floor to zero.
	double zero_floor = 0.0;
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

CurveShapeFeatures curve_features(const ingest::Entity &entity);

GrowthPattern classify_growth_pattern(double early, double mid, double late);

KnowledgeGraph build_kg(const std::vector<const ingest::Entity *> &train_entities);

DatasetProfile profile_dataset(const KnowledgeGraph &kg, ReasonerPolicy &policy,
                               std::uint64_t sample_seed);

std::map<int, double> per_year_zero_fractions(const ingest::Entity &entity);

} // namespace cropcast::features
