#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cropcast/common.hpp"
#include "cropcast/features.hpp"
#include "cropcast/policy.hpp"
#include "cropcast/trace.hpp"

namespace cropcast::memory {

// Percentiles of consecutive week-on-week ratios y_t / y_{t-1} pooled over
// all training plots (pairs with y_{t-1} > 0).
struct JumpDistribution {
	double p01 = 1.0;
	double p05 = 1.0;
	double p10 = 1.0;
	double p90 = 1.0;
	double p95 = 1.0;
	double p99 = 1.0;
};

JumpDistribution jump_distribution(const std::vector<const ingest::Entity *> &train);

// Historical h-step fractional changes keyed by the target's ISO week; feeds
// validate_range's position percentiles.
std::map<int, std::vector<double>> position_change_index(
    const std::vector<const ingest::Entity *> &train, int horizon);

struct ArchivedPlot {
	features::ShapeVector shape;
	int outcome_count = 0;
	double mae_raw = 0.0;
	double mae_corrected = 0.0;
	int source_week = -1; // latest observed week the shape was computed from
};

struct Directive {
	std::string text;
	int created_step = 0; // logical step counter; reports stay byte-reproducible
	std::string source_hash;
};

// Cross-plot persistent memory. Single writer (the runner); tools read a
// consistent snapshot per prediction step. The position-bias table is shared
// across plots by default; per-plot scoping is available behind a flag.
class MemoryStore {
public:
	MemoryStore() = default;
	explicit MemoryStore(bool per_plot_bias) : per_plot_bias_(per_plot_bias) {}

	// --- position bias table -------------------------------------------------
	void record_lagged_error(const std::string &entity_id, int iso_week, double progress,
	                         double predicted, double actual, int source_week = -1);
	double position_bias(int iso_week, double progress,
	                     const std::string &entity_id = "") const;
	static int progress_decile(double progress);

	// Confirmed lagged actuals per entity, counted even when the fractional
	// error was skipped (predicted <= 0); drives correction eligibility.
	int confirmed_count(const std::string &entity_id) const;

	// --- plot history archive ------------------------------------------------
	void archive_plot(const std::string &entity_id, const features::ShapeVector &shape,
	                  const std::vector<trace::CorrectionRecord> &outcomes, int source_week = -1);
	const std::map<std::string, ArchivedPlot> &archive() const { return archive_; }

	// --- meta-strategy directives ---------------------------------------------
	std::vector<Directive> reflect(const std::vector<trace::CorrectionRecord> &recent_outcomes,
	                               ReasonerPolicy &policy);
	const std::vector<Directive> &directives() const { return directives_; }

	// --- audit support ---------------------------------------------------------
	int bias_table_frontier() const { return bias_frontier_; }
	int archive_frontier() const { return archive_frontier_; }
	void advance_step() { ++step_; }
	int step() const { return step_; }

	// Optional JSON-lines dump of every memory event for post-run inspection.
	std::string dump_jsonl() const;

private:
	// (scope, iso_week, decile); scope is "" in shared mode
	using BucketKey = std::tuple<std::string, int, int>;
	bool per_plot_bias_ = false;
	std::map<BucketKey, std::vector<double>> buckets_;
	std::map<std::string, int> confirmed_;
	std::map<std::string, ArchivedPlot> archive_;
	std::vector<Directive> directives_;
	std::vector<std::string> dump_lines_;
	int bias_frontier_ = -1;
	int archive_frontier_ = -1;
	int step_ = 0;
};

} // namespace cropcast::memory
