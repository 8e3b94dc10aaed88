#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "cropcast/common.hpp"
#include "cropcast/trace.hpp"

namespace cropcast::eval {

struct MetricTriple {
	double mae = 0.0;
	double rmse = 0.0;
	double mase = 0.0;

	nlohmann::json to_json() const;
};

// MASE scale: in-sample MAE of the lag-1 persistence forecast, pooled over
// the training split.
MetricTriple metric_triple(const std::vector<double> &predictions,
                           const std::vector<double> &actuals, double naive_scale);

struct RecordMetrics {
	MetricTriple corrected;
	MetricTriple raw;
	int scored = 0;
};

// Metrics over records that carry an actual; throws when none do.
RecordMetrics metrics(const std::vector<trace::CorrectionRecord> &records, double naive_scale);

struct PlotImprovement {
	std::string entity_id;
	double mae_raw = 0.0;
	double mae_corrected = 0.0;
	double pct_improvement = 0.0;
};

// Sorted descending by improvement.
std::vector<PlotImprovement> per_plot_improvement(
    const std::vector<trace::CorrectionRecord> &records);
std::string per_plot_csv(const std::vector<PlotImprovement> &rows);

struct ToolUsage {
	std::map<std::string, double> rates; // tool -> call rate over non-trivial predictions
	int non_trivial = 0;                 // denominator: correction-eligible predictions
};

ToolUsage tool_usage(const std::vector<trace::CorrectionRecord> &records);
std::string tool_usage_csv(const ToolUsage &usage);

// Temporal-leakage audit over stored records: actual and memory inputs must
// come from weeks <= target - horizon, archived shapes from weeks < target.
std::vector<std::string> leakage_violations(const std::vector<trace::CorrectionRecord> &records,
                                            int horizon);

} // namespace cropcast::eval
