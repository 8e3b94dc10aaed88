#include "cropcast/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace cropcast::eval {

using nlohmann::json;
using trace::CorrectionRecord;

json MetricTriple::to_json() const {
	return json{{"mae", mae}, {"rmse", rmse}, {"mase", mase}};
}

MetricTriple metric_triple(const std::vector<double> &predictions,
                           const std::vector<double> &actuals, double naive_scale) {
	if (predictions.size() != actuals.size() || predictions.empty())
		throw std::invalid_argument("metric_triple: prediction/actual lists must be paired and non-empty");
	if (naive_scale <= 0.0)
		throw std::invalid_argument("metric_triple: naive scale must be positive");

	double abs_acc = 0.0, sq_acc = 0.0;
	for (std::size_t i = 0; i < predictions.size(); ++i) {
		const double e = actuals[i] - predictions[i];
		abs_acc += std::abs(e);
		sq_acc += e * e;
	}
	MetricTriple m;
	m.mae = abs_acc / static_cast<double>(predictions.size());
	m.rmse = std::sqrt(sq_acc / static_cast<double>(predictions.size()));
	m.mase = m.mae / naive_scale;
	return m;
}

RecordMetrics metrics(const std::vector<CorrectionRecord> &records, double naive_scale) {
	std::vector<double> corrected, raw, actuals;
	for (const auto &r : records) {
		if (!r.actual) continue;
		corrected.push_back(r.y_final);
		raw.push_back(r.y_raw);
		actuals.push_back(*r.actual);
	}
	if (actuals.empty()) throw std::invalid_argument("metrics: no scored records");
	RecordMetrics out;
	out.corrected = metric_triple(corrected, actuals, naive_scale);
	out.raw = metric_triple(raw, actuals, naive_scale);
	out.scored = static_cast<int>(actuals.size());
	return out;
}

std::vector<PlotImprovement> per_plot_improvement(const std::vector<CorrectionRecord> &records) {
	std::map<std::string, std::pair<double, double>> acc; // id -> (sum raw, sum corrected)
	std::map<std::string, int> counts;
	for (const auto &r : records) {
		if (!r.actual) continue;
		acc[r.entity_id].first += std::abs(r.y_raw - *r.actual);
		acc[r.entity_id].second += std::abs(r.y_final - *r.actual);
		++counts[r.entity_id];
	}
	std::vector<PlotImprovement> rows;
	for (const auto &[id, sums] : acc) {
		PlotImprovement row;
		row.entity_id = id;
		row.mae_raw = sums.first / counts[id];
		row.mae_corrected = sums.second / counts[id];
		row.pct_improvement =
		    row.mae_raw > 0.0 ? 100.0 * (row.mae_raw - row.mae_corrected) / row.mae_raw : 0.0;
		rows.push_back(row);
	}
	std::sort(rows.begin(), rows.end(), [](const PlotImprovement &a, const PlotImprovement &b) {
		if (a.pct_improvement != b.pct_improvement) return a.pct_improvement > b.pct_improvement;
		return a.entity_id < b.entity_id;
	});
	return rows;
}

std::string per_plot_csv(const std::vector<PlotImprovement> &rows) {
	std::ostringstream out;
	out << "entity_id,mae_raw,mae_corrected,pct_improvement\n";
	for (const auto &r : rows)
		out << r.entity_id << "," << r.mae_raw << "," << r.mae_corrected << ","
		    << r.pct_improvement << "\n";
	return out.str();
}

ToolUsage tool_usage(const std::vector<CorrectionRecord> &records) {
	ToolUsage usage;
	std::map<std::string, int> counts;
	for (const auto &r : records) {
		if (!r.eligible) continue;
		++usage.non_trivial;
		std::set<std::string> seen;
		for (const auto &it : r.iterations)
			for (const auto &ev : it.events) seen.insert(ev.tool);
		for (const auto &tool : seen) ++counts[tool];
	}
	for (const auto t : trace::kAllTools) {
		const auto name = trace::tool_name(t);
		const auto it = counts.find(name);
		usage.rates[name] = usage.non_trivial > 0 && it != counts.end()
		                        ? static_cast<double>(it->second) / usage.non_trivial
		                        : 0.0;
	}
	return usage;
}

std::string tool_usage_csv(const ToolUsage &usage) {
	std::ostringstream out;
	out << "tool,call_rate,non_trivial_predictions\n";
	if (usage.non_trivial == 0) {
		out << "n/a,n/a,0\n";
		return out.str();
	}
	for (const auto &[tool, rate] : usage.rates)
		out << tool << "," << rate << "," << usage.non_trivial << "\n";
	return out.str();
}

std::vector<std::string> leakage_violations(const std::vector<CorrectionRecord> &records,
                                            int horizon) {
	std::vector<std::string> violations;
	for (const auto &r : records) {
		const int cutoff = r.target_week - horizon;
		auto flag = [&](const std::string &what, int frontier, int limit) {
			if (frontier > limit) {
				std::ostringstream msg;
				msg << r.entity_id << " week " << r.target_week << ": " << what << " frontier "
				    << frontier << " exceeds " << limit;
				violations.push_back(msg.str());
			}
		};
		flag("actual", r.actual_frontier, cutoff);
		flag("memory", r.memory_frontier, cutoff);
		flag("archive", r.archive_frontier, r.target_week - 1);
	}
	return violations;
}

} // namespace cropcast::eval
