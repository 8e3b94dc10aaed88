#include "cropcast/ablation.hpp"

#include <sstream>

namespace cropcast::eval {

using trace::ToolName;

namespace {

// Units the ablation toggles: the trajectory pair moves together and
// apply_correction always stays on.
const std::vector<std::pair<std::string, std::vector<ToolName>>> kToggleUnits = {
    {"learn_bias", {ToolName::learn_bias}},
    {"detect_phase", {ToolName::detect_phase}},
    {"validate_range", {ToolName::validate_range}},
    {"find_similar", {ToolName::find_similar}},
    {"evaluate_trajectory", {ToolName::evaluate_trajectory, ToolName::adjust_correction}},
    {"verify_correction", {ToolName::verify_correction}},
};

std::set<ToolName> all_tools() {
	return {trace::kAllTools.begin(), trace::kAllTools.end()};
}

} // namespace

std::vector<std::pair<std::string, std::set<ToolName>>> ablation_conditions(AblationMode mode) {
	std::vector<std::pair<std::string, std::set<ToolName>>> out;
	if (mode == AblationMode::leave_one_out) {
		for (const auto &[label, tools] : kToggleUnits) {
			auto enabled = all_tools();
			for (const auto t : tools) enabled.erase(t);
			out.emplace_back("-" + label, enabled);
		}
	} else {
		for (const auto &[label, tools] : kToggleUnits) {
			std::set<ToolName> enabled{ToolName::apply_correction};
			for (const auto t : tools) enabled.insert(t);
			out.emplace_back(label + " only", enabled);
		}
	}
	return out;
}

AblationResult ablate(const runner::RunConfig &config, AblationMode mode) {
	AblationResult result;
	result.mode = mode;

	auto run_condition = [&](const std::set<ToolName> &enabled) {
		runner::RunConfig c = config;
		c.enabled_tools = enabled;
		c.out_dir.clear(); // conditions never clobber the main run's outputs
		c.cache_path = config.cache_path;
		const auto report = runner::run_season(c);
		return metrics(report.records, report.naive_scale);
	};

	const auto full = run_condition(all_tools());
	result.rows.push_back({"full", full.corrected});
	for (const auto &[label, enabled] : ablation_conditions(mode))
		result.rows.push_back({label, run_condition(enabled).corrected});
	result.rows.push_back({"baseline", full.raw});
	return result;
}

std::string ablation_markdown(const AblationResult &result) {
	std::ostringstream out;
	out << "| Configuration | MAE | RMSE | MASE |\n";
	out << "|---|---|---|---|\n";
	for (const auto &row : result.rows) {
		char buf[128];
		std::snprintf(buf, sizeof(buf), "| %s | %.4f | %.4f | %.4f |\n", row.label.c_str(),
		              row.metrics.mae, row.metrics.rmse, row.metrics.mase);
		out << buf;
	}
	return out.str();
}

} // namespace cropcast::eval
