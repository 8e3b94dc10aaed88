#pragma once

#include <string>
#include <vector>

#include "cropcast/runner.hpp"

namespace cropcast::eval {

enum class AblationMode { leave_one_out, only_one };

struct AblationRow {
	std::string label; // "full", "-detect_phase", "learn_bias only", "baseline"
	MetricTriple metrics;
};

struct AblationResult {
	AblationMode mode = AblationMode::leave_one_out;
	std::vector<AblationRow> rows; // full first, conditions, baseline last
};

// Runs the full condition matrix with shared seeds and dataset.
// evaluate_trajectory and adjust_correction toggle as one unit;
// apply_correction is never toggled (it is the correction itself).
AblationResult ablate(const runner::RunConfig &config, AblationMode mode);

std::string ablation_markdown(const AblationResult &result);

// Condition labels -> enabled tool sets, exposed for tests.
std::vector<std::pair<std::string, std::set<trace::ToolName>>> ablation_conditions(
    AblationMode mode);

} // namespace cropcast::eval
