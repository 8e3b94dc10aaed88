#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace cropcast::trace {

// The eight tools the agent can request. Parsing is case-insensitive;
// unknown names are dropped by the reply parser.
enum class ToolName {
	find_similar,
	learn_bias,
	detect_phase,
	validate_range,
	apply_correction,
	evaluate_trajectory,
	adjust_correction,
	verify_correction,
};

inline constexpr std::array<ToolName, 8> kAllTools = {
    ToolName::find_similar,    ToolName::learn_bias,        ToolName::detect_phase,
    ToolName::validate_range,  ToolName::apply_correction,  ToolName::evaluate_trajectory,
    ToolName::adjust_correction, ToolName::verify_correction,
};

std::string tool_name(ToolName t);
std::optional<ToolName> tool_from_name(const std::string &raw); // case-insensitive

struct ToolEvent {
	std::string tool;
	nlohmann::json output; // serialized field-for-field
};

struct IterationTrace {
	std::string reason;
	std::vector<std::string> requested_tools;
	std::vector<ToolEvent> events;
};

// One prediction's full trace, serialized as one JSON line in the run report.
struct CorrectionRecord {
	std::string entity_id;
	int target_week = 0;
	int iso_week = 0;
	int year = 0;
	bool eligible = false;

	double y_raw = 0.0;
	double q10 = 0.0;
	double q90 = 0.0;
	double lookahead = 0.0;

	std::vector<IterationTrace> iterations;
	std::string applied_tag = "none"; // physical_limit | phase_blend | statistical | none
	double y_final = 0.0;
	std::optional<double> actual; // filled once the week's truth is known, for reporting

	nlohmann::json safety;                  // last safety verdict, empty when none ran
	std::vector<nlohmann::json> trajectory; // every trajectory verdict issued
	int adjust_attempts_used = 0;
	int iterations_used = 0;
	std::string policy_used = "rule";

	// Leakage audit: most recent source week feeding each input class.
	int actual_frontier = -1;  // observed actuals handed to tools
	int memory_frontier = -1;  // memory-derived inputs (bias table)
	int archive_frontier = -1; // archived plot shapes in the retrieval corpus

	nlohmann::json to_json() const;
	static CorrectionRecord from_json(const nlohmann::json &j);
};

} // namespace cropcast::trace
