#include "cropcast/trace.hpp"

#include <algorithm>

namespace cropcast::trace {

using nlohmann::json;

std::string tool_name(ToolName t) {
	switch (t) {
	case ToolName::find_similar: return "find_similar";
	case ToolName::learn_bias: return "learn_bias";
	case ToolName::detect_phase: return "detect_phase";
	case ToolName::validate_range: return "validate_range";
	case ToolName::apply_correction: return "apply_correction";
	case ToolName::evaluate_trajectory: return "evaluate_trajectory";
	case ToolName::adjust_correction: return "adjust_correction";
	case ToolName::verify_correction: return "verify_correction";
	}
	return "unknown";
}

std::optional<ToolName> tool_from_name(const std::string &raw) {
	std::string s = raw;
	std::transform(s.begin(), s.end(), s.begin(),
	               [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
	for (const auto t : kAllTools)
		if (tool_name(t) == s) return t;
	return std::nullopt;
}

json CorrectionRecord::to_json() const {
	json iters = json::array();
	for (const auto &it : iterations) {
		json events = json::array();
		for (const auto &ev : it.events) events.push_back({{"tool", ev.tool}, {"output", ev.output}});
		iters.push_back({{"reason", it.reason},
		                 {"requested_tools", it.requested_tools},
		                 {"events", events}});
	}
	json j{{"entity_id", entity_id},
	       {"target_week", target_week},
	       {"iso_week", iso_week},
	       {"year", year},
	       {"eligible", eligible},
	       {"y_raw", y_raw},
	       {"q10", q10},
	       {"q90", q90},
	       {"lookahead", lookahead},
	       {"iterations", iters},
	       {"applied_tag", applied_tag},
	       {"y_final", y_final},
	       {"safety", safety},
	       {"trajectory", trajectory},
	       {"adjust_attempts_used", adjust_attempts_used},
	       {"iterations_used", iterations_used},
	       {"policy_used", policy_used},
	       {"actual_frontier", actual_frontier},
	       {"memory_frontier", memory_frontier},
	       {"archive_frontier", archive_frontier}};
	if (actual) j["actual"] = *actual;
	return j;
}

CorrectionRecord CorrectionRecord::from_json(const json &j) {
	CorrectionRecord r;
	r.entity_id = j.at("entity_id").get<std::string>();
	r.target_week = j.at("target_week").get<int>();
	r.iso_week = j.at("iso_week").get<int>();
	r.year = j.at("year").get<int>();
	r.eligible = j.at("eligible").get<bool>();
	r.y_raw = j.at("y_raw").get<double>();
	r.q10 = j.at("q10").get<double>();
	r.q90 = j.at("q90").get<double>();
	r.lookahead = j.at("lookahead").get<double>();
	for (const auto &jt : j.at("iterations")) {
		IterationTrace it;
		it.reason = jt.at("reason").get<std::string>();
		it.requested_tools = jt.at("requested_tools").get<std::vector<std::string>>();
		for (const auto &je : jt.at("events"))
			it.events.push_back({je.at("tool").get<std::string>(), je.at("output")});
		r.iterations.push_back(std::move(it));
	}
	r.applied_tag = j.at("applied_tag").get<std::string>();
	r.y_final = j.at("y_final").get<double>();
	if (j.contains("actual")) r.actual = j.at("actual").get<double>();
	r.safety = j.at("safety");
	for (const auto &jt : j.at("trajectory")) r.trajectory.push_back(jt);
	r.adjust_attempts_used = j.at("adjust_attempts_used").get<int>();
	r.iterations_used = j.at("iterations_used").get<int>();
	r.policy_used = j.at("policy_used").get<std::string>();
	r.actual_frontier = j.at("actual_frontier").get<int>();
	r.memory_frontier = j.at("memory_frontier").get<int>();
	r.archive_frontier = j.at("archive_frontier").get<int>();
	return r;
}

} // namespace cropcast::trace
