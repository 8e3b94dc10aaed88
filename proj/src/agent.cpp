#include "cropcast/agent.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace cropcast::agent {

using trace::IterationTrace;
using trace::ToolEvent;

// ---------------------------------------------------------------------------
// State assembly
// ---------------------------------------------------------------------------

std::vector<double> AgentState::recent_actuals() const {
	std::vector<double> out;
	out.reserve(recent.size());
	for (const auto &w : recent) out.push_back(w.actual);
	return out;
}

std::pair<std::vector<double>, std::vector<double>> AgentState::bias_pairs() const {
	std::vector<double> preds, actuals;
	for (const auto &w : recent) {
		if (!w.predicted) continue;
		preds.push_back(*w.predicted);
		actuals.push_back(w.actual);
	}
	return {preds, actuals};
}

int AgentState::trailing_zero_weeks() const {
	int k = 0;
	bool seen_nonzero = false;
	for (double v : history)
		if (v > 0.0) seen_nonzero = true;
	if (!seen_nonzero) return 0;
	for (auto it = history.rbegin(); it != history.rend() && *it == 0.0; ++it) ++k;
	return k;
}

AgentState assemble_state(const ingest::Entity &entity, int target_week,
                          const baseline::RawPrediction &raw, const StateContext &ctx) {
	AgentState s;
	s.entity_id = entity.entity_id;
	s.target_week = target_week;
	s.raw = raw;
	s.horizon = ctx.horizon;
	s.entity_metadata = entity.metadata;

	const auto &obs = entity.observations;
	if (target_week >= 0 && target_week < static_cast<int>(obs.size())) {
		s.target_iso_week = obs[target_week].iso_week; // calendar, known in advance
		s.target_year = obs[target_week].year;
	}

	const int frontier = target_week - ctx.horizon; // latest observable week
	for (int w = std::max(0, frontier - 3); w <= frontier; ++w) {
		if (w < 0 || w >= static_cast<int>(obs.size())) continue;
		WeekRecord rec;
		rec.week_index = w;
		rec.iso_week = obs[w].iso_week;
		rec.actual = obs[w].yield_value;
		if (ctx.stored_predictions) {
			auto it = ctx.stored_predictions->find(w);
			if (it != ctx.stored_predictions->end()) rec.predicted = it->second;
		}
		s.recent.push_back(rec);
	}
	for (int w = 0; w <= frontier && w < static_cast<int>(obs.size()); ++w)
		s.history.push_back(obs[w].yield_value);

	// Most recent confirmed (prediction, actual) pair.
	for (auto it = s.recent.rbegin(); it != s.recent.rend(); ++it) {
		if (it->predicted) {
			s.lagged_error = it->actual - *it->predicted;
			break;
		}
	}

	if (ctx.season_end_iso > ctx.season_start_iso) {
		s.progress = std::clamp(
		    static_cast<double>(s.target_iso_week - ctx.season_start_iso) /
		        static_cast<double>(ctx.season_end_iso - ctx.season_start_iso),
		    0.0, 1.0);
	}

	if (ctx.position_changes) {
		auto it = ctx.position_changes->find(s.target_iso_week);
		if (it != ctx.position_changes->end()) s.position_samples = it->second;
	}
	s.jump = ctx.jump;
	return s;
}

// ---------------------------------------------------------------------------
// Prompt rendering
// ---------------------------------------------------------------------------

namespace {

std::string fmt(double v) {
	char buf[32];
	std::snprintf(buf, sizeof(buf), "%.6g", v);
	return buf;
}

const char *tool_blurb(ToolName t) {
	switch (t) {
	case ToolName::find_similar: return "retrieve the 3 historical curves closest in shape";
	case ToolName::learn_bias: return "estimate directional bias from recent paired errors";
	case ToolName::detect_phase: return "classify the seasonal phase and project an estimate";
	case ToolName::validate_range: return "check the jump from the last observed yield against history";
	case ToolName::apply_correction: return "synthesize the corrected value (tiered cascade)";
	case ToolName::evaluate_trajectory: return "check the correction against the recent trend";
	case ToolName::adjust_correction: return "re-blend after a trajectory contradiction";
	case ToolName::verify_correction: return "safety verifier (runs automatically)";
	}
	return "";
}

} // namespace

std::string render_prompt(const AgentState &state, const std::set<ToolName> &called_log,
                          const BiasDigest &bias_summary,
                          const std::vector<memory::Directive> &directives,
                          const LoopStatus &loop_status, const std::set<ToolName> &available) {
	std::ostringstream out;
	out << "STATE\n";
	out << "entity: " << state.entity_id << " | target week index: " << state.target_week
	    << " | iso week: " << state.target_iso_week << " | season progress: "
	    << fmt(state.progress) << "\n";
	out << "raw prediction q50: " << fmt(state.raw.q50) << " (q10 " << fmt(state.raw.q10)
	    << ", q90 " << fmt(state.raw.q90) << ") | lookahead q50: " << fmt(state.raw.lookahead_q50)
	    << " | horizon: " << state.horizon << " weeks\n";

	out << "recent actuals (oldest first):";
	if (state.recent.empty()) out << " none";
	for (const auto &w : state.recent) out << " " << fmt(w.actual);
	out << "\n";
	out << "raw predictions for those weeks:";
	if (state.recent.empty()) out << " none";
	for (const auto &w : state.recent) out << " " << (w.predicted ? fmt(*w.predicted) : "-");
	out << "\n";
	out << "last confirmed error (actual - predicted): "
	    << (state.lagged_error ? fmt(*state.lagged_error) : "none") << "\n";
	out << "jump distribution P01/P05/P10/P90/P95/P99: " << fmt(state.jump.p01) << " "
	    << fmt(state.jump.p05) << " " << fmt(state.jump.p10) << " " << fmt(state.jump.p90) << " "
	    << fmt(state.jump.p95) << " " << fmt(state.jump.p99) << "\n";

	if (!state.entity_metadata.empty()) {
		out << "metadata:";
		for (const auto &[k, v] : state.entity_metadata) out << " " << k << "=" << v;
		out << "\n";
	}
	out << "corrections applied: " << loop_status.corrections_applied
	    << " | last trajectory verdict: " << loop_status.last_verdict
	    << " | adjustment attempts remaining: " << loop_status.attempts_remaining << "\n";

	out << "\nTOOLS\n";
	for (const auto t : trace::kAllTools) {
		if (!available.count(t)) continue;
		out << trace::tool_name(t) << " [" << (called_log.count(t) ? "called" : "not called")
		    << "] - " << tool_blurb(t) << "\n";
	}

	out << "\nPOSITION BIAS\n";
	out << "iso week " << bias_summary.iso_week << ", progress decile " << bias_summary.decile
	    << ": " << fmt(bias_summary.value) << "\n";

	out << "\nRULES\n";
	out << "- run diagnostics (learn_bias, detect_phase, find_similar, validate_range) before "
	       "apply_correction\n";
	out << "- verify_correction runs automatically after every correction; never request it\n";
	out << "- request adjust_correction only after a trajectory contradiction, while attempts "
	       "remain\n";
	out << "- reply with exactly two lines:\n";
	out << "REASON: <one sentence>\n";
	out << "TOOLS: <comma-separated tool names, or NONE to finish>\n";

	if (!directives.empty()) {
		out << "\nDIRECTIVES\n";
		for (const auto &d : directives) out << "- " << d.text << "\n";
	}
	return out.str();
}

// ---------------------------------------------------------------------------
// Reply parsing
// ---------------------------------------------------------------------------

namespace {

std::string trim_copy(const std::string &s) {
	auto b = s.find_first_not_of(" \t\r\n");
	auto e = s.find_last_not_of(" \t\r\n");
	if (b == std::string::npos) return "";
	return s.substr(b, e - b + 1);
}

std::string lower_copy(std::string s) {
	std::transform(s.begin(), s.end(), s.begin(),
	               [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
	return s;
}

} // namespace

ParsedReply parse_reply(const std::string &text) {
	ParsedReply out;
	bool have_reason = false, have_tools = false;

	std::istringstream lines(text);
	std::string line;
	while (std::getline(lines, line)) {
		const std::string trimmed = trim_copy(line);
		const std::string lowered = lower_copy(trimmed);
		if (!have_reason && lowered.rfind("reason:", 0) == 0) {
			out.reason = trim_copy(trimmed.substr(7));
			have_reason = true;
		} else if (!have_tools && lowered.rfind("tools:", 0) == 0) {
			have_tools = true;
			std::string rest = trimmed.substr(6);
			std::stringstream items(rest);
			std::string item;
			while (std::getline(items, item, ',')) {
				const std::string name = trim_copy(item);
				if (name.empty()) continue;
				if (lower_copy(name) == "none") continue;
				const auto tool = trace::tool_from_name(name);
				if (!tool) {
					log_warn("parse_reply: ignoring unknown tool '" + name + "'");
					continue;
				}
				if (std::find(out.tools.begin(), out.tools.end(), *tool) == out.tools.end())
					out.tools.push_back(*tool);
			}
		}
		if (have_reason && have_tools) break;
	}
	if (!have_tools && !text.empty())
		log_warn("parse_reply: no TOOLS line found, treating reply as loop exit");
	return out;
}

// ---------------------------------------------------------------------------
// ReAct loop
// ---------------------------------------------------------------------------

namespace {

constexpr int kMaxIterations = 10;
constexpr int kMaxAdjustAttempts = 2;

std::string verdict_name(const tools::TrajectoryVerdict &v) {
	switch (v.verdict) {
	case tools::TrajectoryKind::consistent: return "consistent";
	case tools::TrajectoryKind::trend_contradiction: return "trend_contradiction";
	case tools::TrajectoryKind::phase_contradiction: return "phase_contradiction";
	}
	return "consistent";
}

} // namespace

CorrectionRecord run_react(const AgentState &state, ReasonerPolicy &policy, const AgentEnv &env) {
	CorrectionRecord record;
	record.entity_id = state.entity_id;
	record.target_week = state.target_week;
	record.iso_week = state.target_iso_week;
	record.year = state.target_year;
	record.eligible = true;
	record.y_raw = state.raw.q50;
	record.q10 = state.raw.q10;
	record.q90 = state.raw.q90;
	record.lookahead = state.raw.lookahead_q50;
	record.policy_used = policy.name();
	record.safety = nlohmann::json::object();
	record.actual_frontier = state.target_week - state.horizon;
	record.memory_frontier = env.memory ? env.memory->bias_table_frontier() : -1;
	record.archive_frontier = env.memory ? env.memory->archive_frontier() : -1;

	const double y_raw = state.raw.q50;
	double current = y_raw;
	bool any_apply = false;
	std::optional<tools::PhaseEstimate> phase;
	std::optional<tools::BiasEstimate> bias;
	std::optional<tools::RangeVerdict> range;
	std::optional<tools::TrajectoryVerdict> last_traj;
	int attempts_remaining = kMaxAdjustAttempts;
	std::set<ToolName> called;
	ReasonerPolicy *active = &policy;
	RulePolicy fallback;

	BiasDigest digest;
	digest.iso_week = state.target_iso_week;
	digest.decile = memory::MemoryStore::progress_decile(state.progress);
	digest.value = env.memory ? env.memory->position_bias(state.target_iso_week, state.progress,
	                                                      state.entity_id)
	                          : 0.0;

	const auto phase_or_neutral = [&]() {
		return phase ? *phase : tools::neutral_phase(y_raw);
	};

	const auto run_auto_verify = [&](IterationTrace &iter) {
		if (!env.enabled(ToolName::verify_correction)) return;
		const auto sv = tools::verify_correction(current, y_raw, env.jump, phase_or_neutral(),
		                                         env.profile, env.hist_max);
		current = sv.final_value;
		record.safety = sv.to_json();
		iter.events.push_back({"verify_correction", sv.to_json()});
		called.insert(ToolName::verify_correction);
	};

	for (int iteration = 0; iteration < kMaxIterations; ++iteration) {
		LoopStatus status;
		status.corrections_applied = any_apply ? 1 : 0;
		status.last_verdict = last_traj ? verdict_name(*last_traj) : "none";
		status.attempts_remaining = attempts_remaining;

		const std::string prompt = render_prompt(state, called, digest,
		                                         env.memory ? env.memory->directives()
		                                                    : std::vector<memory::Directive>{},
		                                         status, env.enabled_tools);
		std::string reply;
		try {
			reply = active->decide(prompt);
		} catch (const PolicyError &err) {
			log_warn("run_react: policy '" + active->name() + "' failed (" + err.what() +
			         "), falling back to the rule policy for this prediction");
			active = &fallback;
			record.policy_used = policy.name() + "+rule_fallback";
			reply = active->decide(prompt);
		}

		const auto parsed = parse_reply(reply);
		IterationTrace iter;
		iter.reason = parsed.reason;
		for (const auto t : parsed.tools) iter.requested_tools.push_back(trace::tool_name(t));
		record.iterations_used = iteration + 1;

		if (parsed.tools.empty()) {
			record.iterations.push_back(std::move(iter));
			break; // the policy is satisfied
		}

		for (const auto tool : parsed.tools) {
			if (!env.enabled(tool)) {
				log_debug("run_react: tool " + trace::tool_name(tool) + " disabled, skipping");
				continue;
			}
			switch (tool) {
			case ToolName::find_similar: {
				std::vector<std::pair<std::string, features::ShapeVector>> corpus;
				if (env.kg)
					for (const auto &[id, node] : env.kg->nodes()) corpus.emplace_back(id, node.shape);
				if (env.memory)
					for (const auto &[id, plot] : env.memory->archive()) {
						if (id == state.entity_id) continue; // own past is not an analogue
						corpus.emplace_back(id, plot.shape);
					}
				const auto target_shape = features::compute_shape_vector(state.history);
				const auto matches = tools::find_similar(target_shape, corpus);
				nlohmann::json out = nlohmann::json::array();
				for (const auto &[id, d] : matches) out.push_back({{"entity_id", id}, {"distance", d}});
				iter.events.push_back({"find_similar", out});
				called.insert(tool);
				break;
			}
			case ToolName::learn_bias: {
				const auto [preds, actuals] = state.bias_pairs();
				tools::BiasEstimate estimate;
				if (!preds.empty())
					estimate = tools::learn_bias(preds, actuals, state.trailing_zero_weeks());
				bias = estimate;
				auto out = estimate.to_json();
				out["pairs"] = preds.size();
				iter.events.push_back({"learn_bias", out});
				called.insert(tool);
				break;
			}
			case ToolName::detect_phase: {
				phase = tools::detect_phase(state.recent_actuals(), y_raw, state.horizon,
				                            state.raw.lookahead_q50, state.history, env.profile);
				iter.events.push_back({"detect_phase", phase->to_json()});
				called.insert(tool);
				break;
			}
			case ToolName::validate_range: {
				const double y_prev = state.history.empty() ? 0.0 : state.history.back();
				range = tools::validate_range(y_raw, y_prev, state.position_samples);
				iter.events.push_back({"validate_range", range->to_json()});
				called.insert(tool);
				break;
			}
			case ToolName::apply_correction: {
				// Position bias rides with the bias diagnostic: without
				// learn_bias this tier stays neutral.
				const double position_bias = bias ? digest.value : 0.0;
				const auto outcome = tools::apply_correction(
				    y_raw, phase_or_neutral(), bias.value_or(tools::BiasEstimate{}),
				    range.value_or(tools::RangeVerdict{}), position_bias);
				current = outcome.value;
				any_apply = true;
				record.applied_tag = tools::rule_tag_name(outcome.tag);
				iter.events.push_back({"apply_correction",
				                       {{"value", outcome.value},
				                        {"tag", tools::rule_tag_name(outcome.tag)},
				                        {"position_bias", position_bias}}});
				called.insert(tool);
				run_auto_verify(iter);
				break;
			}
			case ToolName::evaluate_trajectory: {
				tools::TrajectoryVerdict verdict;
				if (state.history.size() < 3) {
					// Too little data to argue with the correction.
					verdict.verdict = tools::TrajectoryKind::consistent;
					verdict.lo = current;
					verdict.hi = current;
					verdict.attempts_remaining = attempts_remaining;
				} else {
					const auto n = state.history.size();
					const std::array<double, 3> last3{state.history[n - 3], state.history[n - 2],
					                                  state.history[n - 1]};
					verdict = tools::evaluate_trajectory(current, last3, phase_or_neutral(),
					                                     attempts_remaining);
				}
				last_traj = verdict;
				record.trajectory.push_back(verdict.to_json());
				iter.events.push_back({"evaluate_trajectory", verdict.to_json()});
				called.insert(tool);
				break;
			}
			case ToolName::adjust_correction: {
				if (!any_apply || !last_traj ||
				    last_traj->verdict == tools::TrajectoryKind::consistent ||
				    attempts_remaining <= 0) {
					log_debug("run_react: adjust_correction request ignored (no pending contradiction)");
					break;
				}
				const auto ph = phase_or_neutral();
				double weight = 0.25; // phase contradictions restart from a quarter blend
				if (last_traj->verdict == tools::TrajectoryKind::trend_contradiction) {
					double effective = 0.0;
					if (ph.y_phase != y_raw)
						effective = std::clamp((current - y_raw) / (ph.y_phase - y_raw), 0.0, 1.0);
					// Softening an overcorrection halves the blend weight;
					// fixing an undercorrection halves the gap to a full
					// blend instead, so the move always points at the band.
					const bool phase_fixes_breach =
					    (current > last_traj->hi && ph.y_phase < current) ||
					    (current < last_traj->lo && ph.y_phase > current);
					weight = phase_fixes_breach ? (effective + 1.0) / 2.0 : effective / 2.0;
				}
				current = tools::adjust_correction(current, *last_traj, ph, y_raw, weight);
				--attempts_remaining;
				++record.adjust_attempts_used;
				iter.events.push_back({"adjust_correction",
				                       {{"value", current},
				                        {"weight", weight},
				                        {"verdict", verdict_name(*last_traj)}}});
				called.insert(tool);
				run_auto_verify(iter);
				break;
			}
			case ToolName::verify_correction:
				// Forced automatically after every correction; manual requests
				// would double-verify, so they are dropped.
				log_debug("run_react: manual verify_correction request ignored");
				break;
			}
		}
		record.iterations.push_back(std::move(iter));
	}

	if (!any_apply) {
		record.y_final = y_raw; // passthrough guarantee
		record.applied_tag = "none";
	} else {
		record.y_final = current;
	}
	return record;
}

// ---------------------------------------------------------------------------
// Rule policy
// ---------------------------------------------------------------------------

std::string RulePolicy::decide(const std::string &prompt) {
	// A tool is pending when the prompt lists it uncalled; tools absent from
	// the prompt are unavailable in this run and treated as satisfied.
	const auto pending = [&](const char *tool) {
		return prompt.find(std::string(tool) + " [not called]") != std::string::npos;
	};
	const auto available = [&](const char *tool) {
		return prompt.find(std::string(tool) + " [") != std::string::npos;
	};

	std::string diagnostics;
	for (const char *tool : {"learn_bias", "detect_phase", "find_similar", "validate_range"}) {
		if (!pending(tool)) continue;
		if (!diagnostics.empty()) diagnostics += ", ";
		diagnostics += tool;
	}
	if (!diagnostics.empty())
		return "REASON: gather diagnostics before correcting.\nTOOLS: " + diagnostics;

	if (pending("apply_correction")) {
		std::string tools = "apply_correction";
		if (available("evaluate_trajectory")) tools += ", evaluate_trajectory";
		return "REASON: diagnostics complete, synthesize and sanity-check the correction.\n"
		       "TOOLS: " + tools;
	}

	const bool contradiction =
	    prompt.find("last trajectory verdict: trend_contradiction") != std::string::npos ||
	    prompt.find("last trajectory verdict: phase_contradiction") != std::string::npos;
	const bool attempts_left =
	    prompt.find("adjustment attempts remaining: 0") == std::string::npos;
	if (contradiction && attempts_left && available("adjust_correction"))
		return "REASON: the correction contradicts the trajectory, re-blend.\n"
		       "TOOLS: adjust_correction, evaluate_trajectory";
	return "REASON: correction accepted.\nTOOLS: NONE";
}

} // namespace cropcast::agent
