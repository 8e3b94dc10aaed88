#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cropcast/baseline.hpp"
#include "cropcast/features.hpp"
#include "cropcast/memory.hpp"
#include "cropcast/policy.hpp"
#include "cropcast/toolkit.hpp"
#include "cropcast/trace.hpp"

namespace cropcast::agent {

using trace::CorrectionRecord;
using trace::ToolName;

// One confirmed week visible to the agent: the actual, and the raw
// prediction that was made for it (when one exists).
struct WeekRecord {
	int week_index = 0;
	int iso_week = 0;
	double actual = 0.0;
	std::optional<double> predicted;
};

struct AgentState {
	std::string entity_id;
	int target_week = 0;
	int target_iso_week = 0;
	int target_year = 0;

	baseline::RawPrediction raw;
	std::vector<WeekRecord> recent; // last <=4 confirmed weeks, oldest first
	int horizon = 2;
	double progress = 0.0; // season progress in [0,1]
	std::optional<double> lagged_error; // actual - predicted, most recent confirmed pair
	std::map<std::string, std::string> entity_metadata; // prompt only

	std::vector<double> history;          // observed series through target - horizon
	std::vector<double> position_samples; // historical changes at this seasonal position
	memory::JumpDistribution jump;        // training week-on-week ratio percentiles

	std::vector<double> recent_actuals() const;
	// Paired (predictions, actuals) over confirmed weeks that have both.
	std::pair<std::vector<double>, std::vector<double>> bias_pairs() const;
	int trailing_zero_weeks() const;
};

// Context the runner prepares once per run / per entity.
struct StateContext {
	int horizon = 2;
	const std::map<int, double> *stored_predictions = nullptr; // this entity's raw q50 by week
	int season_start_iso = 0; // training-median harvest window
	int season_end_iso = 0;
	const std::map<int, std::vector<double>> *position_changes = nullptr;
	memory::JumpDistribution jump;
};

AgentState assemble_state(const ingest::Entity &entity, int target_week,
                          const baseline::RawPrediction &raw, const StateContext &ctx);

// Everything the tools need that is fixed for the run.
struct AgentEnv {
	const features::KnowledgeGraph *kg = nullptr;
	memory::MemoryStore *memory = nullptr;
	features::DatasetProfile profile;
	memory::JumpDistribution jump;
	double hist_max = 1.0;
	std::set<ToolName> enabled_tools{trace::kAllTools.begin(), trace::kAllTools.end()};

	bool enabled(ToolName t) const { return enabled_tools.count(t) > 0; }
};

struct BiasDigest {
	int iso_week = 0;
	int decile = 0;
	double value = 0.0;
};

// Loop-internal progress surfaced to the policy through the prompt.
struct LoopStatus {
	int corrections_applied = 0;
	std::string last_verdict = "none";
	int attempts_remaining = 2;
};

// Only tools in `available` are listed; ablation conditions shrink the set.
std::string render_prompt(const AgentState &state, const std::set<ToolName> &called_log,
                          const BiasDigest &bias_summary,
                          const std::vector<memory::Directive> &directives,
                          const LoopStatus &loop_status = {},
                          const std::set<ToolName> &available = {trace::kAllTools.begin(),
                                                                 trace::kAllTools.end()});

struct ParsedReply {
	std::string reason;
	std::vector<ToolName> tools;
};

ParsedReply parse_reply(const std::string &text);

CorrectionRecord run_react(const AgentState &state, ReasonerPolicy &policy, const AgentEnv &env);

// ---------------------------------------------------------------------------
// Policies
// ---------------------------------------------------------------------------

// Deterministic schedule extracted from the rendered prompt: diagnostics
// first, then apply + trajectory check, then adjustment only while the
// latest verdict is a contradiction and attempts remain.
class RulePolicy : public ReasonerPolicy {
public:
	std::string decide(const std::string &prompt) override;
	std::string name() const override { return "rule"; }
	PolicyKind kind() const override { return PolicyKind::rule; }
};

struct RemoteEndpoint {
	std::string base_url = "http://127.0.0.1:11434";
	std::string path = "/v1/chat/completions";
	std::string model = "llama3.1:8b";
	double temperature = 0.0;
	int max_tokens = 128;
	int timeout_ms = 5000;
	int retries = 2;
	int backoff_ms = 100;
};

// Chat-completion client: one user message per call, bounded retries with
// backoff, then PolicyError so the loop can fall back to the rule policy.
class RemotePolicy : public ReasonerPolicy {
public:
	explicit RemotePolicy(RemoteEndpoint endpoint) : endpoint_(std::move(endpoint)) {}
	std::string decide(const std::string &prompt) override;
	std::string name() const override { return "remote:" + endpoint_.model; }
	PolicyKind kind() const override { return PolicyKind::remote; }

	// Canonical request body for a prompt; also what goes over the wire.
	static std::string request_body(const RemoteEndpoint &endpoint, const std::string &prompt);

private:
	RemoteEndpoint endpoint_;
};

} // namespace cropcast::agent
