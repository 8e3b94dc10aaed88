#include <doctest.h>

#include <thread>

#include <httplib.h>

#include "cropcast/agent.hpp"

using namespace cropcast;
using namespace cropcast::agent;

namespace {

ingest::Entity entity_with(const std::vector<double> &y, const std::string &id = "plot") {
	ingest::Entity e;
	e.entity_id = id;
	e.split = ingest::Split::test;
	for (std::size_t i = 0; i < y.size(); ++i)
		e.observations.push_back({static_cast<int>(i), static_cast<int>(i) + 1, 2023, y[i], false});
	return e;
}

struct Fixture {
	features::KnowledgeGraph kg;
	memory::MemoryStore mem;
	AgentEnv env;
	std::map<int, double> stored;
	std::map<int, std::vector<double>> position_changes;

	Fixture() {
		env.kg = &kg;
		env.memory = &mem;
		env.profile.kind = features::DatasetKind::zero_valley;
		env.jump.p01 = 0.0;
		env.jump.p05 = 0.1;
		env.jump.p10 = 0.2;
		env.jump.p90 = 3.0;
		env.jump.p95 = 4.0;
		env.jump.p99 = 8.0;
		env.hist_max = 1.0;
	}

	AgentState state_for(const ingest::Entity &entity, int week,
	                     const baseline::RawPrediction &raw) {
		StateContext ctx;
		ctx.horizon = 2;
		ctx.stored_predictions = &stored;
		ctx.season_start_iso = 10;
		ctx.season_end_iso = 30;
		ctx.position_changes = &position_changes;
		return assemble_state(entity, week, raw, ctx);
	}
};

// Scripted policy for loop-shape tests.
class ScriptedPolicy : public ReasonerPolicy {
public:
	explicit ScriptedPolicy(std::vector<std::string> replies) : replies_(std::move(replies)) {}
	std::string decide(const std::string &) override {
		if (next_ >= replies_.size()) return "TOOLS: NONE";
		return replies_[next_++];
	}
	std::string name() const override { return "scripted"; }
	PolicyKind kind() const override { return PolicyKind::rule; }

private:
	std::vector<std::string> replies_;
	std::size_t next_ = 0;
};

class AlwaysFailsPolicy : public ReasonerPolicy {
public:
	std::string decide(const std::string &) override {
		++calls;
		throw PolicyError("transport down");
	}
	std::string name() const override { return "broken"; }
	PolicyKind kind() const override { return PolicyKind::remote; }
	int calls = 0;
};

} // namespace

TEST_SUITE("agent") {

TEST_CASE("assemble_state windows the last four confirmed weeks") {
	Fixture fx;
	const auto e = entity_with({1, 2, 3, 4, 5, 6, 7, 8, 9, 10});
	fx.stored = {{3, 3.3}, {5, 5.5}};
	baseline::RawPrediction raw;
	raw.q50 = 7.7;
	const auto s = fx.state_for(e, 7, raw);

	REQUIRE(s.recent.size() == 4); // weeks 2..5
	CHECK(s.recent.front().week_index == 2);
	CHECK(s.recent.back().week_index == 5); // ends at t-2
	CHECK(s.recent.back().actual == 6.0);
	CHECK(s.history.size() == 6); // weeks 0..5
	// bias pairs keep only weeks with stored predictions
	const auto [preds, actuals] = s.bias_pairs();
	REQUIRE(preds.size() == 2);
	CHECK(preds[0] == 3.3);
	CHECK(actuals[0] == 4.0);
	// lagged error from the most recent confirmed pair: week 5
	REQUIRE(s.lagged_error.has_value());
	CHECK(*s.lagged_error == doctest::Approx(6.0 - 5.5));
}

TEST_CASE("assemble_state on the first prediction week has no lagged error") {
	Fixture fx;
	const auto e = entity_with({1, 2, 3, 4, 5, 6, 7, 8});
	const auto s = fx.state_for(e, 5, {});
	CHECK_FALSE(s.lagged_error.has_value());
	CHECK(s.recent.size() == 4);
}

TEST_CASE("assemble_state clamps season progress") {
	Fixture fx;
	const auto e = entity_with(std::vector<double>(40, 1.0));
	// iso week of target 24 is 25 -> progress (25-10)/20 = 0.75
	const auto s = fx.state_for(e, 24, {});
	CHECK(s.progress == doctest::Approx(0.75));
	const auto early = fx.state_for(e, 5, {}); // iso 6 < start -> clamp 0
	CHECK(early.progress == 0.0);
}

TEST_CASE("metadata passes through to the state untouched") {
	Fixture fx;
	auto e = entity_with(std::vector<double>(10, 1.0));
	e.metadata["variety"] = "camarillo";
	const auto s = fx.state_for(e, 6, {});
	CHECK(s.entity_metadata.at("variety") == "camarillo");
}

TEST_CASE("render_prompt is byte-deterministic and sectioned") {
	Fixture fx;
	const auto e = entity_with({0, 0, 1, 2, 3, 4, 5, 6});
	const auto s = fx.state_for(e, 6, {});
	const auto p1 = render_prompt(s, {}, {25, 4, 0.1}, {});
	const auto p2 = render_prompt(s, {}, {25, 4, 0.1}, {});
	CHECK(p1 == p2);
	CHECK(p1.find("STATE\n") != std::string::npos);
	CHECK(p1.find("\nTOOLS\n") != std::string::npos);
	CHECK(p1.find("\nPOSITION BIAS\n") != std::string::npos);
	CHECK(p1.find("\nRULES\n") != std::string::npos);
	CHECK(p1.find("DIRECTIVES") == std::string::npos); // omitted when empty
}

TEST_CASE("render_prompt flags called tools and appends directives at the foot") {
	Fixture fx;
	const auto e = entity_with({0, 0, 1, 2, 3, 4, 5, 6});
	const auto s = fx.state_for(e, 6, {});
	std::vector<memory::Directive> directives{{"de-prioritize learn_bias", 3, "abc"}};
	const auto p = render_prompt(s, {ToolName::detect_phase}, {}, directives);
	CHECK(p.find("detect_phase [called]") != std::string::npos);
	CHECK(p.find("learn_bias [not called]") != std::string::npos);
	const auto directives_at = p.find("DIRECTIVES");
	REQUIRE(directives_at != std::string::npos);
	CHECK(directives_at > p.find("RULES"));
	CHECK(p.find("de-prioritize learn_bias", directives_at) != std::string::npos);
}

TEST_CASE("render_prompt golden file") {
	Fixture fx;
	auto e = entity_with({0, 0, 0.5, 1.25, 2, 1.5, 1, 0.75}, "golden-plot");
	e.metadata["variety"] = "test";
	fx.stored = {{5, 1.4}};
	baseline::RawPrediction raw;
	raw.q50 = 0.9;
	raw.q10 = 0.72;
	raw.q90 = 1.08;
	raw.lookahead_q50 = 0.85;
	const auto s = fx.state_for(e, 7, raw);
	const auto prompt = render_prompt(s, {ToolName::learn_bias}, {8, 0, 0.125},
	                                  {{"keep calm", 1, "h"}});

	const char *expected = R"(STATE
entity: golden-plot | target week index: 7 | iso week: 8 | season progress: 0
raw prediction q50: 0.9 (q10 0.72, q90 1.08) | lookahead q50: 0.85 | horizon: 2 weeks
recent actuals (oldest first): 0.5 1.25 2 1.5
raw predictions for those weeks: - - - 1.4
last confirmed error (actual - predicted): 0.1
jump distribution P01/P05/P10/P90/P95/P99: 1 1 1 1 1 1
metadata: variety=test
corrections applied: 0 | last trajectory verdict: none | adjustment attempts remaining: 2

TOOLS
find_similar [not called] - retrieve the 3 historical curves closest in shape
learn_bias [called] - estimate directional bias from recent paired errors
detect_phase [not called] - classify the seasonal phase and project an estimate
validate_range [not called] - check the jump from the last observed yield against history
apply_correction [not called] - synthesize the corrected value (tiered cascade)
evaluate_trajectory [not called] - check the correction against the recent trend
adjust_correction [not called] - re-blend after a trajectory contradiction
verify_correction [not called] - safety verifier (runs automatically)

POSITION BIAS
iso week 8, progress decile 0: 0.125

RULES
- run diagnostics (learn_bias, detect_phase, find_similar, validate_range) before apply_correction
- verify_correction runs automatically after every correction; never request it
- request adjust_correction only after a trajectory contradiction, while attempts remain
- reply with exactly two lines:
REASON: <one sentence>
TOOLS: <comma-separated tool names, or NONE to finish>

DIRECTIVES
- keep calm
)";
	CHECK(prompt == expected);
}

TEST_CASE("parse_reply grammar") {
	const auto r = parse_reply("REASON: pre-season spike.\nTOOLS: detect_phase, learn_bias");
	CHECK(r.reason == "pre-season spike.");
	REQUIRE(r.tools.size() == 2);
	CHECK(r.tools[0] == ToolName::detect_phase);
	CHECK(r.tools[1] == ToolName::learn_bias);
}

TEST_CASE("parse_reply exit token and degradation") {
	CHECK(parse_reply("TOOLS: NONE").tools.empty());
	CHECK(parse_reply("complete garbage").tools.empty());
	CHECK(parse_reply("").tools.empty());
}

TEST_CASE("parse_reply is case-insensitive, dedupes, ignores unknown names") {
	const auto r = parse_reply("reason: x\ntools: DETECT_PHASE, warp_drive, detect_phase, Learn_Bias");
	REQUIRE(r.tools.size() == 2);
	CHECK(r.tools[0] == ToolName::detect_phase);
	CHECK(r.tools[1] == ToolName::learn_bias);
}

TEST_CASE("parse_reply takes the first REASON and first TOOLS lines") {
	const auto r = parse_reply("REASON: one\nREASON: two\nTOOLS: learn_bias\nTOOLS: detect_phase");
	CHECK(r.reason == "one");
	REQUIRE(r.tools.size() == 1);
	CHECK(r.tools[0] == ToolName::learn_bias);
}

TEST_CASE("run_react with the rule policy suppresses a pre-season spike") {
	Fixture fx;
	const auto e = entity_with({0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0});
	fx.stored = {{5, 0.0}, {6, 0.0}};
	fx.mem.record_lagged_error("plot", 6, 0.0, 0.1, 0.0, 5); // eligible
	baseline::RawPrediction raw;
	raw.q50 = 0.3;
	raw.q10 = 0.24;
	raw.q90 = 0.36;
	raw.lookahead_q50 = 0.0;

	RulePolicy policy;
	const auto s = fx.state_for(e, 7, raw);
	const auto record = run_react(s, policy, fx.env);

	CHECK(record.applied_tag == "phase_blend");
	CHECK(record.y_final < 0.05); // 0-ish blend after adjustment
	CHECK(record.iterations_used <= 5);
	CHECK(record.adjust_attempts_used <= 2);
}

TEST_CASE("run_react passthrough when the policy immediately exits") {
	Fixture fx;
	const auto e = entity_with(std::vector<double>(10, 2.0));
	baseline::RawPrediction raw;
	raw.q50 = 2.5;
	ScriptedPolicy policy({"REASON: fine.\nTOOLS: NONE"});
	const auto record = run_react(fx.state_for(e, 6, raw), policy, fx.env);
	CHECK(record.y_final == 2.5);
	CHECK(record.applied_tag == "none");
	CHECK(record.iterations_used == 1);
}

TEST_CASE("run_react passthrough guarantee without apply_correction") {
	Fixture fx;
	const auto e = entity_with(std::vector<double>(10, 2.0));
	baseline::RawPrediction raw;
	raw.q50 = 2.5;
	ScriptedPolicy policy({
	    "REASON: diagnostics.\nTOOLS: learn_bias, detect_phase, validate_range, find_similar",
	    "REASON: trajectory only.\nTOOLS: evaluate_trajectory",
	    "REASON: done.\nTOOLS: NONE",
	});
	const auto record = run_react(fx.state_for(e, 6, raw), policy, fx.env);
	CHECK(record.y_final == 2.5); // bit-exact
	CHECK(record.applied_tag == "none");
}

TEST_CASE("run_react caps iterations at ten") {
	Fixture fx;
	const auto e = entity_with(std::vector<double>(10, 2.0));
	std::vector<std::string> replies(50, "REASON: loop.\nTOOLS: detect_phase");
	ScriptedPolicy policy(replies);
	const auto record = run_react(fx.state_for(e, 6, {}), policy, fx.env);
	CHECK(record.iterations_used == 10);
}

TEST_CASE("run_react enforces the adjustment attempt cap") {
	Fixture fx;
	const auto e = entity_with({0, 10, 12, 14, 16, 18, 20, 22});
	baseline::RawPrediction raw;
	raw.q50 = 100.0; // triggers contradictions
	std::vector<std::string> replies;
	replies.push_back("REASON: d.\nTOOLS: detect_phase");
	replies.push_back("REASON: a.\nTOOLS: apply_correction, evaluate_trajectory");
	for (int i = 0; i < 20; ++i)
		replies.push_back("REASON: adjust.\nTOOLS: adjust_correction, evaluate_trajectory");
	ScriptedPolicy policy(replies);
	const auto record = run_react(fx.state_for(e, 7, raw), policy, fx.env);
	CHECK(record.adjust_attempts_used <= 2);
	CHECK(record.iterations_used == 10);
}

TEST_CASE("safety interposition: verify follows every correction event") {
	Fixture fx;
	const auto e = entity_with({0, 0, 1, 2, 3, 4, 5, 6, 7, 8});
	baseline::RawPrediction raw;
	raw.q50 = 50.0;
	RulePolicy policy;
	const auto record = run_react(fx.state_for(e, 7, raw), policy, fx.env);
	for (const auto &it : record.iterations) {
		for (std::size_t i = 0; i < it.events.size(); ++i) {
			if (it.events[i].tool == "apply_correction" || it.events[i].tool == "adjust_correction") {
				REQUIRE(i + 1 < it.events.size());
				CHECK(it.events[i + 1].tool == "verify_correction");
			}
		}
	}
}

TEST_CASE("manual verify_correction requests are dropped") {
	Fixture fx;
	const auto e = entity_with(std::vector<double>(10, 2.0));
	ScriptedPolicy policy({"REASON: try.\nTOOLS: verify_correction", "REASON: done.\nTOOLS: NONE"});
	const auto record = run_react(fx.state_for(e, 6, {}), policy, fx.env);
	for (const auto &it : record.iterations)
		for (const auto &ev : it.events) CHECK(ev.tool != "verify_correction");
}

TEST_CASE("disabled tools never produce events") {
	Fixture fx;
	fx.env.enabled_tools.erase(ToolName::detect_phase);
	const auto e = entity_with({0, 0, 1, 2, 3, 4, 5, 6});
	RulePolicy policy;
	const auto record = run_react(fx.state_for(e, 6, {}), policy, fx.env);
	for (const auto &it : record.iterations)
		for (const auto &ev : it.events) CHECK(ev.tool != "detect_phase");
}

TEST_CASE("remote policy failure falls back to the rule policy") {
	Fixture fx;
	const auto e = entity_with({0, 0, 1, 2, 3, 4, 5, 6});
	AlwaysFailsPolicy broken;
	const auto record = run_react(fx.state_for(e, 6, {}), broken, fx.env);
	CHECK(record.policy_used == "broken+rule_fallback");
	CHECK(broken.calls == 1); // one failure, then the rule policy takes over
	CHECK(record.iterations_used >= 2);
}

TEST_CASE("remote policy request body matches the documented wire format") {
	RemoteEndpoint ep;
	ep.model = "llama3.1:8b";
	ep.temperature = 0.0;
	ep.max_tokens = 128;
	const auto body = RemotePolicy::request_body(ep, "hello");
	CHECK(body ==
	      R"({"max_tokens":128,"messages":[{"content":"hello","role":"user"}],"model":"llama3.1:8b","temperature":0.0})");
}

TEST_CASE("remote policy round-trips against a stub server") {
	httplib::Server server;
	std::string seen_body;
	server.Post("/v1/chat/completions", [&](const httplib::Request &req, httplib::Response &res) {
		seen_body = req.body;
		res.set_content(
		    R"({"choices":[{"message":{"content":"REASON: ok.\nTOOLS: NONE"}}],"usage":{"prompt_tokens":827,"completion_tokens":40}})",
		    "application/json");
	});
	const int port = server.bind_to_any_port("127.0.0.1");
	std::thread worker([&] { server.listen_after_bind(); });
	while (!server.is_running()) std::this_thread::sleep_for(std::chrono::milliseconds(1));

	RemoteEndpoint ep;
	ep.base_url = "http://127.0.0.1:" + std::to_string(port);
	RemotePolicy policy(ep);
	const auto reply = policy.decide("ping");
	CHECK(reply == "REASON: ok.\nTOOLS: NONE");
	CHECK(seen_body == RemotePolicy::request_body(ep, "ping"));

	server.stop();
	worker.join();
}

TEST_CASE("remote policy retries exactly twice then fails") {
	httplib::Server server;
	int hits = 0;
	server.Post("/v1/chat/completions", [&](const httplib::Request &, httplib::Response &res) {
		++hits;
		res.status = 500;
	});
	const int port = server.bind_to_any_port("127.0.0.1");
	std::thread worker([&] { server.listen_after_bind(); });
	while (!server.is_running()) std::this_thread::sleep_for(std::chrono::milliseconds(1));

	RemoteEndpoint ep;
	ep.base_url = "http://127.0.0.1:" + std::to_string(port);
	ep.retries = 2;
	ep.backoff_ms = 1;
	RemotePolicy policy(ep);
	CHECK_THROWS_AS(policy.decide("ping"), PolicyError);
	CHECK(hits == 3); // initial attempt + 2 retries

	server.stop();
	worker.join();
}

} // TEST_SUITE
