#include <doctest.h>

#include <cmath>

#include "cropcast/ablation.hpp"
#include "cropcast/evaluation.hpp"

using namespace cropcast;
using namespace cropcast::eval;

namespace {

trace::CorrectionRecord rec(const std::string &id, double y_raw, double y_final, double actual,
                            bool eligible = true) {
	trace::CorrectionRecord r;
	r.entity_id = id;
	r.eligible = eligible;
	r.y_raw = y_raw;
	r.y_final = y_final;
	r.actual = actual;
	return r;
}

} // namespace

TEST_SUITE("evaluation") {

TEST_CASE("perfect forecast scores zero everywhere") {
	const auto m = metric_triple({1, 2, 3}, {1, 2, 3}, 2.0);
	CHECK(m.mae == 0.0);
	CHECK(m.rmse == 0.0);
	CHECK(m.mase == 0.0);
}

TEST_CASE("constant unit errors") {
	const auto m = metric_triple({0, 0, 0}, {1, 1, 1}, 2.0);
	CHECK(m.mae == doctest::Approx(1.0));
	CHECK(m.rmse == doctest::Approx(1.0));
	CHECK(m.mase == doctest::Approx(0.5));
}

TEST_CASE("mixed errors split mae and rmse") {
	const auto m = metric_triple({0, 0}, {0, 2}, 1.0);
	CHECK(m.mae == doctest::Approx(1.0));
	CHECK(m.rmse == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("rmse dominates mae on random inputs") {
	Rng rng(77);
	for (int t = 0; t < 50; ++t) {
		std::vector<double> preds, actuals;
		const int n = rng.uniform_int(1, 30);
		for (int i = 0; i < n; ++i) {
			preds.push_back(rng.uniform(0, 10));
			actuals.push_back(rng.uniform(0, 10));
		}
		const auto m = metric_triple(preds, actuals, 1.0);
		CHECK(m.rmse >= m.mae - 1e-12);
	}
}

TEST_CASE("lag-1 persistence scores MASE = 1 against its own scale") {
	// actuals and the persistence forecast over them
	const std::vector<double> actuals{3, 5, 4, 7, 6, 8};
	std::vector<double> persistence{actuals[0]};
	for (std::size_t i = 1; i < actuals.size(); ++i) persistence.push_back(actuals[i - 1]);
	// in-sample persistence MAE as the scale, over the same pairs
	double scale = 0;
	for (std::size_t i = 1; i < actuals.size(); ++i) scale += std::abs(actuals[i] - actuals[i - 1]);
	scale /= static_cast<double>(actuals.size() - 1);
	std::vector<double> p(persistence.begin() + 1, persistence.end());
	std::vector<double> a(actuals.begin() + 1, actuals.end());
	const auto m = metric_triple(p, a, scale);
	CHECK(m.mase == doctest::Approx(1.0));
}

TEST_CASE("metrics errors on empty input and bad scale") {
	CHECK_THROWS_AS(metric_triple({}, {}, 1.0), std::invalid_argument);
	CHECK_THROWS_AS(metric_triple({1}, {1}, 0.0), std::invalid_argument);
	CHECK_THROWS_AS(metrics({}, 1.0), std::invalid_argument);
}

TEST_CASE("metrics linearity: pooled MAE equals the weighted combination") {
	std::vector<trace::CorrectionRecord> first{rec("a", 0, 1, 2), rec("a", 0, 2, 2)};
	std::vector<trace::CorrectionRecord> second{rec("b", 0, 5, 2)};
	auto all = first;
	all.insert(all.end(), second.begin(), second.end());
	const auto m1 = metrics(first, 1.0);
	const auto m2 = metrics(second, 1.0);
	const auto m = metrics(all, 1.0);
	const double expected =
	    (m1.corrected.mae * m1.scored + m2.corrected.mae * m2.scored) / (m1.scored + m2.scored);
	CHECK(m.corrected.mae == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("per-plot improvement sorts descending and handles passthrough plots") {
	std::vector<trace::CorrectionRecord> records{
	    rec("improved", 10, 4, 2),   // raw err 8, corr err 2 -> 75%
	    rec("flat", 3, 3, 5),        // passthrough -> 0%
	    rec("worse", 4, 1, 5),       // raw err 1, corr err 4 -> -300%
	};
	const auto rows = per_plot_improvement(records);
	REQUIRE(rows.size() == 3);
	CHECK(rows[0].entity_id == "improved");
	CHECK(rows[0].pct_improvement == doctest::Approx(75.0));
	CHECK(rows[1].entity_id == "flat");
	CHECK(rows[1].pct_improvement == 0.0);
	CHECK(rows[2].entity_id == "worse");
	CHECK(rows[2].pct_improvement < 0.0);

	const auto csv = per_plot_csv(rows);
	CHECK(csv.find("entity_id,mae_raw,mae_corrected,pct_improvement") == 0);
	CHECK(csv.find("improved") < csv.find("flat"));
}

TEST_CASE("tool usage rates count distinct tools per eligible prediction") {
	auto with_tools = [](const std::string &id, std::vector<std::string> tools, bool eligible) {
		auto r = rec(id, 1, 1, 1, eligible);
		trace::IterationTrace it;
		for (const auto &t : tools) it.events.push_back({t, nlohmann::json::object()});
		r.iterations.push_back(it);
		return r;
	};
	std::vector<trace::CorrectionRecord> records{
	    with_tools("a", {"learn_bias", "detect_phase", "learn_bias"}, true),
	    with_tools("b", {"learn_bias"}, true),
	    with_tools("c", {"detect_phase"}, false), // passthrough: excluded from denominator
	};
	const auto usage = tool_usage(records);
	CHECK(usage.non_trivial == 2);
	CHECK(usage.rates.at("learn_bias") == doctest::Approx(1.0));
	CHECK(usage.rates.at("detect_phase") == doctest::Approx(0.5));
	CHECK(usage.rates.at("apply_correction") == 0.0);
}

TEST_CASE("tool usage over zero eligible predictions reports n/a") {
	std::vector<trace::CorrectionRecord> records{rec("a", 1, 1, 1, false)};
	const auto usage = tool_usage(records);
	CHECK(usage.non_trivial == 0);
	CHECK(tool_usage_csv(usage).find("n/a") != std::string::npos);
}

TEST_CASE("leakage audit flags records sourced inside the horizon gap") {
	auto bad = rec("a", 1, 1, 1);
	bad.target_week = 10;
	bad.actual_frontier = 9; // must be <= 8 for horizon 2
	bad.memory_frontier = 5;
	bad.archive_frontier = 5;
	auto good = rec("b", 1, 1, 1);
	good.target_week = 10;
	good.actual_frontier = 8;
	good.memory_frontier = 8;
	good.archive_frontier = 9; // < target is enough for archives
	const auto violations = leakage_violations({bad, good}, 2);
	REQUIRE(violations.size() == 1);
	CHECK(violations[0].find("a week 10") != std::string::npos);
}

TEST_CASE("ablation conditions: 6 leave-one-out rows with the trajectory pair fused") {
	const auto conditions = ablation_conditions(AblationMode::leave_one_out);
	REQUIRE(conditions.size() == 6);
	for (const auto &[label, enabled] : conditions) {
		CHECK(enabled.count(trace::ToolName::apply_correction) == 1);
		if (label == "-evaluate_trajectory") {
			CHECK(enabled.count(trace::ToolName::evaluate_trajectory) == 0);
			CHECK(enabled.count(trace::ToolName::adjust_correction) == 0);
		}
	}
}

TEST_CASE("ablation conditions: only-one rows keep apply_correction enabled") {
	const auto conditions = ablation_conditions(AblationMode::only_one);
	REQUIRE(conditions.size() == 6);
	for (const auto &[label, enabled] : conditions) {
		CHECK(enabled.count(trace::ToolName::apply_correction) == 1);
		if (label == "evaluate_trajectory only")
			CHECK(enabled.count(trace::ToolName::adjust_correction) == 1);
		else
			CHECK(enabled.size() == 2);
	}
}

TEST_CASE("ablation markdown has full and baseline rows") {
	AblationResult result;
	result.rows.push_back({"full", {0.01, 0.02, 1.0}});
	result.rows.push_back({"-detect_phase", {0.02, 0.04, 2.0}});
	result.rows.push_back({"baseline", {0.015, 0.03, 1.5}});
	const auto md = ablation_markdown(result);
	CHECK(md.find("| full | 0.0100") != std::string::npos);
	CHECK(md.find("| baseline |") != std::string::npos);
}

} // TEST_SUITE
