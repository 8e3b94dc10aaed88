#include "cropcast/toolkit.hpp"

#include <algorithm>
#include <cmath>

namespace cropcast::tools {

using nlohmann::json;

std::string phase_name(Phase p) {
	switch (p) {
	case Phase::pre_season: return "pre_season";
	case Phase::false_start: return "false_start";
	case Phase::early: return "early";
	case Phase::ramping: return "ramping";
	case Phase::peak: return "peak";
	case Phase::declining: return "declining";
	case Phase::ended: return "ended";
	case Phase::trending_up: return "trending_up";
	case Phase::trending_down: return "trending_down";
	case Phase::stable: return "stable";
	}
	return "stable";
}

std::string rule_tag_name(RuleTag t) {
	switch (t) {
	case RuleTag::physical_limit: return "physical_limit";
	case RuleTag::phase_blend: return "phase_blend";
	case RuleTag::statistical: return "statistical";
	case RuleTag::none: return "none";
	}
	return "none";
}

json PhaseEstimate::to_json() const {
	json j{{"phase", phase_name(phase)},
	       {"y_phase", y_phase},
	       {"confidence", confidence},
	       {"trailing_zeros", trailing_zeros}};
	if (decay_rate) j["decay_rate"] = *decay_rate;
	if (active_window) j["active_window"] = *active_window;
	return j;
}

json BiasEstimate::to_json() const {
	return json{{"directional", directional},
	            {"gamma", gamma},
	            {"gamma_decayed", gamma_decayed},
	            {"mean_error", mean_error},
	            {"mean_abs_error", mean_abs_error}};
}

json RangeVerdict::to_json() const {
	json j{{"in_range", in_range}, {"p10", p10}, {"p90", p90}, {"samples", samples}};
	if (clamped_value) j["clamped_value"] = *clamped_value;
	return j;
}

json SafetyVerdict::to_json() const {
	const char *s = status == SafetyStatus::pass ? "pass"
	                : status == SafetyStatus::warn ? "warn"
	                                               : "override";
	return json{{"status", s}, {"ratio", ratio}, {"final_value", final_value}, {"reason", reason}};
}

json TrajectoryVerdict::to_json() const {
	const char *v = verdict == TrajectoryKind::consistent ? "consistent"
	                : verdict == TrajectoryKind::trend_contradiction ? "trend_contradiction"
	                                                                 : "phase_contradiction";
	return json{{"verdict", v},
	            {"lo", lo},
	            {"hi", hi},
	            {"slope", slope},
	            {"attempts_remaining", attempts_remaining}};
}

PhaseEstimate neutral_phase(double y_raw) {
	PhaseEstimate p;
	p.phase = Phase::stable;
	p.y_phase = y_raw;
	p.confidence = 0.0;
	return p;
}

// ---------------------------------------------------------------------------

std::vector<std::pair<std::string, double>> find_similar(
    const ShapeVector &target, const std::vector<std::pair<std::string, ShapeVector>> &corpus) {
	std::vector<std::pair<std::string, double>> scored;
	scored.reserve(corpus.size());
	for (const auto &[id, shape] : corpus) scored.emplace_back(id, target.distance(shape));
	std::sort(scored.begin(), scored.end(), [](const auto &a, const auto &b) {
		if (a.second != b.second) return a.second < b.second;
		return a.first < b.first;
	});
	if (scored.size() > 3) scored.resize(3);
	return scored;
}

BiasEstimate learn_bias(const std::vector<double> &recent_predictions,
                        const std::vector<double> &recent_actuals, int trailing_zeros) {
	if (recent_predictions.size() != recent_actuals.size() || recent_predictions.empty())
		throw std::invalid_argument("learn_bias: lists must be paired and non-empty");

	BiasEstimate b;
	std::vector<double> errors, ratios;
	for (std::size_t i = 0; i < recent_actuals.size(); ++i) {
		errors.push_back(recent_actuals[i] - recent_predictions[i]);
		if (recent_actuals[i] > 0.0 && recent_predictions[i] > 0.0)
			ratios.push_back(recent_actuals[i] / recent_predictions[i]);
	}
	b.mean_error = stats::mean(errors);
	double abs_acc = 0.0;
	for (double e : errors) abs_acc += std::abs(e);
	b.mean_abs_error = abs_acc / static_cast<double>(errors.size());

	b.directional = std::abs(b.mean_error) > 0.3 * b.mean_abs_error && b.mean_abs_error > 0.0;
	if (ratios.empty()) {
		b.directional = false;
		b.gamma = 1.0;
		b.gamma_decayed = 1.0;
		return b;
	}
	b.gamma = stats::median(ratios);
	if (!b.directional) {
		b.gamma_decayed = 1.0;
	} else if (trailing_zeros > 0 && b.gamma > 1.0) {
		b.gamma_decayed = 1.0 + (b.gamma - 1.0) * std::pow(0.5, trailing_zeros);
	} else {
		b.gamma_decayed = b.gamma;
	}
	return b;
}

// ---------------------------------------------------------------------------

namespace {

struct HistoryView {
	int first_nonzero = -1;
	int last_nonzero = -1;
	int peak_index = -1; // earliest argmax
	double peak_value = 0.0;
	int nonzero_count = 0;
	int trailing_zeros = 0;

	explicit HistoryView(const std::vector<double> &history) {
		for (std::size_t i = 0; i < history.size(); ++i) {
			if (history[i] > 0.0) {
				if (first_nonzero < 0) first_nonzero = static_cast<int>(i);
				last_nonzero = static_cast<int>(i);
				++nonzero_count;
			}
			if (history[i] > peak_value) {
				peak_value = history[i];
				peak_index = static_cast<int>(i);
			}
		}
		if (last_nonzero >= 0)
			trailing_zeros = static_cast<int>(history.size()) - 1 - last_nonzero;
	}
};

PhaseEstimate detect_phase_seasonal(const std::vector<double> &history, double y_hat, int horizon,
                                    double lookahead, double zero_floor) {
	PhaseEstimate p;
	const HistoryView view(history);
	p.trailing_zeros = view.trailing_zeros;

	// 1. Nothing observed yet.
	if (view.nonzero_count == 0) {
		p.y_phase = 0.0;
		const double near_zero = std::max(0.1 * stats::mean(history), 1e-9);
		if (y_hat > 0.0 && lookahead < near_zero) {
			p.phase = Phase::false_start; // isolated spike the lookahead does not confirm
			p.confidence = 0.85;
		} else {
			p.phase = Phase::pre_season;
			p.confidence = 0.90;
		}
		return p;
	}

	// 2. Season over: trailing zeros after the last non-zero week.
	if (view.trailing_zeros >= 1) {
		p.phase = Phase::ended;
		p.y_phase = 0.0;
		p.confidence = std::min(0.95, 0.75 + 0.05 * view.trailing_zeros);
		return p;
	}

	const double y_last = history.back(); // non-zero from here on

	// 3. A single observation is too little to argue with.
	if (view.nonzero_count == 1) {
		p.phase = Phase::early;
		p.y_phase = std::max(y_hat, y_last);
		p.confidence = 0.35;
		return p;
	}

	const int n = static_cast<int>(history.size());
	const bool off_peak = y_last < 0.9 * view.peak_value;
	const bool non_increasing = history[n - 1] <= history[n - 2];

	// 4. Declining: fit a per-week decay rate and project it forward.
	if (off_peak && non_increasing) {
		p.phase = Phase::declining;
		const int dt = (n - 1) - view.peak_index;
		const double delta = std::pow(y_last / view.peak_value, 1.0 / std::max(dt, 1));
		double projected = y_last * std::pow(delta, horizon);
		if (projected < zero_floor) projected = 0.0;
		p.y_phase = projected;
		p.decay_rate = delta;
		const int active = view.last_nonzero - view.first_nonzero + 1;
		p.active_window = active;
		p.confidence = std::min(0.85, 0.4 + 0.1 * active);
		return p;
	}

	// 5. At or near the running maximum.
	if (y_last >= 0.9 * view.peak_value) {
		p.phase = Phase::peak;
		p.y_phase = y_hat;
		p.confidence = 0.40;
		return p;
	}

	// 6. Rising slope: trust the model.
	p.phase = Phase::ramping;
	p.y_phase = y_hat;
	p.confidence = 0.0;
	return p;
}

PhaseEstimate detect_phase_continuous(const std::vector<double> &recent, double y_hat) {
	PhaseEstimate p;
	p.y_phase = y_hat;
	if (recent.size() < 2) {
		p.phase = Phase::stable;
		return p;
	}
	const std::size_t half = recent.size() / 2;
	const std::vector<double> first(recent.begin(), recent.begin() + static_cast<long>(half));
	const std::vector<double> second(recent.begin() + static_cast<long>(half), recent.end());
	const double m1 = stats::mean(first);
	const double m2 = stats::mean(second);
	const double change = m1 != 0.0 ? (m2 - m1) / std::abs(m1) : 0.0;

	if (change > 0.10) {
		p.phase = Phase::trending_up;
	} else if (change < -0.10) {
		p.phase = Phase::trending_down;
	} else {
		p.phase = Phase::stable;
	}
	p.confidence = std::min(0.75, std::abs(change) / 0.4);
	return p;
}

} // namespace

PhaseEstimate detect_phase(const std::vector<double> &recent, double y_hat, int horizon,
                           double lookahead, const std::vector<double> &history,
                           const DatasetProfile &profile) {
	if (profile.kind == DatasetKind::zero_valley)
		return detect_phase_seasonal(history, y_hat, horizon, lookahead, profile.zero_floor);
	return detect_phase_continuous(recent, y_hat);
}

RangeVerdict validate_range(double y_hat, double y_prev,
                            const std::vector<double> &position_samples) {
	RangeVerdict v;
	v.samples = static_cast<int>(position_samples.size());
	if (!position_samples.empty()) {
		std::vector<double> sorted = position_samples;
		std::sort(sorted.begin(), sorted.end());
		v.p10 = stats::percentile_sorted(sorted, 0.10);
		v.p90 = stats::percentile_sorted(sorted, 0.90);
	}
	// Fewer than three comparisons, or an undefined fractional change: defer.
	if (v.samples < 3 || y_prev == 0.0) return v;

	const double change = (y_hat - y_prev) / y_prev;
	if (change > v.p90 + 0.5) {
		v.in_range = false;
		v.clamped_value = y_prev * (1.0 + v.p90);
	} else if (change < v.p10 - 0.5) {
		v.in_range = false;
		v.clamped_value = y_prev * (1.0 + v.p10);
	}
	return v;
}

CorrectionOutcome apply_correction(double y_raw, const PhaseEstimate &phase,
                                   const BiasEstimate &bias, const RangeVerdict &range,
                                   double position_bias) {
	// Tier 1: physical limit check supersedes all other logic.
	if (!range.in_range && range.clamped_value)
		return {*range.clamped_value, RuleTag::physical_limit};

	// Tier 2: phase blend; statistical multipliers are suppressed here to
	// avoid double-correction.
	if (phase.confidence >= 0.5)
		return {phase.confidence * phase.y_phase + (1.0 - phase.confidence) * y_raw,
		        RuleTag::phase_blend};

	// Tier 3: statistical fine-tuning, total multiplier bounded.
	const double multiplier =
	    std::clamp(bias.gamma_decayed * (1.0 + position_bias), 0.5, 2.0);
	return {y_raw * multiplier, RuleTag::statistical};
}

SafetyVerdict verify_correction(double y_star, double y_raw, const JumpDistribution &jump,
                                const PhaseEstimate &phase, const DatasetProfile &profile,
                                double hist_max) {
	SafetyVerdict v;
	v.ratio = y_raw != 0.0 ? y_star / y_raw : 1.0;
	v.final_value = y_star;
	v.reason = "ratio within jump percentiles";

	if (v.ratio > jump.p05 && v.ratio < jump.p95) {
		v.status = SafetyStatus::pass;
	} else if (v.ratio >= jump.p01 && v.ratio <= jump.p99) {
		v.status = SafetyStatus::warn; // flagged in the logs but not overridden
		v.reason = "ratio in warning zone";
	} else {
		v.status = SafetyStatus::override_applied;
		const double clamped = v.ratio < jump.p01 ? jump.p01 : jump.p99;
		v.final_value = y_raw * clamped;
		v.reason = "ratio outside P01..P99, clamped";
	}

	// Absolute overrides supersede the ratio verdict.
	const bool dormant = profile.kind == DatasetKind::zero_valley &&
	                     (phase.phase == Phase::pre_season || phase.phase == Phase::ended) &&
	                     phase.confidence >= 0.75;
	if (dormant && v.final_value > 0.0) {
		v.status = SafetyStatus::override_applied;
		v.final_value = 0.0;
		v.reason = "positive yield during dormant off-season";
	}
	if (v.final_value > 3.0 * hist_max) {
		v.status = SafetyStatus::override_applied;
		v.final_value = hist_max;
		v.reason = "exceeds 3x historical maximum";
	}
	return v;
}

TrajectoryVerdict evaluate_trajectory(double y_star, const std::array<double, 3> &last3,
                                      const PhaseEstimate &phase, int attempts_remaining) {
	TrajectoryVerdict v;
	v.attempts_remaining = attempts_remaining;

	const double w_mean = (last3[0] + last3[1] + last3[2]) / 3.0;
	const double y_t = last3[2];
	v.slope = w_mean != 0.0 ? (y_t - last3[0]) / (2.0 * w_mean) : 0.0;
	const double projected = y_t * (1.0 + v.slope);
	v.lo = 0.7 * std::min(y_t, projected);
	v.hi = 1.3 * std::max(y_t, projected);

	if (y_star >= v.lo && y_star <= v.hi) {
		v.verdict = TrajectoryKind::consistent;
		return v;
	}
	const bool phase_up = phase.phase == Phase::ramping || phase.phase == Phase::trending_up ||
	                      phase.phase == Phase::early;
	const bool phase_down = phase.phase == Phase::declining ||
	                        phase.phase == Phase::trending_down || phase.phase == Phase::ended;
	if ((phase_up && y_star < v.lo) || (phase_down && y_star > v.hi)) {
		v.verdict = TrajectoryKind::phase_contradiction; // opposes the seasonal phase
	} else {
		v.verdict = TrajectoryKind::trend_contradiction; // right direction, too far
	}
	return v;
}

double adjust_correction(double prior, const TrajectoryVerdict &verdict,
                         const PhaseEstimate &phase, double y_raw, double policy_weight) {
	(void)prior;
	if (verdict.verdict == TrajectoryKind::consistent)
		throw std::logic_error("adjust_correction: called on a consistent trajectory");
	if (verdict.attempts_remaining <= 0)
		throw std::logic_error("adjust_correction: attempt budget exhausted (runner bug)");
	if (policy_weight < 0.0 || policy_weight > 1.0)
		throw std::invalid_argument("adjust_correction: weight must be in [0,1]");
	return policy_weight * phase.y_phase + (1.0 - policy_weight) * y_raw;
}

} // namespace cropcast::tools
