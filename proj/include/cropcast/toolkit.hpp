#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cropcast/features.hpp"
#include "cropcast/memory.hpp"

namespace cropcast::tools {

using features::DatasetKind;
using features::DatasetProfile;
using features::ShapeVector;
using memory::JumpDistribution;

// ---------------------------------------------------------------------------
// Verdict types
// ---------------------------------------------------------------------------

enum class Phase {
	pre_season,
	false_start,
	early,
	ramping,
	peak,
	declining,
	ended,
	trending_up,
	trending_down,
	stable,
};

std::string phase_name(Phase p);

struct PhaseEstimate {
	Phase phase = Phase::stable;
	double y_phase = 0.0;
	double confidence = 0.0;
	std::optional<double> decay_rate;  // declining only
	std::optional<int> active_window;  // declining only
	int trailing_zeros = 0;

	nlohmann::json to_json() const;
};

// Neutral stand-in when detect_phase is disabled or never ran: zero
// confidence and y_phase equal to the raw prediction, so blends are no-ops.
PhaseEstimate neutral_phase(double y_raw);

struct BiasEstimate {
	bool directional = false;
	double gamma = 1.0;
	double gamma_decayed = 1.0;
	double mean_error = 0.0;
	double mean_abs_error = 0.0;

	nlohmann::json to_json() const;
};

struct RangeVerdict {
	bool in_range = true;
	std::optional<double> clamped_value;
	double p10 = 0.0;
	double p90 = 0.0;
	int samples = 0;

	nlohmann::json to_json() const;
};

enum class SafetyStatus { pass, warn, override_applied };

struct SafetyVerdict {
	SafetyStatus status = SafetyStatus::pass;
	double ratio = 1.0;
	double final_value = 0.0;
	std::string reason;

	nlohmann::json to_json() const;
};

enum class TrajectoryKind { consistent, trend_contradiction, phase_contradiction };

struct TrajectoryVerdict {
	TrajectoryKind verdict = TrajectoryKind::consistent;
	double lo = 0.0;
	double hi = 0.0;
	double slope = 0.0;
	int attempts_remaining = 2;

	nlohmann::json to_json() const;
};

enum class RuleTag { physical_limit, phase_blend, statistical, none };

std::string rule_tag_name(RuleTag t);

struct CorrectionOutcome {
	double value = 0.0;
	RuleTag tag = RuleTag::none;
};

// ---------------------------------------------------------------------------
// The eight tools
// ---------------------------------------------------------------------------

// Top-3 nearest shape vectors by Euclidean distance, ties broken by id.
std::vector<std::pair<std::string, double>> find_similar(
    const ShapeVector &target, const std::vector<std::pair<std::string, ShapeVector>> &corpus);

// Directional bias over paired (prediction, actual) weeks; gamma is the
// median actual/prediction ratio over positive pairs, decayed toward 1 as
// trailing zero-yield weeks accumulate.
BiasEstimate learn_bias(const std::vector<double> &recent_predictions,
                        const std::vector<double> &recent_actuals, int trailing_zeros);

// Segments the observed curve into operational phases and produces a
// phase-conditioned estimate with a confidence weight.
PhaseEstimate detect_phase(const std::vector<double> &recent, double y_hat, int horizon,
                           double lookahead, const std::vector<double> &history,
                           const DatasetProfile &profile);

// Fractional change from the last observed yield checked against the P10/P90
// of historical changes at the same seasonal position, with a 0.5 buffer.
RangeVerdict validate_range(double y_hat, double y_prev,
                            const std::vector<double> &position_samples);

// Three-tier priority cascade: physical limit clamp, phase blend,
// statistical fine-tuning. First matching tier wins.
CorrectionOutcome apply_correction(double y_raw, const PhaseEstimate &phase,
                                   const BiasEstimate &bias, const RangeVerdict &range,
                                   double position_bias);

// Ratio guardrails against the training jump distribution plus absolute
// off-season and historical-maximum overrides.
SafetyVerdict verify_correction(double y_star, double y_raw, const JumpDistribution &jump,
                                const PhaseEstimate &phase, const DatasetProfile &profile,
                                double hist_max);

// Plausible range for the upcoming week from the last three observed yields;
// contradictions trigger iterative adjustment.
TrajectoryVerdict evaluate_trajectory(double y_star, const std::array<double, 3> &last3,
                                      const PhaseEstimate &phase, int attempts_remaining);

// Re-blend with a revised weight after a contradiction. The caller owns the
// attempt budget; calling with none left is a runner bug.
double adjust_correction(double prior, const TrajectoryVerdict &verdict,
                         const PhaseEstimate &phase, double y_raw, double policy_weight);

} // namespace cropcast::tools
