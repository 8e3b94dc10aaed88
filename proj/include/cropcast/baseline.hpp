#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cropcast/ingest.hpp"

namespace cropcast::baseline {

// Missing external row for a requested (entity, week).
class PredictionGapError : public std::runtime_error {
public:
	explicit PredictionGapError(const std::string &msg) : std::runtime_error(msg) {}
};

struct RawPrediction {
	double q50 = 0.0;
	double q10 = 0.0;
	double q90 = 0.0;
	double lookahead_q50 = 0.0; // prediction one week beyond the target
	int horizon = 2;
};

enum class SourceKind { builtin, external };

struct Source {
	SourceKind kind = SourceKind::builtin;
	const ingest::PredictionTable *table = nullptr; // required when external
};

// Raw prediction for entity at target_week. The builtin forecaster is the
// mean of the 4-week context window (weeks t-5..t-2) with +-20% bands; the
// external source is a verbatim table lookup. Baseline-side artifacts are
// injected after the base numbers are formed.
RawPrediction predict(const ingest::Entity &entity, int target_week, const Source &source,
                      const std::vector<ingest::ResolvedArtifact> &artifacts, int horizon = 2);

// First target week with a full context window.
int first_predictable_week(int horizon = 2);

} // namespace cropcast::baseline
