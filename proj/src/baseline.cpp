#include "cropcast/baseline.hpp"

#include <algorithm>
#include <cmath>

namespace cropcast::baseline {

int first_predictable_week(int horizon) {
	return horizon + 3; // 4-week context window ends at t - horizon
}

namespace {

struct Injection {
	double additive = 0.0;
	double multiplier = 1.0;
};

Injection artifact_injection(const std::vector<ingest::ResolvedArtifact> &artifacts,
                             const std::string &entity_id, int week) {
	Injection inj;
	for (const auto &a : artifacts) {
		if (a.entity_id != entity_id) continue;
		switch (a.kind) {
		case ingest::ArtifactKind::pre_season_spike:
		case ingest::ArtifactKind::post_season_spike:
			if (a.week_index == week) inj.additive += a.magnitude;
			break;
		case ingest::ArtifactKind::over_bias:
			inj.multiplier *= 1.0 + a.magnitude;
			break;
		case ingest::ArtifactKind::under_bias:
			inj.multiplier *= std::max(0.0, 1.0 - a.magnitude);
			break;
		}
	}
	return inj;
}

double inject(double value, const Injection &inj) {
	return value * inj.multiplier + inj.additive;
}

} // namespace

RawPrediction predict(const ingest::Entity &entity, int target_week, const Source &source,
                      const std::vector<ingest::ResolvedArtifact> &artifacts, int horizon) {
	if (horizon < 1) throw ConfigError("predict: horizon must be >= 1");

	RawPrediction p;
	p.horizon = horizon;

	if (source.kind == SourceKind::external) {
		if (source.table == nullptr) throw ConfigError("predict: external source without a table");
		const auto row = source.table->lookup(entity.entity_id, target_week);
		if (!row)
			throw PredictionGapError("predict: no external prediction for (" + entity.entity_id +
			                         ", week " + std::to_string(target_week) + ")");
		p.q10 = row->q10;
		p.q50 = row->q50;
		p.q90 = row->q90;
		const auto next = source.table->lookup(entity.entity_id, target_week + 1);
		if (next) {
			p.lookahead_q50 = next->q50;
		} else {
			log_debug("predict: no lookahead row for (" + entity.entity_id + ", week " +
			          std::to_string(target_week + 1) + "), reusing target q50");
			p.lookahead_q50 = p.q50;
		}
		return p; // external predictions pass through bit-exactly
	}

	const int ctx_end = target_week - horizon;        // latest observable week
	const int ctx_start = ctx_end - 3;                // 4-week window
	if (ctx_start < 0 || ctx_end >= static_cast<int>(entity.observations.size()))
		throw PredictionGapError("predict: context window t-" + std::to_string(horizon + 3) + "..t-" +
		                         std::to_string(horizon) + " unavailable for (" + entity.entity_id +
		                         ", week " + std::to_string(target_week) + ")");

	double acc = 0.0;
	for (int w = ctx_start; w <= ctx_end; ++w) acc += entity.observations[w].yield_value;
	const double mean = acc / 4.0;

	const auto target_inj = artifact_injection(artifacts, entity.entity_id, target_week);
	p.q50 = inject(mean, target_inj);
	p.q10 = inject(mean * 0.8, target_inj);
	p.q90 = inject(mean * 1.2, target_inj);
	// Same context window; only the injection week differs.
	const auto next_inj = artifact_injection(artifacts, entity.entity_id, target_week + 1);
	p.lookahead_q50 = inject(mean, next_inj);
	return p;
}

} // namespace cropcast::baseline
