#include "cropcast/memory.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

namespace cropcast::memory {

using nlohmann::json;

JumpDistribution jump_distribution(const std::vector<const ingest::Entity *> &train) {
	std::vector<double> ratios;
	for (const auto *e : train) {
		const auto &obs = e->observations;
		for (std::size_t i = 1; i < obs.size(); ++i) {
			const double prev = obs[i - 1].yield_value;
			if (prev > 0.0) ratios.push_back(obs[i].yield_value / prev);
		}
	}
	if (ratios.empty())
		throw ConfigError("jump_distribution: no consecutive pairs with positive y_{t-1}");

	std::sort(ratios.begin(), ratios.end());
	JumpDistribution d;
	d.p01 = stats::percentile_sorted(ratios, 0.01);
	d.p05 = stats::percentile_sorted(ratios, 0.05);
	d.p10 = stats::percentile_sorted(ratios, 0.10);
	d.p90 = stats::percentile_sorted(ratios, 0.90);
	d.p95 = stats::percentile_sorted(ratios, 0.95);
	d.p99 = stats::percentile_sorted(ratios, 0.99);
	return d;
}

std::map<int, std::vector<double>> position_change_index(
    const std::vector<const ingest::Entity *> &train, int horizon) {
	std::map<int, std::vector<double>> index;
	for (const auto *e : train) {
		const auto &obs = e->observations;
		for (std::size_t i = static_cast<std::size_t>(horizon); i < obs.size(); ++i) {
			const double prev = obs[i - horizon].yield_value;
			if (prev > 0.0)
				index[obs[i].iso_week].push_back((obs[i].yield_value - prev) / prev);
		}
	}
	return index;
}

int MemoryStore::progress_decile(double progress) {
	const double p = std::clamp(progress, 0.0, 1.0);
	return std::min(9, static_cast<int>(std::floor(p * 10.0)));
}

void MemoryStore::record_lagged_error(const std::string &entity_id, int iso_week, double progress,
                                      double predicted, double actual, int source_week) {
	++confirmed_[entity_id];
	bias_frontier_ = std::max(bias_frontier_, source_week);
	if (predicted <= 0.0) {
		log_debug("record_lagged_error: skipping non-positive prediction for " + entity_id);
		return;
	}
	const double err = (actual - predicted) / predicted;
	const std::string scope = per_plot_bias_ ? entity_id : "";
	buckets_[{scope, iso_week, progress_decile(progress)}].push_back(err);
	dump_lines_.push_back(json{{"type", "lagged_error"},
	                           {"entity_id", entity_id},
	                           {"iso_week", iso_week},
	                           {"decile", progress_decile(progress)},
	                           {"error", err},
	                           {"source_week", source_week}}
	                          .dump());
}

double MemoryStore::position_bias(int iso_week, double progress,
                                  const std::string &entity_id) const {
	const int decile = progress_decile(progress);
	const std::string scope = per_plot_bias_ ? entity_id : "";
	auto it = buckets_.find({scope, iso_week, decile});
	if (it != buckets_.end() && !it->second.empty()) return stats::median(it->second);

	// Fall back to the same decile pooled over every week of the year.
	std::vector<double> pooled;
	for (const auto &[key, errs] : buckets_)
		if (std::get<0>(key) == scope && std::get<2>(key) == decile)
			pooled.insert(pooled.end(), errs.begin(), errs.end());
	if (!pooled.empty()) return stats::median(pooled);
	return 0.0;
}

int MemoryStore::confirmed_count(const std::string &entity_id) const {
	auto it = confirmed_.find(entity_id);
	return it == confirmed_.end() ? 0 : it->second;
}

void MemoryStore::archive_plot(const std::string &entity_id, const features::ShapeVector &shape,
                               const std::vector<trace::CorrectionRecord> &outcomes,
                               int source_week) {
	ArchivedPlot plot;
	plot.shape = shape;
	plot.outcome_count = static_cast<int>(outcomes.size());
	plot.source_week = source_week;
	double raw_acc = 0.0, corr_acc = 0.0;
	int n = 0;
	for (const auto &r : outcomes) {
		if (!r.actual) continue;
		raw_acc += std::abs(r.y_raw - *r.actual);
		corr_acc += std::abs(r.y_final - *r.actual);
		++n;
	}
	if (n > 0) {
		plot.mae_raw = raw_acc / n;
		plot.mae_corrected = corr_acc / n;
	}
	archive_[entity_id] = plot; // upsert keeps the latest partial curve
	archive_frontier_ = std::max(archive_frontier_, source_week);
	dump_lines_.push_back(json{{"type", "archive"},
	                           {"entity_id", entity_id},
	                           {"outcomes", plot.outcome_count},
	                           {"source_week", source_week}}
	                          .dump());
}

std::vector<Directive> MemoryStore::reflect(
    const std::vector<trace::CorrectionRecord> &recent_outcomes, ReasonerPolicy &policy) {
	// Per-tool trigger counts and MAE impact over records with known actuals.
	std::map<std::string, std::pair<int, int>> impact; // tool -> (worsened, total)
	double mae_raw = 0.0, mae_corr = 0.0;
	int scored = 0;
	for (const auto &r : recent_outcomes) {
		if (!r.actual) continue;
		++scored;
		mae_raw += std::abs(r.y_raw - *r.actual);
		mae_corr += std::abs(r.y_final - *r.actual);
		if (r.y_final == r.y_raw) continue;
		const bool worsened = std::abs(r.y_final - *r.actual) > std::abs(r.y_raw - *r.actual);
		for (const auto &it : r.iterations) {
			for (const auto &ev : it.events) {
				auto &[w, t] = impact[ev.tool];
				++t;
				if (worsened) ++w;
			}
		}
	}
	if (scored == 0) return {};
	mae_raw /= scored;
	mae_corr /= scored;

	std::vector<Directive> added;
	auto push_directive = [&](const std::string &text) {
		Directive d;
		d.text = text;
		d.created_step = step_;
		d.source_hash = to_hex(fnv1a64(text));
		directives_.push_back(d);
		added.push_back(d);
		dump_lines_.push_back(json{{"type", "directive"}, {"text", text}, {"step", step_}}.dump());
	};

	if (policy.kind() == PolicyKind::remote) {
		std::ostringstream prompt;
		prompt << "You maintain strategy notes for a forecast-correction agent.\n";
		prompt << "Recent window: " << scored << " scored predictions, raw MAE " << mae_raw
		       << ", corrected MAE " << mae_corr << ".\n";
		prompt << "Per-tool correction outcomes (worsened/total):\n";
		for (const auto &[tool, wt] : impact)
			prompt << "  " << tool << ": " << wt.first << "/" << wt.second << "\n";
		prompt << "Reply with one short strategic directive for future predictions.";
		try {
			const std::string reply = policy.decide(prompt.str());
			if (!reply.empty()) {
				push_directive(reply);
			} else {
				log_warn("reflect: empty policy reply, no directive added");
			}
			return added;
		} catch (const PolicyError &err) {
			log_warn(std::string("reflect: policy failure, using rule templates: ") + err.what());
		}
	}

	// Rule templates: flag tools whose corrections worsened MAE in >= 60% of
	// at least 5 uses.
	for (const auto &[tool, wt] : impact) {
		const auto [worsened, total] = wt;
		if (total >= 5 && worsened * 10 >= total * 6) {
			std::ostringstream text;
			text << "de-prioritize " << tool << ": corrections worsened MAE in " << worsened << "/"
			     << total << " recent uses";
			push_directive(text.str());
		}
	}
	if (mae_corr < mae_raw && added.empty()) {
		std::ostringstream text;
		text << "corrections are helping (MAE " << mae_raw << " -> " << mae_corr
		     << "); maintain the current tool ordering";
		push_directive(text.str());
	}
	return added;
}

std::string MemoryStore::dump_jsonl() const {
	std::ostringstream out;
	for (const auto &line : dump_lines_) out << line << "\n";
	return out.str();
}

} // namespace cropcast::memory
