#include "cropcast/features.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace cropcast::features {

using nlohmann::json;

std::string growth_pattern_name(GrowthPattern p) {
	switch (p) {
	case GrowthPattern::peak_middle: return "peak_middle";
	case GrowthPattern::increasing: return "increasing";
	case GrowthPattern::decreasing: return "decreasing";
	case GrowthPattern::flat: return "flat";
	}
	return "flat";
}

static GrowthPattern growth_pattern_from_name(const std::string &name) {
	if (name == "peak_middle") return GrowthPattern::peak_middle;
	if (name == "increasing") return GrowthPattern::increasing;
	if (name == "decreasing") return GrowthPattern::decreasing;
	return GrowthPattern::flat;
}

std::string dataset_kind_name(DatasetKind k) {
	return k == DatasetKind::zero_valley ? "zero_valley" : "positive_floor";
}

double ShapeVector::distance(const ShapeVector &other) const {
	double acc = 0.0;
	for (std::size_t i = 0; i < v.size(); ++i) {
		const double d = v[i] - other.v[i];
		acc += d * d;
	}
	return std::sqrt(acc);
}

ShapeVector compute_shape_vector(const std::vector<double> &series) {
	ShapeVector sv;
	if (series.empty()) return sv;
	const auto n = series.size();
	const double m = stats::mean(series);
	const double sd = stats::pop_std(series);

	std::size_t peak_idx = 0, trough_idx = 0;
	for (std::size_t i = 1; i < n; ++i) {
		if (series[i] > series[peak_idx]) peak_idx = i;
		if (series[i] < series[trough_idx]) trough_idx = i;
	}

	int n_peaks = 0;
	for (std::size_t i = 0; i < n; ++i) {
		const double left = i > 0 ? series[i - 1] : -std::numeric_limits<double>::infinity();
		const double right = i + 1 < n ? series[i + 1] : -std::numeric_limits<double>::infinity();
		if (series[i] > left && series[i] > right) ++n_peaks;
	}

	sv.v[0] = m > 0.0 ? sd / m : 0.0;
	sv.v[1] = static_cast<double>(peak_idx) / static_cast<double>(n);
	sv.v[2] = static_cast<double>(trough_idx) / static_cast<double>(n);
	sv.v[3] = static_cast<double>(std::min(n_peaks, 5)) / 5.0;
	if (m > 0.0) {
		sv.v[4] = series[peak_idx] / m;
		sv.v[5] = m / series[peak_idx];
	}
	return sv;
}

GrowthPattern classify_growth_pattern(double early, double mid, double late) {
	if (mid > 1.1 * early && mid > 1.1 * late) return GrowthPattern::peak_middle;
	if (late > 1.1 * early) return GrowthPattern::increasing;
	if (late < 0.9 * early) return GrowthPattern::decreasing;
	return GrowthPattern::flat;
}

namespace {

double mean_range(const std::vector<double> &xs, std::size_t lo, std::size_t hi) {
	if (hi <= lo) return 0.0;
	double acc = 0.0;
	for (std::size_t i = lo; i < hi; ++i) acc += xs[i];
	return acc / static_cast<double>(hi - lo);
}

int round_median(std::vector<double> vals) {
	if (vals.empty()) return 0;
	return static_cast<int>(std::lround(stats::median(std::move(vals))));
}

} // namespace

std::map<int, double> per_year_zero_fractions(const ingest::Entity &entity) {
	std::map<int, std::pair<int, int>> counts; // year -> (zeros, total)
	for (const auto &o : entity.observations) {
		auto &[zeros, total] = counts[o.year];
		if (o.yield_value <= 0.0) ++zeros;
		++total;
	}
	std::map<int, double> out;
	for (const auto &[year, zt] : counts)
		out[year] = static_cast<double>(zt.first) / static_cast<double>(zt.second);
	return out;
}

CurveShapeFeatures curve_features(const ingest::Entity &entity) {
	const auto &obs = entity.observations;
	if (obs.size() < 3)
		throw FeatureError("curve_features: entity '" + entity.entity_id + "' has fewer than 3 observations");

	std::vector<double> y;
	y.reserve(obs.size());
	for (const auto &o : obs) y.push_back(o.yield_value);
	const auto n = y.size();

	CurveShapeFeatures f;
	f.mean = stats::mean(y);
	f.std_dev = stats::pop_std(y);
	f.cv = f.mean > 0.0 ? f.std_dev / f.mean : 0.0;

	std::vector<double> diffs;
	diffs.reserve(n - 1);
	for (std::size_t i = 1; i < n; ++i) diffs.push_back(y[i] - y[i - 1]);
	f.volatility = stats::pop_std(diffs);

	std::size_t peak_idx = 0;
	int zeros = 0;
	for (std::size_t i = 0; i < n; ++i) {
		if (y[i] > y[peak_idx]) peak_idx = i; // earliest tie wins
		if (y[i] <= 0.0) ++zeros;
	}
	f.peak_position = static_cast<double>(peak_idx) / static_cast<double>(n);
	f.zero_fraction = static_cast<double>(zeros) / static_cast<double>(n);

	// Index thirds; integer-division boundaries send remainder weeks to the
	// later segments so the three ranges always partition [0, n).
	const std::size_t third = n / 3, two_thirds = 2 * n / 3;
	f.early_mean = mean_range(y, 0, third);
	f.mid_mean = mean_range(y, third, two_thirds);
	f.late_mean = mean_range(y, two_thirds, n);
	f.growth_pattern = classify_growth_pattern(f.early_mean, f.mid_mean, f.late_mean);

	// Harvest window: per-year first/last non-zero ISO weeks, median across
	// years; peak is the ISO week of the global maximum.
	std::map<int, std::pair<int, int>> year_span; // year -> (first nz iso, last nz iso)
	for (const auto &o : obs) {
		if (o.yield_value <= 0.0) continue;
		auto it = year_span.find(o.year);
		if (it == year_span.end()) {
			year_span[o.year] = {o.iso_week, o.iso_week};
		} else {
			it->second.second = o.iso_week;
		}
	}
	if (!year_span.empty()) {
		std::vector<double> starts, ends;
		for (const auto &[year, span] : year_span) {
			starts.push_back(span.first);
			ends.push_back(span.second);
		}
		f.harvest_window.start_iso_week = round_median(starts);
		f.harvest_window.end_iso_week = round_median(ends);
		f.harvest_window.peak_iso_week = obs[peak_idx].iso_week;
	}
	return f;
}

void KnowledgeGraph::insert(const std::string &entity_id, KgNode node) {
	nodes_[entity_id] = std::move(node);
}

const KgNode *KnowledgeGraph::find(const std::string &entity_id) const {
	auto it = nodes_.find(entity_id);
	return it == nodes_.end() ? nullptr : &it->second;
}

KnowledgeGraph build_kg(const std::vector<const ingest::Entity *> &train_entities) {
	if (train_entities.empty()) throw ConfigError("build_kg: no training entities");

	KnowledgeGraph kg;
	for (const auto *e : train_entities) {
		if (e->split != ingest::Split::train)
			throw ConfigError("build_kg: test entity '" + e->entity_id +
			                  "' passed to the knowledge graph (leakage)");
		KgNode node;
		node.metadata = e->metadata;
		try {
			node.features = curve_features(*e);
		} catch (const FeatureError &err) {
			log_warn(std::string("build_kg: skipping node: ") + err.what());
			continue;
		}
		std::vector<double> y;
		for (const auto &o : e->observations) y.push_back(o.yield_value);
		node.shape = compute_shape_vector(y);
		node.year_zero_fractions = per_year_zero_fractions(*e);
		kg.insert(e->entity_id, std::move(node));
	}
	return kg;
}

// ---------------------------------------------------------------------------
// JSON serialization
// ---------------------------------------------------------------------------

namespace {

json features_to_json(const CurveShapeFeatures &f) {
	return json{{"mean", f.mean},
	            {"std", f.std_dev},
	            {"cv", f.cv},
	            {"volatility", f.volatility},
	            {"peak_position", f.peak_position},
	            {"zero_fraction", f.zero_fraction},
	            {"early_mean", f.early_mean},
	            {"mid_mean", f.mid_mean},
	            {"late_mean", f.late_mean},
	            {"growth_pattern", growth_pattern_name(f.growth_pattern)},
	            {"harvest_window",
	             {{"start", f.harvest_window.start_iso_week},
	              {"peak", f.harvest_window.peak_iso_week},
	              {"end", f.harvest_window.end_iso_week}}}};
}

CurveShapeFeatures features_from_json(const json &j) {
	CurveShapeFeatures f;
	f.mean = j.at("mean").get<double>();
	f.std_dev = j.at("std").get<double>();
	f.cv = j.at("cv").get<double>();
	f.volatility = j.at("volatility").get<double>();
	f.peak_position = j.at("peak_position").get<double>();
	f.zero_fraction = j.at("zero_fraction").get<double>();
	f.early_mean = j.at("early_mean").get<double>();
	f.mid_mean = j.at("mid_mean").get<double>();
	f.late_mean = j.at("late_mean").get<double>();
	f.growth_pattern = growth_pattern_from_name(j.at("growth_pattern").get<std::string>());
	f.harvest_window.start_iso_week = j.at("harvest_window").at("start").get<int>();
	f.harvest_window.peak_iso_week = j.at("harvest_window").at("peak").get<int>();
	f.harvest_window.end_iso_week = j.at("harvest_window").at("end").get<int>();
	return f;
}

} // namespace

std::string KnowledgeGraph::to_json_string() const {
	json nodes = json::object();
	for (const auto &[id, node] : nodes_) {
		json meta = json::object();
		for (const auto &[k, v] : node.metadata) meta[k] = v;
		json yzf = json::object();
		for (const auto &[year, frac] : node.year_zero_fractions) yzf[std::to_string(year)] = frac;
		nodes[id] = json{{"metadata", meta},
		                 {"features", features_to_json(node.features)},
		                 {"shape", node.shape.v},
		                 {"year_zero_fractions", yzf}};
	}
	return json{{"nodes", nodes}}.dump(2);
}

KnowledgeGraph KnowledgeGraph::from_json_string(const std::string &text) {
	KnowledgeGraph kg;
	const json j = json::parse(text);
	for (const auto &[id, jn] : j.at("nodes").items()) {
		KgNode node;
		for (const auto &[k, v] : jn.at("metadata").items()) node.metadata[k] = v.get<std::string>();
		node.features = features_from_json(jn.at("features"));
		const auto &shape = jn.at("shape");
		for (std::size_t i = 0; i < node.shape.v.size(); ++i) node.shape.v[i] = shape.at(i).get<double>();
		for (const auto &[year, frac] : jn.at("year_zero_fractions").items())
			node.year_zero_fractions[std::stoi(year)] = frac.get<double>();
		kg.insert(id, std::move(node));
	}
	return kg;
}

void KnowledgeGraph::save(const std::string &path) const {
	std::ofstream out(path);
	if (!out) throw ConfigError("cannot write knowledge graph file: " + path);
	out << to_json_string() << "\n";
}

KnowledgeGraph KnowledgeGraph::load(const std::string &path) {
	std::ifstream in(path);
	if (!in) throw ConfigError("cannot open knowledge graph file: " + path);
	std::stringstream ss;
	ss << in.rdbuf();
	return from_json_string(ss.str());
}

// ---------------------------------------------------------------------------
// Dataset profiling
// ---------------------------------------------------------------------------

DatasetProfile profile_dataset(const KnowledgeGraph &kg, ReasonerPolicy &policy,
                               std::uint64_t sample_seed) {
	if (kg.empty()) throw ConfigError("profile_dataset: empty knowledge graph");

	std::vector<std::string> ids;
	for (const auto &[id, node] : kg.nodes()) ids.push_back(id);

	Rng rng(sample_seed);
	std::vector<std::string> sample;
	if (ids.size() <= 3) {
		sample = ids;
	} else {
		std::vector<std::string> pool = ids;
		for (int i = 0; i < 3; ++i) {
			const int pick = rng.uniform_int(0, static_cast<int>(pool.size()) - 1);
			sample.push_back(pool[pick]);
			pool.erase(pool.begin() + pick);
		}
	}

	DatasetProfile profile;
	std::vector<double> pair_fractions;
	std::vector<double> entity_medians;
	for (const auto &id : sample) {
		const auto *node = kg.find(id);
		std::vector<double> per_entity;
		for (const auto &[year, frac] : node->year_zero_fractions) {
			profile.evidence.emplace_back(id, year, frac);
			pair_fractions.push_back(frac);
			per_entity.push_back(frac);
		}
		if (!per_entity.empty()) entity_medians.push_back(stats::median(per_entity));
	}

	const double pair_median = pair_fractions.empty() ? 0.0 : stats::median(pair_fractions);
	const double entity_median = entity_medians.empty() ? 0.0 : stats::median(entity_medians);
	log_info("profile_dataset: median zero fraction over (entity, year) pairs = " +
	         std::to_string(pair_median) + ", over per-entity medians = " +
	         std::to_string(entity_median));

	const DatasetKind heuristic_kind =
	    pair_median > 0.15 ? DatasetKind::zero_valley : DatasetKind::positive_floor;

	if (policy.kind() == PolicyKind::remote) {
		std::ostringstream prompt;
		prompt << "Classify this weekly yield dataset as zero_valley (a genuine zero-yield "
		          "off-season) or positive_floor (positive yields year-round).\n";
		prompt << "Per-year zero-yield week fractions for three sampled entities:\n";
		for (const auto &[id, year, frac] : profile.evidence)
			prompt << "  " << id << " " << year << ": " << frac << "\n";
		for (const auto &id : sample) {
			const auto *node = kg.find(id);
			prompt << "  " << id << " harvest window iso weeks: start "
			       << node->features.harvest_window.start_iso_week << ", peak "
			       << node->features.harvest_window.peak_iso_week << ", end "
			       << node->features.harvest_window.end_iso_week << "\n";
		}
		prompt << "Reply with exactly one word: zero_valley or positive_floor.";
		try {
			std::string reply = policy.decide(prompt.str());
			for (auto &c : reply) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
			const bool says_zero = reply.find("zero_valley") != std::string::npos;
			const bool says_floor = reply.find("positive_floor") != std::string::npos;
			if (says_zero != says_floor) {
				profile.kind = says_zero ? DatasetKind::zero_valley : DatasetKind::positive_floor;
				return profile;
			}
			log_warn("profile_dataset: unparseable policy reply, using heuristic");
		} catch (const PolicyError &err) {
			log_warn(std::string("profile_dataset: policy failure, using heuristic: ") + err.what());
		}
	}

	profile.kind = heuristic_kind;
	return profile;
}

} // namespace cropcast::features
