#include "cropcast/selection.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace cropcast::selection {

using nlohmann::json;

double dtw_distance(const std::vector<double> &a, const std::vector<double> &b) {
	if (a.empty() || b.empty())
		throw std::invalid_argument("dtw_distance: series must be non-empty");

	const std::size_t n = a.size(), m = b.size();
	constexpr double inf = std::numeric_limits<double>::infinity();
	// Rolling rows keep the table at O(m).
	std::vector<double> prev(m + 1, inf), cur(m + 1, inf);
	prev[0] = 0.0;
	for (std::size_t i = 1; i <= n; ++i) {
		cur[0] = inf;
		for (std::size_t j = 1; j <= m; ++j) {
			const double d = a[i - 1] - b[j - 1];
			cur[j] = d * d + std::min({prev[j - 1], prev[j], cur[j - 1]});
		}
		std::swap(prev, cur);
	}
	return std::sqrt(prev[m]);
}

std::string dataset_fingerprint(const std::vector<const ingest::Entity *> &train,
                                const std::vector<const ingest::Entity *> &test,
                                double normalization_scale) {
	std::ostringstream canon;
	canon << "scale=" << normalization_scale << ";train:";
	for (const auto *e : train) canon << e->entity_id << "#" << e->observations.size() << ";";
	canon << "test:";
	for (const auto *e : test) canon << e->entity_id << "#" << e->observations.size() << ";";
	return to_hex(fnv1a64(canon.str()));
}

namespace {

std::vector<double> yields(const ingest::Entity &e) {
	std::vector<double> y;
	y.reserve(e.observations.size());
	for (const auto &o : e.observations) y.push_back(o.yield_value);
	return y;
}

SimilarityRanking ranking_from_json(const json &j) {
	SimilarityRanking r;
	r.k = j.at("k").get<int>();
	for (const auto &row : j.at("ranking"))
		r.entries.emplace_back(row.at("entity_id").get<std::string>(),
		                       row.at("mean_distance").get<double>());
	return r;
}

json ranking_to_json(const SimilarityRanking &r, const std::string &fingerprint) {
	json rows = json::array();
	for (const auto &[id, d] : r.entries) rows.push_back({{"entity_id", id}, {"mean_distance", d}});
	return json{{"fingerprint", fingerprint}, {"k", r.k}, {"ranking", rows}};
}

} // namespace

SimilarityRanking rank_training_plots(const std::vector<const ingest::Entity *> &train,
                                      const std::vector<const ingest::Entity *> &test, int k,
                                      const std::string &cache_path, double normalization_scale) {
	if (k < 1) throw ConfigError("rank_training_plots: k must be >= 1");

	const std::string fingerprint = dataset_fingerprint(train, test, normalization_scale);

	if (!cache_path.empty()) {
		std::ifstream in(cache_path);
		if (in) {
			try {
				const json j = json::parse(in);
				if (j.at("fingerprint").get<std::string>() == fingerprint &&
				    j.at("k").get<int>() == k) {
					return ranking_from_json(j);
				}
				log_info("rank_training_plots: stale cache fingerprint, recomputing");
			} catch (const std::exception &err) {
				log_warn(std::string("rank_training_plots: unreadable cache, recomputing: ") +
				         err.what());
			}
		}
	}

	std::vector<std::vector<double>> test_series;
	test_series.reserve(test.size());
	for (const auto *e : test) test_series.push_back(yields(*e));

	SimilarityRanking result;
	result.k = k;
	std::vector<std::pair<std::string, double>> all;
	for (const auto *e : train) {
		const auto train_series = yields(*e);
		double acc = 0.0;
		for (const auto &ts : test_series) acc += dtw_distance(train_series, ts);
		const double mean = test_series.empty() ? 0.0 : acc / static_cast<double>(test_series.size());
		all.emplace_back(e->entity_id, mean);
	}
	std::sort(all.begin(), all.end(), [](const auto &a, const auto &b) {
		if (a.second != b.second) return a.second < b.second;
		return a.first < b.first;
	});
	const auto keep = std::min<std::size_t>(static_cast<std::size_t>(k), all.size());
	result.entries.assign(all.begin(), all.begin() + static_cast<long>(keep));

	if (!cache_path.empty()) {
		std::ofstream out(cache_path);
		if (out) {
			out << ranking_to_json(result, fingerprint).dump(2) << "\n";
		} else {
			log_warn("rank_training_plots: cannot write cache file: " + cache_path);
		}
	}
	return result;
}

} // namespace cropcast::selection
