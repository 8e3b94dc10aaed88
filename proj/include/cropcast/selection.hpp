#pragma once

#include <string>
#include <vector>

#include "cropcast/ingest.hpp"

namespace cropcast::selection {

struct SimilarityRanking {
	// sorted ascending by distance, ties broken by entity_id
	std::vector<std::pair<std::string, double>> entries;
	int k = 0;
};

// Classic dynamic-programming DTW with squared-difference local cost and unit
// steps; returns the square root of the accumulated cost.
double dtw_distance(const std::vector<double> &a, const std::vector<double> &b);

// Ranks each training entity by its mean DTW distance against all test
// entities and keeps the top min(k, |train|). Results are cached at
// cache_path (when given) keyed by a dataset fingerprint; a stale fingerprint
// forces a recompute.
SimilarityRanking rank_training_plots(const std::vector<const ingest::Entity *> &train,
                                      const std::vector<const ingest::Entity *> &test, int k,
                                      const std::string &cache_path = "",
                                      double normalization_scale = 1.0);

std::string dataset_fingerprint(const std::vector<const ingest::Entity *> &train,
                                const std::vector<const ingest::Entity *> &test,
                                double normalization_scale);

} // namespace cropcast::selection
