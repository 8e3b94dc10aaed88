#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "cropcast/selection.hpp"

using namespace cropcast;
using namespace cropcast::selection;

namespace {

// Memoization-free recursive DTW used as the independent oracle.
double dtw_brute(const std::vector<double> &a, const std::vector<double> &b, std::size_t i,
                 std::size_t j) {
	const double d = (a[i] - b[j]) * (a[i] - b[j]);
	if (i == 0 && j == 0) return d;
	double best = std::numeric_limits<double>::infinity();
	if (i > 0) best = std::min(best, dtw_brute(a, b, i - 1, j));
	if (j > 0) best = std::min(best, dtw_brute(a, b, i, j - 1));
	if (i > 0 && j > 0) best = std::min(best, dtw_brute(a, b, i - 1, j - 1));
	return d + best;
}

double dtw_oracle(const std::vector<double> &a, const std::vector<double> &b) {
	return std::sqrt(dtw_brute(a, b, a.size() - 1, b.size() - 1));
}

ingest::Entity series_entity(const std::string &id, const std::vector<double> &y,
                             ingest::Split split) {
	ingest::Entity e;
	e.entity_id = id;
	e.split = split;
	for (std::size_t i = 0; i < y.size(); ++i)
		e.observations.push_back({static_cast<int>(i), static_cast<int>(i) + 1, 2022, y[i], false});
	return e;
}

} // namespace

TEST_SUITE("selection") {

TEST_CASE("identical series have distance zero") {
	CHECK(dtw_distance({1, 2, 3}, {1, 2, 3}) == 0.0);
}

TEST_CASE("hand-traced 3x3 table") {
	CHECK(dtw_distance({0, 0, 0}, {1, 1, 1}) == doctest::Approx(std::sqrt(3.0)).epsilon(1e-12));
}

TEST_CASE("empty series is an argument error") {
	CHECK_THROWS_AS(dtw_distance({}, {1.0}), std::invalid_argument);
	CHECK_THROWS_AS(dtw_distance({1.0}, {}), std::invalid_argument);
}

TEST_CASE("symmetry on random pairs") {
	Rng rng(5);
	for (int t = 0; t < 50; ++t) {
		std::vector<double> a, b;
		const int na = rng.uniform_int(1, 8), nb = rng.uniform_int(1, 8);
		for (int i = 0; i < na; ++i) a.push_back(rng.uniform(0.0, 3.0));
		for (int i = 0; i < nb; ++i) b.push_back(rng.uniform(0.0, 3.0));
		CHECK(dtw_distance(a, b) == doctest::Approx(dtw_distance(b, a)).epsilon(1e-12));
	}
}

TEST_CASE("oracle equivalence on short {0,1,2} series") {
	Rng rng(17);
	for (int t = 0; t < 200; ++t) {
		std::vector<double> a, b;
		const int na = rng.uniform_int(1, 6), nb = rng.uniform_int(1, 6);
		for (int i = 0; i < na; ++i) a.push_back(rng.uniform_int(0, 2));
		for (int i = 0; i < nb; ++i) b.push_back(rng.uniform_int(0, 2));
		CHECK(dtw_distance(a, b) == dtw_oracle(a, b));
	}
}

TEST_CASE("ranking matches brute-force DTW means on a 3-entity fixture") {
	const auto t1 = series_entity("match", {0, 1, 5, 1, 0}, ingest::Split::train);
	const auto t2 = series_entity("shifted", {1, 5, 1, 0, 0}, ingest::Split::train);
	const auto t3 = series_entity("flat", {2, 2, 2, 2, 2}, ingest::Split::train);
	const auto q = series_entity("query", {0, 1, 5, 1, 0}, ingest::Split::test);

	const auto r = rank_training_plots({&t1, &t2, &t3}, {&q}, 3);
	REQUIRE(r.entries.size() == 3);
	CHECK(r.entries[0].first == "match");
	CHECK(r.entries[0].second == 0.0);
	// brute-force verification of each mean distance
	for (const auto &[id, dist] : r.entries) {
		const ingest::Entity *src = id == "match" ? &t1 : id == "shifted" ? &t2 : &t3;
		std::vector<double> sy, qy;
		for (const auto &o : src->observations) sy.push_back(o.yield_value);
		for (const auto &o : q.observations) qy.push_back(o.yield_value);
		CHECK(dist == doctest::Approx(dtw_oracle(sy, qy)).epsilon(1e-12));
	}
}

TEST_CASE("k larger than the training count returns everything") {
	const auto t1 = series_entity("a", {1, 2}, ingest::Split::train);
	const auto t2 = series_entity("b", {2, 3}, ingest::Split::train);
	const auto q = series_entity("q", {1, 2}, ingest::Split::test);
	const auto r = rank_training_plots({&t1, &t2}, {&q}, 50);
	CHECK(r.entries.size() == 2);
}

TEST_CASE("ranking is invariant to training order") {
	const auto t1 = series_entity("a", {1, 2, 3}, ingest::Split::train);
	const auto t2 = series_entity("b", {3, 2, 1}, ingest::Split::train);
	const auto t3 = series_entity("c", {2, 2, 2}, ingest::Split::train);
	const auto q = series_entity("q", {1, 2, 2}, ingest::Split::test);
	const auto r1 = rank_training_plots({&t1, &t2, &t3}, {&q}, 3);
	const auto r2 = rank_training_plots({&t3, &t1, &t2}, {&q}, 3);
	CHECK(r1.entries == r2.entries);
}

TEST_CASE("cache roundtrip returns the identical ranking and detects staleness") {
	const std::string cache = "/tmp/cropcast_rank_cache.json";
	std::remove(cache.c_str());

	const auto t1 = series_entity("a", {0, 1, 4, 1}, ingest::Split::train);
	const auto t2 = series_entity("b", {4, 1, 0, 0}, ingest::Split::train);
	const auto q = series_entity("q", {0, 1, 4, 0}, ingest::Split::test);

	const auto first = rank_training_plots({&t1, &t2}, {&q}, 2, cache);
	const auto cached = rank_training_plots({&t1, &t2}, {&q}, 2, cache);
	CHECK(first.entries == cached.entries);

	// Different dataset -> stale fingerprint -> recompute, not reuse.
	const auto t3 = series_entity("c", {9, 9, 9, 9}, ingest::Split::train);
	const auto recomputed = rank_training_plots({&t1, &t3}, {&q}, 2, cache);
	CHECK(recomputed.entries.size() == 2);
	bool has_c = false;
	for (const auto &[id, d] : recomputed.entries) has_c |= id == "c";
	CHECK(has_c);
}

} // TEST_SUITE
