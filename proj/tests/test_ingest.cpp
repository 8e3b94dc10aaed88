#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "cropcast/ingest.hpp"

using namespace cropcast;
using namespace cropcast::ingest;

namespace {

std::string write_temp(const std::string &name, const std::string &content) {
	const std::string path = std::string("/tmp/") + name;
	std::ofstream out(path);
	out << content;
	return path;
}

CsvSchema basic_schema() {
	CsvSchema s;
	s.entity_column = "entity_id";
	s.yield_column = "yield";
	s.year_column = "year";
	s.week_column = "week";
	s.train_year_max = 2022;
	return s;
}

} // namespace

TEST_SUITE("ingest") {

TEST_CASE("load_long_csv keeps observations ordered") {
	const auto path = write_temp("ingest_basic.csv",
	                             "entity_id,year,week,yield\n"
	                             "A,2022,2,5.0\n"
	                             "A,2022,1,3.0\n"
	                             "A,2022,3,7.0\n");
	const auto c = load_long_csv(path, basic_schema());
	REQUIRE(c.entities.size() == 1);
	const auto &e = c.entities[0];
	CHECK(e.entity_id == "A");
	CHECK(e.observations.size() == 3);
	CHECK(e.observations[0].iso_week == 1);
	CHECK(e.observations[0].yield_value == 3.0);
	CHECK(e.observations[2].week_index == 2);
}

TEST_CASE("schema maps arbitrary column names") {
	const auto path = write_temp("ingest_usda_cols.csv",
	                             "State,Year,Period,PCT HARVESTED\n"
	                             "IOWA,2022,40,50\n"
	                             "IOWA,2022,41,80\n"
	                             "IOWA,2022,42,100\n");
	CsvSchema s;
	s.entity_column = "State";
	s.yield_column = "PCT HARVESTED";
	s.year_column = "Year";
	s.week_column = "Period";
	s.train_year_max = 2022;
	const auto c = load_long_csv(path, s);
	REQUIRE(c.entities.size() == 1);
	CHECK(c.entities[0].observations[1].yield_value == 80.0);
}

TEST_CASE("duplicate (entity, week) is a row error naming the week") {
	const auto path = write_temp("ingest_dup.csv",
	                             "entity_id,year,week,yield\n"
	                             "A,2022,5,1.0\n"
	                             "A,2022,5,2.0\n");
	CHECK_THROWS_WITH_AS(load_long_csv(path, basic_schema()),
	                     doctest::Contains("week 5"), DataError);
}

TEST_CASE("missing column is a configuration error naming the column") {
	const auto path = write_temp("ingest_nocol.csv", "entity_id,year,week\nA,2022,1\n");
	CHECK_THROWS_WITH_AS(load_long_csv(path, basic_schema()),
	                     doctest::Contains("yield"), ConfigError);
}

TEST_CASE("non-numeric yield names the line") {
	const auto path = write_temp("ingest_nonnum.csv",
	                             "entity_id,year,week,yield\n"
	                             "A,2022,1,abc\n");
	CHECK_THROWS_WITH_AS(load_long_csv(path, basic_schema()),
	                     doctest::Contains("line 2"), DataError);
}

TEST_CASE("year cutoff splits train and test with disjoint ids") {
	const auto path = write_temp("ingest_split.csv",
	                             "entity_id,year,week,yield\n"
	                             "A,2022,1,1\nA,2022,2,2\n"
	                             "A,2023,1,3\nA,2023,2,4\n");
	const auto c = load_long_csv(path, basic_schema());
	REQUIRE(c.entities.size() == 2);
	CHECK(c.entities[0].entity_id == "A");
	CHECK(c.entities[0].split == Split::train);
	CHECK(c.entities[1].entity_id == "A:2023");
	CHECK(c.entities[1].split == Split::test);
}

TEST_CASE("cumulative mode differences per season and forward-fills gaps") {
	const auto path = write_temp("ingest_cum.csv",
	                             "entity_id,year,week,yield\n"
	                             "A,2022,10,0\nA,2022,11,10\nA,2022,13,35\nA,2022,14,60\n");
	auto s = basic_schema();
	s.cumulative = true;
	const auto c = load_long_csv(path, s);
	const auto &obs = c.entities[0].observations;
	REQUIRE(obs.size() == 5); // week 12 filled
	CHECK(obs[2].iso_week == 12);
	CHECK(obs[2].forward_filled);
	CHECK(obs[2].yield_value == 0.0);  // filled week carries no new harvest
	CHECK(obs[3].yield_value == 25.0); // 35 - 10
	CHECK(obs[4].yield_value == 25.0);
}

TEST_CASE("iso week conversion handles year-boundary edge cases") {
	struct Sample { const char *date; int year; int week; };
	// frozen against the ISO-8601 calendar
	const Sample samples[] = {
	    {"2021-01-01", 2020, 53}, {"2021-01-04", 2021, 1},  {"2020-12-31", 2020, 53},
	    {"2016-01-03", 2015, 53}, {"2015-12-28", 2015, 53}, {"2024-12-30", 2025, 1},
	    {"2023-10-08", 2023, 40}, {"2009-12-31", 2009, 53}, {"2010-01-01", 2009, 53},
	    {"1999-01-01", 1998, 53},
	};
	for (const auto &s : samples) {
		const auto iw = iso_week_from_string(s.date);
		CHECK(iw.year == s.year);
		CHECK(iw.week == s.week);
	}
	CHECK_THROWS_AS(iso_week_from_string("tuesday"), DataError);
}

TEST_CASE("difference_cumulative worked examples") {
	CHECK(difference_cumulative({0, 10, 35, 60, 100}) == std::vector<double>{0, 10, 25, 25, 40});
	CHECK(difference_cumulative({5}) == std::vector<double>{5});
	CHECK(difference_cumulative({0, 20, 18, 30}) == std::vector<double>{0, 20, 0, 12});
	CHECK(difference_cumulative({}).empty());
}

TEST_CASE("difference then cumulative sum roundtrips a monotone input") {
	const std::vector<double> cum{0, 3, 3, 10, 40, 41, 100};
	const auto rates = difference_cumulative(cum);
	double acc = 0.0;
	for (std::size_t i = 0; i < rates.size(); ++i) {
		acc += rates[i];
		CHECK(acc == doctest::Approx(cum[i]).epsilon(1e-12));
	}
}

TEST_CASE("normalize scales by max training yield only") {
	EntityCollection c;
	Entity train;
	train.entity_id = "tr";
	train.split = Split::train;
	train.observations = {{0, 1, 2022, 50.0, false}, {1, 2, 2022, 200.0, false}};
	Entity test;
	test.entity_id = "te";
	test.split = Split::test;
	test.observations = {{0, 1, 2023, 260.0, false}};
	c.entities = {train, test};

	const auto n = normalize(c);
	CHECK(n.normalization_scale == 200.0);
	CHECK(n.entities[0].observations[0].yield_value == doctest::Approx(0.25));
	CHECK(n.entities[1].observations[0].yield_value == doctest::Approx(1.3)); // not clamped

	const auto again = normalize(n);
	CHECK(again.normalization_scale == doctest::Approx(1.0));
}

TEST_CASE("normalize preserves ratios") {
	EntityCollection c;
	Entity train;
	train.entity_id = "tr";
	train.split = Split::train;
	train.observations = {{0, 1, 2022, 12.0, false}, {1, 2, 2022, 30.0, false}};
	c.entities = {train};
	const auto n = normalize(c);
	const double r = n.entities[0].observations[1].yield_value /
	                 n.entities[0].observations[0].yield_value;
	CHECK(r == doctest::Approx(30.0 / 12.0));
}

TEST_CASE("normalize rejects all-zero training data") {
	EntityCollection c;
	Entity train;
	train.entity_id = "tr";
	train.split = Split::train;
	train.observations = {{0, 1, 2022, 0.0, false}};
	c.entities = {train};
	CHECK_THROWS_AS(normalize(c), ConfigError);
}

TEST_CASE("generate_synthetic is bit-identical for a fixed seed") {
	const auto a = generate_synthetic(7, 3, 2, SyntheticProfile::seasonal,
	                                  {{ArtifactKind::pre_season_spike, 0.3}});
	const auto b = generate_synthetic(7, 3, 2, SyntheticProfile::seasonal,
	                                  {{ArtifactKind::pre_season_spike, 0.3}});
	REQUIRE(a.entities.size() == b.entities.size());
	for (std::size_t i = 0; i < a.entities.size(); ++i) {
		CHECK(a.entities[i].entity_id == b.entities[i].entity_id);
		REQUIRE(a.entities[i].observations.size() == b.entities[i].observations.size());
		for (std::size_t j = 0; j < a.entities[i].observations.size(); ++j)
			CHECK(a.entities[i].observations[j].yield_value ==
			      b.entities[i].observations[j].yield_value);
	}
	REQUIRE(a.baseline_artifacts.size() == b.baseline_artifacts.size());
	for (std::size_t i = 0; i < a.baseline_artifacts.size(); ++i) {
		CHECK(a.baseline_artifacts[i].week_index == b.baseline_artifacts[i].week_index);
		CHECK(a.baseline_artifacts[i].magnitude == b.baseline_artifacts[i].magnitude);
	}
}

TEST_CASE("seasonal profile guarantees zero off-season weeks") {
	const auto c = generate_synthetic(11, 8, 4, SyntheticProfile::seasonal, {});
	for (const auto &e : c.entities) {
		int zeros = 0;
		for (const auto &o : e.observations)
			if (o.yield_value == 0.0) ++zeros;
		CHECK(static_cast<double>(zeros) / e.observations.size() >= 0.30);
	}
}

TEST_CASE("continuous profile has no zero weeks") {
	const auto c = generate_synthetic(13, 5, 3, SyntheticProfile::continuous, {});
	for (const auto &e : c.entities)
		for (const auto &o : e.observations) CHECK(o.yield_value > 0.0);
}

TEST_CASE("external predictions load and validate") {
	const auto path = write_temp("preds.csv",
	                             "entity_id,week_index,q10,q50,q90\n"
	                             "A,12,0.1,0.2,0.3\n");
	const auto t = load_external_predictions(path);
	const auto row = t.lookup("A", 12);
	REQUIRE(row.has_value());
	CHECK(row->q10 == doctest::Approx(0.1));
	CHECK(row->q50 == doctest::Approx(0.2));
	CHECK(row->q90 == doctest::Approx(0.3));
	CHECK_FALSE(t.lookup("A", 13).has_value());
}

TEST_CASE("missing q10/q90 default to q50") {
	const auto path = write_temp("preds_q50.csv",
	                             "entity_id,week_index,q50\n"
	                             "A,12,0.2\n");
	const auto t = load_external_predictions(path);
	const auto row = t.lookup("A", 12);
	REQUIRE(row.has_value());
	CHECK(row->q10 == doctest::Approx(0.2));
	CHECK(row->q90 == doctest::Approx(0.2));
}

TEST_CASE("quantile ordering violation is a row error") {
	const auto path = write_temp("preds_bad.csv",
	                             "entity_id,week_index,q10,q50,q90\n"
	                             "A,12,0.5,0.2,0.3\n");
	CHECK_THROWS_AS(load_external_predictions(path), DataError);
}

TEST_CASE("dataset csv roundtrip") {
	const auto c = generate_synthetic(21, 2, 1, SyntheticProfile::seasonal, {});
	const auto path = write_temp("synth_roundtrip.csv", "");
	write_dataset_csv(c, path);
	const auto back = load_long_csv(path, basic_schema());
	REQUIRE(back.entities.size() == c.entities.size());
	for (const auto &orig : c.entities) {
		const auto *loaded = back.find(orig.entity_id);
		REQUIRE(loaded != nullptr);
		CHECK(loaded->observations.size() == orig.observations.size());
		CHECK(loaded->split == orig.split);
	}
}

} // TEST_SUITE
