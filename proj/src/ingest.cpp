#include "cropcast/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace cropcast::ingest {

std::vector<const Entity *> EntityCollection::train_entities() const {
	std::vector<const Entity *> out;
	for (const auto &e : entities)
		if (e.split == Split::train) out.push_back(&e);
	return out;
}

std::vector<const Entity *> EntityCollection::test_entities() const {
	std::vector<const Entity *> out;
	for (const auto &e : entities)
		if (e.split == Split::test) out.push_back(&e);
	return out;
}

const Entity *EntityCollection::find(const std::string &id) const {
	for (const auto &e : entities)
		if (e.entity_id == id) return &e;
	return nullptr;
}

void PredictionTable::insert(const std::string &entity_id, int week_index, Quantiles q) {
	rows_[{entity_id, week_index}] = q;
}

std::optional<Quantiles> PredictionTable::lookup(const std::string &entity_id,
                                                 int week_index) const {
	auto it = rows_.find({entity_id, week_index});
	if (it == rows_.end()) return std::nullopt;
	return it->second;
}

std::string artifact_kind_name(ArtifactKind kind) {
	switch (kind) {
	case ArtifactKind::pre_season_spike: return "pre_season_spike";
	case ArtifactKind::post_season_spike: return "post_season_spike";
	case ArtifactKind::over_bias: return "over_bias";
	case ArtifactKind::under_bias: return "under_bias";
	}
	return "unknown";
}

ArtifactKind artifact_kind_from_name(const std::string &name) {
	if (name == "pre_season_spike") return ArtifactKind::pre_season_spike;
	if (name == "post_season_spike") return ArtifactKind::post_season_spike;
	if (name == "over_bias") return ArtifactKind::over_bias;
	if (name == "under_bias") return ArtifactKind::under_bias;
	throw ConfigError("unknown artifact kind: '" + name + "'");
}

// ---------------------------------------------------------------------------
// CSV plumbing
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> split_csv_line(const std::string &line) {
	std::vector<std::string> fields;
	std::string cur;
	bool quoted = false;
	for (std::size_t i = 0; i < line.size(); ++i) {
		const char c = line[i];
		if (quoted) {
			if (c == '"') {
				if (i + 1 < line.size() && line[i + 1] == '"') {
					cur += '"';
					++i;
				} else {
					quoted = false;
				}
			} else {
				cur += c;
			}
		} else if (c == '"') {
			quoted = true;
		} else if (c == ',') {
			fields.push_back(cur);
			cur.clear();
		} else if (c == '\r') {
			// tolerate CRLF
		} else {
			cur += c;
		}
	}
	fields.push_back(cur);
	return fields;
}

std::string trim(const std::string &s) {
	auto b = s.find_first_not_of(" \t");
	auto e = s.find_last_not_of(" \t");
	if (b == std::string::npos) return "";
	return s.substr(b, e - b + 1);
}

// Parses a numeric field, tolerating thousands separators ("1,234").
std::optional<double> parse_number(const std::string &raw) {
	std::string s = trim(raw);
	s.erase(std::remove(s.begin(), s.end(), ','), s.end());
	if (s.empty()) return std::nullopt;
	char *end = nullptr;
	const double v = std::strtod(s.c_str(), &end);
	if (end == s.c_str() || *end != '\0') return std::nullopt;
	return v;
}

std::optional<int> parse_int(const std::string &raw) {
	auto v = parse_number(raw);
	if (!v || *v != std::floor(*v)) return std::nullopt;
	return static_cast<int>(*v);
}

struct RawRow {
	int year = 0;
	int iso_week = 0;
	double value = 0.0;
	std::map<std::string, std::string> metadata;
};

int column_index(const std::vector<std::string> &header, const std::string &name) {
	for (std::size_t i = 0; i < header.size(); ++i)
		if (trim(header[i]) == name) return static_cast<int>(i);
	throw ConfigError("schema names column '" + name + "' which is missing from the CSV header");
}

} // namespace

EntityCollection load_long_csv(const std::string &path, const CsvSchema &schema) {
	if (schema.entity_column.empty() || schema.yield_column.empty())
		throw ConfigError("schema must name entity and yield columns");
	const bool by_date = !schema.date_column.empty();
	if (!by_date && (schema.year_column.empty() || schema.week_column.empty()))
		throw ConfigError("schema must name either a date column or year and week columns");

	std::ifstream in(path);
	if (!in) throw ConfigError("cannot open dataset file: " + path);

	std::string line;
	if (!std::getline(in, line)) throw DataError(path + ": empty file (header row required)");
	const auto header = split_csv_line(line);

	const int entity_col = column_index(header, schema.entity_column);
	const int yield_col = column_index(header, schema.yield_column);
	const int date_col = by_date ? column_index(header, schema.date_column) : -1;
	const int year_col = by_date ? -1 : column_index(header, schema.year_column);
	const int week_col = by_date ? -1 : column_index(header, schema.week_column);
	std::vector<std::pair<std::string, int>> meta_cols;
	for (const auto &m : schema.metadata_columns) meta_cols.emplace_back(m, column_index(header, m));

	std::map<std::string, std::vector<RawRow>> by_entity;
	std::map<std::string, std::set<std::pair<int, int>>> seen_weeks;

	int line_no = 1;
	while (std::getline(in, line)) {
		++line_no;
		if (trim(line).empty()) continue;
		const auto fields = split_csv_line(line);
		auto field = [&](int idx) -> std::string {
			return idx >= 0 && idx < static_cast<int>(fields.size()) ? trim(fields[idx]) : "";
		};

		const std::string id = field(entity_col);
		if (id.empty()) throw DataError(path + " line " + std::to_string(line_no) + ": empty entity id");

		RawRow row;
		if (by_date) {
			const IsoWeek iw = iso_week_from_string(field(date_col));
			row.year = iw.year;
			row.iso_week = iw.week;
		} else {
			const auto year = parse_int(field(year_col));
			const auto week = parse_int(field(week_col));
			if (!year || !week)
				throw DataError(path + " line " + std::to_string(line_no) + ": non-numeric year/week");
			row.year = *year;
			row.iso_week = *week;
		}
		if (row.iso_week < 1 || row.iso_week > 53)
			throw DataError(path + " line " + std::to_string(line_no) + ": iso week out of range: " +
			                std::to_string(row.iso_week));

		const auto value = parse_number(field(yield_col));
		if (!value)
			throw DataError(path + " line " + std::to_string(line_no) + ": non-numeric yield '" +
			                field(yield_col) + "'");
		row.value = *value;
		for (const auto &[name, idx] : meta_cols) row.metadata[name] = field(idx);

		if (!seen_weeks[id].insert({row.year, row.iso_week}).second)
			throw DataError(path + " line " + std::to_string(line_no) + ": duplicate (" + id +
			                ", year " + std::to_string(row.year) + ", week " +
			                std::to_string(row.iso_week) + ")");
		by_entity[id].push_back(row);
	}

	EntityCollection out;
	out.dataset_name = path;

	for (auto &[id, rows] : by_entity) {
		std::sort(rows.begin(), rows.end(), [](const RawRow &a, const RawRow &b) {
			return std::tie(a.year, a.iso_week) < std::tie(b.year, b.iso_week);
		});

		// Partition into per-year segments; differencing and gap filling never
		// cross a season boundary.
		std::map<int, std::vector<RawRow>> by_year;
		for (auto &r : rows) by_year[r.year].push_back(r);

		std::map<int, std::vector<Observation>> season_obs;
		for (auto &[year, yr_rows] : by_year) {
			std::vector<Observation> obs;
			for (const auto &r : yr_rows) {
				if (schema.cumulative && !obs.empty()) {
					// Forward-fill internal reporting gaps with the last cumulative value.
					int prev = obs.back().iso_week;
					while (r.iso_week > prev + 1) {
						++prev;
						Observation fill;
						fill.iso_week = prev;
						fill.year = year;
						fill.yield_value = obs.back().yield_value;
						fill.forward_filled = true;
						obs.push_back(fill);
					}
				}
				Observation o;
				o.iso_week = r.iso_week;
				o.year = year;
				o.yield_value = r.value;
				obs.push_back(o);
			}
			if (schema.cumulative) {
				std::vector<double> cum;
				cum.reserve(obs.size());
				for (const auto &o : obs) cum.push_back(o.yield_value);
				const auto rates = difference_cumulative(cum);
				for (std::size_t i = 0; i < obs.size(); ++i) obs[i].yield_value = rates[i];
			}
			for (auto &o : obs) o.yield_value = std::max(0.0, o.yield_value);
			season_obs[year] = std::move(obs);
		}

		const auto &meta = rows.front().metadata;
		const bool has_train = season_obs.begin()->first <= schema.train_year_max;

		Entity train_entity;
		train_entity.entity_id = id;
		train_entity.metadata = meta;
		train_entity.split = Split::train;

		std::vector<int> test_years;
		for (auto &[year, obs] : season_obs) {
			if (year <= schema.train_year_max) {
				for (auto &o : obs) train_entity.observations.push_back(o);
			} else {
				test_years.push_back(year);
			}
		}
		if (!train_entity.observations.empty()) {
			for (std::size_t i = 0; i < train_entity.observations.size(); ++i)
				train_entity.observations[i].week_index = static_cast<int>(i);
			out.entities.push_back(std::move(train_entity));
		}
		for (int year : test_years) {
			Entity test_entity;
			// Keep the bare id unless it would collide with the train entity.
			test_entity.entity_id =
			    (has_train || test_years.size() > 1) ? id + ":" + std::to_string(year) : id;
			test_entity.metadata = meta;
			test_entity.split = Split::test;
			test_entity.observations = season_obs[year];
			for (std::size_t i = 0; i < test_entity.observations.size(); ++i)
				test_entity.observations[i].week_index = static_cast<int>(i);
			out.entities.push_back(std::move(test_entity));
		}
	}

	std::sort(out.entities.begin(), out.entities.end(),
	          [](const Entity &a, const Entity &b) { return a.entity_id < b.entity_id; });
	return out;
}

std::vector<double> difference_cumulative(const std::vector<double> &cumulative) {
	std::vector<double> out;
	out.reserve(cumulative.size());
	for (std::size_t i = 0; i < cumulative.size(); ++i) {
		if (i == 0) {
			out.push_back(cumulative[0]);
		} else {
			out.push_back(std::max(0.0, cumulative[i] - cumulative[i - 1]));
		}
	}
	return out;
}

EntityCollection normalize(EntityCollection collection) {
	double max_train = 0.0;
	for (const auto &e : collection.entities) {
		if (e.split != Split::train) continue;
		for (const auto &o : e.observations) max_train = std::max(max_train, o.yield_value);
	}
	if (max_train <= 0.0)
		throw ConfigError("normalize: training split has no positive yield");

	for (auto &e : collection.entities)
		for (auto &o : e.observations) o.yield_value /= max_train;
	for (auto &a : collection.baseline_artifacts) {
		if (a.kind == ArtifactKind::pre_season_spike || a.kind == ArtifactKind::post_season_spike)
			a.magnitude /= max_train; // additive magnitudes live in yield units
	}
	collection.normalization_scale = max_train;
	return collection;
}

// ---------------------------------------------------------------------------
// Synthetic generator
//
// Seasonal entities are single-season bell curves: zero off-season, a cosine
// ramp to a jittered peak, a cosine decline back to zero. Continuous entities
// are a positive base level with a mild linear trend. All draws come from the
// fixed-order splitmix64 stream, so a seed pins the dataset bit-for-bit.
// ---------------------------------------------------------------------------

namespace {

constexpr int kSeasonWeeks = 52;

Entity make_seasonal_entity(Rng &rng, const std::string &id, int year, Split split,
                            int &onset_out, int &end_out, double &amplitude_out) {
	const int onset = rng.uniform_int(16, 22);
	const int peak = onset + rng.uniform_int(6, 9);
	const int end = peak + rng.uniform_int(6, 9);
	const double amplitude = rng.uniform(60.0, 140.0);

	Entity e;
	e.entity_id = id;
	e.split = split;
	e.metadata["profile"] = "seasonal";
	for (int w = 1; w <= kSeasonWeeks; ++w) {
		Observation o;
		o.week_index = w - 1;
		o.iso_week = w;
		o.year = year;
		if (w > onset && w < end) {
			const double pi = 3.14159265358979323846;
			double base;
			if (w <= peak) {
				base = amplitude * (0.5 - 0.5 * std::cos(pi * (w - onset) / double(peak - onset)));
			} else {
				base = amplitude * (0.5 + 0.5 * std::cos(pi * (w - peak) / double(end - peak)));
			}
			o.yield_value = base * rng.uniform(0.92, 1.08);
		} else {
			o.yield_value = 0.0;
		}
		e.observations.push_back(o);
	}
	onset_out = onset;
	end_out = end;
	amplitude_out = amplitude;
	return e;
}

Entity make_continuous_entity(Rng &rng, const std::string &id, int year, Split split) {
	const double level = rng.uniform(40.0, 90.0);
	const double slope = rng.uniform(-0.4, 0.4);
	Entity e;
	e.entity_id = id;
	e.split = split;
	e.metadata["profile"] = "continuous";
	for (int w = 1; w <= kSeasonWeeks; ++w) {
		Observation o;
		o.week_index = w - 1;
		o.iso_week = w;
		o.year = year;
		const double base = std::max(0.2 * level, level + slope * (w - 1));
		o.yield_value = base * rng.uniform(0.9, 1.1);
		e.observations.push_back(o);
	}
	return e;
}

std::string padded_id(const char *prefix, int n) {
	char buf[32];
	std::snprintf(buf, sizeof(buf), "%s-%03d", prefix, n);
	return buf;
}

} // namespace

EntityCollection generate_synthetic(std::uint64_t seed, int n_train, int n_test,
                                    SyntheticProfile profile,
                                    const std::vector<ArtifactSpec> &artifacts) {
	if (n_train < 1 || n_test < 1)
		throw ConfigError("generate_synthetic: counts must be >= 1");

	Rng rng(seed);
	EntityCollection out;
	out.dataset_name = "synthetic";

	for (int i = 0; i < n_train; ++i) {
		const std::string id = padded_id("train", i);
		if (profile == SyntheticProfile::seasonal) {
			int onset = 0, end = 0;
			double amplitude = 0;
			out.entities.push_back(make_seasonal_entity(rng, id, 2022, Split::train, onset, end, amplitude));
		} else {
			out.entities.push_back(make_continuous_entity(rng, id, 2022, Split::train));
		}
	}
	for (int i = 0; i < n_test; ++i) {
		const std::string id = padded_id("test", i);
		if (profile == SyntheticProfile::seasonal) {
			int onset = 0, end = 0;
			double amplitude = 0;
			out.entities.push_back(make_seasonal_entity(rng, id, 2023, Split::test, onset, end, amplitude));
			for (const auto &spec : artifacts) {
				ResolvedArtifact a;
				a.entity_id = id;
				a.kind = spec.kind;
				switch (spec.kind) {
				case ArtifactKind::pre_season_spike:
					a.week_index = onset - 4;
					a.magnitude = spec.magnitude * amplitude;
					break;
				case ArtifactKind::post_season_spike:
					a.week_index = std::min(end + 4, kSeasonWeeks - 1);
					a.magnitude = spec.magnitude * amplitude;
					break;
				case ArtifactKind::over_bias:
				case ArtifactKind::under_bias:
					a.week_index = -1;
					a.magnitude = spec.magnitude;
					break;
				}
				out.baseline_artifacts.push_back(a);
			}
		} else {
			out.entities.push_back(make_continuous_entity(rng, id, 2023, Split::test));
			for (const auto &spec : artifacts) {
				if (spec.kind != ArtifactKind::over_bias && spec.kind != ArtifactKind::under_bias)
					continue; // spikes are anchored to a season; continuous profiles have none
				ResolvedArtifact a;
				a.entity_id = id;
				a.week_index = -1;
				a.kind = spec.kind;
				a.magnitude = spec.magnitude;
				out.baseline_artifacts.push_back(a);
			}
		}
	}
	return out;
}

PredictionTable load_external_predictions(const std::string &path) {
	std::ifstream in(path);
	if (!in) throw ConfigError("cannot open predictions file: " + path);

	std::string line;
	if (!std::getline(in, line)) throw DataError(path + ": empty file");
	const auto header = split_csv_line(line);
	const int id_col = column_index(header, "entity_id");
	const int week_col = column_index(header, "week_index");
	const int q50_col = column_index(header, "q50");
	int q10_col = -1, q90_col = -1;
	for (std::size_t i = 0; i < header.size(); ++i) {
		if (trim(header[i]) == "q10") q10_col = static_cast<int>(i);
		if (trim(header[i]) == "q90") q90_col = static_cast<int>(i);
	}

	PredictionTable table;
	int line_no = 1;
	while (std::getline(in, line)) {
		++line_no;
		if (trim(line).empty()) continue;
		const auto fields = split_csv_line(line);
		auto field = [&](int idx) -> std::string {
			return idx >= 0 && idx < static_cast<int>(fields.size()) ? trim(fields[idx]) : "";
		};
		const std::string id = field(id_col);
		const auto week = parse_int(field(week_col));
		const auto q50 = parse_number(field(q50_col));
		if (id.empty() || !week || !q50)
			throw DataError(path + " line " + std::to_string(line_no) + ": malformed prediction row");

		Quantiles q;
		q.q50 = *q50;
		const auto q10 = q10_col >= 0 ? parse_number(field(q10_col)) : std::nullopt;
		const auto q90 = q90_col >= 0 ? parse_number(field(q90_col)) : std::nullopt;
		q.q10 = q10.value_or(q.q50);
		q.q90 = q90.value_or(q.q50);
		if (!(q.q10 <= q.q50 && q.q50 <= q.q90))
			throw DataError(path + " line " + std::to_string(line_no) + ": quantile ordering violated (" +
			                std::to_string(q.q10) + ", " + std::to_string(q.q50) + ", " +
			                std::to_string(q.q90) + ")");
		table.insert(id, *week, q);
	}
	return table;
}

void write_dataset_csv(const EntityCollection &collection, const std::string &path) {
	std::ofstream out(path);
	if (!out) throw ConfigError("cannot write dataset file: " + path);
	out << "entity_id,year,week,yield\n";
	for (const auto &e : collection.entities)
		for (const auto &o : e.observations)
			out << e.entity_id << "," << o.year << "," << o.iso_week << "," << o.yield_value << "\n";
}

void write_artifacts_csv(const std::vector<ResolvedArtifact> &artifacts, const std::string &path) {
	std::ofstream out(path);
	if (!out) throw ConfigError("cannot write artifacts file: " + path);
	out << "entity_id,week_index,kind,magnitude\n";
	for (const auto &a : artifacts)
		out << a.entity_id << "," << a.week_index << "," << artifact_kind_name(a.kind) << ","
		    << a.magnitude << "\n";
}

std::vector<ResolvedArtifact> load_artifacts_csv(const std::string &path) {
	std::ifstream in(path);
	if (!in) throw ConfigError("cannot open artifacts file: " + path);
	std::string line;
	if (!std::getline(in, line)) throw DataError(path + ": empty file");
	std::vector<ResolvedArtifact> out;
	int line_no = 1;
	while (std::getline(in, line)) {
		++line_no;
		if (trim(line).empty()) continue;
		const auto fields = split_csv_line(line);
		if (fields.size() < 4)
			throw DataError(path + " line " + std::to_string(line_no) + ": malformed artifact row");
		ResolvedArtifact a;
		a.entity_id = trim(fields[0]);
		a.week_index = parse_int(fields[1]).value_or(-1);
		a.kind = artifact_kind_from_name(trim(fields[2]));
		const auto mag = parse_number(fields[3]);
		if (!mag) throw DataError(path + " line " + std::to_string(line_no) + ": non-numeric magnitude");
		a.magnitude = *mag;
		out.push_back(a);
	}
	return out;
}

} // namespace cropcast::ingest
