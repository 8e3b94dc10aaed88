#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cropcast {

// Configuration problems (bad schema, bad flags, unusable dataset).
class ConfigError : public std::runtime_error {
public:
	explicit ConfigError(const std::string &msg) : std::runtime_error(msg) {}
};

// Malformed rows, files, or records.
class DataError : public std::runtime_error {
public:
	explicit DataError(const std::string &msg) : std::runtime_error(msg) {}
};

// Entity unusable for feature extraction (too short, degenerate).
class FeatureError : public std::runtime_error {
public:
	explicit FeatureError(const std::string &msg) : std::runtime_error(msg) {}
};

// ---------------------------------------------------------------------------
// Logging
// ---------------------------------------------------------------------------

enum class LogLevel { debug = 0, info = 1, warn = 2, error = 3, off = 4 };

inline LogLevel &log_level() {
	static LogLevel level = LogLevel::warn;
	return level;
}

inline void log_at(LogLevel level, std::string_view tag, const std::string &msg) {
	if (level < log_level()) return;
	std::cerr << "[" << tag << "] " << msg << "\n";
}

inline void log_debug(const std::string &msg) { log_at(LogLevel::debug, "debug", msg); }
inline void log_info(const std::string &msg) { log_at(LogLevel::info, "info", msg); }
inline void log_warn(const std::string &msg) { log_at(LogLevel::warn, "warn", msg); }
inline void log_error(const std::string &msg) { log_at(LogLevel::error, "error", msg); }

// ---------------------------------------------------------------------------
// Deterministic PRNG
//
// splitmix64: fixed algorithm, bit-identical on every platform for a given
// integer seed. Distribution mapping is done explicitly below instead of via
// <random> adapters, whose output is implementation-defined.
// ---------------------------------------------------------------------------

class Rng {
public:
	explicit Rng(std::uint64_t seed) : state_(seed) {}

	std::uint64_t next_u64() {
		state_ += 0x9E3779B97F4A7C15ULL;
		std::uint64_t z = state_;
		z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
		z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
		return z ^ (z >> 31);
	}

	// [0, 1) with 53 bits of precision
	double next_unit() {
		return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
	}

	double uniform(double lo, double hi) {
		return lo + (hi - lo) * next_unit();
	}

	// inclusive bounds
	int uniform_int(int lo, int hi) {
		const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
		return lo + static_cast<int>(next_u64() % span);
	}

private:
	std::uint64_t state_;
};

// ---------------------------------------------------------------------------
// Small numeric helpers
// ---------------------------------------------------------------------------

namespace stats {

inline double mean(const std::vector<double> &xs) {
	if (xs.empty()) return 0.0;
	return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

// Population standard deviation (divide by N).
inline double pop_std(const std::vector<double> &xs) {
	if (xs.empty()) return 0.0;
	const double m = mean(xs);
	double acc = 0.0;
	for (double x : xs) acc += (x - m) * (x - m);
	return std::sqrt(acc / static_cast<double>(xs.size()));
}

// Linear-interpolation percentile over a sorted sample, q in [0, 1].
inline double percentile_sorted(const std::vector<double> &sorted, double q) {
	if (sorted.empty()) throw std::invalid_argument("percentile of empty sample");
	if (sorted.size() == 1) return sorted.front();
	const double h = q * static_cast<double>(sorted.size() - 1);
	const auto lo = static_cast<std::size_t>(std::floor(h));
	const auto hi = std::min(lo + 1, sorted.size() - 1);
	const double frac = h - std::floor(h);
	return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

inline double percentile(std::vector<double> xs, double q) {
	std::sort(xs.begin(), xs.end());
	return percentile_sorted(xs, q);
}

inline double median(std::vector<double> xs) {
	return percentile(std::move(xs), 0.5);
}

} // namespace stats

inline std::uint64_t fnv1a64(std::string_view s) {
	std::uint64_t h = 0xCBF29CE484222325ULL;
	for (unsigned char c : s) {
		h ^= c;
		h *= 0x100000001B3ULL;
	}
	return h;
}

std::string to_hex(std::uint64_t v);

// ISO-8601 week date computed from a civil date.
struct IsoWeek {
	int year = 0; // ISO week-based year
	int week = 0; // 1..53
};

IsoWeek iso_week_from_date(int year, int month, int day);

// Parses "YYYY-MM-DD" or "MM/DD/YYYY"; throws DataError otherwise.
IsoWeek iso_week_from_string(const std::string &text);

} // namespace cropcast
