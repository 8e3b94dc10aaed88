#include "cropcast/common.hpp"

#include <array>
#include <cstdio>

namespace cropcast {

std::string to_hex(std::uint64_t v) {
	char buf[17];
	std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
	return std::string(buf);
}

namespace {

// Days since 1970-01-01 for a civil date (proleptic Gregorian).
long days_from_civil(int y, int m, int d) {
	y -= m <= 2;
	const long era = (y >= 0 ? y : y - 399) / 400;
	const unsigned yoe = static_cast<unsigned>(y - era * 400);
	const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2u) / 5u +
	                     static_cast<unsigned>(d) - 1u;
	const unsigned doe = yoe * 365u + yoe / 4u - yoe / 100u + doy;
	return era * 146097 + static_cast<long>(doe) - 719468;
}

// ISO weekday, Monday = 1 .. Sunday = 7.
int iso_weekday(long days) {
	const long wd = (days + 3) % 7; // 1970-01-01 was a Thursday (4)
	return static_cast<int>(wd >= 0 ? wd : wd + 7) + 1;
}

} // namespace

IsoWeek iso_week_from_date(int year, int month, int day) {
	const long days = days_from_civil(year, month, day);
	// Thursday of the current ISO week decides the week-based year.
	const long thursday = days - (iso_weekday(days) - 4);
	// Recover the civil year of that Thursday.
	int ty = year;
	for (int cand = year - 1; cand <= year + 1; ++cand) {
		if (thursday >= days_from_civil(cand, 1, 1) &&
		    thursday < days_from_civil(cand + 1, 1, 1)) {
			ty = cand;
			break;
		}
	}
	const long jan1 = days_from_civil(ty, 1, 1);
	const int week = static_cast<int>((thursday - jan1) / 7) + 1;
	return IsoWeek{ty, week};
}

IsoWeek iso_week_from_string(const std::string &text) {
	int y = 0, m = 0, d = 0;
	if (std::sscanf(text.c_str(), "%d-%d-%d", &y, &m, &d) == 3 && y > 31) {
		return iso_week_from_date(y, m, d);
	}
	if (std::sscanf(text.c_str(), "%d/%d/%d", &m, &d, &y) == 3 && y > 31) {
		return iso_week_from_date(y, m, d);
	}
	throw DataError("unparseable date: '" + text + "' (expected YYYY-MM-DD or MM/DD/YYYY)");
}

} // namespace cropcast
