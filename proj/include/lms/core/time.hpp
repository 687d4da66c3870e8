#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

// Campus-local wall-clock time, stored as seconds since the Unix epoch with
// no zone arithmetic. Calendar conversion uses the days-from-civil algorithm.

namespace lms::timeutil {

struct Civil {
    int year = 1970;
    int month = 1;  // 1..12
    int day = 1;    // 1..31
    int hour = 0;
    int minute = 0;
    int second = 0;
};

constexpr std::int64_t kSecondsPerDay = 86400;

std::int64_t days_from_civil(int y, int m, int d);
void civil_from_days(std::int64_t z, int& y, int& m, int& d);

std::int64_t to_epoch(const Civil& c);
Civil from_epoch(std::int64_t t);

// Strict "YYYY-MM-DDTHH:MM:SS"; also accepts a bare "YYYY-MM-DD" (midnight).
// Rejects out-of-range fields (month 13, hour 99, Feb 30, ...).
std::optional<std::int64_t> parse_timestamp(std::string_view s);
std::optional<std::int64_t> parse_date(std::string_view s);

std::string format_timestamp(std::int64_t t);
std::string format_date(std::int64_t t);

inline int hour_of_day(std::int64_t t) {
    return static_cast<int>((t % kSecondsPerDay) / 3600);
}

// 0 = Sunday ... 6 = Saturday.
inline int day_of_week(std::int64_t t) {
    return static_cast<int>(((t / kSecondsPerDay) + 4) % 7);
}

inline bool is_weekend(std::int64_t t) {
    const int dow = day_of_week(t);
    return dow == 0 || dow == 6;
}

}  // namespace lms::timeutil
