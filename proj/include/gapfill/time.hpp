#pragma once

#include <charconv>
#include <chrono>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

namespace gapfill {

using TimePoint = std::chrono::sys_time<std::chrono::minutes>;

namespace detail {

inline std::optional<int> parse_fixed(std::string_view s, std::size_t pos, std::size_t len) {
    if (pos + len > s.size()) return std::nullopt;
    int value = 0;
    for (std::size_t i = pos; i < pos + len; ++i) {
        if (s[i] < '0' || s[i] > '9') return std::nullopt;
        value = value * 10 + (s[i] - '0');
    }
    return value;
}

}  // namespace detail

/// Parses `YYYY-MM-DD` or `YYYY-MM-DDTHH:MM`. Returns nullopt on anything else.
inline std::optional<TimePoint> parse_timestamp(std::string_view text) {
    using namespace std::chrono;
    if (text.size() != 10 && text.size() != 16) return std::nullopt;
    if (text[4] != '-' || text[7] != '-') return std::nullopt;
    const auto y = detail::parse_fixed(text, 0, 4);
    const auto m = detail::parse_fixed(text, 5, 2);
    const auto d = detail::parse_fixed(text, 8, 2);
    if (!y || !m || !d) return std::nullopt;
    const year_month_day ymd{year{*y}, month{static_cast<unsigned>(*m)}, day{static_cast<unsigned>(*d)}};
    if (!ymd.ok()) return std::nullopt;
    TimePoint tp = time_point_cast<minutes>(sys_days{ymd});
    if (text.size() == 16) {
        if (text[10] != 'T' || text[13] != ':') return std::nullopt;
        const auto hh = detail::parse_fixed(text, 11, 2);
        const auto mm = detail::parse_fixed(text, 14, 2);
        if (!hh || !mm || *hh > 23 || *mm > 59) return std::nullopt;
        tp += hours{*hh} + minutes{*mm};
    }
    return tp;
}

/// Parses a calendar date (`YYYY-MM-DD`) to midnight of that day.
inline std::optional<TimePoint> parse_date(std::string_view text) {
    if (text.size() != 10) return std::nullopt;
    return parse_timestamp(text);
}

inline std::string format_date(TimePoint tp) {
    using namespace std::chrono;
    const year_month_day ymd{floor<days>(tp)};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

/// Date only when the instant is midnight, otherwise `YYYY-MM-DDTHH:MM`.
inline std::string format_timestamp(TimePoint tp, bool with_time) {
    using namespace std::chrono;
    if (!with_time) return format_date(tp);
    const auto midnight = floor<days>(tp);
    const hh_mm_ss hms{tp - midnight};
    char buf[8];
    std::snprintf(buf, sizeof buf, "T%02d:%02d", static_cast<int>(hms.hours().count()),
                  static_cast<int>(hms.minutes().count()));
    return format_date(tp) + buf;
}

inline unsigned month_of(TimePoint tp) {
    using namespace std::chrono;
    return static_cast<unsigned>(year_month_day{floor<days>(tp)}.month());
}

inline unsigned day_of_month(TimePoint tp) {
    using namespace std::chrono;
    return static_cast<unsigned>(year_month_day{floor<days>(tp)}.day());
}

inline unsigned hour_of_day(TimePoint tp) {
    using namespace std::chrono;
    return static_cast<unsigned>(hh_mm_ss{tp - floor<days>(tp)}.hours().count());
}

/// Human-readable step such as `1d`, `1h` or `15min`.
inline std::string format_step(std::chrono::minutes step) {
    const auto m = step.count();
    if (m % 1440 == 0) return std::to_string(m / 1440) + "d";
    if (m % 60 == 0) return std::to_string(m / 60) + "h";
    return std::to_string(m) + "min";
}

}  // namespace gapfill
