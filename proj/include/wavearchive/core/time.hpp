/**
 * @file time.hpp
 * @brief UTC timestamps, calendar days and half-open time ranges
 *
 * All pipeline times are UTC with millisecond resolution. Text form is
 * ISO-8601 with a `Z` suffix; the fractional part is emitted only when
 * non-zero.
 */

#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace wavearchive {

using millis = std::chrono::milliseconds;
using timestamp = std::chrono::sys_time<millis>;
using calendar_day = std::chrono::sys_days;

/// Parses `YYYY-MM-DDTHH:MM:SS[.fff]Z`. Throws archive_error(schema_violation).
timestamp parse_timestamp(std::string_view text);

std::string format_timestamp(timestamp t);

/// `YYYYMMDDThhmmssZ`, used inside study identifiers.
std::string format_compact(timestamp t);

/// Parses `YYYY-MM-DD`. Throws archive_error(schema_violation).
calendar_day parse_day(std::string_view text);

std::string format_day(calendar_day d);

/// WFDB header form: `HH:MM:SS.mmm` and `DD/MM/YYYY`.
std::string format_wfdb_time(timestamp t);
std::string format_wfdb_date(timestamp t);
timestamp parse_wfdb_datetime(std::string_view time_text, std::string_view date_text);

inline std::int64_t to_epoch_ms(timestamp t) { return t.time_since_epoch().count(); }
inline timestamp from_epoch_ms(std::int64_t ms) { return timestamp{millis{ms}}; }

inline calendar_day day_of(timestamp t) {
    return std::chrono::floor<std::chrono::days>(t);
}

inline timestamp start_of(calendar_day d) { return timestamp{d}; }

/**
 * @brief Half-open interval [start, end)
 */
struct time_range {
    timestamp start{};
    timestamp end{};

    [[nodiscard]] bool empty() const noexcept { return end <= start; }
    [[nodiscard]] millis length() const noexcept {
        return empty() ? millis{0} : end - start;
    }
    [[nodiscard]] bool contains(timestamp t) const noexcept {
        return start <= t && t < end;
    }
    [[nodiscard]] bool overlaps(const time_range& other) const noexcept {
        return start < other.end && other.start < end;
    }
    [[nodiscard]] time_range intersect(const time_range& other) const noexcept {
        return {std::max(start, other.start), std::min(end, other.end)};
    }
    [[nodiscard]] millis overlap(const time_range& other) const noexcept {
        return intersect(other).length();
    }

    friend bool operator==(const time_range&, const time_range&) = default;
};

inline time_range day_window(calendar_day d) {
    return {start_of(d), start_of(d + std::chrono::days{1})};
}

inline double seconds(millis m) { return static_cast<double>(m.count()) / 1000.0; }

}  // namespace wavearchive
