/**
 * @file time.cpp
 * @brief ISO-8601 / WFDB timestamp parsing and formatting
 */

#include "wavearchive/core/time.hpp"

#include "wavearchive/core/error.hpp"

#include <cstdio>

namespace wavearchive {

namespace {

using namespace std::chrono;

bool read_int(std::string_view text, std::size_t pos, std::size_t width, int& out) {
    if (pos + width > text.size()) return false;
    int v = 0;
    for (std::size_t i = 0; i < width; ++i) {
        char c = text[pos + i];
        if (c < '0' || c > '9') return false;
        v = v * 10 + (c - '0');
    }
    out = v;
    return true;
}

[[noreturn]] void bad(std::string_view what, std::string_view text) {
    throw archive_error(error_code::schema_violation,
                        std::string("invalid ") + std::string(what) + " '" +
                            std::string(text) + "'");
}

calendar_day make_day(int y, int m, int d, std::string_view text) {
    year_month_day ymd{year{y}, month{static_cast<unsigned>(m)},
                       day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) bad("date", text);
    return sys_days{ymd};
}

timestamp make_time(calendar_day d, int hh, int mm, int ss, int ms, std::string_view text) {
    if (hh > 23 || mm > 59 || ss > 59) bad("time of day", text);
    return timestamp{d} + std::chrono::hours{hh} + std::chrono::minutes{mm} + std::chrono::seconds{ss} + millis{ms};
}

}  // namespace

timestamp parse_timestamp(std::string_view text) {
    // 2021-03-01T00:05:00Z or 2021-03-01T00:05:00.250Z
    int y, mo, d, hh, mi, ss;
    if (text.size() < 20 || text[4] != '-' || text[7] != '-' || text[10] != 'T' ||
        text[13] != ':' || text[16] != ':' || text.back() != 'Z' ||
        !read_int(text, 0, 4, y) || !read_int(text, 5, 2, mo) || !read_int(text, 8, 2, d) ||
        !read_int(text, 11, 2, hh) || !read_int(text, 14, 2, mi) || !read_int(text, 17, 2, ss)) {
        bad("timestamp", text);
    }
    int ms = 0;
    if (text.size() != 20) {
        std::string_view frac = text.substr(19, text.size() - 20);
        if (frac.size() < 2 || frac.size() > 4 || frac[0] != '.') bad("timestamp", text);
        int v = 0;
        if (!read_int(frac, 1, frac.size() - 1, v)) bad("timestamp", text);
        for (std::size_t i = frac.size() - 1; i < 3; ++i) v *= 10;
        ms = v;
    }
    return make_time(make_day(y, mo, d, text), hh, mi, ss, ms, text);
}

std::string format_timestamp(timestamp t) {
    auto d = floor<days>(t);
    year_month_day ymd{d};
    hh_mm_ss<millis> tod{t - d};
    char buf[40];
    int ms = static_cast<int>(tod.subseconds().count());
    if (ms == 0) {
        std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", int(ymd.year()),
                      unsigned(ymd.month()), unsigned(ymd.day()), int(tod.hours().count()),
                      int(tod.minutes().count()), int(tod.seconds().count()));
    } else {
        std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d.%03dZ", int(ymd.year()),
                      unsigned(ymd.month()), unsigned(ymd.day()), int(tod.hours().count()),
                      int(tod.minutes().count()), int(tod.seconds().count()), ms);
    }
    return buf;
}

std::string format_compact(timestamp t) {
    auto d = floor<days>(t);
    year_month_day ymd{d};
    hh_mm_ss<millis> tod{t - d};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d%02u%02uT%02d%02d%02dZ", int(ymd.year()),
                  unsigned(ymd.month()), unsigned(ymd.day()), int(tod.hours().count()),
                  int(tod.minutes().count()), int(tod.seconds().count()));
    return buf;
}

calendar_day parse_day(std::string_view text) {
    int y, m, d;
    if (text.size() != 10 || text[4] != '-' || text[7] != '-' || !read_int(text, 0, 4, y) ||
        !read_int(text, 5, 2, m) || !read_int(text, 8, 2, d)) {
        bad("day", text);
    }
    return make_day(y, m, d, text);
}

std::string format_day(calendar_day d) {
    year_month_day ymd{d};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", int(ymd.year()), unsigned(ymd.month()),
                  unsigned(ymd.day()));
    return buf;
}

std::string format_wfdb_time(timestamp t) {
    auto d = floor<days>(t);
    hh_mm_ss<millis> tod{t - d};
    char buf[24];
    std::snprintf(buf, sizeof buf, "%02d:%02d:%02d.%03d", int(tod.hours().count()),
                  int(tod.minutes().count()), int(tod.seconds().count()),
                  int(tod.subseconds().count()));
    return buf;
}

std::string format_wfdb_date(timestamp t) {
    year_month_day ymd{floor<days>(t)};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%02u/%02u/%04d", unsigned(ymd.day()), unsigned(ymd.month()),
                  int(ymd.year()));
    return buf;
}

timestamp parse_wfdb_datetime(std::string_view time_text, std::string_view date_text) {
    int hh, mi, ss, ms = 0, d, mo, y;
    if (time_text.size() < 8 || time_text[2] != ':' || time_text[5] != ':' ||
        !read_int(time_text, 0, 2, hh) || !read_int(time_text, 3, 2, mi) ||
        !read_int(time_text, 6, 2, ss)) {
        bad("WFDB base time", time_text);
    }
    if (time_text.size() > 8) {
        if (time_text.size() != 12 || time_text[8] != '.' || !read_int(time_text, 9, 3, ms)) {
            bad("WFDB base time", time_text);
        }
    }
    if (date_text.size() != 10 || date_text[2] != '/' || date_text[5] != '/' ||
        !read_int(date_text, 0, 2, d) || !read_int(date_text, 3, 2, mo) ||
        !read_int(date_text, 6, 4, y)) {
        bad("WFDB base date", date_text);
    }
    return make_time(make_day(y, mo, d, date_text), hh, mi, ss, ms, time_text);
}

}  // namespace wavearchive
