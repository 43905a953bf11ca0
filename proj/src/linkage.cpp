/**
 * @file linkage.cpp
 * @brief Bed normalization, ADT sanitization and two-pass MRN assignment
 */

#include "wavearchive/linkage.hpp"

#include "wavearchive/core/csv.hpp"
#include "wavearchive/core/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cctype>
#include <set>
#include <tuple>

namespace wavearchive::linkage {

using extract::adt_event;
using extract::adt_event_kind;

// =============================================================================
// Bed labels
// =============================================================================

namespace {

struct nato_word {
    std::string_view word;
    char letter;
};

constexpr std::array<nato_word, 29> nato_words{{
    {"ALPHA", 'A'},   {"ALFA", 'A'},    {"BRAVO", 'B'},  {"CHARLIE", 'C'}, {"DELTA", 'D'},
    {"ECHO", 'E'},    {"FOXTROT", 'F'}, {"GOLF", 'G'},   {"HOTEL", 'H'},   {"INDIA", 'I'},
    {"JULIETT", 'J'}, {"JULIET", 'J'},  {"KILO", 'K'},   {"LIMA", 'L'},    {"MIKE", 'M'},
    {"NOVEMBER", 'N'}, {"OSCAR", 'O'},  {"PAPA", 'P'},   {"QUEBEC", 'Q'},  {"ROMEO", 'R'},
    {"SIERRA", 'S'},  {"TANGO", 'T'},   {"UNIFORM", 'U'}, {"VICTOR", 'V'}, {"WHISKEY", 'W'},
    {"WHISKY", 'W'},  {"XRAY", 'X'},    {"YANKEE", 'Y'}, {"ZULU", 'Z'},
}};

}  // namespace

void bed_label_map::add_override(const std::string& device_label, const std::string& emr_label) {
    if (device_label.empty() || emr_label.empty()) {
        throw archive_error(error_code::config_invalid, "empty bed label in override map");
    }
    for (const auto& [dev, emr] : overrides) {
        if (emr == emr_label && dev != device_label) {
            throw archive_error(error_code::config_invalid,
                                "bed map not injective: " + dev + " and " + device_label +
                                    " both map to " + emr_label);
        }
    }
    auto [it, inserted] = overrides.emplace(device_label, emr_label);
    if (!inserted && it->second != emr_label) {
        throw archive_error(error_code::config_invalid,
                            "conflicting overrides for " + device_label);
    }
}

bed_label_map bed_label_map::load(const std::filesystem::path& path) {
    bed_label_map map;
    auto rows = csv::read_file(path);
    if (rows.empty() || rows.front().fields != std::vector<std::string>{"device_label", "emr_label"}) {
        throw archive_error(error_code::config_invalid, path.string() + ": bad header");
    }
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& f = rows[i].fields;
        if (f.size() != 2) {
            throw archive_error(error_code::config_invalid,
                                path.string() + ":" + std::to_string(rows[i].line) + ": bad row");
        }
        map.add_override(f[0], f[1]);
    }
    return map;
}

std::string normalize_bed_label(std::string_view device_label, const bed_label_map& map) {
    if (device_label.empty()) {
        throw archive_error(error_code::ambiguous_label, "empty bed label");
    }
    if (auto it = map.overrides.find(std::string(device_label)); it != map.overrides.end()) {
        return it->second;
    }
    if (!map.nato_rule_enabled) return std::string(device_label);

    std::size_t digits = 0;
    while (digits < device_label.size() &&
           std::isdigit(static_cast<unsigned char>(device_label[digits]))) {
        ++digits;
    }
    auto word = device_label.substr(digits);
    bool alpha_tail = !word.empty() && std::all_of(word.begin(), word.end(), [](char c) {
        return std::isalpha(static_cast<unsigned char>(c)) != 0;
    });
    if (digits == 0 || !alpha_tail) return std::string(device_label);

    std::string upper(word);
    for (auto& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    for (const auto& w : nato_words) {
        if (w.word == upper) {
            int number = std::stoi(std::string(device_label.substr(0, digits)));
            char buf[16];
            std::snprintf(buf, sizeof buf, "%c%02d", w.letter, number);
            return buf;
        }
    }
    if (map.strict) {
        throw archive_error(error_code::ambiguous_label,
                            "unrecognized bed word in '" + std::string(device_label) + "'");
    }
    return std::string(device_label);
}

// =============================================================================
// ADT sanitization
// =============================================================================

std::string_view to_string(stay_source s) noexcept {
    return s == stay_source::device_log ? "device_log" : "adt";
}

sanitize_result sanitize_adt(std::span<const adt_event> events, std::optional<time_range> window) {
    sanitize_result out;

    using key_t = std::tuple<std::string, std::string, std::string>;
    std::map<key_t, std::vector<adt_event>> groups;
    for (const auto& e : events) groups[{e.mrn, e.visit_id, e.bed}].push_back(e);

    for (auto& [key, group] : groups) {
        std::sort(group.begin(), group.end(), [](const adt_event& a, const adt_event& b) {
            return std::tie(a.at, a.event_id) < std::tie(b.at, b.event_id);
        });

        // R1: an open and a close at the same instant cancel out
        std::vector<adt_event> kept;
        for (std::size_t i = 0; i < group.size();) {
            std::size_t j = i;
            while (j < group.size() && group[j].at == group[i].at) ++j;
            std::vector<adt_event> opens, closes;
            for (std::size_t k = i; k < j; ++k) {
                (extract::opens_stay(group[k].event) ? opens : closes).push_back(group[k]);
            }
            auto cancelled = std::min(opens.size(), closes.size());
            for (std::size_t k = cancelled; k < opens.size(); ++k) kept.push_back(opens[k]);
            for (std::size_t k = cancelled; k < closes.size(); ++k) kept.push_back(closes[k]);
            i = j;
        }
        std::sort(kept.begin(), kept.end(), [](const adt_event& a, const adt_event& b) {
            return std::tie(a.at, a.event_id) < std::tie(b.at, b.event_id);
        });

        // R2: exact duplicates (all fields but the event id)
        std::vector<adt_event> unique;
        for (const auto& e : kept) {
            bool dup = std::any_of(unique.begin(), unique.end(), [&](const adt_event& u) {
                return u.at == e.at && u.event == e.event && u.patient_name == e.patient_name;
            });
            if (!dup) unique.push_back(e);
        }

        // R3: walk; first open and last close of a readmit chain win
        const auto& [mrn, visit, bed] = key;
        std::vector<stay_interval> stays;
        std::optional<timestamp> open_at;
        bool open_flag = false;
        auto warn = [&](const adt_event& e, const std::string& what) {
            out.warnings.push_back({"UnpairedEvent", "event " + std::to_string(e.event_id) +
                                                         " (" + mrn + "/" + visit + "/" + bed +
                                                         "): " + what});
        };
        for (const auto& e : unique) {
            if (extract::opens_stay(e.event)) {
                if (open_at) continue;
                if (!stays.empty() && e.at - stays.back().range.end <= readmit_merge_gap) {
                    open_at = stays.back().range.start;
                    open_flag = stays.back().open_start;
                    stays.pop_back();
                } else {
                    open_at = e.at;
                    open_flag = false;
                }
            } else if (open_at) {
                stays.push_back({mrn, visit, bed, {*open_at, e.at}, stay_source::adt, open_flag,
                                 false});
                open_at.reset();
            } else if (!stays.empty()) {
                stays.back().range.end = std::max(stays.back().range.end, e.at);
            } else if (window) {
                warn(e, "close without open; interval starts at day start");
                stays.push_back({mrn, visit, bed, {window->start, e.at}, stay_source::adt, true,
                                 false});
            } else {
                warn(e, "close without open; dropped");
            }
        }
        if (open_at) {
            const auto& last = unique.back();
            if (window) {
                warn(last, "open at day close; interval runs to day end");
                stays.push_back({mrn, visit, bed, {*open_at, window->end}, stay_source::adt,
                                 open_flag, true});
            } else {
                warn(last, "open without close; dropped");
            }
        }
        for (auto& s : stays) {
            if (!s.range.empty()) out.stays.push_back(std::move(s));
        }
    }

    std::sort(out.stays.begin(), out.stays.end(), [](const stay_interval& a, const stay_interval& b) {
        return std::tie(a.range.start, a.mrn, a.visit_id, a.bed) <
               std::tie(b.range.start, b.mrn, b.visit_id, b.bed);
    });
    return out;
}

std::vector<adt_event> render_stays_as_events(std::span<const stay_interval> stays) {
    std::vector<adt_event> events;
    std::int64_t id = 1;
    for (const auto& s : stays) {
        events.push_back({id++, "", s.mrn, s.visit_id, adt_event_kind::admission, s.bed,
                          s.range.start});
        events.push_back({id++, "", s.mrn, s.visit_id, adt_event_kind::discharge, s.bed,
                          s.range.end});
    }
    return events;
}

// =============================================================================
// Streams
// =============================================================================

namespace {

struct collapsed {
    stream_range range;
    std::vector<time_range> evidence;
};

std::vector<collapsed> collapse_impl(std::span<const stream_observation> rows) {
    std::vector<const stream_observation*> order;
    order.reserve(rows.size());
    for (const auto& r : rows) order.push_back(&r);
    std::sort(order.begin(), order.end(), [](const stream_observation* a, const stream_observation* b) {
        return std::tie(a->monitor_patient_id, a->begin, a->end, a->bed_label, a->lifetime_id) <
               std::tie(b->monitor_patient_id, b->begin, b->end, b->bed_label, b->lifetime_id);
    });

    std::vector<collapsed> out;
    for (const auto* r : order) {
        bool extend = !out.empty() && out.back().range.monitor_patient_id == r->monitor_patient_id &&
                      out.back().range.bed_label == r->bed_label &&
                      (r->lifetime_id.empty() || out.back().range.lifetime_id.empty() ||
                       r->lifetime_id == out.back().range.lifetime_id);
        if (!extend) {
            out.push_back({{r->monitor_patient_id, r->bed_label, r->lifetime_id, {r->begin, r->end}},
                           {}});
        }
        auto& cur = out.back();
        cur.range.range.start = std::min(cur.range.range.start, r->begin);
        cur.range.range.end = std::max(cur.range.range.end, r->end);
        if (cur.range.lifetime_id.empty()) cur.range.lifetime_id = r->lifetime_id;
        cur.evidence.push_back({r->begin, std::max(r->end, r->begin + std::chrono::seconds{1})});
    }
    for (auto& c : out) {
        if (c.range.range.end <= c.range.range.start) {
            c.range.range.end = c.range.range.start + std::chrono::seconds{1};
        }
    }
    return out;
}

}  // namespace

std::vector<stream_range> collapse_stream_ranges(std::span<const stream_observation> rows) {
    std::vector<stream_range> out;
    for (auto& c : collapse_impl(rows)) out.push_back(std::move(c.range));
    return out;
}

std::vector<stream_observation> observations_of(const extract::extract_bundle& b) {
    std::vector<stream_observation> obs;
    obs.reserve(b.numerics.size() + b.wave_samples.size() + b.alerts.size() + b.enumerations.size());
    const auto second = std::chrono::seconds{1};
    for (const auto& r : b.numerics) {
        obs.push_back({r.monitor_patient_id, r.bed_label, r.lifetime_id, r.observed_at,
                       r.observed_at + second});
    }
    for (const auto& w : b.wave_samples) {
        obs.push_back({w.monitor_patient_id, w.bed_label, "", w.first_time(), w.end_time()});
    }
    for (const auto& a : b.alerts) {
        obs.push_back({a.monitor_patient_id, a.bed_label, "", a.at, a.at + second});
    }
    for (const auto& e : b.enumerations) {
        obs.push_back({e.monitor_patient_id, e.bed_label, "", e.observed_at,
                       e.observed_at + second});
    }
    return obs;
}

// =============================================================================
// Assignment
// =============================================================================

std::string_view to_string(link_method m) noexcept {
    switch (m) {
        case link_method::lifetime_id: return "lifetime_id";
        case link_method::device_log: return "device_log";
        case link_method::adt_overlap: return "adt_overlap";
        case link_method::unmatched: return "unmatched";
    }
    return "";
}

namespace {

/// Larger overlap with the region first, then earlier start, then smaller MRN.
bool outranks(const stay_interval* a, const stay_interval* b, const time_range& region) {
    auto ao = a->range.overlap(region), bo = b->range.overlap(region);
    if (ao != bo) return ao > bo;
    return std::tie(a->range.start, a->mrn, a->visit_id) <
           std::tie(b->range.start, b->mrn, b->visit_id);
}

void assign_with(linkage_result& r, std::span<const stay_interval> all, link_method method) {
    std::vector<const stay_interval*> on_bed;
    for (const auto& s : all) {
        if (s.bed == r.emr_bed_label && s.range.overlaps(r.stream_range)) on_bed.push_back(&s);
    }
    if (on_bed.empty()) return;

    std::vector<link_segment> out;
    for (auto& seg : r.segments) {
        if (seg.method != link_method::unmatched) {
            out.push_back(std::move(seg));
            continue;
        }
        const auto region = seg.range;
        std::vector<const stay_interval*> relevant;
        for (const auto* s : on_bed) {
            if (s->range.overlap(region).count() > 0) relevant.push_back(s);
        }
        if (relevant.empty()) {
            out.push_back(std::move(seg));
            continue;
        }
        std::vector<candidate_view> views;
        for (const auto* s : relevant) {
            views.push_back({s->mrn, s->visit_id, s->source, s->range, seconds(s->range.overlap(region))});
        }

        std::vector<timestamp> cuts{region.start, region.end};
        for (const auto* s : relevant) {
            if (region.contains(s->range.start)) cuts.push_back(s->range.start);
            if (region.contains(s->range.end)) cuts.push_back(s->range.end);
        }
        std::sort(cuts.begin(), cuts.end());
        cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

        std::vector<link_segment> pieces;
        for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
            time_range piece{cuts[i], cuts[i + 1]};
            std::vector<const stay_interval*> covering;
            for (const auto* c : relevant) {
                if (c->range.start <= piece.start && piece.end <= c->range.end) covering.push_back(c);
            }
            const stay_interval* best = nullptr;
            for (const auto* c : covering) {
                if (!best || outranks(c, best, region)) best = c;
            }
            bool tie = best && std::count_if(covering.begin(), covering.end(), [&](const stay_interval* c) {
                               return c->range.overlap(region) == best->range.overlap(region);
                           }) > 1;
            link_segment p;
            p.range = piece;
            p.candidates = views;
            if (best) {
                p.mrn = best->mrn;
                p.method = method;
                p.evidence = best->range;
                p.overlap_seconds = seconds(best->range.overlap(region));
                p.tie_broken = tie;
            }
            pieces.push_back(std::move(p));
        }

        for (auto& p : pieces) {
            if (!out.empty() && out.back().range.end == p.range.start &&
                out.back().method == p.method && out.back().mrn == p.mrn) {
                auto& prev = out.back();
                prev.range.end = p.range.end;
                if (prev.evidence && p.evidence) {
                    prev.evidence = time_range{std::min(prev.evidence->start, p.evidence->start),
                                               std::max(prev.evidence->end, p.evidence->end)};
                    prev.overlap_seconds = std::max(prev.overlap_seconds, p.overlap_seconds);
                }
                prev.tie_broken = prev.tie_broken || p.tie_broken;
                continue;
            }
            out.push_back(std::move(p));
        }
    }
    r.segments = std::move(out);
}

void run_pass1(std::vector<linkage_result>& streams, std::span<const stay_interval> log_stays) {
    for (auto& r : streams) {
        if (!r.lifetime_id.empty()) {
            link_segment seg;
            seg.range = r.stream_range;
            seg.mrn = r.lifetime_id;
            seg.method = link_method::lifetime_id;
            r.segments = {seg};
            continue;
        }
        assign_with(r, log_stays, link_method::device_log);
    }
}

}  // namespace

std::vector<linkage_result> prepare_streams(std::span<const stream_range> ranges,
                                            const bed_label_map& bed_map,
                                            std::vector<linkage_warning>* warnings) {
    std::vector<linkage_result> out;
    out.reserve(ranges.size());
    for (const auto& r : ranges) {
        linkage_result lr;
        lr.monitor_patient_id = r.monitor_patient_id;
        lr.bed_label = r.bed_label;
        lr.lifetime_id = r.lifetime_id;
        lr.stream_range = r.range;
        try {
            lr.emr_bed_label = normalize_bed_label(r.bed_label, bed_map);
        } catch (const archive_error& e) {
            if (warnings) warnings->push_back({"AmbiguousLabel", e.what()});
            lr.emr_bed_label = r.bed_label;
        }
        link_segment seg;
        seg.range = r.range;
        lr.segments.push_back(std::move(seg));
        out.push_back(std::move(lr));
    }
    return out;
}

std::map<std::string, std::string> encounter_index(std::span<const adt_event> events) {
    std::vector<const adt_event*> sorted;
    for (const auto& e : events) sorted.push_back(&e);
    std::sort(sorted.begin(), sorted.end(),
              [](const adt_event* a, const adt_event* b) { return a->event_id < b->event_id; });
    std::map<std::string, std::string> index;
    for (const auto* e : sorted) index.emplace(e->visit_id, e->mrn);
    return index;
}

std::vector<stay_interval> device_log_stays(std::span<const extract::device_log_record> logs,
                                            const std::map<std::string, std::string>& encounters,
                                            const bed_label_map& bed_map,
                                            std::vector<linkage_warning>* warnings) {
    std::vector<stay_interval> out;
    for (const auto& log : logs) {
        auto it = encounters.find(log.encounter_id);
        if (it == encounters.end()) {
            if (warnings) {
                warnings->push_back({"UnresolvedEncounter",
                                     "device log encounter " + log.encounter_id + " has no MRN"});
            }
            continue;
        }
        std::string bed;
        try {
            bed = normalize_bed_label(log.bed_label, bed_map);
        } catch (const archive_error& e) {
            if (warnings) warnings->push_back({"AmbiguousLabel", e.what()});
            continue;
        }
        out.push_back({it->second, log.encounter_id, bed, {log.attach_at, log.detach_at},
                       stay_source::device_log, log.open_attach, log.open_detach});
    }
    return out;
}

std::vector<linkage_result> assign_pass1_device_logs(
    std::vector<linkage_result> streams, std::span<const extract::device_log_record> device_logs,
    const std::map<std::string, std::string>& encounters, const bed_label_map& bed_map) {
    auto stays = device_log_stays(device_logs, encounters, bed_map);
    run_pass1(streams, stays);
    return streams;
}

std::vector<linkage_result> assign_pass2_adt(std::vector<linkage_result> streams,
                                             std::span<const stay_interval> stays) {
    for (auto& r : streams) {
        if (!r.lifetime_id.empty()) continue;
        assign_with(r, stays, link_method::adt_overlap);
    }
    return streams;
}

day_linkage link_day(const extract::extract_bundle& bundle, const bed_label_map& bed_map) {
    day_linkage out;
    auto& warnings = out.report.warnings;

    auto observations = observations_of(bundle);
    auto collapsed_ranges = collapse_impl(observations);
    std::vector<stream_range> ranges;
    ranges.reserve(collapsed_ranges.size());
    for (const auto& c : collapsed_ranges) ranges.push_back(c.range);

    auto sanitized = sanitize_adt(bundle.adt_events, bundle.window());
    out.adt_stays = sanitized.stays;
    warnings.insert(warnings.end(), sanitized.warnings.begin(), sanitized.warnings.end());

    auto encounters = encounter_index(bundle.adt_events);
    auto log_stays = device_log_stays(bundle.device_logs, encounters, bed_map, &warnings);

    auto streams = prepare_streams(ranges, bed_map, &warnings);
    run_pass1(streams, log_stays);
    streams = assign_pass2_adt(std::move(streams), out.adt_stays);

    // pieces cut between candidate intervals can hold no data at all
    for (std::size_t i = 0; i < streams.size(); ++i) {
        auto& segs = streams[i].segments;
        const auto& evidence = collapsed_ranges[i].evidence;
        segs.erase(std::remove_if(segs.begin(), segs.end(),
                                  [&](const link_segment& s) {
                                      return std::none_of(evidence.begin(), evidence.end(),
                                                          [&](const time_range& e) {
                                                              return e.overlaps(s.range);
                                                          });
                                  }),
                   segs.end());
    }

    auto& rep = out.report;
    rep.total_streams = streams.size();
    for (const auto& r : streams) {
        for (const auto& s : r.segments) rep.per_method[s.method]++;
        if (!r.lifetime_id.empty()) continue;
        rep.total_streams_missing_id++;
        bool any = std::any_of(r.segments.begin(), r.segments.end(),
                               [](const link_segment& s) { return s.mrn.has_value(); });
        if (any) rep.assigned++;
    }
    rep.coverage_fraction = rep.total_streams_missing_id == 0
                                ? 1.0
                                : static_cast<double>(rep.assigned) /
                                      static_cast<double>(rep.total_streams_missing_id);
    out.results = std::move(streams);
    return out;
}

std::string render_audit_jsonl(std::span<const linkage_result> results) {
    std::string out;
    for (const auto& r : results) {
        for (const auto& s : r.segments) {
            nlohmann::json j;
            j["monitor_patient_id"] = r.monitor_patient_id;
            j["bed_label"] = r.bed_label;
            j["emr_bed_label"] = r.emr_bed_label;
            j["start"] = format_timestamp(s.range.start);
            j["end"] = format_timestamp(s.range.end);
            j["method"] = std::string(to_string(s.method));
            j["mrn"] = s.mrn ? nlohmann::json(*s.mrn) : nlohmann::json(nullptr);
            j["overlap_seconds"] = s.overlap_seconds;
            j["tie_broken"] = s.tie_broken;
            auto cands = nlohmann::json::array();
            for (const auto& c : s.candidates) {
                cands.push_back({{"mrn", c.mrn},
                                 {"visit_id", c.visit_id},
                                 {"source", std::string(to_string(c.source))},
                                 {"start", format_timestamp(c.range.start)},
                                 {"end", format_timestamp(c.range.end)},
                                 {"overlap_seconds", c.overlap_seconds}});
            }
            j["candidates"] = std::move(cands);
            out += j.dump();
            out.push_back('\n');
        }
    }
    return out;
}

}  // namespace wavearchive::linkage
