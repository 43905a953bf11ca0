/**
 * @file linkage.hpp
 * @brief Assigns MRNs to monitor patient streams from device logs and ADT
 *
 * Monitor data streams are keyed by an internal patient id that may lack a
 * medical record number, may change when the patient changes bed, and may
 * be shared by consecutive patients in one room. Linkage works per stream
 * range (one id in one bed, collapsed to a time range):
 *
 *  1. streams carrying a lifetime id keep it;
 *  2. pass 1 matches against device-log attach/detach intervals on the same
 *     normalized bed;
 *  3. pass 2 matches what is left against sanitized ADT stays;
 *  4. anything still unassigned is kept without an MRN.
 *
 * Ranges are cut at candidate interval boundaries, so one stream can map to
 * several MRNs over time. Within a piece the candidate with the largest
 * overlap with the region being assigned wins; ties go to the earlier
 * interval start, then the lexicographically smaller MRN.
 */

#pragma once

#include "wavearchive/core/time.hpp"
#include "wavearchive/extract_model.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace wavearchive::linkage {

// =============================================================================
// Bed labels
// =============================================================================

struct bed_label_map {
    std::map<std::string, std::string> overrides;  ///< device label -> EMR label
    bool nato_rule_enabled = true;
    bool strict = false;

    /// Adds an override; throws archive_error(config_invalid) when it would
    /// make the map non-injective or a label is empty.
    void add_override(const std::string& device_label, const std::string& emr_label);

    /// Reads a `device_label,emr_label` CSV.
    static bed_label_map load(const std::filesystem::path& path);
};

/// Override, then `<digits><NATO word>` -> `<letter><2-digit number>`, then
/// identity. In strict mode an unrecognized word after the digits throws
/// archive_error(ambiguous_label).
std::string normalize_bed_label(std::string_view device_label, const bed_label_map& map);

// =============================================================================
// ADT sanitization
// =============================================================================

enum class stay_source { device_log, adt };

std::string_view to_string(stay_source s) noexcept;

struct stay_interval {
    std::string mrn;
    std::string visit_id;
    std::string bed;  ///< EMR bed label
    time_range range;
    stay_source source = stay_source::adt;
    bool open_start = false;  ///< began before the day window (no opening event)
    bool open_end = false;    ///< still open at day end (no closing event)

    friend bool operator==(const stay_interval&, const stay_interval&) = default;
};

struct linkage_warning {
    std::string kind;  ///< UnpairedEvent, UnresolvedEncounter, AmbiguousLabel
    std::string message;
};

struct sanitize_result {
    std::vector<stay_interval> stays;
    std::vector<linkage_warning> warnings;
};

/// Gap under which a close followed by a re-open on the same visit and bed
/// is treated as one stay.
inline constexpr millis readmit_merge_gap{std::chrono::minutes{5}};

/**
 * @brief Turns raw ADT events into one interval per contiguous bed stay
 *
 * Per (mrn, visit, bed): drops open/close pairs sharing a timestamp, removes
 * exact duplicates, then walks events in time order keeping the first open
 * and the last close of each discharge/readmit chain. With a day window,
 * dangling opens run to the window end and dangling closes start at the
 * window start (flagged and warned); without one they are dropped with a
 * warning.
 */
sanitize_result sanitize_adt(std::span<const extract::adt_event> events,
                             std::optional<time_range> day_window = std::nullopt);

/// Renders intervals back into Admission/Discharge pairs; open bounds are
/// rendered at the window edge they were resolved to. Used to check
/// idempotency.
std::vector<extract::adt_event> render_stays_as_events(std::span<const stay_interval> stays);

// =============================================================================
// Streams
// =============================================================================

/// One piece of monitor evidence: a point record spans [t, t+1s), a wave
/// block its sample span.
struct stream_observation {
    std::string monitor_patient_id;
    std::string bed_label;  ///< device-side
    std::string lifetime_id;
    timestamp begin{};
    timestamp end{};  ///< equal to begin for a bare instant
};

struct stream_range {
    std::string monitor_patient_id;
    std::string bed_label;  ///< device-side
    std::string lifetime_id;
    time_range range;

    friend bool operator==(const stream_range&, const stream_range&) = default;
};

/// Consecutive rows of one id in one bed merge into [min begin, max end];
/// a bed change or a conflicting lifetime id starts a new range. A
/// degenerate range is widened to one second. Ordered by (id, start).
std::vector<stream_range> collapse_stream_ranges(std::span<const stream_observation> rows);

/// Observations derived from every monitor table of a bundle.
std::vector<stream_observation> observations_of(const extract::extract_bundle& bundle);

// =============================================================================
// Assignment
// =============================================================================

enum class link_method { lifetime_id, device_log, adt_overlap, unmatched };

std::string_view to_string(link_method m) noexcept;

struct candidate_view {
    std::string mrn;
    std::string visit_id;
    stay_source source = stay_source::adt;
    time_range range;
    double overlap_seconds = 0;
};

struct link_segment {
    time_range range;
    std::optional<std::string> mrn;
    link_method method = link_method::unmatched;
    double overlap_seconds = 0;
    std::optional<time_range> evidence;  ///< chosen EMR interval (hull when merged)
    bool tie_broken = false;
    std::vector<candidate_view> candidates;
};

struct linkage_result {
    std::string monitor_patient_id;
    std::string bed_label;      ///< device-side
    std::string emr_bed_label;  ///< normalized
    std::string lifetime_id;
    time_range stream_range;
    std::vector<link_segment> segments;
};

struct linkage_report {
    std::size_t total_streams = 0;
    std::size_t total_streams_missing_id = 0;
    std::size_t assigned = 0;
    double coverage_fraction = 1.0;
    std::map<link_method, std::size_t> per_method;  ///< segment counts
    std::vector<linkage_warning> warnings;
};

/// Stream ranges ready for assignment, one unmatched segment each.
std::vector<linkage_result> prepare_streams(std::span<const stream_range> ranges,
                                            const bed_label_map& bed_map,
                                            std::vector<linkage_warning>* warnings = nullptr);

/// Visit/encounter id -> MRN from ADT events (smallest event id wins on conflict).
std::map<std::string, std::string> encounter_index(std::span<const extract::adt_event> events);

/// Device logs as stay intervals on normalized beds; logs whose encounter
/// has no MRN are skipped (reported through `warnings` when given).
std::vector<stay_interval> device_log_stays(std::span<const extract::device_log_record> logs,
                                            const std::map<std::string, std::string>& encounters,
                                            const bed_label_map& bed_map,
                                            std::vector<linkage_warning>* warnings = nullptr);

/// Pass 1. Streams with a lifetime id are marked and left alone; other
/// unmatched segments are matched against device-log stays.
std::vector<linkage_result> assign_pass1_device_logs(
    std::vector<linkage_result> streams, std::span<const extract::device_log_record> device_logs,
    const std::map<std::string, std::string>& encounters, const bed_label_map& bed_map);

/// Pass 2. Still-unmatched segments are matched against sanitized ADT stays;
/// whatever remains stays unmatched.
std::vector<linkage_result> assign_pass2_adt(std::vector<linkage_result> streams,
                                             std::span<const stay_interval> stays);

struct day_linkage {
    std::vector<linkage_result> results;
    linkage_report report;
    std::vector<stay_interval> adt_stays;
};

/// Full per-day linkage. Segments that contain no monitor data are dropped.
/// Never throws for data problems; they surface as report warnings.
day_linkage link_day(const extract::extract_bundle& bundle, const bed_label_map& bed_map);

/// One JSON object per segment, newline separated, in result order.
std::string render_audit_jsonl(std::span<const linkage_result> results);

}  // namespace wavearchive::linkage
