/**
 * @file extract_model.hpp
 * @brief Daily extract bundles: on-disk schema, integrity verification, parsing
 *
 * A bundle is one UTC calendar day of monitor and EMR data laid out as
 *
 *     extracts/YYYY-MM-DD/
 *         manifest.csv      file_name,created_at,size_bytes,sha256
 *         numerics.csv      monitor_patient_id,lifetime_id,bed_label,observed_at,metric,value,unit
 *         wave_samples.csv  monitor_patient_id,bed_label,wave,block_start,sample_rate,samples
 *         enumerations.csv  monitor_patient_id,bed_label,observed_at,label,value
 *         alerts.csv        monitor_patient_id,bed_label,at,severity,text
 *         device_logs.csv   encounter_id,bed_label,attach_at,detach_at
 *         adt_events.csv    event_id,patient_name,mrn,visit_id,event,bed,at
 *         counts.csv        table,rows            (optional)
 *         manifest.csv.sha256  `sha256sum` line for manifest.csv
 *
 * `samples` is a semicolon-separated list of decimals in one quoted field.
 * Empty `attach_at` / `detach_at` mean the device association was already
 * open at day start / still open at day end.
 */

#pragma once

#include "wavearchive/core/time.hpp"
#include "wavearchive/wave_registry.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace wavearchive::extract {

enum class table_kind { numerics, wave_samples, enumerations, alerts, device_logs, adt_events };

inline constexpr std::array<table_kind, 6> all_tables{
    table_kind::numerics,    table_kind::wave_samples, table_kind::enumerations,
    table_kind::alerts,      table_kind::device_logs,  table_kind::adt_events};

std::string_view table_name(table_kind t) noexcept;
std::string_view table_file(table_kind t) noexcept;
std::optional<table_kind> table_from_name(std::string_view name) noexcept;
/// Header row for a table's CSV file.
const std::vector<std::string>& table_header(table_kind t);

inline constexpr std::string_view manifest_file = "manifest.csv";
inline constexpr std::string_view counts_file = "counts.csv";
/// `sha256sum` line covering manifest.csv itself.
inline constexpr std::string_view manifest_digest_file = "manifest.csv.sha256";

struct manifest_entry {
    std::string file_name;
    timestamp created_at{};
    std::uint64_t size_bytes = 0;
    std::string sha256;
};

enum class metric_kind { hr, spo2, bp_sys, bp_dia, rr, other };

struct metric {
    metric_kind kind = metric_kind::other;
    std::string label;  ///< canonical text: HR, SpO2, BP_SYS, BP_DIA, RR or free text

    static metric parse(std::string_view text);
    friend bool operator==(const metric&, const metric&) = default;
};

struct numeric_record {
    std::string monitor_patient_id;
    std::string lifetime_id;  ///< empty when the monitor has no MRN for the patient
    std::string bed_label;
    timestamp observed_at{};
    metric name;
    double value = 0;
    std::string unit;

    friend bool operator==(const numeric_record&, const numeric_record&) = default;
};

/**
 * @brief Fixed-rate block of samples in physical units
 *
 * Sample `i` is taken at block_start + (sample_offset + i) / rate. Parsed
 * blocks have sample_offset 0; pieces produced by splitting keep the origin
 * block_start and advance the offset so sample times stay exact.
 */
struct wave_block {
    std::string monitor_patient_id;
    std::string bed_label;
    std::string wave;  ///< registry symbol
    timestamp block_start{};
    int sample_rate = 0;
    std::int64_t sample_offset = 0;
    std::vector<double> samples;

    /// Time of sample `i` in fractional epoch milliseconds.
    [[nodiscard]] double sample_time_ms(std::int64_t i) const {
        return static_cast<double>(to_epoch_ms(block_start)) +
               static_cast<double>(sample_offset + i) * 1000.0 / sample_rate;
    }
    [[nodiscard]] timestamp first_time() const;
    /// Exclusive end, rounded up to the next millisecond.
    [[nodiscard]] timestamp end_time() const;

    friend bool operator==(const wave_block&, const wave_block&) = default;
};

struct enumeration_record {
    std::string monitor_patient_id;
    std::string bed_label;
    timestamp observed_at{};
    std::string label;
    std::string value;

    friend bool operator==(const enumeration_record&, const enumeration_record&) = default;
};

enum class alert_severity { red, yellow, technical };

std::string_view to_string(alert_severity s) noexcept;

struct alert_record {
    std::string monitor_patient_id;
    std::string bed_label;
    timestamp at{};
    alert_severity severity = alert_severity::technical;
    std::string text;

    friend bool operator==(const alert_record&, const alert_record&) = default;
};

struct device_log_record {
    std::string encounter_id;
    std::string bed_label;
    timestamp attach_at{};
    timestamp detach_at{};
    bool open_attach = false;  ///< attach_at was empty; resolved to day start
    bool open_detach = false;  ///< detach_at was empty; resolved to day end

    friend bool operator==(const device_log_record&, const device_log_record&) = default;
};

enum class adt_event_kind { admission, discharge, transfer_in, transfer_out };

std::string_view to_string(adt_event_kind k) noexcept;
std::optional<adt_event_kind> parse_adt_event_kind(std::string_view text) noexcept;

/// Admission and TransferIn open a bed stay; Discharge and TransferOut close it.
inline bool opens_stay(adt_event_kind k) noexcept {
    return k == adt_event_kind::admission || k == adt_event_kind::transfer_in;
}

struct adt_event {
    std::int64_t event_id = 0;
    std::string patient_name;
    std::string mrn;
    std::string visit_id;
    adt_event_kind event = adt_event_kind::admission;
    std::string bed;
    timestamp at{};

    friend bool operator==(const adt_event&, const adt_event&) = default;
};

struct monitor_patient_stream {
    std::string monitor_patient_id;
    std::optional<std::string> lifetime_id;
    std::string bed_label;
    timestamp first_seen{};
    timestamp last_seen{};
};

struct extract_bundle {
    calendar_day day{};
    std::vector<manifest_entry> manifest;
    std::vector<numeric_record> numerics;
    std::vector<wave_block> wave_samples;
    std::vector<enumeration_record> enumerations;
    std::vector<alert_record> alerts;
    std::vector<device_log_record> device_logs;
    std::vector<adt_event> adt_events;
    std::optional<std::map<table_kind, std::uint64_t>> declared_counts;

    [[nodiscard]] time_range window() const { return day_window(day); }
    [[nodiscard]] std::uint64_t row_count(table_kind t) const;
};

/// Integrity failure classes reported by verify_bundle.
enum class integrity_issue { malformed_manifest, missing, extra, size, checksum, layout };

std::string_view to_string(integrity_issue i) noexcept;

struct integrity_failure {
    integrity_issue issue = integrity_issue::missing;
    std::string file_name;
    std::string detail;
};

struct verified_bundle {
    std::filesystem::path directory;
    calendar_day day{};
    std::vector<manifest_entry> manifest;
};

using verify_outcome = std::variant<verified_bundle, integrity_failure>;

struct count_entry {
    table_kind table = table_kind::numerics;
    std::optional<std::uint64_t> declared;  ///< nullopt when no counts file
    std::uint64_t actual = 0;
    std::optional<bool> match;              ///< nullopt when declared is unknown
};

struct count_report {
    std::vector<count_entry> entries;
    std::optional<bool> ok;  ///< nullopt = indeterminate
};

/// Throws archive_error(malformed_manifest).
std::vector<manifest_entry> parse_manifest(const std::filesystem::path& path);

/// Size and SHA-256 of every listed file, plus missing and unlisted files.
/// The bundle directory name must be the day (`YYYY-MM-DD`).
verify_outcome verify_bundle(const std::filesystem::path& bundle_dir);

/// Throws archive_error(schema_violation | out_of_day_timestamp).
extract_bundle parse_extract_day(const verified_bundle& bundle);

count_report validate_row_counts(const extract_bundle& bundle);

/// Serializes a table back to its CSV form (header included).
std::string render_table(const extract_bundle& bundle, table_kind t);

/// Writes `manifest.csv` for the given files inside `bundle_dir`, plus its
/// digest file.
void write_manifest(const std::filesystem::path& bundle_dir,
                    const std::vector<std::string>& file_names, timestamp created_at);

/// Writes every table of `bundle` plus manifest.csv (and counts.csv when
/// `with_counts`) into `bundle_dir`, which is created.
void write_bundle(const extract_bundle& bundle, const std::filesystem::path& bundle_dir,
                  timestamp created_at, bool with_counts = true);

std::string format_decimal(double value);

}  // namespace wavearchive::extract
