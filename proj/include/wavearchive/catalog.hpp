/**
 * @file catalog.hpp
 * @brief Day-partitioned research index: study map, study details, manifest
 *
 * Layout under a catalog root:
 *
 *     study_map/<partition>/part.csv
 *     study_details/<partition>/part.csv
 *     waveform_manifest/<partition>/part.csv
 *     linkage_audit/<partition>/part.jsonl   (identified catalog only)
 *
 * where `<partition>` is `day=YYYY-MM-DD` for the identified catalog and
 * `batch=<token>` for the de-identified one.
 */

#pragma once

#include "wavearchive/core/time.hpp"
#include "wavearchive/signal_store.hpp"

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace wavearchive::catalog {

/// Column naming of the patient key.
enum class flavor { identified, deidentified };

struct study_map_row {
    std::string study_id;
    std::string patient;  ///< MRN (identified, may be empty) or pseudo id
    bool lifetime_id_source = false;
    std::string bed;
    std::string clinical_unit;
    timestamp start{};
    timestamp end{};
    std::string storage_path;  ///< zip path relative to the archive root
    std::string linkage_method;

    friend bool operator==(const study_map_row&, const study_map_row&) = default;
};

struct study_detail_row {
    std::string study_id;
    std::string symbol;
    std::string unit;
    int rate = 0;
    std::int64_t n_samples = 0;
    std::string file;
    std::uint64_t size_bytes = 0;

    friend bool operator==(const study_detail_row&, const study_detail_row&) = default;
};

struct manifest_row {
    std::string day;  ///< calendar day, or the batch token when de-identified
    std::string zip;
    std::uint64_t size_bytes = 0;
    std::string sha256;

    friend bool operator==(const manifest_row&, const manifest_row&) = default;
};

/// Bed -> clinical unit; beds not listed map to "Unknown".
struct unit_map {
    std::map<std::string, std::string> units;

    [[nodiscard]] std::string unit_for(const std::string& bed) const;
    /// CSV `bed,unit`.
    static unit_map load(const std::filesystem::path& path);
};

inline constexpr std::string_view unknown_unit = "Unknown";

/// One written and packed study, ready to index.
struct packed_study {
    signal_store::study_details details;
    std::string storage_path;
    std::optional<signal_store::pack_result> pack;
};

struct partition {
    std::string name;  ///< `day=...` or `batch=...`
    std::string day_value;  ///< value of the manifest `day` column
    std::vector<study_map_row> study_map;
    std::vector<study_detail_row> details;
    std::vector<manifest_row> manifest;
    std::string audit_jsonl;
};

std::string day_partition(calendar_day day);

/**
 * @brief Builds the rows for one partition
 *
 * Rows are ordered by study id (details additionally by symbol). Throws
 * archive_error(partial_day) when any study lacks a pack whose file exists.
 */
partition build_partition(std::string name, std::string day_value, std::span<const packed_study> studies,
                          const unit_map& units, std::string audit_jsonl = {});

std::string render_study_map(std::span<const study_map_row> rows, flavor f);
std::string render_details(std::span<const study_detail_row> rows);
std::string render_manifest(std::span<const manifest_row> rows);

/**
 * @brief Writes a partition, replacing any earlier copy of it
 *
 * Each table directory is staged and swapped into place under a lock file
 * `<root>/.locks/<partition>.lock`. Publishing the same partition twice
 * yields identical bytes. Empty partitions still get header-only files.
 */
void publish_partition(const std::filesystem::path& root, const partition& p, flavor f);

/// Every partition of every table, concatenated in partition order.
struct catalog_data {
    std::vector<std::string> partitions;
    std::map<std::string, std::vector<study_map_row>> study_map;  ///< by partition
    std::vector<study_detail_row> details;
    std::vector<manifest_row> manifest;

    [[nodiscard]] std::vector<study_map_row> all_studies() const;
};

/// Throws archive_error(schema_violation) on malformed tables. A missing
/// root yields an empty catalog.
catalog_data load_catalog(const std::filesystem::path& root);

/// Orphan detail rows, manifest rows without exactly one study and
/// duplicated study ids. Empty when the catalog is consistent.
std::vector<std::string> integrity_problems(const catalog_data& c);

struct study_filter {
    std::vector<std::string> patients;
    std::vector<std::string> beds;
    std::vector<std::string> units;
    std::vector<std::string> wave_symbols;
    std::optional<time_range> range;
};

/**
 * @brief Conjunctive filter over the study map
 *
 * Each non-empty list matches any of its values; a study matches `range`
 * when it overlaps it. Wave symbols join through the details and all listed
 * symbols must be present. Results are ordered by start then study id.
 * Throws archive_error(unknown_wave_symbol) for a symbol outside the registry.
 */
std::vector<study_map_row> query_studies(const catalog_data& c, const study_filter& filter);

// =============================================================================
// Statistics
// =============================================================================

enum class age_group { neonate, infant, years_1_4, years_5_9, years_10_14, years_15_plus };
inline constexpr std::size_t age_group_count = 6;

std::string_view to_string(age_group g) noexcept;

/// Neonate up to 28 days of age, infant until the first birthday, then whole
/// years of age.
age_group age_group_at(calendar_day birth, calendar_day on);

struct wave_stats {
    std::string symbol;
    std::string unit;
    int rate = 0;
    std::uint64_t patients = 0;
    std::uint64_t studies = 0;
    std::uint64_t size_bytes = 0;

    friend bool operator==(const wave_stats&, const wave_stats&) = default;
};

struct cell {
    std::uint64_t patients = 0;
    std::uint64_t studies = 0;

    friend bool operator==(const cell&, const cell&) = default;
};

struct archive_stats {
    std::uint64_t days = 0;
    std::uint64_t studies = 0;
    std::uint64_t patients = 0;  ///< distinct non-empty patient keys
    std::uint64_t size_bytes = 0;  ///< sum of signal file sizes
    double avg_daily_studies = 0;
    double avg_daily_patients = 0;
    double avg_daily_size_bytes = 0;
    std::vector<wave_stats> per_wave;  ///< registry order
    std::map<std::string, std::array<cell, age_group_count>> unit_by_age;

    friend bool operator==(const archive_stats&, const archive_stats&) = default;
};

/// `birthdates` maps patient keys to birth days; when empty, the age matrix
/// is left empty. Patients without a birth date are left out of it.
archive_stats summarize(const catalog_data& c, const std::map<std::string, calendar_day>& birthdates = {});

/// CSV `mrn,birth_date`.
std::map<std::string, calendar_day> load_birthdates(const std::filesystem::path& path);

std::string render_stats_json(const archive_stats& s);
std::string render_stats_text(const archive_stats& s);

}  // namespace wavearchive::catalog
