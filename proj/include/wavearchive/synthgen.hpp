/**
 * @file synthgen.hpp
 * @brief Seeded synthetic extract bundles with ground truth
 *
 * A day is a pure function of (config, day). Patients occupy ward beds for
 * a few hours, some move beds mid-stay, and some pass through an OR whose
 * monitor reuses one patient id for everybody that day. Half of the monitor
 * streams (by default) carry no lifetime id; for those the generator emits
 * device logs and ADT events with configurable gaps and timing noise.
 */

#pragma once

#include "wavearchive/catalog.hpp"
#include "wavearchive/core/time.hpp"
#include "wavearchive/extract_model.hpp"
#include "wavearchive/linkage.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace wavearchive::synthgen {

/**
 * @brief Generator parameters
 *
 * Rates are per stay unless noted. `profile` selects the starting values
 * (`default`, `paper` or `clean`); explicit keys override them.
 */
struct scenario_config {
    std::string profile = "default";
    std::uint64_t seed = 1;
    calendar_day start_day = parse_day("2021-03-01");
    int days = 1;
    int patients_per_day = 20;
    std::vector<std::string> beds;     ///< device-side ward bed labels
    std::vector<std::string> or_beds;  ///< shared-stream rooms
    std::vector<std::string> waves;    ///< registry symbols to draw from
    int waves_per_patient = 3;

    double transfer_rate = 0;
    double missing_lifetime_id_fraction = 0.5;  ///< per patient
    double or_shared_stream_fraction = 0;       ///< per patient
    double device_log_rate = 0;  ///< streams without a lifetime id only
    double adt_missing_rate = 0;
    double adt_jitter_minutes = 0;
    double wrong_bed_rate = 0;
    double zero_length_pair_rate = 0;
    double duplicate_rate = 0;
    double readmit_chain_rate = 0;
    double gap_rate = 0;                ///< per wave block
    double alert_identifier_rate = 0;  ///< per alert

    int numeric_interval_seconds = 60;
    int enumeration_interval_minutes = 15;
    int wave_interval_minutes = 30;
    int wave_block_seconds = 8;

    /// Throws archive_error(config_invalid).
    void validate() const;

    /// Throws archive_error(config_invalid) for an unknown name.
    static scenario_config for_profile(std::string_view name);
    /// Parses the key=value grammar, starting from `profile` (if given).
    static scenario_config parse(std::string_view text);
    static scenario_config load(const std::filesystem::path& path);
    [[nodiscard]] std::string render() const;

    [[nodiscard]] std::vector<calendar_day> day_list() const;
};

struct truth_patient {
    std::string mrn;
    std::string name;
    std::string visit_id;
    calendar_day birth_date{};
    bool lifetime_id = false;
};

/// Data of one patient in one monitor stream and bed.
struct truth_segment {
    std::string monitor_patient_id;
    std::string bed_label;      ///< device-side
    std::string emr_bed_label;
    std::string mrn;
    bool lifetime_id = false;
    time_range range;  ///< hull of every monitor row, as the linker measures it
    std::map<std::string, std::int64_t> wave_samples;  ///< record length per symbol
};

struct ground_truth {
    calendar_day day{};
    std::uint64_t seed = 0;
    std::vector<truth_patient> patients;
    std::vector<truth_segment> segments;
    std::map<extract::table_kind, std::uint64_t> row_counts;
};

struct generated_day {
    extract::extract_bundle bundle;
    ground_truth truth;
};

/// Throws archive_error(config_invalid).
generated_day generate_day(const scenario_config& config, calendar_day day);

/// Bundle into `extracts_root/YYYY-MM-DD/`, truth into
/// `extracts_root/YYYY-MM-DD.truth.json`.
void write_day(const generated_day& g, const std::filesystem::path& extracts_root);

std::filesystem::path truth_path(const std::filesystem::path& extracts_root, calendar_day day);
std::string render_truth(const ground_truth& t);
ground_truth parse_truth(std::string_view text);
ground_truth read_truth(const std::filesystem::path& path);

/// EMR bed -> clinical unit for the configured beds.
catalog::unit_map unit_map_for(const scenario_config& config);
std::string render_unit_map(const catalog::unit_map& units);
/// CSV `mrn,birth_date` over all patients of the given days.
std::string render_birthdates(std::span<const ground_truth> days);
/// CSV `mrn,name,visit_id` over all patients of the given days.
std::string render_identity_registry(std::span<const ground_truth> days);

/**
 * @brief Every configured day plus the side files a pipeline run needs
 *
 * Bundles and truth go to `root/extracts`; `units.csv`, `birthdates.csv`
 * and `patients.csv` go to `root`. Returns the truth of each day in order.
 */
std::vector<ground_truth> write_corpus(const scenario_config& config, const std::filesystem::path& root);

/**
 * @brief Catalog statistics implied by the truth
 *
 * Assumes every segment becomes one study under its true MRN, so it is an
 * exact expectation only when linkage is perfect (for example the `clean`
 * profile). The age matrix is filled when `units` is given.
 */
catalog::archive_stats expected_stats(std::span<const ground_truth> days,
                                      const catalog::unit_map* units = nullptr);

struct linkage_score {
    std::size_t missing_id_streams = 0;
    std::size_t assigned_streams = 0;
    std::size_t assigned_segments = 0;
    std::size_t correct_segments = 0;
    double coverage = 0;              ///< assigned / missing-id streams
    std::optional<double> accuracy;   ///< correct / assigned segments; none when nothing was assigned
};

/// A segment is correct when its MRN is the one holding the largest share of
/// the segment's time in the truth for that stream.
linkage_score score_linkage(std::span<const linkage::linkage_result> results, const ground_truth& truth);

/// Linkage results that assign every truth segment to its true MRN.
std::vector<linkage::linkage_result> oracle_linkage(const ground_truth& truth);

}  // namespace wavearchive::synthgen
