/**
 * @file signal_store.hpp
 * @brief Study folders: WFDB format-16 records, CSV sidecars, deterministic zips
 *
 * Each wave of a study becomes one single-signal record
 * `<study_id>_<symbol>.hea` + `.dat`. The `.dat` file holds little-endian
 * 16-bit samples on a uniform grid from the first to the last sample of
 * the wave; grid slots without data hold the INVALID value.
 *
 * Header layout:
 *
 *     <record> 1 <rate> <n_samples> <HH:MM:SS.mmm> <DD/MM/YYYY>
 *     <file> 16 <gain>(<baseline>)/<unit> 16 0 <first> <checksum> 0 <description>
 *     # span_ms <n_samples * 1000 / rate, rounded>
 */

#pragma once

#include "wavearchive/core/time.hpp"
#include "wavearchive/segmentation.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace wavearchive::signal_store {

inline constexpr std::int16_t invalid_sample = -32768;
inline constexpr std::int16_t adu_limit = 32000;

struct quantization {
    double gain = 200;          ///< ADC units per physical unit
    std::int64_t baseline = 0;  ///< ADC value of physical zero
    std::string gain_text;      ///< exact text written to the header

    [[nodiscard]] std::int16_t quantize(double x) const;
    [[nodiscard]] double dequantize(std::int16_t adu) const {
        return (static_cast<double>(adu) - static_cast<double>(baseline)) / gain;
    }
};

/// Maps [min, max] of the finite samples onto about [-30000, 30000]. The gain
/// is rounded down to 6 significant digits; a constant signal gets gain 200.
/// Throws archive_error(no_finite_samples).
quantization choose_quantization(std::span<const double> samples);

/// 16-bit two's-complement sum.
std::int16_t checksum16(std::span<const std::int16_t> samples) noexcept;

struct signal_record {
    std::string record_name;
    std::string symbol;
    std::string description;
    std::string unit;
    int rate = 0;
    std::int64_t n_samples = 0;
    timestamp base_time{};
    quantization quant;
    std::int16_t first_value = 0;
    std::int16_t checksum = 0;
    std::int64_t span_ms = 0;
    std::string dat_file;  ///< file name, relative to the header
};

std::string render_header(const signal_record& rec);
/// Throws archive_error(header_parse_error).
signal_record parse_header(std::string_view text);

/**
 * @brief Writes one wave's record into `out_dir`
 *
 * Blocks must share one wave symbol and not overlap on the sample grid.
 * Returns nullopt (and writes nothing) for an empty block list. Throws
 * archive_error(overlapping_blocks | no_finite_samples | unwritable_output).
 */
std::optional<signal_record> write_record(const std::string& study_id, const std::string& symbol,
                                          std::span<const extract::wave_block> blocks,
                                          const std::filesystem::path& out_dir);

struct record_data {
    signal_record header;
    std::vector<std::int16_t> adu;
    std::vector<double> values;  ///< NaN where gap[i]
    std::vector<bool> gap;
};

/// Reads and validates a record. Throws archive_error(header_parse_error |
/// length_mismatch | checksum_mismatch | duration_mismatch | io_error).
record_data read_record(const std::filesystem::path& hea_path);

/// The checks of read_record without decoding samples; returns the header.
signal_record verify_record(const std::filesystem::path& hea_path);

// =============================================================================
// Study folders
// =============================================================================

inline constexpr std::string_view details_file = "study_details.json";
inline constexpr std::string_view numerics_file = "numerics.csv";
inline constexpr std::string_view alerts_file = "alerts.csv";
inline constexpr std::string_view enumerations_file = "enumerations.csv";

struct wave_entry {
    std::string symbol;
    std::string unit;
    int rate = 0;
    std::int64_t n_samples = 0;
    std::string file;  ///< header file name
    std::uint64_t size_bytes = 0;  ///< size of the .dat file

    friend bool operator==(const wave_entry&, const wave_entry&) = default;
};

struct study_details {
    std::string study_id;
    bool mrn_present = false;
    std::string bed;
    timestamp start{};
    timestamp end{};
    std::vector<wave_entry> waves;
    std::uint64_t numerics_rows = 0;
    std::uint64_t alert_rows = 0;
    std::uint64_t enumeration_rows = 0;
    std::string linkage_method;
    std::optional<std::string> mrn;                 ///< identified only
    std::optional<std::string> monitor_patient_id;  ///< identified only
    std::optional<std::string> pseudo_id;           ///< de-identified only
    bool deidentified = false;

    friend bool operator==(const study_details&, const study_details&) = default;
};

std::string render_details(const study_details& d);
/// Throws archive_error(incomplete_study) on a missing or malformed file.
study_details parse_details(std::string_view text);
study_details read_details(const std::filesystem::path& study_dir);

/// Sidecar tables; identity lives only in study_details.json.
std::string render_numerics(std::span<const extract::numeric_record> rows);
std::string render_alerts(std::span<const extract::alert_record> rows);
std::string render_enumerations(std::span<const extract::enumeration_record> rows);

/// Writes the full folder for a filled study into `study_dir` (created).
study_details write_study(const segmentation::study& s, const std::filesystem::path& study_dir);

struct pack_result {
    std::filesystem::path path;
    std::uint64_t size_bytes = 0;
    std::string sha256;
};

/// Zips `study_dir` as `<dir name>/<file>` entries into `zip_path`.
/// Throws archive_error(incomplete_study) when study_details.json is absent.
pack_result pack_study(const std::filesystem::path& study_dir, const std::filesystem::path& zip_path);

}  // namespace wavearchive::signal_store
