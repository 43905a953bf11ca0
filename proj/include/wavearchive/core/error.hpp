/**
 * @file error.hpp
 * @brief Error codes and the exception type shared by every pipeline stage
 */

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace wavearchive {

enum class error_code {
    io_error,
    malformed_manifest,
    schema_violation,
    out_of_day_timestamp,
    ambiguous_label,
    no_finite_samples,
    overlapping_blocks,
    unwritable_output,
    checksum_mismatch,
    header_parse_error,
    length_mismatch,
    duration_mismatch,
    incomplete_study,
    map_missing_entry,
    partial_day,
    unknown_wave_symbol,
    config_invalid,
    zip_format_error,
};

constexpr std::string_view to_string(error_code code) noexcept {
    switch (code) {
        case error_code::io_error: return "IoError";
        case error_code::malformed_manifest: return "MalformedManifest";
        case error_code::schema_violation: return "SchemaViolation";
        case error_code::out_of_day_timestamp: return "OutOfDayTimestamp";
        case error_code::ambiguous_label: return "AmbiguousLabel";
        case error_code::no_finite_samples: return "NoFiniteSamples";
        case error_code::overlapping_blocks: return "OverlappingBlocks";
        case error_code::unwritable_output: return "UnwritableOutput";
        case error_code::checksum_mismatch: return "ChecksumMismatch";
        case error_code::header_parse_error: return "HeaderParseError";
        case error_code::length_mismatch: return "LengthMismatch";
        case error_code::duration_mismatch: return "DurationMismatch";
        case error_code::incomplete_study: return "IncompleteStudy";
        case error_code::map_missing_entry: return "MapMissingEntry";
        case error_code::partial_day: return "PartialDay";
        case error_code::unknown_wave_symbol: return "UnknownWaveSymbol";
        case error_code::config_invalid: return "ConfigInvalid";
        case error_code::zip_format_error: return "ZipFormatError";
    }
    return "Unknown";
}

/**
 * @brief Exception carrying a machine-readable code plus context text
 */
class archive_error : public std::runtime_error {
public:
    archive_error(error_code code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message),
          code_(code) {}

    [[nodiscard]] error_code code() const noexcept { return code_; }

private:
    error_code code_;
};

}  // namespace wavearchive
