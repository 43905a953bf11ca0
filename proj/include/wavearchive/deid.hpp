/**
 * @file deid.hpp
 * @brief Pseudonyms, per-patient date shifts and de-identified study copies
 *
 * Every MRN maps to an opaque pseudo id and a whole-day shift in [30, 365],
 * both keyed derivations of a secret seed. Studies without an MRN use a
 * token derived from the monitor patient id instead. All timestamps of a
 * patient move back by the same number of days, so time of day and the
 * spacing between that patient's studies are preserved.
 */

#pragma once

#include "wavearchive/core/time.hpp"
#include "wavearchive/extract_model.hpp"
#include "wavearchive/signal_store.hpp"

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace wavearchive::deid {

inline constexpr int min_shift_days = 30;
inline constexpr int max_shift_days = 365;

/// Keyed, uniform over [30, 365]. Throws archive_error(config_invalid) on
/// an empty mrn or seed.
int derive_shift(std::string_view mrn, std::string_view seed);

/// `P` followed by 24 lowercase hex characters.
std::string derive_pseudo_id(std::string_view mrn, std::string_view seed);

struct identity {
    std::string pseudo_id;
    int shift_days = 0;

    friend bool operator==(const identity&, const identity&) = default;
};

/// Pseudonym for a study without an MRN: `U` + 24 hex characters of a
/// keyed hash of the monitor patient id, with the shift derived from it.
identity unmatched_identity(std::string_view monitor_patient_id, std::string_view seed);

/**
 * @brief MRN -> (pseudo id, shift) table
 *
 * Persisted as `deid_map.csv.enc`: the CSV `mrn,pseudo_id,shift_days`
 * sorted by MRN, sealed with AES-256-GCM under the seed.
 */
class deid_map {
public:
    /// Returns the entry for `mrn`, deriving and adding it when absent.
    /// Throws archive_error(config_invalid) if the derived pseudo id is
    /// already used by another MRN.
    const identity& ensure(const std::string& mrn, std::string_view seed);

    /// Throws archive_error(map_missing_entry).
    [[nodiscard]] const identity& at(const std::string& mrn) const;
    [[nodiscard]] bool contains(const std::string& mrn) const { return entries_.count(mrn) > 0; }
    [[nodiscard]] std::size_t size() const noexcept { return entries_.size(); }
    [[nodiscard]] const std::map<std::string, identity>& entries() const noexcept { return entries_; }

    [[nodiscard]] std::string to_csv() const;
    static deid_map from_csv(std::string_view text);

    /// Reads the sealed map; a missing file yields an empty map.
    static deid_map load(const std::filesystem::path& path, std::string_view seed);
    void save(const std::filesystem::path& path, std::string_view seed) const;

    /// Under a lock on `path`: load, add entries for `mrns`, save. Returns
    /// the merged map.
    static deid_map update(const std::filesystem::path& path, std::string_view seed,
                           std::span<const std::string> mrns);

private:
    std::map<std::string, identity> entries_;
};

inline constexpr std::string_view map_file_name = "deid_map.csv.enc";

/// Opaque partition name replacing `day=YYYY-MM-DD` in de-identified paths.
std::string batch_token(calendar_day day, std::string_view seed);

/**
 * @brief Identifying strings to remove from free text
 *
 * Names (full and each part of 3+ characters) are removed as whole words,
 * MRNs and visit ids wherever they occur; matching ignores case.
 */
class scrub_list {
public:
    void add_name(std::string_view name);
    void add_identifier(std::string_view id);
    /// Names, MRNs and visit ids of every ADT event.
    static scrub_list from_events(std::span<const extract::adt_event> events);

    [[nodiscard]] std::string apply(std::string_view text) const;
    [[nodiscard]] const std::vector<std::string>& names() const noexcept { return names_; }
    [[nodiscard]] const std::vector<std::string>& identifiers() const noexcept { return ids_; }

private:
    std::vector<std::string> names_;
    std::vector<std::string> ids_;
};

inline constexpr std::string_view redaction = "[REDACTED]";

/// `<pseudo_id>_<bed>_<shifted start>`.
std::string deid_study_id(const identity& who, std::string_view bed, timestamp start);

/**
 * @brief Writes the de-identified copy of one identified study folder
 *
 * The copy lands in `dest_parent/<deid study id>`. Signal files are
 * validated, renamed and their header base time shifted; sidecars are
 * shifted and scrubbed; identity fields in study_details.json are replaced
 * by the pseudo id. A folder that is already de-identified is copied
 * unchanged. Throws archive_error(map_missing_entry) when the study's MRN
 * is not in `map`.
 */
signal_store::study_details deidentify_study(const std::filesystem::path& study_dir,
                                             const std::filesystem::path& dest_parent,
                                             const deid_map& map, std::string_view seed,
                                             const scrub_list& scrub);

}  // namespace wavearchive::deid
