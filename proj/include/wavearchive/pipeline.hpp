/**
 * @file pipeline.hpp
 * @brief Day-at-a-time orchestration with checkpointed, resumable phases
 *
 * A day moves through verify, parse, link, segment, write, deid and
 * publish. The first four are recomputed on every run (they only read the
 * bundle); the last three persist outputs and are skipped when the digest
 * recorded in the day's state file still matches what is on disk.
 */

#pragma once

#include "wavearchive/core/time.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace wavearchive::pipeline {

/**
 * @brief Where everything lives and how to run
 *
 * Loaded from a key=value file; relative paths resolve against the file's
 * directory. `deid_seed` is a reference, `file:<path>` or `env:<NAME>`,
 * never the secret itself.
 */
struct pipeline_config {
    std::filesystem::path extracts_root;
    std::filesystem::path identified_root;
    std::filesystem::path deid_root;
    std::filesystem::path catalog_root;  ///< identified catalog
    std::optional<std::filesystem::path> bed_map;
    std::optional<std::filesystem::path> unit_map;
    std::optional<std::filesystem::path> birthdates;
    /// CSV `mrn,name,visit_id` of known patients, scrubbed from free text.
    std::optional<std::filesystem::path> identity_registry;
    std::string deid_seed;
    int worker_count = 1;
    bool strict_labels = false;

    /// Throws archive_error(config_invalid).
    void validate() const;
    /// Reads the seed through its reference. Throws archive_error(config_invalid).
    [[nodiscard]] std::string resolve_seed() const;

    static pipeline_config parse(std::string_view text, const std::filesystem::path& base_dir);
    static pipeline_config load(const std::filesystem::path& path);
    [[nodiscard]] std::string render() const;
};

enum class phase { verified, parsed, linked, segmented, written, deidentified, published };

inline constexpr int phase_count = 7;

std::string_view to_string(phase p) noexcept;
std::optional<phase> parse_phase(std::string_view text) noexcept;

struct failure_report {
    phase at = phase::verified;
    std::string code;  ///< error code name
    std::string message;

    friend bool operator==(const failure_report&, const failure_report&) = default;
};

/// Persisted at `identified_root/state/day=YYYY-MM-DD/state.json`.
struct day_run_state {
    calendar_day day{};
    std::optional<phase> completed;         ///< last completed phase
    std::map<phase, std::string> digests;   ///< completed phases only
    std::optional<failure_report> failure;

    [[nodiscard]] bool published() const { return completed == phase::published; }

    friend bool operator==(const day_run_state&, const day_run_state&) = default;
};

std::string render_state(const day_run_state& s);
day_run_state parse_state(std::string_view text);

std::filesystem::path state_path(const pipeline_config& c, calendar_day day);
std::filesystem::path log_path(const pipeline_config& c, calendar_day day);
std::filesystem::path quarantine_dir(const pipeline_config& c, calendar_day day);

struct run_options {
    /// Return right after this phase completes, as if the process died at
    /// the boundary.
    std::optional<phase> stop_after;
};

struct day_outcome {
    day_run_state state;
    std::vector<phase> executed;  ///< phases that did work in this run
    std::vector<phase> skipped;   ///< persisted phases reused from disk
    std::size_t studies = 0;
    std::vector<std::string> warnings;
};

/**
 * @brief Runs one day to `published` (or `stop_after`)
 *
 * Data errors do not throw: they end up in `state.failure`, the partial
 * outputs of the failing phase are moved under quarantine_dir() and the
 * state keeps the phases that completed before it. Only an unusable
 * configuration throws.
 */
day_outcome run_day(const pipeline_config& config, calendar_day day, const run_options& options = {});

enum class day_status { published, stopped, failed, missing };

std::string_view to_string(day_status s) noexcept;

struct range_entry {
    calendar_day day{};
    day_status status = day_status::missing;
    std::optional<day_outcome> outcome;
};

struct range_summary {
    std::vector<range_entry> days;  ///< in calendar order

    [[nodiscard]] std::size_t count(day_status s) const;
    /// 0 when every day published (or the range is empty), 1 when none did,
    /// 2 otherwise.
    [[nodiscard]] int exit_code() const;
};

/// Days in [from, to] run independently on up to `parallelism` threads;
/// days without a bundle directory are reported as missing.
range_summary run_range(const pipeline_config& config, calendar_day from, calendar_day to, int parallelism,
                        const run_options& options = {});

std::string render_summary_json(const range_summary& s);
std::string render_outcome_json(const day_outcome& o);

/**
 * @brief Digest of every archive output
 *
 * Covers identified studies and packs, the de-identified tree, the
 * identified catalog and the sealed map; state, logs, quarantine and lock
 * files are excluded. Equal digests mean byte-identical archives.
 */
std::string archive_digest(const pipeline_config& config);

/// Size, SHA-256 and ZIP structure of every pack listed in a catalog whose
/// storage paths are relative to `archive_root`. Empty when all are intact.
std::vector<std::string> verify_packs(const std::filesystem::path& catalog_root,
                                      const std::filesystem::path& archive_root);

/// Linkage audit lines (JSON objects) behind one identified study. Throws
/// archive_error(schema_violation) when the study is not in the catalog.
std::vector<std::string> study_audit(const pipeline_config& config, const std::string& study_id);

}  // namespace wavearchive::pipeline
