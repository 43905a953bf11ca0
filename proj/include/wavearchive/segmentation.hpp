/**
 * @file segmentation.hpp
 * @brief Cuts linked stream segments into studies and distributes records
 *
 * A study is one patient segment in one bed inside one UTC day. Its range is
 * the linked segment clipped to the day window, so transfers (bed changes),
 * MRN changes and midnights all start a new study. Records are assigned by
 * (monitor patient id, device bed, timestamp in [start, end)).
 */

#pragma once

#include "wavearchive/extract_model.hpp"
#include "wavearchive/linkage.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace wavearchive::segmentation {

inline constexpr millis max_study_length{std::chrono::hours{24}};

struct study_wave {
    std::string symbol;
    std::vector<extract::wave_block> blocks;  ///< sorted by first sample time
};

struct study {
    std::string study_id;
    std::optional<std::string> mrn;
    std::string monitor_patient_id;
    std::string device_bed_label;
    std::string bed_label;  ///< EMR-normalized
    time_range range;
    linkage::link_method method = linkage::link_method::unmatched;
    std::vector<study_wave> waves;  ///< sorted by symbol, no empty entries
    std::vector<extract::numeric_record> numerics;
    std::vector<extract::alert_record> alerts;
    std::vector<extract::enumeration_record> enumerations;

    [[nodiscard]] std::uint64_t sample_count(std::string_view symbol) const;
};

struct orphan_report {
    std::vector<extract::numeric_record> numerics;
    std::vector<extract::wave_block> wave_pieces;
    std::vector<extract::alert_record> alerts;
    std::vector<extract::enumeration_record> enumerations;

    [[nodiscard]] bool empty() const noexcept {
        return numerics.empty() && wave_pieces.empty() && alerts.empty() && enumerations.empty();
    }
    [[nodiscard]] std::uint64_t sample_count(std::string_view symbol) const;
};

struct fill_result {
    std::vector<study> studies;
    orphan_report orphans;
};

/// `<monitor_patient_id>_<bed>_<YYYYMMDDThhmmssZ>`; characters outside
/// `[A-Za-z0-9-]` in the id and bed are replaced by `-`.
std::string study_identifier(std::string_view monitor_patient_id, std::string_view bed_label,
                             timestamp start);
std::string study_identifier(const study& s);

/**
 * @brief One empty study per linked segment, clipped to the day window
 *
 * Segments evidenced by an EMR interval are additionally clamped to it.
 * Overlapping skeletons on the same (id, device bed) are trimmed so every
 * instant maps to at most one of them. Output is ordered by (id, start).
 */
std::vector<study> plan_studies(std::span<const linkage::linkage_result> linkage, calendar_day day);

/// Global sample index (origin = block_start) of instant `t`:
/// floor((t - block_start) * rate / 1s). Sub-sample instants round down.
std::int64_t sample_index_at(const extract::wave_block& block, timestamp t);

/// Splits a block at `cut`: samples whose global index is below
/// sample_index_at(cut) go to the first part. Either part may be absent when empty.
std::pair<std::optional<extract::wave_block>, std::optional<extract::wave_block>>
split_block(const extract::wave_block& block, timestamp cut);

/// Assigns every record of the bundle to exactly one skeleton or the
/// orphan report.
fill_result fill_studies(std::vector<study> skeletons, const extract::extract_bundle& bundle);

/// Fills a single skeleton, ignoring records that fall outside it.
study fill_study(study skeleton, const extract::extract_bundle& bundle);

}  // namespace wavearchive::segmentation
