/**
 * @file segmentation.cpp
 * @brief Study planning and record distribution
 */

#include "wavearchive/segmentation.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <tuple>

namespace wavearchive::segmentation {

namespace {

using key_type = std::pair<std::string, std::string>;  // (monitor id, device bed)

std::string id_safe(std::string_view text) {
    std::string out(text);
    for (auto& c : out) {
        bool ok = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') ||
                  c == '-';
        if (!ok) c = '-';
    }
    return out;
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    auto q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

extract::wave_block slice(const extract::wave_block& b, std::int64_t lo, std::int64_t hi) {
    extract::wave_block piece;
    piece.monitor_patient_id = b.monitor_patient_id;
    piece.bed_label = b.bed_label;
    piece.wave = b.wave;
    piece.block_start = b.block_start;
    piece.sample_rate = b.sample_rate;
    piece.sample_offset = b.sample_offset + lo;
    piece.samples.assign(b.samples.begin() + lo, b.samples.begin() + hi);
    return piece;
}

/// Local sample index of `t` inside `b`, clamped to [0, size].
std::int64_t local_index(const extract::wave_block& b, timestamp t) {
    auto n = static_cast<std::int64_t>(b.samples.size());
    return std::clamp<std::int64_t>(sample_index_at(b, t) - b.sample_offset, 0, n);
}

/// Index into `list` of the skeleton containing `t`, if any. `list` is
/// sorted by start and non-overlapping.
std::optional<std::size_t> locate(const std::vector<std::size_t>& list,
                                  const std::vector<study>& studies, timestamp t) {
    auto it = std::upper_bound(list.begin(), list.end(), t, [&](timestamp v, std::size_t i) {
        return v < studies[i].range.start;
    });
    if (it == list.begin()) return std::nullopt;
    auto idx = *std::prev(it);
    if (studies[idx].range.contains(t)) return idx;
    return std::nullopt;
}

void add_piece(study& s, extract::wave_block piece) {
    auto it = std::find_if(s.waves.begin(), s.waves.end(),
                           [&](const study_wave& w) { return w.symbol == piece.wave; });
    if (it == s.waves.end()) {
        s.waves.push_back({piece.wave, {}});
        it = std::prev(s.waves.end());
    }
    it->blocks.push_back(std::move(piece));
}

void finish(study& s) {
    std::sort(s.waves.begin(), s.waves.end(),
              [](const study_wave& a, const study_wave& b) { return a.symbol < b.symbol; });
    for (auto& w : s.waves) {
        std::stable_sort(w.blocks.begin(), w.blocks.end(),
                         [](const extract::wave_block& a, const extract::wave_block& b) {
                             return a.sample_time_ms(0) < b.sample_time_ms(0);
                         });
    }
    auto by_time = [](const auto& a, const auto& b) { return a.observed_at < b.observed_at; };
    std::stable_sort(s.numerics.begin(), s.numerics.end(), by_time);
    std::stable_sort(s.enumerations.begin(), s.enumerations.end(), by_time);
    std::stable_sort(s.alerts.begin(), s.alerts.end(),
                     [](const auto& a, const auto& b) { return a.at < b.at; });
}

}  // namespace

std::uint64_t study::sample_count(std::string_view symbol) const {
    std::uint64_t n = 0;
    for (const auto& w : waves) {
        if (w.symbol != symbol) continue;
        for (const auto& b : w.blocks) n += b.samples.size();
    }
    return n;
}

std::uint64_t orphan_report::sample_count(std::string_view symbol) const {
    std::uint64_t n = 0;
    for (const auto& b : wave_pieces) {
        if (b.wave == symbol) n += b.samples.size();
    }
    return n;
}

std::string study_identifier(std::string_view monitor_patient_id, std::string_view bed_label,
                             timestamp start) {
    return id_safe(monitor_patient_id) + "_" + id_safe(bed_label) + "_" + format_compact(start);
}

std::string study_identifier(const study& s) {
    return study_identifier(s.monitor_patient_id, s.bed_label, s.range.start);
}

std::vector<study> plan_studies(std::span<const linkage::linkage_result> linkage, calendar_day day) {
    const auto window = day_window(day);
    std::vector<study> out;
    for (const auto& r : linkage) {
        for (const auto& seg : r.segments) {
            auto range = seg.range.intersect(window);
            if (seg.evidence) range = range.intersect(*seg.evidence);
            if (range.empty()) continue;
            study s;
            s.mrn = seg.mrn;
            s.monitor_patient_id = r.monitor_patient_id;
            s.device_bed_label = r.bed_label;
            s.bed_label = r.emr_bed_label;
            s.range = range;
            s.method = seg.method;
            out.push_back(std::move(s));
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const study& a, const study& b) {
        return std::tie(a.monitor_patient_id, a.device_bed_label, a.range.start) <
               std::tie(b.monitor_patient_id, b.device_bed_label, b.range.start);
    });

    // trim overlaps within one (id, device bed)
    std::vector<study> trimmed;
    for (auto& s : out) {
        if (!trimmed.empty()) {
            const auto& prev = trimmed.back();
            if (prev.monitor_patient_id == s.monitor_patient_id &&
                prev.device_bed_label == s.device_bed_label && s.range.start < prev.range.end) {
                s.range.start = prev.range.end;
                if (s.range.empty()) continue;
            }
        }
        trimmed.push_back(std::move(s));
    }

    std::stable_sort(trimmed.begin(), trimmed.end(), [](const study& a, const study& b) {
        return std::tie(a.monitor_patient_id, a.range.start, a.device_bed_label) <
               std::tie(b.monitor_patient_id, b.range.start, b.device_bed_label);
    });
    std::set<std::string> used;
    for (auto& s : trimmed) {
        auto id = study_identifier(s);
        auto candidate = id;
        for (int n = 2; used.count(candidate); ++n) candidate = id + "-" + std::to_string(n);
        used.insert(candidate);
        s.study_id = candidate;
    }
    return trimmed;
}

std::int64_t sample_index_at(const extract::wave_block& block, timestamp t) {
    auto delta = (t - block.block_start).count();
    return floor_div(delta * block.sample_rate, 1000);
}

std::pair<std::optional<extract::wave_block>, std::optional<extract::wave_block>>
split_block(const extract::wave_block& block, timestamp cut) {
    auto n = static_cast<std::int64_t>(block.samples.size());
    auto k = local_index(block, cut);
    std::pair<std::optional<extract::wave_block>, std::optional<extract::wave_block>> out;
    if (k > 0) out.first = slice(block, 0, k);
    if (k < n) out.second = slice(block, k, n);
    return out;
}

fill_result fill_studies(std::vector<study> skeletons, const extract::extract_bundle& bundle) {
    fill_result out;
    out.studies = std::move(skeletons);
    auto& studies = out.studies;

    std::map<key_type, std::vector<std::size_t>> index;
    for (std::size_t i = 0; i < studies.size(); ++i) {
        index[{studies[i].monitor_patient_id, studies[i].device_bed_label}].push_back(i);
    }
    for (auto& [key, list] : index) {
        std::sort(list.begin(), list.end(), [&](std::size_t a, std::size_t b) {
            return studies[a].range.start < studies[b].range.start;
        });
    }
    auto find = [&](const std::string& id, const std::string& bed,
                    timestamp t) -> std::optional<std::size_t> {
        auto it = index.find({id, bed});
        if (it == index.end()) return std::nullopt;
        return locate(it->second, studies, t);
    };

    for (const auto& r : bundle.numerics) {
        if (auto i = find(r.monitor_patient_id, r.bed_label, r.observed_at)) {
            studies[*i].numerics.push_back(r);
        } else {
            out.orphans.numerics.push_back(r);
        }
    }
    for (const auto& r : bundle.alerts) {
        if (auto i = find(r.monitor_patient_id, r.bed_label, r.at)) {
            studies[*i].alerts.push_back(r);
        } else {
            out.orphans.alerts.push_back(r);
        }
    }
    for (const auto& r : bundle.enumerations) {
        if (auto i = find(r.monitor_patient_id, r.bed_label, r.observed_at)) {
            studies[*i].enumerations.push_back(r);
        } else {
            out.orphans.enumerations.push_back(r);
        }
    }

    for (const auto& b : bundle.wave_samples) {
        auto n = static_cast<std::int64_t>(b.samples.size());
        if (n == 0) continue;
        auto it = index.find({b.monitor_patient_id, b.bed_label});
        std::int64_t cursor = 0;
        if (it != index.end()) {
            for (auto i : it->second) {
                const auto& s = studies[i];
                auto lo = std::max(cursor, local_index(b, s.range.start));
                auto hi = local_index(b, s.range.end);
                if (hi <= lo) continue;
                if (lo > cursor) out.orphans.wave_pieces.push_back(slice(b, cursor, lo));
                add_piece(studies[i], slice(b, lo, hi));
                cursor = hi;
                if (cursor == n) break;
            }
        }
        if (cursor < n) out.orphans.wave_pieces.push_back(slice(b, cursor, n));
    }

    for (auto& s : studies) finish(s);
    return out;
}

study fill_study(study skeleton, const extract::extract_bundle& bundle) {
    std::vector<study> one;
    one.push_back(std::move(skeleton));
    auto result = fill_studies(std::move(one), bundle);
    return std::move(result.studies.front());
}

}  // namespace wavearchive::segmentation
