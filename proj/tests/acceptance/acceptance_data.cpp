/**
 * @file acceptance_data.cpp
 * @brief Criteria 1-6: sanitization, labels, linkage, segmentation, signals, integrity
 */

#include "acceptance.hpp"

#include "wavearchive/core/error.hpp"
#include "wavearchive/core/fs.hpp"
#include "wavearchive/core/rng.hpp"
#include "wavearchive/extract_model.hpp"
#include "wavearchive/linkage.hpp"
#include "wavearchive/pipeline.hpp"
#include "wavearchive/segmentation.hpp"
#include "wavearchive/signal_store.hpp"
#include "wavearchive/synthgen.hpp"
#include "wavearchive/wave_registry.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <tuple>

namespace wavearchive::acceptance {

namespace stdfs = std::filesystem;
using extract::adt_event;
using extract::adt_event_kind;

namespace {

timestamp ts(const char* text) { return parse_timestamp(text); }

std::string fixed(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

stdfs::path fresh_dir(const std::string& name) {
    auto p = work_root() / name;
    stdfs::remove_all(p);
    stdfs::create_directories(p);
    return p;
}

}  // namespace

// =============================================================================
// 1. ADT goldens
// =============================================================================

verdict check_adt_goldens() {
    auto ev = [](std::int64_t id, adt_event_kind kind, const char* bed, const char* at) {
        return adt_event{id, "John Doe", "MRN1", "1", kind, bed, ts(at)};
    };
    findings f;

    std::vector<adt_event> zero_length{
        ev(1, adt_event_kind::transfer_in, "B09", "2019-03-02T04:19:00Z"),
        ev(2, adt_event_kind::transfer_out, "B09", "2019-03-02T04:19:00Z"),
    };
    auto a = linkage::sanitize_adt(zero_length);
    f.check(a.stays.empty(), "zero-length pair produced " + std::to_string(a.stays.size()) + " stay(s)");

    std::vector<adt_event> duplicates{
        ev(1, adt_event_kind::admission, "A17", "2020-08-23T11:29:00Z"),
        ev(2, adt_event_kind::admission, "A17", "2020-08-23T11:29:00Z"),
        ev(3, adt_event_kind::transfer_out, "A17", "2020-09-23T20:24:00Z"),
    };
    auto b = linkage::sanitize_adt(duplicates);
    f.check(b.stays.size() == 1 && b.stays[0].bed == "A17" &&
                b.stays[0].range == time_range{ts("2020-08-23T11:29:00Z"), ts("2020-09-23T20:24:00Z")},
            "duplicate admissions did not give [2020-08-23 11:29, 2020-09-23 20:24]");

    std::vector<adt_event> readmits{
        ev(1, adt_event_kind::admission, "A03", "2020-07-02T15:59:00Z"),
        ev(2, adt_event_kind::transfer_out, "A03", "2020-07-02T16:00:00Z"),
        ev(3, adt_event_kind::transfer_in, "A03", "2020-07-02T16:00:00Z"),
        ev(4, adt_event_kind::transfer_out, "A03", "2020-07-02T16:16:00Z"),
        ev(5, adt_event_kind::transfer_in, "A03", "2020-07-02T16:16:00Z"),
        ev(6, adt_event_kind::discharge, "A03", "2020-07-02T21:03:00Z"),
    };
    auto c = linkage::sanitize_adt(readmits);
    f.check(c.stays.size() == 1 && c.stays[0].bed == "A03" &&
                c.stays[0].range == time_range{ts("2020-07-02T15:59:00Z"), ts("2020-07-02T21:03:00Z")},
            "readmit chain did not give [2020-07-02 15:59, 21:03]");

    return f.result("3 tables: none, [2020-08-23 11:29, 2020-09-23 20:24], [2020-07-02 15:59, 21:03]");
}

// =============================================================================
// 2. Bed labels
// =============================================================================

verdict check_bed_label_goldens() {
    linkage::bed_label_map map;
    findings f;
    auto a = linkage::normalize_bed_label("13ALPHA", map);
    auto b = linkage::normalize_bed_label("01CHARLIE", map);
    f.check(a == "A13", "13ALPHA -> " + a);
    f.check(b == "C01", "01CHARLIE -> " + b);
    return f.result("13ALPHA -> " + a + ", 01CHARLIE -> " + b);
}

// =============================================================================
// 3. Linkage against ground truth
// =============================================================================

verdict check_linkage_targets() {
    auto c = synthgen::scenario_config::for_profile("paper");
    c.missing_lifetime_id_fraction = 0.5;
    constexpr int days = 20;

    // one day per seed 1..20, the same sample the profile was calibrated on
    const auto t0 = std::chrono::steady_clock::now();
    double coverage = 0;
    double accuracy = 0;
    int accuracy_days = 0;
    std::size_t streams = 0;
    for (int seed = 1; seed <= days; ++seed) {
        c.seed = static_cast<std::uint64_t>(seed);
        auto g = synthgen::generate_day(c, c.start_day);
        auto linked = linkage::link_day(g.bundle, {});
        auto score = synthgen::score_linkage(linked.results, g.truth);
        coverage += score.coverage;
        streams += score.missing_id_streams;
        if (score.accuracy) {
            accuracy += *score.accuracy;
            ++accuracy_days;
        }
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    coverage /= days;
    accuracy = accuracy_days ? accuracy / accuracy_days : 0;

    findings f;
    f.check(coverage >= 0.75, "coverage " + fixed(coverage) + " < 0.75");
    f.check(accuracy >= 0.92, "accuracy " + fixed(accuracy) + " < 0.92");
    f.check(secs < 60, "took " + fixed(secs, 1) + "s");
    return f.result("20 seeded days, " + std::to_string(streams) + " id-less streams: mean coverage " + fixed(coverage) +
                    ", mean accuracy " + fixed(accuracy) + ", " + fixed(secs, 1) + "s");
}

// =============================================================================
// 4. Segmentation properties
// =============================================================================

namespace {

constexpr std::int64_t minute_ms = 60'000;

struct planned_segment {
    std::int64_t from = 0;  ///< minutes from midnight
    std::int64_t to = 0;
    std::optional<std::string> mrn;
    std::optional<std::pair<std::int64_t, std::int64_t>> evidence;
};

struct planned_stream {
    std::string monitor;
    std::string bed;
    std::int64_t from = 0;
    std::int64_t to = 0;  ///< may run past midnight; data stops at the day end
    std::vector<planned_segment> segments;
};

struct segmentation_scenario {
    calendar_day day{};
    std::vector<planned_stream> streams;
    extract::extract_bundle bundle;
    std::vector<linkage::linkage_result> linkage;
};

segmentation_scenario make_scenario(stable_rng& rng) {
    static const std::vector<std::string> beds{"01ALPHA", "02BRAVO", "03CHARLIE", "OR-1"};
    static const std::vector<std::pair<std::string, int>> waves{{"II", 500}, {"Pleth", 125}, {"Resp", 63}};
    segmentation_scenario s;
    s.day = parse_day("2021-03-01");
    s.bundle.day = s.day;
    const auto t_day = to_epoch_ms(start_of(s.day));
    const std::int64_t day_minutes = 1440;

    const int monitors = static_cast<int>(rng.between(1, 3));
    for (int m = 0; m < monitors; ++m) {
        const std::string monitor = "m" + std::to_string(m);
        std::int64_t a = rng.between(0, day_minutes - 10);
        std::int64_t b = rng.between(a + 5, day_minutes);
        if (rng.chance(0.2)) b = day_minutes + rng.between(1, 600);  // linked range runs past midnight
        std::vector<std::pair<std::int64_t, std::int64_t>> spans{{a, b}};
        if (b - a >= 10 && rng.chance(0.4)) {
            auto cut = rng.between(a + 1, std::min(b, day_minutes) - 1);
            spans = {{a, cut}, {cut, b}};
        }
        auto bed_index = static_cast<std::size_t>(rng.between(0, 3));
        for (auto [from, to] : spans) {
            planned_stream st{monitor, beds[bed_index], from, to, {}};
            bed_index = (bed_index + 1 + static_cast<std::size_t>(rng.between(0, 2))) % beds.size();
            std::set<std::int64_t> cuts;
            const auto n_cuts = rng.between(0, 3);
            for (int k = 0; k < n_cuts && to - from >= 2; ++k) cuts.insert(rng.between(from + 1, to - 1));
            std::vector<std::int64_t> edges{from};
            edges.insert(edges.end(), cuts.begin(), cuts.end());
            edges.push_back(to);
            for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
                planned_segment seg{edges[k], edges[k + 1], std::nullopt, std::nullopt};
                if (!rng.chance(0.2)) seg.mrn = "MRN" + std::to_string(rng.between(1, 3));
                if (rng.chance(0.5)) {
                    seg.evidence = {{seg.from - rng.between(0, 120), seg.to + rng.between(0, 120)}};
                }
                st.segments.push_back(seg);
            }
            s.streams.push_back(st);
        }
    }

    double value = 0;
    for (const auto& st : s.streams) {
        linkage::linkage_result r;
        r.monitor_patient_id = st.monitor;
        r.bed_label = st.bed;
        r.emr_bed_label = st.bed;
        r.stream_range = {from_epoch_ms(t_day + st.from * minute_ms), from_epoch_ms(t_day + st.to * minute_ms)};
        for (const auto& seg : st.segments) {
            linkage::link_segment ls;
            ls.range = {from_epoch_ms(t_day + seg.from * minute_ms), from_epoch_ms(t_day + seg.to * minute_ms)};
            ls.mrn = seg.mrn;
            ls.method = seg.mrn ? linkage::link_method::adt_overlap : linkage::link_method::unmatched;
            if (seg.evidence) {
                ls.evidence = time_range{from_epoch_ms(t_day + seg.evidence->first * minute_ms),
                                         from_epoch_ms(t_day + seg.evidence->second * minute_ms)};
            }
            r.segments.push_back(ls);
        }
        s.linkage.push_back(r);

        const std::int64_t data_from = t_day + st.from * minute_ms;
        const std::int64_t data_to = t_day + std::min(st.to, day_minutes) * minute_ms;
        // cut instants inside the data, which blocks are steered to straddle
        std::vector<std::int64_t> targets;
        for (std::size_t k = 1; k < st.segments.size(); ++k) targets.push_back(t_day + st.segments[k].from * minute_ms);

        for (const auto& [wave, rate] : waves) {
            if (!rng.chance(0.7)) continue;
            std::int64_t t = data_from + rng.between(0, 20'000);
            std::size_t next_target = 0;
            while (t < data_to) {
                std::int64_t n = rng.between(1, 2 * rate);
                while (next_target < targets.size() && targets[next_target] <= t) ++next_target;
                if (next_target < targets.size() && rng.chance(0.8)) {
                    t = std::max(t, targets[next_target] - rng.between(1, 1500));
                    n = rng.between(rate, 2 * rate);
                } else {
                    t += rng.between(0, 60 * minute_ms);
                }
                n = std::min<std::int64_t>(n, (data_to - t) * rate / 1000);
                if (n <= 0) break;
                extract::wave_block blk;
                blk.monitor_patient_id = st.monitor;
                blk.bed_label = st.bed;
                blk.wave = wave;
                blk.block_start = from_epoch_ms(t);
                blk.sample_rate = rate;
                for (std::int64_t i = 0; i < n; ++i) blk.samples.push_back(value += 0.001);
                s.bundle.wave_samples.push_back(std::move(blk));
                t += (n * 1000 + rate - 1) / rate + rng.between(0, 200);
            }
        }
        auto hr = extract::metric::parse("HR");
        for (int k = 0; k < 10; ++k) {
            auto at = from_epoch_ms(rng.between(data_from, data_to - 1));
            s.bundle.numerics.push_back({st.monitor, "", st.bed, at, hr, 60.0 + k, "bpm"});
        }
    }
    return s;
}

using study_key = std::tuple<std::string, std::string, std::int64_t, std::int64_t, std::string>;

/// Maximal runs of constant segment ownership, scanned minute by minute.
std::vector<study_key> oracle_boundaries(const segmentation_scenario& s) {
    const auto t_day = to_epoch_ms(start_of(s.day));
    std::vector<study_key> out;
    for (const auto& st : s.streams) {
        int run_owner = -1;
        std::int64_t run_start = 0;
        auto flush = [&](std::int64_t end) {
            if (run_owner < 0) return;
            const auto& seg = st.segments[static_cast<std::size_t>(run_owner)];
            out.emplace_back(st.monitor, st.bed, t_day + run_start * minute_ms, t_day + end * minute_ms,
                             seg.mrn.value_or(""));
        };
        for (std::int64_t m = 0; m <= 1440; ++m) {
            int owner = -1;
            if (m < 1440) {
                for (std::size_t k = 0; k < st.segments.size(); ++k) {
                    const auto& seg = st.segments[k];
                    bool inside = seg.from <= m && m < seg.to;
                    if (seg.evidence) inside = inside && seg.evidence->first <= m && m < seg.evidence->second;
                    if (inside) owner = static_cast<int>(k);
                }
            }
            if (owner != run_owner) {
                flush(m);
                run_owner = owner;
                run_start = m;
            }
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

/// Samples of `blocks` that the split rule places in [a, b): index i of a
/// block starting at t0 belongs there when (a-t0)*rate < (i+1)*1000 <= (b-t0)*rate.
std::vector<double> oracle_samples(const std::vector<const extract::wave_block*>& blocks, timestamp a, timestamp b) {
    std::vector<double> out;
    for (const auto* blk : blocks) {
        const auto lo = (a - blk->block_start).count() * blk->sample_rate;
        const auto hi = (b - blk->block_start).count() * blk->sample_rate;
        for (std::size_t i = 0; i < blk->samples.size(); ++i) {
            const auto edge = static_cast<std::int64_t>(i + 1) * 1000;
            if (lo < edge && edge <= hi) out.push_back(blk->samples[i]);
        }
    }
    return out;
}

}  // namespace

verdict check_segmentation() {
    stable_rng rng(20210301);
    findings f;
    int agree = 0;
    std::size_t studies = 0;
    std::uint64_t samples = 0;
    constexpr int scenarios = 500;
    for (int n = 0; n < scenarios; ++n) {
        const auto s = make_scenario(rng);
        const auto tag = "scenario " + std::to_string(n) + ": ";
        auto filled = segmentation::fill_studies(segmentation::plan_studies(s.linkage, s.day), s.bundle);
        studies += filled.studies.size();

        std::vector<study_key> got;
        for (const auto& st : filled.studies) {
            got.emplace_back(st.monitor_patient_id, st.device_bed_label, to_epoch_ms(st.range.start),
                             to_epoch_ms(st.range.end), st.mrn.value_or(""));
        }
        std::sort(got.begin(), got.end());
        const bool same = got == oracle_boundaries(s);
        agree += same ? 1 : 0;
        f.check(same, tag + "boundaries differ from oracle");

        // transfer instants per monitor: bed changes and identity changes
        std::map<std::string, std::vector<std::int64_t>> transfers;
        const auto t_day = to_epoch_ms(start_of(s.day));
        for (const auto& st : s.streams) {
            transfers[st.monitor].push_back(t_day + st.from * minute_ms);
            for (const auto& seg : st.segments) transfers[st.monitor].push_back(t_day + seg.to * minute_ms);
        }

        std::map<std::string, std::uint64_t> bundle_counts;
        std::map<std::string, std::uint64_t> study_counts;
        for (const auto& b : s.bundle.wave_samples) bundle_counts[b.wave] += b.samples.size();
        std::size_t numerics = 0;
        for (const auto& st : filled.studies) {
            f.check(st.range.length() <= segmentation::max_study_length, tag + st.study_id + " exceeds 24h");
            for (auto t : transfers[st.monitor_patient_id]) {
                const auto start = to_epoch_ms(st.range.start);
                const auto end = to_epoch_ms(st.range.end);
                f.check(!(start < t && t < end), tag + st.study_id + " spans a transfer");
            }
            for (const auto& w : st.waves) {
                std::vector<const extract::wave_block*> source;
                for (const auto& b : s.bundle.wave_samples) {
                    if (b.monitor_patient_id == st.monitor_patient_id && b.bed_label == st.device_bed_label &&
                        b.wave == w.symbol) {
                        source.push_back(&b);
                    }
                }
                std::sort(source.begin(), source.end(),
                          [](const auto* x, const auto* y) { return x->block_start < y->block_start; });
                std::vector<double> got_samples;
                for (const auto& piece : w.blocks) got_samples.insert(got_samples.end(), piece.samples.begin(), piece.samples.end());
                f.check(got_samples == oracle_samples(source, st.range.start, st.range.end),
                        tag + st.study_id + " " + w.symbol + " samples differ from the split oracle");
                study_counts[w.symbol] += got_samples.size();
                samples += got_samples.size();
            }
            for (const auto& r : st.numerics) f.check(st.range.contains(r.observed_at), tag + "numeric outside its study");
            numerics += st.numerics.size();
        }
        f.check(study_counts == bundle_counts, tag + "per-wave sample totals not conserved");
        f.check(numerics == s.bundle.numerics.size(), tag + "numerics not conserved");
        f.check(filled.orphans.empty(), tag + "unexpected orphans");
    }
    return f.result(std::to_string(scenarios) + " scenarios, " + std::to_string(studies) + " studies, " +
                    std::to_string(samples) + " samples; oracle agreement " + std::to_string(agree) + "/" +
                    std::to_string(scenarios));
}

// =============================================================================
// 5. Signal round trip
// =============================================================================

verdict check_signal_round_trip() {
    auto c = synthgen::scenario_config::for_profile("default");
    c.days = 5;
    c.patients_per_day = 6;
    c.seed = 5;
    const auto dir = fresh_dir("c5");

    findings f;
    std::size_t studies = 0;
    std::size_t records = 0;
    std::uint64_t checked = 0;
    std::set<int> rates;
    for (auto day : c.day_list()) {
        auto g = synthgen::generate_day(c, day);
        auto linked = linkage::link_day(g.bundle, {});
        auto filled = segmentation::fill_studies(segmentation::plan_studies(linked.results, day), g.bundle);
        for (const auto& st : filled.studies) {
            ++studies;
            const auto study_dir = dir / st.study_id;
            auto details = signal_store::write_study(st, study_dir);
            f.check(details.waves.size() == st.waves.size(), st.study_id + " lost a wave");
            for (const auto& w : st.waves) {
                const auto tag = st.study_id + " " + w.symbol + ": ";
                ++records;
                // oracle grid: slot = round((t_i - t_first) * rate / 1000)
                double t_first = INFINITY;
                for (const auto& b : w.blocks) {
                    if (!b.samples.empty()) t_first = std::min(t_first, b.sample_time_ms(0));
                }
                const int rate = w.blocks.front().sample_rate;
                rates.insert(rate);
                std::map<std::int64_t, double> expected;
                std::int64_t last_slot = -1;
                for (const auto& b : w.blocks) {
                    for (std::size_t i = 0; i < b.samples.size(); ++i) {
                        auto slot = std::llround((b.sample_time_ms(static_cast<std::int64_t>(i)) - t_first) * rate / 1000.0);
                        expected[slot] = b.samples[i];
                        last_slot = std::max<std::int64_t>(last_slot, slot);
                    }
                }
                const auto hea = study_dir / (st.study_id + "_" + w.symbol + ".hea");
                auto data = signal_store::read_record(hea);
                const auto n = static_cast<std::size_t>(data.header.n_samples);
                f.check(static_cast<std::int64_t>(n) == last_slot + 1, tag + "sample count");
                const auto dat = study_dir / data.header.dat_file;
                f.check(stdfs::file_size(dat) == 2 * n, tag + ".dat size != 2 x n_samples");

                // checksum over the raw little-endian file
                auto bytes = fs::read_bytes(dat);
                std::uint16_t sum = 0;
                for (std::size_t i = 0; i + 1 < bytes.size(); i += 2) {
                    sum = static_cast<std::uint16_t>(sum + (bytes[i] | (bytes[i + 1] << 8)));
                }
                f.check(static_cast<std::int16_t>(sum) == data.header.checksum, tag + "checksum16");

                const double bound = 0.5 / data.header.quant.gain * (1 + 1e-9);
                bool gaps_exact = data.gap.size() == n;
                bool within = true;
                for (std::size_t i = 0; i < n && gaps_exact; ++i) {
                    auto it = expected.find(static_cast<std::int64_t>(i));
                    const bool gap = it == expected.end() || !std::isfinite(it->second);
                    if (data.gap[i] != gap) gaps_exact = false;
                    if (!gap && std::fabs(data.values[i] - it->second) > bound) within = false;
                    ++checked;
                }
                f.check(gaps_exact, tag + "gap mask differs");
                f.check(within, tag + "sample error above 0.5/gain");
            }
            stdfs::remove_all(study_dir);
        }
    }
    std::string rate_text;
    for (int r : rates) rate_text += (rate_text.empty() ? "" : "/") + std::to_string(r);
    f.check(rates == std::set<int>{63, 125, 500}, "rates seen: " + rate_text);
    return f.result("5 days, " + std::to_string(studies) + " studies, " + std::to_string(records) + " records at " +
                    rate_text + " sps, " + std::to_string(checked) + " samples within 0.5/gain");
}

// =============================================================================
// 6. Single-byte corruption
// =============================================================================

verdict check_integrity() {
    const auto root = fresh_dir("c6");
    auto c = synthgen::scenario_config::for_profile("paper");
    c.days = 1;
    c.patients_per_day = 3;
    c.seed = 6;
    synthgen::write_corpus(c, root);
    fs::write_atomic(root / "deid.seed", "acceptance-seed\n");

    pipeline::pipeline_config p;
    p.extracts_root = root / "extracts";
    p.identified_root = root / "archive/identified";
    p.deid_root = root / "archive/deid";
    p.catalog_root = root / "archive/catalog";
    p.unit_map = root / "units.csv";
    p.identity_registry = root / "patients.csv";
    p.deid_seed = "file:" + (root / "deid.seed").string();
    auto out = pipeline::run_day(p, c.start_day);
    if (!out.state.published()) return {false, "fixture day did not publish"};

    const auto bundle_dir = p.extracts_root / format_day(c.start_day);
    std::vector<stdfs::path> bundle_files;
    for (const auto& e : stdfs::directory_iterator(bundle_dir)) bundle_files.push_back(e.path());
    std::vector<stdfs::path> packs;
    for (const auto& e : stdfs::recursive_directory_iterator(p.identified_root / "packed")) {
        if (e.is_regular_file()) packs.push_back(e.path());
    }
    for (const auto& e : stdfs::recursive_directory_iterator(p.deid_root / "packed")) {
        if (e.is_regular_file()) packs.push_back(e.path());
    }
    std::sort(bundle_files.begin(), bundle_files.end());
    std::sort(packs.begin(), packs.end());

    auto bundle_ok = [&] { return std::holds_alternative<extract::verified_bundle>(extract::verify_bundle(bundle_dir)); };
    auto packs_ok = [&] {
        return pipeline::verify_packs(p.catalog_root, p.identified_root).empty() &&
               pipeline::verify_packs(p.deid_root / "catalog", p.deid_root).empty();
    };
    findings f;
    f.check(bundle_ok() && packs_ok(), "clean fixture does not verify");

    stable_rng rng(66);
    int detected = 0;
    int bundle_trials = 0;
    constexpr int trials = 100;
    for (int n = 0; n < trials; ++n) {
        const bool in_bundle = rng.chance(0.5);
        const auto& pool = in_bundle ? bundle_files : packs;
        const auto& file = pool[static_cast<std::size_t>(rng.between(0, static_cast<std::int64_t>(pool.size()) - 1))];
        auto bytes = fs::read_bytes(file);
        if (bytes.empty()) continue;
        const auto at = static_cast<std::size_t>(rng.between(0, static_cast<std::int64_t>(bytes.size()) - 1));
        const auto original = bytes[at];
        bytes[at] = static_cast<std::uint8_t>(original ^ rng.between(1, 255));
        {
            std::ofstream os(file, std::ios::binary | std::ios::trunc);
            os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        }
        const bool caught = in_bundle ? !bundle_ok() : !packs_ok();
        detected += caught ? 1 : 0;
        bundle_trials += in_bundle ? 1 : 0;
        f.check(caught, "undetected flip at byte " + std::to_string(at) + " of " + file.filename().string());
        bytes[at] = original;
        std::ofstream os(file, std::ios::binary | std::ios::trunc);
        os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    }
    f.check(bundle_ok() && packs_ok(), "restored fixture does not verify");
    return f.result(std::to_string(detected) + "/" + std::to_string(trials) + " corruptions detected (" +
                    std::to_string(bundle_trials) + " in bundle files, " + std::to_string(trials - bundle_trials) +
                    " in " + std::to_string(packs.size()) + " packs)");
}

}  // namespace wavearchive::acceptance
