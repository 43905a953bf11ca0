/**
 * @file acceptance_archive.cpp
 * @brief Criteria 7-10: whole-pipeline determinism, de-identification, catalog, throughput
 */

#include "acceptance.hpp"

#include "wavearchive/catalog.hpp"
#include "wavearchive/core/fs.hpp"
#include "wavearchive/core/zip.hpp"
#include "wavearchive/deid.hpp"
#include "wavearchive/pipeline.hpp"
#include "wavearchive/synthgen.hpp"
#include "wavearchive/wave_registry.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <map>
#include <memory>
#include <set>
#include <thread>

namespace wavearchive::acceptance {

namespace stdfs = std::filesystem;

namespace {

constexpr std::string_view archive_seed = "acceptance-archive-seed";

struct corpus {
    stdfs::path root;
    synthgen::scenario_config scenario;
    std::vector<synthgen::ground_truth> truth;

    [[nodiscard]] calendar_day first() const { return scenario.start_day; }
    [[nodiscard]] calendar_day last() const { return scenario.start_day + std::chrono::days{scenario.days - 1}; }

    /// A pipeline over this corpus writing under `out` (relative to root).
    [[nodiscard]] pipeline::pipeline_config config(const std::string& out) const {
        pipeline::pipeline_config p;
        p.extracts_root = root / "extracts";
        p.identified_root = root / out / "identified";
        p.deid_root = root / out / "deid";
        p.catalog_root = root / out / "catalog";
        p.unit_map = root / "units.csv";
        p.birthdates = root / "birthdates.csv";
        p.identity_registry = root / "patients.csv";
        p.deid_seed = "file:" + (root / "deid.seed").string();
        return p;
    }
};

corpus make_corpus(const std::string& name, synthgen::scenario_config scenario) {
    corpus c;
    c.root = work_root() / name;
    stdfs::remove_all(c.root);
    c.scenario = std::move(scenario);
    c.truth = synthgen::write_corpus(c.scenario, c.root);
    fs::write_atomic(c.root / "deid.seed", std::string(archive_seed) + "\n");
    return c;
}

std::string fixed(double v, int digits = 2) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Paper-profile corpus published once at parallelism 1; shared by 7-9.
struct shared_archive {
    corpus data;
    pipeline::pipeline_config config;
    pipeline::range_summary summary;
    std::string digest;
};

const shared_archive& archive() {
    static std::unique_ptr<shared_archive> a;
    if (!a) {
        auto s = synthgen::scenario_config::for_profile("paper");
        s.days = 3;
        s.patients_per_day = 3;
        s.seed = 7;
        a = std::make_unique<shared_archive>();
        a->data = make_corpus("c7", s);
        a->config = a->data.config("p1");
        a->summary = pipeline::run_range(a->config, a->data.first(), a->data.last(), 1);
        a->digest = pipeline::archive_digest(a->config);
    }
    return *a;
}

std::string statuses(const pipeline::range_summary& s) {
    std::string out;
    for (const auto& d : s.days) out += (out.empty() ? "" : ",") + std::string(pipeline::to_string(d.status));
    return out;
}

bool all_published(const pipeline::range_summary& s) {
    return !s.days.empty() && s.count(pipeline::day_status::published) == s.days.size();
}

}  // namespace

// =============================================================================
// 7. Determinism, idempotency, resume
// =============================================================================

verdict check_determinism() {
    const auto& a = archive();
    findings f;
    f.check(all_published(a.summary), "parallelism 1 run: " + statuses(a.summary));

    auto p4 = a.data.config("p4");
    auto s4 = pipeline::run_range(p4, a.data.first(), a.data.last(), 4);
    f.check(all_published(s4), "parallelism 4 run: " + statuses(s4));
    f.check(pipeline::archive_digest(p4) == a.digest, "parallelism 1 and 4 digests differ");

    // rerun: nothing persisted is redone and no byte moves
    std::map<calendar_day, std::string> states;
    for (const auto& d : a.summary.days) states[d.day] = fs::read_text(pipeline::state_path(a.config, d.day));
    auto again = pipeline::run_range(a.config, a.data.first(), a.data.last(), 1);
    f.check(pipeline::archive_digest(a.config) == a.digest, "rerun changed the archive digest");
    for (const auto& d : again.days) {
        const auto& o = *d.outcome;
        for (auto ph : {pipeline::phase::written, pipeline::phase::deidentified, pipeline::phase::published}) {
            f.check(std::find(o.executed.begin(), o.executed.end(), ph) == o.executed.end(),
                    format_day(d.day) + " rerun redid " + std::string(pipeline::to_string(ph)));
        }
        f.check(fs::read_text(pipeline::state_path(a.config, d.day)) == states[d.day],
                format_day(d.day) + " rerun rewrote its state");
    }

    int resumed = 0;
    for (int k = 0; k < pipeline::phase_count; ++k) {
        const auto ph = static_cast<pipeline::phase>(k);
        const auto name = std::string(pipeline::to_string(ph));
        auto pc = a.data.config("fault-" + name);
        pipeline::run_options stop;
        stop.stop_after = ph;
        auto first = pipeline::run_range(pc, a.data.first(), a.data.last(), 1, stop);
        const auto want = ph == pipeline::phase::published ? pipeline::day_status::published : pipeline::day_status::stopped;
        f.check(first.count(want) == first.days.size(), "stop after " + name + ": " + statuses(first));
        auto resume = pipeline::run_range(pc, a.data.first(), a.data.last(), 1);
        const bool same = all_published(resume) && pipeline::archive_digest(pc) == a.digest;
        f.check(same, "resume after " + name + " differs from the uninterrupted archive");
        resumed += same ? 1 : 0;
        stdfs::remove_all(a.data.root / ("fault-" + name));
    }
    stdfs::remove_all(a.data.root / "p4");
    return f.result("3 days: parallelism 1 == 4, rerun no-op, " + std::to_string(resumed) + "/" +
                    std::to_string(pipeline::phase_count) + " phase-boundary resumes identical; digest " +
                    a.digest.substr(0, 12));
}

// =============================================================================
// 8. De-identification
// =============================================================================

namespace {

/// Finds any of a fixed set of needles (each at least 2 bytes) in one pass.
class needle_scanner {
public:
    explicit needle_scanner(std::vector<std::string> needles) : needles_(std::move(needles)), heads_(65536) {
        for (std::size_t i = 0; i < needles_.size(); ++i) heads_[key(needles_[i].data())].push_back(i);
    }

    /// Needles found in `data`.
    [[nodiscard]] std::set<std::string> find(std::string_view data) const {
        std::set<std::string> hits;
        for (std::size_t i = 0; i + 1 < data.size(); ++i) {
            const auto& bucket = heads_[key(data.data() + i)];
            for (auto n : bucket) {
                if (data.substr(i, needles_[n].size()) == needles_[n]) hits.insert(needles_[n]);
            }
        }
        return hits;
    }

private:
    static std::size_t key(const char* p) {
        return static_cast<unsigned char>(p[0]) | (static_cast<std::size_t>(static_cast<unsigned char>(p[1])) << 8);
    }
    std::vector<std::string> needles_;
    std::vector<std::vector<std::size_t>> heads_;
};

/// Chi-square upper tail by the Wilson-Hilferty normal approximation.
double chi_square_p_value(double chi2, double df) {
    const double z = (std::cbrt(chi2 / df) - (1 - 2 / (9 * df))) / std::sqrt(2 / (9 * df));
    return 0.5 * std::erfc(z / std::sqrt(2.0));
}

}  // namespace

verdict check_deidentification() {
    const auto& a = archive();
    findings f;
    f.check(all_published(a.summary), "shared archive did not publish: " + statuses(a.summary));

    std::vector<std::string> needles;
    for (const auto& day : a.data.truth) {
        for (const auto& p : day.patients) {
            for (const auto* s : {&p.mrn, &p.name, &p.visit_id}) {
                if (s->size() >= 2) needles.push_back(*s);
            }
        }
    }
    std::sort(needles.begin(), needles.end());
    needles.erase(std::unique(needles.begin(), needles.end()), needles.end());
    const needle_scanner scanner(needles);

    std::size_t files = 0;
    std::size_t entries = 0;
    std::uint64_t bytes = 0;
    std::set<std::string> leaked;
    for (const auto& e : stdfs::recursive_directory_iterator(a.config.deid_root)) {
        if (!e.is_regular_file()) continue;
        const auto content = fs::read_text(e.path());
        ++files;
        bytes += content.size();
        for (const auto& hit : scanner.find(content)) leaked.insert(hit + " in " + e.path().filename().string());
        if (e.path().extension() == ".zip") {
            for (const auto& entry : zip::decode(content)) {
                ++entries;
                bytes += entry.content.size();
                for (const auto& hit : scanner.find(entry.content)) leaked.insert(hit + " in " + entry.name);
                for (const auto& hit : scanner.find(entry.name)) leaked.insert(hit + " in entry name");
            }
        }
        const auto rel = stdfs::relative(e.path(), a.config.deid_root).string();
        for (const auto& hit : scanner.find(rel)) leaked.insert(hit + " in path " + rel);
    }
    f.check(files > 0, "de-identified tree is empty");
    for (const auto& l : leaked) f.check(false, "leak: " + l);

    // spacing between a patient's studies survives the shift
    const auto seed = a.config.resolve_seed();
    const auto identified = catalog::load_catalog(a.config.catalog_root).all_studies();
    const auto deidentified = catalog::load_catalog(a.config.deid_root / "catalog").all_studies();
    std::map<std::string, std::vector<time_range>> by_mrn;
    std::map<std::string, std::vector<time_range>> by_pseudo;
    for (const auto& r : identified) {
        if (!r.patient.empty()) by_mrn[r.patient].push_back({r.start, r.end});
    }
    for (const auto& r : deidentified) by_pseudo[r.patient].push_back({r.start, r.end});
    std::size_t patients_checked = 0;
    for (auto& [mrn, ranges] : by_mrn) {
        auto it = by_pseudo.find(deid::derive_pseudo_id(mrn, seed));
        if (it == by_pseudo.end()) {
            f.check(false, "no pseudonymous studies for a linked patient");
            continue;
        }
        auto shifted = it->second;
        auto by_start = [](const time_range& x, const time_range& y) { return x.start < y.start; };
        std::sort(ranges.begin(), ranges.end(), by_start);
        std::sort(shifted.begin(), shifted.end(), by_start);
        if (shifted.size() != ranges.size()) {
            f.check(false, "study count changed under the shift");
            continue;
        }
        const auto offset = ranges.front().start - shifted.front().start;
        const auto days = std::chrono::duration_cast<std::chrono::days>(offset).count();
        f.check(offset == std::chrono::days{days} && days >= deid::min_shift_days && days <= deid::max_shift_days,
                "shift is not a whole number of days in range");
        for (std::size_t k = 0; k < ranges.size(); ++k) {
            f.check(ranges[k].start - shifted[k].start == offset && ranges[k].end - shifted[k].end == offset,
                    "spacing or length changed under the shift");
        }
        ++patients_checked;
    }
    f.check(patients_checked > 0, "no linked patients to compare");

    constexpr int mrns = 10000;
    constexpr int bins = deid::max_shift_days - deid::min_shift_days + 1;
    std::vector<int> counts(bins, 0);
    for (int i = 0; i < mrns; ++i) {
        char mrn[16];
        std::snprintf(mrn, sizeof mrn, "MRN%07d", i);
        ++counts[static_cast<std::size_t>(deid::derive_shift(mrn, seed) - deid::min_shift_days)];
    }
    const double expected = static_cast<double>(mrns) / bins;
    double chi2 = 0;
    for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
    const double p = chi_square_p_value(chi2, bins - 1);
    f.check(p > 0.01, "shift chi-square p = " + fixed(p, 4));

    return f.result(std::to_string(needles.size()) + " identifiers, " + std::to_string(files) + " files + " +
                    std::to_string(entries) + " zip entries (" + fixed(static_cast<double>(bytes) / 1e6, 1) +
                    " MB) scanned, " + std::to_string(leaked.size()) + " hits; spacing kept for " +
                    std::to_string(patients_checked) + " patients; shift chi-square " + fixed(chi2, 1) + " on " +
                    std::to_string(bins - 1) + " df, p = " + fixed(p, 4));
}

// =============================================================================
// 9. Catalog
// =============================================================================

verdict check_catalog() {
    findings f;
    const auto& a = archive();
    std::size_t rows = 0;
    for (const auto& root : {a.config.catalog_root, a.config.deid_root / "catalog"}) {
        auto c = catalog::load_catalog(root);
        rows += c.all_studies().size() + c.details.size() + c.manifest.size();
        for (const auto& p : catalog::integrity_problems(c)) f.check(false, root.filename().string() + ": " + p);
    }
    f.check(pipeline::verify_packs(a.config.catalog_root, a.config.identified_root).empty(),
            "identified catalog points at a bad pack");
    f.check(pipeline::verify_packs(a.config.deid_root / "catalog", a.config.deid_root).empty(),
            "de-identified catalog points at a bad pack");

    auto s = synthgen::scenario_config::for_profile("clean");
    s.days = 2;
    s.patients_per_day = 6;
    s.seed = 9;
    auto clean = make_corpus("c9", s);
    auto config = clean.config("archive");
    auto run = pipeline::run_range(config, clean.first(), clean.last(), 1);
    f.check(all_published(run), "clean corpus: " + statuses(run));
    auto units = synthgen::unit_map_for(s);
    const auto want = synthgen::expected_stats(clean.truth, &units);
    const auto got = catalog::summarize(catalog::load_catalog(config.catalog_root),
                                        catalog::load_birthdates(*config.birthdates));
    if (!(got == want)) {
        f.check(got.studies == want.studies, "studies " + std::to_string(got.studies) + " vs " + std::to_string(want.studies));
        f.check(got.patients == want.patients, "patients " + std::to_string(got.patients) + " vs " + std::to_string(want.patients));
        f.check(got.size_bytes == want.size_bytes,
                "size " + std::to_string(got.size_bytes) + " vs " + std::to_string(want.size_bytes));
        f.check(got.per_wave == want.per_wave, "per-wave rows differ");
        f.check(got.unit_by_age == want.unit_by_age, "unit by age matrix differs");
        f.check(false, "summary differs from generator-expected stats");
    }

    std::string registry;
    const std::map<std::string, std::pair<int, std::string>> table{
        {"II", {500, "mV"}}, {"Pleth", {125, ""}}, {"Resp", {63, "Ohm"}}};
    for (const auto& [symbol, expect] : table) {
        auto it = std::find_if(got.per_wave.begin(), got.per_wave.end(), [&](const auto& w) { return w.symbol == symbol; });
        if (it == got.per_wave.end()) {
            f.check(false, symbol + " missing from the per-wave report");
            continue;
        }
        f.check(it->rate == expect.first, symbol + " rate " + std::to_string(it->rate));
        if (!expect.second.empty()) f.check(it->unit == expect.second, symbol + " unit " + it->unit);
        registry += (registry.empty() ? "" : ", ") + symbol + " " + std::to_string(it->rate) + " sps " + it->unit;
    }
    return f.result(std::to_string(rows) + " catalog rows without orphans; clean corpus " +
                    std::to_string(got.studies) + " studies summarize " + (got == want ? "==" : "!=") +
                    " expected; " + registry);
}

// =============================================================================
// 10. Throughput smoke
// =============================================================================

verdict check_throughput() {
    auto s = synthgen::scenario_config::for_profile("clean");
    s.days = 1;
    s.patients_per_day = 40;
    s.transfer_rate = 0;
    s.or_shared_stream_fraction = 0;
    s.waves_per_patient = 3;
    s.seed = 10;
    const auto t_gen = std::chrono::steady_clock::now();
    auto c = make_corpus("c10", s);
    const double gen_secs = seconds_since(t_gen);

    auto config = c.config("archive");
    config.worker_count = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    const auto t0 = std::chrono::steady_clock::now();
    auto out = pipeline::run_day(config, c.first());
    const double secs = seconds_since(t0);

    findings f;
    f.check(out.state.published(), "day did not publish");
    auto cat = catalog::load_catalog(config.catalog_root);
    const auto studies = cat.all_studies();
    std::map<std::string, int> waves;
    for (const auto& d : cat.details) ++waves[d.study_id];
    f.check(studies.size() == 40, std::to_string(studies.size()) + " studies instead of 40");
    for (const auto& st : studies) f.check(waves[st.study_id] == 3, st.study_id + " has " + std::to_string(waves[st.study_id]) + " waves");
    f.check(secs < 300, "took " + fixed(secs, 1) + "s");
    std::uint64_t size = 0;
    for (const auto& m : cat.manifest) size += m.size_bytes;
    stdfs::remove_all(c.root);
    return f.result(std::to_string(studies.size()) + " studies x 3 waves end to end in " + fixed(secs, 1) + "s on " +
                    std::to_string(config.worker_count) + " worker(s), " + fixed(static_cast<double>(size) / 1e6, 1) +
                    " MB packed (corpus generation " + fixed(gen_secs, 1) + "s)");
}

}  // namespace wavearchive::acceptance
