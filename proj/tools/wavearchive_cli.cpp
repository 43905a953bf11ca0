/**
 * @file wavearchive_cli.cpp
 * @brief Command line front end: synth, verify, run-day, run-range, query, stats, audit
 *
 * Exit codes: 0 success, 1 failure (including usage errors), 2 partial.
 */

#include "wavearchive/catalog.hpp"
#include "wavearchive/core/error.hpp"
#include "wavearchive/core/fs.hpp"
#include "wavearchive/extract_model.hpp"
#include "wavearchive/pipeline.hpp"
#include "wavearchive/synthgen.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <iostream>
#include <random>
#include <thread>

namespace {

using namespace wavearchive;
namespace stdfs = std::filesystem;
using nlohmann::json;

constexpr int exit_ok = 0;
constexpr int exit_failure = 1;
constexpr int exit_partial = 2;

struct globals {
    std::string config_path;
    std::string day;
    bool json_out = false;

    pipeline::pipeline_config config() const {
        if (config_path.empty()) throw archive_error(error_code::config_invalid, "--config is required");
        return pipeline::pipeline_config::load(config_path);
    }
    std::optional<calendar_day> day_value() const {
        if (day.empty()) return std::nullopt;
        return parse_day(day);
    }
};

/// Accepts a day (`YYYY-MM-DD`, whole day) or a full timestamp.
timestamp parse_instant(const std::string& text, bool end_of_day) {
    if (text.size() == 10) {
        auto d = parse_day(text);
        return start_of(end_of_day ? d + std::chrono::days{1} : d);
    }
    return parse_timestamp(text);
}

std::string random_seed() {
    std::random_device rd;
    std::string out;
    const char* hex = "0123456789abcdef";
    for (int i = 0; i < 32; ++i) out.push_back(hex[rd() % 16]);
    return out;
}

// =============================================================================
// synth
// =============================================================================

struct synth_args {
    std::string out;
    std::string scenario;
    std::string profile;
    std::optional<std::uint64_t> seed;
    std::optional<int> days;
    std::optional<int> patients;
    std::string start_day;
    std::string deid_seed;
};

int cmd_synth(const globals& g, const synth_args& a) {
    auto c = a.scenario.empty() ? synthgen::scenario_config::for_profile(a.profile.empty() ? "default" : a.profile)
                                : synthgen::scenario_config::load(a.scenario);
    if (!a.scenario.empty() && !a.profile.empty()) {
        throw archive_error(error_code::config_invalid, "use either --scenario or --profile");
    }
    if (a.seed) c.seed = *a.seed;
    if (a.days) c.days = *a.days;
    if (a.patients) c.patients_per_day = *a.patients;
    if (!a.start_day.empty()) {
        c.start_day = parse_day(a.start_day);
    } else if (auto d = g.day_value()) {
        c.start_day = *d;
    }
    c.validate();

    const stdfs::path root(a.out);
    auto truths = synthgen::write_corpus(c, root);
    fs::write_atomic(root / "scenario.conf", c.render());
    if (!a.deid_seed.empty() || !stdfs::exists(root / "deid.seed")) {
        fs::write_atomic(root / "deid.seed", (a.deid_seed.empty() ? random_seed() : a.deid_seed) + "\n");
    }
    if (!stdfs::exists(root / "pipeline.conf")) {
        pipeline::pipeline_config p;
        p.extracts_root = "extracts";
        p.identified_root = "archive/identified";
        p.deid_root = "archive/deid";
        p.catalog_root = "archive/catalog";
        p.unit_map = "units.csv";
        p.birthdates = "birthdates.csv";
        p.identity_registry = "patients.csv";
        p.deid_seed = "file:deid.seed";
        p.worker_count = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
        fs::write_atomic(root / "pipeline.conf", p.render());
    }

    std::size_t segments = 0;
    for (const auto& t : truths) segments += t.segments.size();
    if (g.json_out) {
        json days = json::array();
        for (const auto& t : truths) days.push_back({{"day", format_day(t.day)}, {"segments", t.segments.size()}});
        std::cout << json{{"out", root.string()}, {"days", days}, {"segments", segments}}.dump(2) << "\n";
    } else {
        std::cout << "wrote " << truths.size() << " day(s), " << segments << " truth segments to " << root.string()
                  << "\n";
    }
    return exit_ok;
}

// =============================================================================
// verify
// =============================================================================

struct verify_args {
    std::vector<std::string> bundles;
    bool packs = false;
};

int cmd_verify(const globals& g, const verify_args& a) {
    std::vector<stdfs::path> dirs(a.bundles.begin(), a.bundles.end());
    std::optional<pipeline::pipeline_config> cfg;
    if (dirs.empty() || a.packs) cfg = g.config();
    if (dirs.empty()) {
        if (auto d = g.day_value()) {
            dirs.push_back(cfg->extracts_root / format_day(*d));
        } else if (stdfs::is_directory(cfg->extracts_root)) {
            for (const auto& e : stdfs::directory_iterator(cfg->extracts_root)) {
                if (e.is_directory()) dirs.push_back(e.path());
            }
            std::sort(dirs.begin(), dirs.end());
        }
    }

    json report = json::array();
    std::size_t bad = 0;
    for (const auto& dir : dirs) {
        json r{{"bundle", dir.string()}};
        try {
            auto outcome = extract::verify_bundle(dir);
            if (const auto* f = std::get_if<extract::integrity_failure>(&outcome)) {
                r["ok"] = false;
                r["issue"] = std::string(extract::to_string(f->issue));
                r["file"] = f->file_name;
                r["detail"] = f->detail;
            } else {
                r["ok"] = true;
            }
        } catch (const archive_error& e) {
            r["ok"] = false;
            r["issue"] = std::string(to_string(e.code()));
            r["file"] = (dir / extract::manifest_file).filename().string();
            r["detail"] = e.what();
        }
        if (!r["ok"].get<bool>()) ++bad;
        report.push_back(r);
    }
    if (a.packs) {
        const std::array<std::pair<stdfs::path, stdfs::path>, 2> catalogs{
            {{cfg->catalog_root, cfg->identified_root}, {cfg->deid_root / "catalog", cfg->deid_root}}};
        for (const auto& [cat, root] : catalogs) {
            auto problems = pipeline::verify_packs(cat, root);
            bad += problems.size();
            report.push_back({{"catalog", cat.string()}, {"ok", problems.empty()}, {"problems", problems}});
        }
    }

    if (g.json_out) {
        std::cout << report.dump(2) << "\n";
    } else {
        for (const auto& r : report) {
            if (r.contains("bundle")) {
                if (r["ok"].get<bool>()) {
                    std::cout << "OK   " << r["bundle"].get<std::string>() << "\n";
                } else {
                    std::cout << "FAIL " << r["bundle"].get<std::string>() << ": " << r["issue"].get<std::string>()
                              << " " << r["file"].get<std::string>();
                    if (!r["detail"].get<std::string>().empty()) std::cout << " (" << r["detail"].get<std::string>() << ")";
                    std::cout << "\n";
                }
            } else {
                std::cout << (r["ok"].get<bool>() ? "OK   " : "FAIL ") << r["catalog"].get<std::string>() << "\n";
                for (const auto& p : r["problems"]) std::cout << "     " << p.get<std::string>() << "\n";
            }
        }
    }
    return bad == 0 ? exit_ok : exit_failure;
}

// =============================================================================
// run-day / run-range
// =============================================================================

int cmd_run_day(const globals& g, const std::string& stop_after) {
    auto cfg = g.config();
    auto day = g.day_value();
    if (!day) throw archive_error(error_code::config_invalid, "run-day needs --day");
    pipeline::run_options opts;
    if (!stop_after.empty()) {
        opts.stop_after = pipeline::parse_phase(stop_after);
        if (!opts.stop_after) throw archive_error(error_code::config_invalid, "unknown phase '" + stop_after + "'");
    }
    auto out = pipeline::run_day(cfg, *day, opts);
    if (g.json_out) {
        std::cout << pipeline::render_outcome_json(out);
    } else {
        std::cout << format_day(*day) << ": ";
        if (out.state.failure) {
            std::cout << "failed in " << pipeline::to_string(out.state.failure->at) << " ("
                      << out.state.failure->code << ") " << out.state.failure->message << "\n";
        } else {
            std::cout << (out.state.completed ? pipeline::to_string(*out.state.completed) : "nothing") << ", "
                      << out.studies << " studies, " << out.executed.size() << " phase(s) run, "
                      << out.skipped.size() << " reused, " << out.warnings.size() << " warning(s)\n";
        }
    }
    if (out.state.failure) return exit_failure;
    return out.state.published() ? exit_ok : exit_partial;
}

struct range_args {
    std::string from;
    std::string to;
    int parallelism = 0;
};

int cmd_run_range(const globals& g, const range_args& a) {
    auto cfg = g.config();
    auto from = !a.from.empty() ? parse_day(a.from) : g.day_value();
    auto to = !a.to.empty() ? parse_day(a.to) : from;
    if (!from || !to) throw archive_error(error_code::config_invalid, "run-range needs --from (or --day)");
    auto summary = pipeline::run_range(cfg, *from, *to, a.parallelism > 0 ? a.parallelism : cfg.worker_count);
    if (g.json_out) {
        std::cout << pipeline::render_summary_json(summary);
    } else {
        for (const auto& e : summary.days) {
            std::cout << format_day(e.day) << " " << pipeline::to_string(e.status);
            if (e.outcome && e.outcome->state.failure) {
                const auto& f = *e.outcome->state.failure;
                std::cout << " in " << pipeline::to_string(f.at) << " (" << f.code << ") " << f.message;
            } else if (e.outcome) {
                std::cout << " " << e.outcome->studies << " studies";
            }
            std::cout << "\n";
        }
        std::cout << summary.count(pipeline::day_status::published) << " published, "
                  << summary.count(pipeline::day_status::failed) << " failed, "
                  << summary.count(pipeline::day_status::missing) << " missing\n";
    }
    return summary.exit_code();
}

// =============================================================================
// query / stats / audit
// =============================================================================

struct query_args {
    std::vector<std::string> patients, beds, units, waves;
    std::string from, to;
    bool deid = false;
};

int cmd_query(const globals& g, const query_args& a) {
    auto cfg = g.config();
    catalog::study_filter f;
    f.patients = a.patients;
    f.beds = a.beds;
    f.units = a.units;
    f.wave_symbols = a.waves;
    if (!a.from.empty() || !a.to.empty()) {
        f.range = time_range{a.from.empty() ? timestamp{} : parse_instant(a.from, false),
                             a.to.empty() ? timestamp::max() : parse_instant(a.to, true)};
    } else if (auto d = g.day_value()) {
        f.range = day_window(*d);
    }
    auto root = a.deid ? cfg.deid_root / "catalog" : cfg.catalog_root;
    auto flavor = a.deid ? catalog::flavor::deidentified : catalog::flavor::identified;
    auto rows = catalog::query_studies(catalog::load_catalog(root), f);
    if (g.json_out) {
        json out = json::array();
        for (const auto& r : rows) {
            out.push_back({{"study_id", r.study_id},
                           {a.deid ? "pseudo_id" : "mrn", r.patient},
                           {"lifetime_id_source", r.lifetime_id_source},
                           {"bed", r.bed},
                           {"clinical_unit", r.clinical_unit},
                           {"start", format_timestamp(r.start)},
                           {"end", format_timestamp(r.end)},
                           {"storage_path", r.storage_path},
                           {"linkage_method", r.linkage_method}});
        }
        std::cout << out.dump(2) << "\n";
    } else {
        std::cout << catalog::render_study_map(rows, flavor);
    }
    return exit_ok;
}

int cmd_stats(const globals& g, bool deid) {
    auto cfg = g.config();
    auto root = deid ? cfg.deid_root / "catalog" : cfg.catalog_root;
    std::map<std::string, calendar_day> births;
    if (!deid && cfg.birthdates) births = catalog::load_birthdates(*cfg.birthdates);
    auto c = catalog::load_catalog(root);
    auto problems = catalog::integrity_problems(c);
    auto s = catalog::summarize(c, births);
    std::cout << (g.json_out ? catalog::render_stats_json(s) : catalog::render_stats_text(s));
    for (const auto& p : problems) std::cerr << "integrity: " << p << "\n";
    return problems.empty() ? exit_ok : exit_failure;
}

int cmd_audit(const globals& g, const std::string& study_id) {
    auto lines = pipeline::study_audit(g.config(), study_id);
    if (g.json_out) {
        json out = json::array();
        for (const auto& l : lines) out.push_back(json::parse(l));
        std::cout << out.dump(2) << "\n";
    } else {
        for (const auto& l : lines) std::cout << l << "\n";
    }
    return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bedside-monitor waveform archive pipeline"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand
    globals g;
    app.add_option("--config", g.config_path, "Pipeline config file (key = value)");
    app.add_option("--day", g.day, "Calendar day YYYY-MM-DD");
    app.add_flag("--json", g.json_out, "Machine-readable output");

    synth_args sa;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus with ground truth");
    synth->add_option("--out", sa.out, "Output directory")->required();
    synth->add_option("--scenario", sa.scenario, "Scenario file (key = value)");
    synth->add_option("--profile", sa.profile, "default, paper or clean");
    synth->add_option("--seed", sa.seed, "Generator seed");
    synth->add_option("--days", sa.days, "Number of days");
    synth->add_option("--patients", sa.patients, "Patients per day");
    synth->add_option("--start-day", sa.start_day, "First day (same as --day)");
    synth->add_option("--deid-seed", sa.deid_seed, "Secret written to deid.seed (random when absent)");

    verify_args va;
    auto* verify = app.add_subcommand("verify", "Check bundle manifests and packed studies");
    verify->add_option("--bundle", va.bundles, "Bundle directory (repeatable); default: every bundle");
    verify->add_flag("--packs", va.packs, "Also check every packed study listed in the catalogs");

    std::string stop_after;
    auto* run_day = app.add_subcommand("run-day", "Process one day");
    run_day->add_option("--stop-after", stop_after, "Stop after this phase (fault injection)");

    range_args ra;
    auto* run_range = app.add_subcommand("run-range", "Process a range of days");
    run_range->add_option("--from", ra.from, "First day");
    run_range->add_option("--to", ra.to, "Last day (inclusive)");
    run_range->add_option("--parallelism", ra.parallelism, "Days processed at once (default worker_count)");

    query_args qa;
    auto* query = app.add_subcommand("query", "Filter the study catalog");
    query->add_option("--patient", qa.patients, "MRN or pseudo id (repeatable)");
    query->add_option("--bed", qa.beds, "Bed (repeatable)");
    query->add_option("--unit", qa.units, "Clinical unit (repeatable)");
    query->add_option("--wave", qa.waves, "Wave symbol that must be present (repeatable)");
    query->add_option("--from", qa.from, "Range start, day or timestamp");
    query->add_option("--to", qa.to, "Range end, day (inclusive) or timestamp");
    query->add_flag("--deid", qa.deid, "Query the de-identified catalog");

    bool stats_deid = false;
    auto* stats = app.add_subcommand("stats", "Archive summary");
    stats->add_flag("--deid", stats_deid, "Summarize the de-identified catalog");

    std::string study_id;
    auto* audit = app.add_subcommand("audit", "Linkage audit for one study");
    audit->add_option("study_id", study_id, "Identified study id")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? exit_ok : exit_failure;
    }

    try {
        if (synth->parsed()) return cmd_synth(g, sa);
        if (verify->parsed()) return cmd_verify(g, va);
        if (run_day->parsed()) return cmd_run_day(g, stop_after);
        if (run_range->parsed()) return cmd_run_range(g, ra);
        if (query->parsed()) return cmd_query(g, qa);
        if (stats->parsed()) return cmd_stats(g, stats_deid);
        if (audit->parsed()) return cmd_audit(g, study_id);
    } catch (const archive_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_failure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_failure;
    }
    return exit_failure;
}
