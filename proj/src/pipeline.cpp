/**
 * @file pipeline.cpp
 * @brief Phase runner, state checkpoints, range scheduling and archive digests
 */

#include "wavearchive/pipeline.hpp"

#include "wavearchive/catalog.hpp"
#include "wavearchive/core/csv.hpp"
#include "wavearchive/core/digest.hpp"
#include "wavearchive/core/error.hpp"
#include "wavearchive/core/fs.hpp"
#include "wavearchive/core/kv.hpp"
#include "wavearchive/core/zip.hpp"
#include "wavearchive/deid.hpp"
#include "wavearchive/extract_model.hpp"
#include "wavearchive/linkage.hpp"
#include "wavearchive/segmentation.hpp"
#include "wavearchive/signal_store.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>

namespace wavearchive::pipeline {

namespace stdfs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& what) {
    throw archive_error(error_code::config_invalid, "pipeline config: " + what);
}

constexpr std::array<std::string_view, phase_count> phase_names{
    "verified", "parsed", "linked", "segmented", "written", "deidentified", "published"};

constexpr std::array<phase, phase_count> all_phases{phase::verified,  phase::parsed,       phase::linked,
                                                   phase::segmented, phase::written,      phase::deidentified,
                                                   phase::published};

constexpr std::array<std::string_view, 4> catalog_tables{"study_map", "study_details", "waveform_manifest",
                                                         "linkage_audit"};

bool is_persisted(phase p) { return p >= phase::written; }

/// Runs fn(0..n-1) on up to `workers` threads. Every index runs; the error
/// of the lowest failing index is rethrown so the report does not depend
/// on scheduling.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
    std::vector<std::exception_ptr> errors(n);
    auto threads = std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), n);
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t) {
            pool.emplace_back([&] {
                for (auto i = next++; i < n; i = next++) {
                    try {
                        fn(i);
                    } catch (...) {
                        errors[i] = std::current_exception();
                    }
                }
            });
        }
        for (auto& th : pool) th.join();
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

void add_tree(digest::accumulator& acc, const stdfs::path& root, std::string_view label) {
    acc.add(label);
    if (!stdfs::is_directory(root)) {
        acc.add("-");
        return;
    }
    for (const auto& rel : fs::list_files(root)) {
        acc.add(rel.generic_string());
        acc.add(digest::sha256_file_hex(root / rel));
    }
}

std::vector<std::string> subdirectories(const stdfs::path& root) {
    std::vector<std::string> out;
    if (!stdfs::is_directory(root)) return out;
    for (const auto& e : stdfs::directory_iterator(root)) {
        if (e.is_directory()) out.push_back(e.path().filename().string());
    }
    std::sort(out.begin(), out.end());
    return out;
}

stdfs::path resolve(const std::string& value, const stdfs::path& base) {
    stdfs::path p(value);
    return p.is_absolute() ? p.lexically_normal() : (base / p).lexically_normal();
}

bool nested(const stdfs::path& a, const stdfs::path& b) {
    auto ia = a.begin();
    auto ib = b.begin();
    for (; ia != a.end() && ib != b.end(); ++ia, ++ib) {
        if (ia->empty() || ib->empty()) break;
        if (*ia != *ib) return false;
    }
    return true;
}

std::string now_text() {
    return format_timestamp(std::chrono::time_point_cast<millis>(std::chrono::system_clock::now()));
}

/// Error raised inside a phase, with the code name it reports under.
struct phase_error : std::runtime_error {
    phase_error(std::string code_name, const std::string& message)
        : std::runtime_error(message), code(std::move(code_name)) {}
    std::string code;
};

/// Appends JSON lines to the day's run log.
class run_log {
public:
    run_log(stdfs::path path, calendar_day day) : path_(std::move(path)), day_(format_day(day)) {
        stdfs::create_directories(path_.parent_path());
    }

    void write(std::string_view event, std::optional<phase> p, json extra = json::object()) {
        json j{{"ts", now_text()}, {"day", day_}, {"event", event}};
        if (p) j["phase"] = std::string(to_string(*p));
        for (auto& [k, v] : extra.items()) j[k] = v;
        std::lock_guard lock(mutex_);
        std::FILE* f = std::fopen(path_.c_str(), "ab");
        if (!f) return;  // logging never fails a run
        auto line = j.dump() + "\n";
        std::fwrite(line.data(), 1, line.size(), f);
        std::fclose(f);
    }

private:
    stdfs::path path_;
    std::string day_;
    std::mutex mutex_;
};

/// Every path a day touches.
struct day_layout {
    std::string part;   ///< day=YYYY-MM-DD
    std::string batch;  ///< batch=<token>
    std::string token;
    stdfs::path bundle;
    stdfs::path studies, packed;
    stdfs::path deid_studies, deid_packed, deid_catalog;
    stdfs::path written_staging, deid_staging;

    day_layout(const pipeline_config& c, calendar_day day, std::string_view seed)
        : part(catalog::day_partition(day)), token(deid::batch_token(day, seed)) {
        batch = "batch=" + token;
        bundle = c.extracts_root / format_day(day);
        studies = c.identified_root / "studies" / part;
        packed = c.identified_root / "packed" / part;
        deid_studies = c.deid_root / "studies" / batch;
        deid_packed = c.deid_root / "packed" / batch;
        deid_catalog = c.deid_root / "catalog";
        written_staging = c.identified_root / ".staging" / part;
        deid_staging = c.deid_root / ".staging" / batch;
    }
};

void move_tree(const stdfs::path& from, const stdfs::path& to) {
    stdfs::remove_all(to);
    stdfs::create_directories(to.parent_path());
    std::error_code ec;
    stdfs::rename(from, to, ec);
    if (ec) {  // different file systems
        stdfs::copy(from, to, stdfs::copy_options::recursive);
        stdfs::remove_all(from);
    }
}

void load_registry_terms(const stdfs::path& path, deid::scrub_list& scrub) {
    auto rows = csv::read_file(path);
    if (rows.empty() || rows[0].fields != std::vector<std::string>{"mrn", "name", "visit_id"}) {
        invalid("identity registry " + path.string() + " must have header mrn,name,visit_id");
    }
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& f = rows[i].fields;
        if (f.size() != 3) invalid("identity registry line " + std::to_string(rows[i].line) + " needs 3 fields");
        if (!f[0].empty()) scrub.add_identifier(f[0]);
        if (!f[1].empty()) scrub.add_name(f[1]);
        if (!f[2].empty()) scrub.add_identifier(f[2]);
    }
}

/**
 * @brief One run of one day
 *
 * Holds the recomputed in-memory products of the read-only phases and the
 * bookkeeping for deciding which persisted phases can be reused.
 */
class day_runner {
public:
    day_runner(const pipeline_config& c, calendar_day day, const run_options& options)
        : c_(c), day_(day), options_(options), seed_(c.resolve_seed()), layout_(c, day, seed_),
          log_(log_path(c, day), day) {
        bed_map_ = c.bed_map ? linkage::bed_label_map::load(*c.bed_map) : linkage::bed_label_map{};
        bed_map_.strict = c.strict_labels;
        if (c.unit_map) units_ = catalog::unit_map::load(*c.unit_map);
    }

    day_outcome run() {
        fs::lock_file lock(c_.identified_root / ".locks" / (layout_.part + ".lock"), std::chrono::minutes{30});
        auto path = state_path(c_, day_);
        if (stdfs::exists(path)) {
            try {
                prior_ = parse_state(fs::read_text(path));
            } catch (const archive_error&) {
                prior_ = day_run_state{};  // unreadable checkpoint: start over
            }
        }
        out_.state.day = day_;
        log_.write("start", std::nullopt, {{"resume_from", prior_.completed ? json(std::string(to_string(*prior_.completed))) : json(nullptr)}});

        bool chain = true;  // every earlier phase matches the checkpoint
        for (auto p : all_phases) {
            std::string digest_hex;
            try {
                auto recorded = prior_.digests.find(p);
                if (is_persisted(p) && chain && recorded != prior_.digests.end() &&
                    on_disk_digest(p) == recorded->second) {
                    digest_hex = recorded->second;
                    out_.skipped.push_back(p);
                    log_.write("skip", p, {{"digest", digest_hex}});
                } else {
                    digest_hex = execute(p);
                    out_.executed.push_back(p);
                    log_.write("done", p, {{"digest", digest_hex}});
                }
            } catch (const phase_error& e) {
                return fail(p, e.code, e.what());
            } catch (const archive_error& e) {
                return fail(p, std::string(wavearchive::to_string(e.code())), e.what());
            } catch (const std::filesystem::filesystem_error& e) {
                return fail(p, "IoError", e.what());
            } catch (const std::exception& e) {
                return fail(p, "InternalError", e.what());
            }
            auto recorded = prior_.digests.find(p);
            chain = chain && recorded != prior_.digests.end() && recorded->second == digest_hex;
            out_.state.digests[p] = digest_hex;
            out_.state.completed = p;
            save_state();
            if (options_.stop_after == p) {
                log_.write("stop", p);
                return std::move(out_);
            }
        }
        log_.write("finish", phase::published, {{"studies", out_.studies}, {"warnings", out_.warnings.size()}});
        return std::move(out_);
    }

private:
    std::string execute(phase p) {
        switch (p) {
            case phase::verified: return verify();
            case phase::parsed: return parse();
            case phase::linked: return link();
            case phase::segmented: return segment();
            case phase::written: return write();
            case phase::deidentified: return deidentify();
            case phase::published: return publish();
        }
        throw std::logic_error("unknown phase");
    }

    std::string on_disk_digest(phase p) const {
        digest::accumulator acc;
        switch (p) {
            case phase::written:
                add_tree(acc, layout_.studies, "studies");
                add_tree(acc, layout_.packed, "packed");
                break;
            case phase::deidentified:
                add_tree(acc, layout_.deid_studies, "studies");
                add_tree(acc, layout_.deid_packed, "packed");
                break;
            case phase::published:
                for (auto t : catalog_tables) add_tree(acc, c_.catalog_root / t / layout_.part, t);
                for (auto t : catalog_tables) add_tree(acc, layout_.deid_catalog / t / layout_.batch, t);
                break;
            default: throw std::logic_error("phase has no outputs");
        }
        return acc.hex();
    }

    std::string verify() {
        auto outcome = extract::verify_bundle(layout_.bundle);
        if (const auto* f = std::get_if<extract::integrity_failure>(&outcome)) {
            std::string msg = std::string(extract::to_string(f->issue)) + " " + f->file_name;
            if (!f->detail.empty()) msg += ": " + f->detail;
            throw phase_error("IntegrityFailure", msg);
        }
        verified_ = std::get<extract::verified_bundle>(std::move(outcome));
        return digest::sha256_file_hex(layout_.bundle / extract::manifest_file);
    }

    std::string parse() {
        bundle_ = extract::parse_extract_day(*verified_);
        auto counts = extract::validate_row_counts(bundle_);
        if (counts.ok == false) {
            for (const auto& e : counts.entries) {
                if (e.match == false) {
                    warn("CountMismatch", std::string(extract::table_name(e.table)) + " declared " +
                                              std::to_string(*e.declared) + " found " + std::to_string(e.actual));
                }
            }
        }
        digest::accumulator acc;
        for (auto t : extract::all_tables) acc.add(extract::render_table(bundle_, t));
        return acc.hex();
    }

    std::string link() {
        linked_ = linkage::link_day(bundle_, bed_map_);
        for (const auto& w : linked_.report.warnings) warn(w.kind, w.message);
        audit_ = linkage::render_audit_jsonl(linked_.results);
        return digest::sha256_hex(audit_);
    }

    std::string segment() {
        auto filled = segmentation::fill_studies(segmentation::plan_studies(linked_.results, day_), bundle_);
        studies_ = std::move(filled.studies);
        const auto& o = filled.orphans;
        if (!o.empty()) {
            warn("OrphanData", std::to_string(o.numerics.size()) + " numerics, " +
                                   std::to_string(o.wave_pieces.size()) + " wave pieces, " +
                                   std::to_string(o.alerts.size()) + " alerts, " +
                                   std::to_string(o.enumerations.size()) + " enumerations outside every study");
        }
        out_.studies = studies_.size();
        digest::accumulator acc;
        for (const auto& s : studies_) {
            acc.add(s.study_id).add(s.mrn.value_or("-")).add(s.bed_label);
            acc.add(format_timestamp(s.range.start)).add(format_timestamp(s.range.end));
            acc.add(linkage::to_string(s.method));
            for (const auto& w : s.waves) acc.add(w.symbol).add(std::to_string(s.sample_count(w.symbol)));
            acc.add(std::to_string(s.numerics.size()))
                .add(std::to_string(s.alerts.size()))
                .add(std::to_string(s.enumerations.size()));
        }
        return acc.hex();
    }

    std::string write() {
        const auto& stage = layout_.written_staging;
        stdfs::remove_all(stage);
        stdfs::create_directories(stage / "studies");
        stdfs::create_directories(stage / "packed");
        parallel_for(studies_.size(), c_.worker_count, [&](std::size_t i) {
            const auto& s = studies_[i];
            auto dir = stage / "studies" / s.study_id;
            signal_store::write_study(s, dir);
            signal_store::pack_study(dir, stage / "packed" / (s.study_id + ".zip"));
        });
        fs::replace_directory(stage / "studies", layout_.studies);
        fs::replace_directory(stage / "packed", layout_.packed);
        stdfs::remove_all(stage);
        return on_disk_digest(phase::written);
    }

    std::string deidentify() {
        auto ids = subdirectories(layout_.studies);
        std::vector<std::string> mrns;
        deid::scrub_list scrub = deid::scrub_list::from_events(bundle_.adt_events);
        for (const auto& log : bundle_.device_logs) scrub.add_identifier(log.encounter_id);
        if (c_.identity_registry) load_registry_terms(*c_.identity_registry, scrub);
        for (const auto& id : ids) {
            auto d = signal_store::read_details(layout_.studies / id);
            if (d.mrn) {
                mrns.push_back(*d.mrn);
                scrub.add_identifier(*d.mrn);
            }
        }
        auto map = deid::deid_map::update(c_.identified_root / deid::map_file_name, seed_, mrns);

        const auto& stage = layout_.deid_staging;
        stdfs::remove_all(stage);
        stdfs::create_directories(stage / "studies");
        stdfs::create_directories(stage / "packed");
        parallel_for(ids.size(), c_.worker_count, [&](std::size_t i) {
            auto d = deid::deidentify_study(layout_.studies / ids[i], stage / "studies", map, seed_, scrub);
            signal_store::pack_study(stage / "studies" / d.study_id, stage / "packed" / (d.study_id + ".zip"));
        });
        if (subdirectories(stage / "studies").size() != ids.size()) {
            throw phase_error("IncompleteStudy", "two studies share one de-identified id");
        }
        fs::replace_directory(stage / "studies", layout_.deid_studies);
        fs::replace_directory(stage / "packed", layout_.deid_packed);
        stdfs::remove_all(stage);
        return on_disk_digest(phase::deidentified);
    }

    std::vector<catalog::packed_study> collect(const stdfs::path& studies, const stdfs::path& packed,
                                               const std::string& rel_packed) const {
        std::vector<catalog::packed_study> out;
        for (const auto& id : subdirectories(studies)) {
            catalog::packed_study ps;
            ps.details = signal_store::read_details(studies / id);
            auto zip = packed / (id + ".zip");
            ps.storage_path = rel_packed + "/" + id + ".zip";
            if (stdfs::exists(zip)) {
                ps.pack = signal_store::pack_result{zip, stdfs::file_size(zip), digest::sha256_file_hex(zip)};
            }
            out.push_back(std::move(ps));
        }
        return out;
    }

    std::string publish() {
        auto ident = collect(layout_.studies, layout_.packed, "packed/" + layout_.part);
        auto deid = collect(layout_.deid_studies, layout_.deid_packed, "packed/" + layout_.batch);
        auto ident_part = catalog::build_partition(layout_.part, format_day(day_), ident, units_, audit_);
        auto deid_part = catalog::build_partition(layout_.batch, layout_.token, deid, units_);
        catalog::publish_partition(c_.catalog_root, ident_part, catalog::flavor::identified);
        catalog::publish_partition(layout_.deid_catalog, deid_part, catalog::flavor::deidentified);
        return on_disk_digest(phase::published);
    }

    day_outcome fail(phase p, const std::string& code, const std::string& message) {
        out_.state.failure = failure_report{p, code, message};
        stdfs::path staging;
        if (p == phase::written) staging = layout_.written_staging;
        if (p == phase::deidentified) staging = layout_.deid_staging;
        if (!staging.empty() && stdfs::exists(staging)) {
            try {
                move_tree(staging, quarantine_dir(c_, day_) / std::string(to_string(p)));
            } catch (const std::exception& e) {
                warn("QuarantineFailed", e.what());
            }
        }
        try {
            save_state();
        } catch (const std::exception& e) {
            warn("StateWriteFailed", e.what());
        }
        log_.write("fail", p, {{"code", code}, {"message", message}});
        return std::move(out_);
    }

    void save_state() {
        auto path = state_path(c_, day_);
        auto text = render_state(out_.state);
        if (stdfs::exists(path) && fs::read_text(path) == text) return;
        fs::write_atomic(path, text);
    }

    void warn(const std::string& kind, const std::string& message) {
        out_.warnings.push_back(kind + ": " + message);
    }

    const pipeline_config& c_;
    calendar_day day_;
    run_options options_;
    std::string seed_;
    day_layout layout_;
    run_log log_;
    linkage::bed_label_map bed_map_;
    catalog::unit_map units_;

    day_run_state prior_;
    day_outcome out_;
    std::optional<extract::verified_bundle> verified_;
    extract::extract_bundle bundle_;
    linkage::day_linkage linked_;
    std::string audit_;
    std::vector<segmentation::study> studies_;
};

json state_json(const day_run_state& s) {
    json digests = json::object();
    for (const auto& [p, d] : s.digests) digests[std::string(to_string(p))] = d;
    json j{{"day", format_day(s.day)},
           {"phase", s.completed ? json(std::string(to_string(*s.completed))) : json(nullptr)},
           {"digests", digests}};
    if (s.failure) {
        j["failure"] = {{"phase", std::string(to_string(s.failure->at))},
                        {"code", s.failure->code},
                        {"message", s.failure->message}};
    } else {
        j["failure"] = nullptr;
    }
    return j;
}

json outcome_json(const day_outcome& o) {
    auto j = state_json(o.state);
    auto names = [](const std::vector<phase>& ps) {
        json a = json::array();
        for (auto p : ps) a.push_back(std::string(to_string(p)));
        return a;
    };
    j["executed"] = names(o.executed);
    j["skipped"] = names(o.skipped);
    j["studies"] = o.studies;
    j["warnings"] = o.warnings;
    return j;
}

}  // namespace

// =============================================================================
// Config
// =============================================================================

void pipeline_config::validate() const {
    const std::array<std::pair<const char*, const stdfs::path*>, 4> roots{{{"extracts_root", &extracts_root},
                                                                           {"identified_root", &identified_root},
                                                                           {"deid_root", &deid_root},
                                                                           {"catalog_root", &catalog_root}}};
    for (const auto& [name, p] : roots) {
        if (p->empty()) invalid(std::string(name) + " is required");
    }
    for (std::size_t i = 0; i < roots.size(); ++i) {
        for (std::size_t j = i + 1; j < roots.size(); ++j) {
            auto a = stdfs::weakly_canonical(*roots[i].second);
            auto b = stdfs::weakly_canonical(*roots[j].second);
            if (nested(a, b)) {
                invalid(std::string(roots[i].first) + " and " + roots[j].first + " must not overlap");
            }
        }
    }
    if (worker_count < 1) invalid("worker_count must be at least 1");
    if (deid_seed.rfind("file:", 0) != 0 && deid_seed.rfind("env:", 0) != 0) {
        invalid("deid_seed must be file:<path> or env:<NAME>");
    }
}

std::string pipeline_config::resolve_seed() const {
    std::string seed;
    if (deid_seed.rfind("env:", 0) == 0) {
        const char* v = std::getenv(deid_seed.substr(4).c_str());
        if (!v) invalid("environment variable " + deid_seed.substr(4) + " is not set");
        seed = v;
    } else if (deid_seed.rfind("file:", 0) == 0) {
        auto path = stdfs::path(deid_seed.substr(5));
        if (!stdfs::exists(path)) invalid("seed file " + path.string() + " does not exist");
        seed = fs::read_text(path);
    } else {
        invalid("deid_seed must be file:<path> or env:<NAME>");
    }
    while (!seed.empty() && (seed.back() == '\n' || seed.back() == '\r' || seed.back() == ' ')) seed.pop_back();
    if (seed.empty()) invalid("deid seed is empty");
    return seed;
}

pipeline_config pipeline_config::parse(std::string_view text, const stdfs::path& base_dir) {
    kv::reader r(kv::parse(text));
    pipeline_config c;
    auto path_of = [&](const char* key) -> std::optional<stdfs::path> {
        if (!r.has(key)) return std::nullopt;
        auto v = r.text(key, "");
        if (v.empty()) invalid(std::string(key) + " is empty");
        return resolve(v, base_dir);
    };
    c.extracts_root = path_of("extracts_root").value_or(stdfs::path{});
    c.identified_root = path_of("identified_root").value_or(stdfs::path{});
    c.deid_root = path_of("deid_root").value_or(stdfs::path{});
    c.catalog_root = path_of("catalog_root").value_or(stdfs::path{});
    c.bed_map = path_of("bed_map");
    c.unit_map = path_of("unit_map");
    c.birthdates = path_of("birthdates");
    c.identity_registry = path_of("identity_registry");
    c.deid_seed = r.text("deid_seed", "");
    if (c.deid_seed.rfind("file:", 0) == 0) {
        c.deid_seed = "file:" + resolve(c.deid_seed.substr(5), base_dir).string();
    }
    auto workers = r.integer("worker_count", 1);
    if (workers < 1 || workers > 256) invalid("worker_count must be in [1, 256]");
    c.worker_count = static_cast<int>(workers);
    auto mode = r.text("label_mode", "lenient");
    if (mode != "lenient" && mode != "strict") invalid("label_mode must be lenient or strict");
    c.strict_labels = mode == "strict";
    r.reject_unknown();
    c.validate();
    return c;
}

pipeline_config pipeline_config::load(const stdfs::path& path) {
    auto abs = stdfs::absolute(path);
    return parse(fs::read_text(abs), abs.parent_path());
}

std::string pipeline_config::render() const {
    std::string out;
    auto line = [&](const char* key, const std::string& value) { out += std::string(key) + " = " + value + "\n"; };
    line("extracts_root", extracts_root.string());
    line("identified_root", identified_root.string());
    line("deid_root", deid_root.string());
    line("catalog_root", catalog_root.string());
    if (bed_map) line("bed_map", bed_map->string());
    if (unit_map) line("unit_map", unit_map->string());
    if (birthdates) line("birthdates", birthdates->string());
    if (identity_registry) line("identity_registry", identity_registry->string());
    line("deid_seed", deid_seed);
    line("worker_count", std::to_string(worker_count));
    line("label_mode", strict_labels ? "strict" : "lenient");
    return out;
}

// =============================================================================
// State
// =============================================================================

std::string_view to_string(phase p) noexcept { return phase_names[static_cast<std::size_t>(p)]; }

std::optional<phase> parse_phase(std::string_view text) noexcept {
    for (auto p : all_phases) {
        if (to_string(p) == text) return p;
    }
    return std::nullopt;
}

std::string render_state(const day_run_state& s) { return state_json(s).dump(2) + "\n"; }

day_run_state parse_state(std::string_view text) {
    auto bad = [](const std::string& what) {
        return archive_error(error_code::schema_violation, "state file: " + what);
    };
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw bad(e.what());
    }
    try {
        day_run_state s;
        s.day = parse_day(j.at("day").get<std::string>());
        if (!j.at("phase").is_null()) {
            auto p = parse_phase(j.at("phase").get<std::string>());
            if (!p) throw bad("unknown phase");
            s.completed = p;
        }
        for (auto& [k, v] : j.at("digests").items()) {
            auto p = parse_phase(k);
            if (!p) throw bad("unknown phase " + k);
            auto d = v.get<std::string>();
            if (!digest::is_sha256_hex(d)) throw bad("bad digest for " + k);
            s.digests[*p] = d;
        }
        for (const auto& [p, d] : s.digests) {
            if (!s.completed || p > *s.completed) throw bad("digest recorded past the completed phase");
        }
        if (j.contains("failure") && !j.at("failure").is_null()) {
            const auto& f = j.at("failure");
            auto p = parse_phase(f.at("phase").get<std::string>());
            if (!p) throw bad("unknown failure phase");
            s.failure = failure_report{*p, f.at("code").get<std::string>(), f.at("message").get<std::string>()};
        }
        return s;
    } catch (const json::exception& e) {
        throw bad(e.what());
    } catch (const archive_error& e) {
        if (e.code() == error_code::schema_violation) throw;
        throw bad(e.what());
    }
}

stdfs::path state_path(const pipeline_config& c, calendar_day day) {
    return c.identified_root / "state" / catalog::day_partition(day) / "state.json";
}

stdfs::path log_path(const pipeline_config& c, calendar_day day) {
    return c.identified_root / "logs" / catalog::day_partition(day) / "run.jsonl";
}

stdfs::path quarantine_dir(const pipeline_config& c, calendar_day day) {
    return c.identified_root / "quarantine" / catalog::day_partition(day);
}

// =============================================================================
// Running
// =============================================================================

day_outcome run_day(const pipeline_config& config, calendar_day day, const run_options& options) {
    config.validate();
    return day_runner(config, day, options).run();
}

std::string_view to_string(day_status s) noexcept {
    switch (s) {
        case day_status::published: return "published";
        case day_status::stopped: return "stopped";
        case day_status::failed: return "failed";
        case day_status::missing: return "missing";
    }
    return "unknown";
}

std::size_t range_summary::count(day_status s) const {
    return static_cast<std::size_t>(
        std::count_if(days.begin(), days.end(), [&](const range_entry& e) { return e.status == s; }));
}

int range_summary::exit_code() const {
    auto ok = count(day_status::published);
    if (ok == days.size()) return 0;
    return ok == 0 ? 1 : 2;
}

range_summary run_range(const pipeline_config& config, calendar_day from, calendar_day to, int parallelism,
                        const run_options& options) {
    config.validate();
    if (parallelism < 1) invalid("parallelism must be at least 1");
    range_summary summary;
    for (auto d = from; d <= to; d += std::chrono::days{1}) {
        range_entry e;
        e.day = d;
        e.status = stdfs::is_directory(config.extracts_root / format_day(d)) ? day_status::stopped
                                                                               : day_status::missing;
        summary.days.push_back(std::move(e));
    }
    std::vector<std::size_t> work;
    for (std::size_t i = 0; i < summary.days.size(); ++i) {
        if (summary.days[i].status != day_status::missing) work.push_back(i);
    }
    parallel_for(work.size(), parallelism, [&](std::size_t k) {
        auto& e = summary.days[work[k]];
        e.outcome = run_day(config, e.day, options);
        if (e.outcome->state.failure) {
            e.status = day_status::failed;
        } else if (e.outcome->state.published()) {
            e.status = day_status::published;
        } else {
            e.status = day_status::stopped;
        }
    });
    return summary;
}

std::string render_outcome_json(const day_outcome& o) { return outcome_json(o).dump(2) + "\n"; }

std::string render_summary_json(const range_summary& s) {
    json days = json::array();
    for (const auto& e : s.days) {
        json j = e.outcome ? outcome_json(*e.outcome) : json{{"day", format_day(e.day)}};
        j["status"] = std::string(to_string(e.status));
        days.push_back(std::move(j));
    }
    json j{{"days", days},
           {"published", s.count(day_status::published)},
           {"failed", s.count(day_status::failed)},
           {"missing", s.count(day_status::missing)},
           {"stopped", s.count(day_status::stopped)},
           {"exit_code", s.exit_code()}};
    return j.dump(2) + "\n";
}

// =============================================================================
// Checks
// =============================================================================

std::string archive_digest(const pipeline_config& config) {
    digest::accumulator acc;
    add_tree(acc, config.identified_root / "studies", "identified/studies");
    add_tree(acc, config.identified_root / "packed", "identified/packed");
    auto map = config.identified_root / deid::map_file_name;
    acc.add("deid_map").add(stdfs::exists(map) ? digest::sha256_file_hex(map) : "-");
    for (auto t : catalog_tables) add_tree(acc, config.catalog_root / t, std::string("catalog/") + std::string(t));
    for (const auto* sub : {"studies", "packed", "catalog"}) {
        acc.add(std::string("deid/") + sub);
        if (!stdfs::is_directory(config.deid_root / sub)) {
            acc.add("-");
            continue;
        }
        for (const auto& rel : fs::list_files(config.deid_root / sub)) {
            auto first = rel.begin()->string();
            if (!first.empty() && first[0] == '.') continue;  // locks and staging
            acc.add(rel.generic_string()).add(digest::sha256_file_hex(config.deid_root / sub / rel));
        }
    }
    return acc.hex();
}

std::vector<std::string> verify_packs(const stdfs::path& catalog_root, const stdfs::path& archive_root) {
    std::vector<std::string> problems;
    auto c = catalog::load_catalog(catalog_root);
    std::map<std::string, std::string> storage;  // zip name -> path under the archive root
    for (const auto& row : c.all_studies()) storage[stdfs::path(row.storage_path).filename().string()] = row.storage_path;
    for (const auto& m : c.manifest) {
        auto it = storage.find(m.zip);
        if (it == storage.end()) {
            problems.push_back(m.zip + ": no study points at it");
            continue;
        }
        if (!fs::is_safe_relative(it->second)) {
            problems.push_back(m.zip + ": unsafe storage path");
            continue;
        }
        auto path = archive_root / it->second;
        if (!stdfs::exists(path)) {
            problems.push_back(it->second + ": missing");
            continue;
        }
        auto bytes = fs::read_text(path);
        if (bytes.size() != m.size_bytes) {
            problems.push_back(it->second + ": size " + std::to_string(bytes.size()) + " != " +
                               std::to_string(m.size_bytes));
            continue;
        }
        if (digest::sha256_hex(bytes) != m.sha256) {
            problems.push_back(it->second + ": checksum mismatch");
            continue;
        }
        try {
            zip::decode(bytes);
        } catch (const archive_error& e) {
            problems.push_back(it->second + ": " + e.what());
        }
    }
    return problems;
}

std::vector<std::string> study_audit(const pipeline_config& config, const std::string& study_id) {
    auto c = catalog::load_catalog(config.catalog_root);
    for (const auto& part : c.partitions) {
        for (const auto& row : c.study_map.at(part)) {
            if (row.study_id != study_id) continue;
            auto details = signal_store::read_details(config.identified_root / "studies" / part / study_id);
            auto audit_path = config.catalog_root / "linkage_audit" / part / "part.jsonl";
            std::vector<std::string> out;
            if (!stdfs::exists(audit_path)) return out;
            auto text = fs::read_text(audit_path);
            std::size_t pos = 0;
            while (pos < text.size()) {
                auto end = text.find('\n', pos);
                if (end == std::string::npos) end = text.size();
                auto line = text.substr(pos, end - pos);
                pos = end + 1;
                if (line.empty()) continue;
                auto j = json::parse(line);
                if (j.at("monitor_patient_id") != details.monitor_patient_id.value_or("")) continue;
                if (j.at("emr_bed_label") != row.bed) continue;
                time_range seg{parse_timestamp(j.at("start").get<std::string>()),
                               parse_timestamp(j.at("end").get<std::string>())};
                if (seg.start < row.end && row.start < seg.end) out.push_back(line);
            }
            return out;
        }
    }
    throw archive_error(error_code::schema_violation, "study " + study_id + " is not in the catalog");
}

}  // namespace wavearchive::pipeline
