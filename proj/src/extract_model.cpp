/**
 * @file extract_model.cpp
 * @brief Bundle manifest, verification and table parsing
 */

#include "wavearchive/extract_model.hpp"

#include "wavearchive/core/csv.hpp"
#include "wavearchive/core/digest.hpp"
#include "wavearchive/core/error.hpp"
#include "wavearchive/core/fs.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <unordered_set>

namespace wavearchive::extract {

namespace stdfs = std::filesystem;

// =============================================================================
// Names and enums
// =============================================================================

std::string_view table_name(table_kind t) noexcept {
    switch (t) {
        case table_kind::numerics: return "numerics";
        case table_kind::wave_samples: return "wave_samples";
        case table_kind::enumerations: return "enumerations";
        case table_kind::alerts: return "alerts";
        case table_kind::device_logs: return "device_logs";
        case table_kind::adt_events: return "adt_events";
    }
    return "";
}

std::string_view table_file(table_kind t) noexcept {
    switch (t) {
        case table_kind::numerics: return "numerics.csv";
        case table_kind::wave_samples: return "wave_samples.csv";
        case table_kind::enumerations: return "enumerations.csv";
        case table_kind::alerts: return "alerts.csv";
        case table_kind::device_logs: return "device_logs.csv";
        case table_kind::adt_events: return "adt_events.csv";
    }
    return "";
}

std::optional<table_kind> table_from_name(std::string_view name) noexcept {
    for (auto t : all_tables) {
        if (table_name(t) == name) return t;
    }
    return std::nullopt;
}

const std::vector<std::string>& table_header(table_kind t) {
    static const std::vector<std::string> numerics{
        "monitor_patient_id", "lifetime_id", "bed_label", "observed_at", "metric", "value", "unit"};
    static const std::vector<std::string> waves{
        "monitor_patient_id", "bed_label", "wave", "block_start", "sample_rate", "samples"};
    static const std::vector<std::string> enums{
        "monitor_patient_id", "bed_label", "observed_at", "label", "value"};
    static const std::vector<std::string> alerts{
        "monitor_patient_id", "bed_label", "at", "severity", "text"};
    static const std::vector<std::string> logs{"encounter_id", "bed_label", "attach_at",
                                               "detach_at"};
    static const std::vector<std::string> adt{
        "event_id", "patient_name", "mrn", "visit_id", "event", "bed", "at"};
    switch (t) {
        case table_kind::numerics: return numerics;
        case table_kind::wave_samples: return waves;
        case table_kind::enumerations: return enums;
        case table_kind::alerts: return alerts;
        case table_kind::device_logs: return logs;
        case table_kind::adt_events: return adt;
    }
    return numerics;
}

metric metric::parse(std::string_view text) {
    if (text == "HR") return {metric_kind::hr, "HR"};
    if (text == "SpO2") return {metric_kind::spo2, "SpO2"};
    if (text == "BP_SYS") return {metric_kind::bp_sys, "BP_SYS"};
    if (text == "BP_DIA") return {metric_kind::bp_dia, "BP_DIA"};
    if (text == "RR") return {metric_kind::rr, "RR"};
    return {metric_kind::other, std::string(text)};
}

std::string_view to_string(alert_severity s) noexcept {
    switch (s) {
        case alert_severity::red: return "red";
        case alert_severity::yellow: return "yellow";
        case alert_severity::technical: return "technical";
    }
    return "";
}

std::string_view to_string(adt_event_kind k) noexcept {
    switch (k) {
        case adt_event_kind::admission: return "Admission";
        case adt_event_kind::discharge: return "Discharge";
        case adt_event_kind::transfer_in: return "TransferIn";
        case adt_event_kind::transfer_out: return "TransferOut";
    }
    return "";
}

std::optional<adt_event_kind> parse_adt_event_kind(std::string_view text) noexcept {
    if (text == "Admission") return adt_event_kind::admission;
    if (text == "Discharge") return adt_event_kind::discharge;
    if (text == "TransferIn") return adt_event_kind::transfer_in;
    if (text == "TransferOut") return adt_event_kind::transfer_out;
    return std::nullopt;
}

std::string_view to_string(integrity_issue i) noexcept {
    switch (i) {
        case integrity_issue::malformed_manifest: return "malformed_manifest";
        case integrity_issue::missing: return "missing";
        case integrity_issue::extra: return "extra";
        case integrity_issue::size: return "size";
        case integrity_issue::checksum: return "checksum";
        case integrity_issue::layout: return "layout";
    }
    return "";
}

timestamp wave_block::first_time() const {
    return from_epoch_ms(static_cast<std::int64_t>(std::floor(sample_time_ms(0))));
}

timestamp wave_block::end_time() const {
    auto n = static_cast<std::int64_t>(samples.size());
    return from_epoch_ms(static_cast<std::int64_t>(std::ceil(sample_time_ms(n) - 1e-6)));
}

std::uint64_t extract_bundle::row_count(table_kind t) const {
    switch (t) {
        case table_kind::numerics: return numerics.size();
        case table_kind::wave_samples: return wave_samples.size();
        case table_kind::enumerations: return enumerations.size();
        case table_kind::alerts: return alerts.size();
        case table_kind::device_logs: return device_logs.size();
        case table_kind::adt_events: return adt_events.size();
    }
    return 0;
}

std::string format_decimal(double value) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, res.ptr);
}

// =============================================================================
// Manifest
// =============================================================================

namespace {

[[noreturn]] void manifest_error(const stdfs::path& path, std::size_t line, const std::string& what) {
    throw archive_error(error_code::malformed_manifest,
                        path.filename().string() + ":" + std::to_string(line) + ": " + what);
}

bool parse_u64(std::string_view text, std::uint64_t& out) {
    if (text.empty()) return false;
    auto res = std::from_chars(text.data(), text.data() + text.size(), out);
    return res.ec == std::errc{} && res.ptr == text.data() + text.size();
}

bool parse_i64(std::string_view text, std::int64_t& out) {
    if (text.empty()) return false;
    auto res = std::from_chars(text.data(), text.data() + text.size(), out);
    return res.ec == std::errc{} && res.ptr == text.data() + text.size();
}

bool parse_f64(std::string_view text, double& out) {
    if (text.empty()) return false;
    auto res = std::from_chars(text.data(), text.data() + text.size(), out);
    return res.ec == std::errc{} && res.ptr == text.data() + text.size();
}

}  // namespace

std::vector<manifest_entry> parse_manifest(const stdfs::path& path) {
    std::vector<csv::row> rows;
    try {
        rows = csv::read_file(path);
    } catch (const archive_error& e) {
        if (e.code() == error_code::io_error) throw;
        manifest_error(path, 0, e.what());
    }
    static const std::vector<std::string> header{"file_name", "created_at", "size_bytes",
                                                 "sha256"};
    if (rows.empty() || rows.front().fields != header) manifest_error(path, 1, "bad header");

    std::vector<manifest_entry> entries;
    std::set<std::string> seen;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (r.fields.size() != 4) manifest_error(path, r.line, "expected 4 columns");
        manifest_entry e;
        e.file_name = r.fields[0];
        if (!fs::is_safe_relative(e.file_name)) manifest_error(path, r.line, "unsafe file name");
        try {
            e.created_at = parse_timestamp(r.fields[1]);
        } catch (const archive_error&) {
            manifest_error(path, r.line, "bad created_at");
        }
        if (!parse_u64(r.fields[2], e.size_bytes)) manifest_error(path, r.line, "bad size_bytes");
        e.sha256 = r.fields[3];
        if (!digest::is_sha256_hex(e.sha256)) manifest_error(path, r.line, "bad sha256");
        if (!seen.insert(e.file_name).second) {
            manifest_error(path, r.line, "duplicate file_name " + e.file_name);
        }
        entries.push_back(std::move(e));
    }
    return entries;
}

void write_manifest(const stdfs::path& bundle_dir, const std::vector<std::string>& file_names,
                    timestamp created_at) {
    csv::writer w;
    w.write_row({"file_name", "created_at", "size_bytes", "sha256"});
    for (const auto& name : file_names) {
        auto p = bundle_dir / name;
        w.add(name)
            .add(format_timestamp(created_at))
            .add_unsigned(stdfs::file_size(p))
            .add(digest::sha256_file_hex(p))
            .end_row();
    }
    fs::write_atomic(bundle_dir / manifest_file, w.str());
    fs::write_atomic(bundle_dir / manifest_digest_file,
                     digest::sha256_hex(w.str()) + "  " + std::string(manifest_file) + "\n");
}

// =============================================================================
// Verification
// =============================================================================

verify_outcome verify_bundle(const stdfs::path& bundle_dir) {
    if (!stdfs::is_directory(bundle_dir)) {
        return integrity_failure{integrity_issue::missing, bundle_dir.filename().string(),
                                 "bundle directory does not exist"};
    }
    calendar_day day{};
    try {
        day = parse_day(bundle_dir.filename().string());
    } catch (const archive_error&) {
        return integrity_failure{integrity_issue::layout, bundle_dir.filename().string(),
                                 "bundle directory is not named YYYY-MM-DD"};
    }
    auto manifest_path = bundle_dir / manifest_file;
    if (!stdfs::exists(manifest_path)) {
        return integrity_failure{integrity_issue::missing, std::string(manifest_file),
                                 "manifest not found"};
    }
    auto digest_path = bundle_dir / manifest_digest_file;
    if (!stdfs::exists(digest_path)) {
        return integrity_failure{integrity_issue::missing, std::string(manifest_digest_file),
                                 "manifest digest not found"};
    }
    auto expected_digest = digest::sha256_file_hex(manifest_path) + "  " + std::string(manifest_file) + "\n";
    if (fs::read_text(digest_path) != expected_digest) {
        return integrity_failure{integrity_issue::checksum, std::string(manifest_file),
                                 "manifest does not match its digest file"};
    }
    std::vector<manifest_entry> manifest;
    try {
        manifest = parse_manifest(manifest_path);
    } catch (const archive_error& e) {
        return integrity_failure{integrity_issue::malformed_manifest, std::string(manifest_file),
                                 e.what()};
    }

    std::set<std::string> listed;
    for (const auto& e : manifest) {
        listed.insert(e.file_name);
        auto p = bundle_dir / e.file_name;
        if (!stdfs::is_regular_file(p)) {
            return integrity_failure{integrity_issue::missing, e.file_name, "listed file absent"};
        }
        auto size = stdfs::file_size(p);
        if (size != e.size_bytes) {
            return integrity_failure{integrity_issue::size, e.file_name,
                                     "size " + std::to_string(size) + " != manifest " +
                                         std::to_string(e.size_bytes)};
        }
        if (digest::sha256_file_hex(p) != e.sha256) {
            return integrity_failure{integrity_issue::checksum, e.file_name,
                                     "sha256 does not match manifest"};
        }
    }
    for (auto t : all_tables) {
        if (!listed.count(std::string(table_file(t)))) {
            return integrity_failure{integrity_issue::missing, std::string(table_file(t)),
                                     "table not listed in manifest"};
        }
    }
    for (const auto& rel : fs::list_files(bundle_dir)) {
        auto name = rel.generic_string();
        if (name == manifest_file || name == manifest_digest_file || listed.count(name)) continue;
        return integrity_failure{integrity_issue::extra, name, "file not listed in manifest"};
    }
    return verified_bundle{bundle_dir, day, std::move(manifest)};
}

// =============================================================================
// Table parsing
// =============================================================================

namespace {

class table_parser {
public:
    table_parser(const stdfs::path& dir, table_kind t, time_range window)
        : table_(t), window_(window) {
        file_ = std::string(table_file(t));
        try {
            rows_ = csv::read_file(dir / file_);
        } catch (const archive_error& e) {
            if (e.code() == error_code::io_error) throw;
            fail(0, e.what());
        }
        if (rows_.empty() || rows_.front().fields != table_header(t)) fail(1, "bad header");
    }

    template <typename Fn>
    void for_each(Fn&& fn) {
        const auto width = table_header(table_).size();
        for (std::size_t i = 1; i < rows_.size(); ++i) {
            line_ = rows_[i].line;
            if (rows_[i].fields.size() != width) {
                fail(line_, "expected " + std::to_string(width) + " columns, got " +
                                std::to_string(rows_[i].fields.size()));
            }
            fn(rows_[i].fields);
        }
    }

    [[noreturn]] void fail(std::size_t line, const std::string& what) const {
        throw archive_error(error_code::schema_violation,
                            file_ + ":" + std::to_string(line) + ": " + what);
    }

    timestamp in_day(const std::string& text) const {
        timestamp t{};
        try {
            t = parse_timestamp(text);
        } catch (const archive_error&) {
            fail(line_, "bad timestamp '" + text + "'");
        }
        check_in_day(t, text);
        return t;
    }

    void check_in_day(timestamp t, const std::string& text) const {
        if (!window_.contains(t)) {
            throw archive_error(error_code::out_of_day_timestamp,
                                file_ + ":" + std::to_string(line_) + ": " + text +
                                    " outside bundle day");
        }
    }

    double number(const std::string& text) const {
        double v = 0;
        if (!parse_f64(text, v)) fail(line_, "bad number '" + text + "'");
        return v;
    }

    void non_empty(const std::string& text, std::string_view column) const {
        if (text.empty()) fail(line_, std::string(column) + " is empty");
    }

    [[nodiscard]] std::size_t line() const noexcept { return line_; }
    [[nodiscard]] time_range window() const noexcept { return window_; }

private:
    table_kind table_;
    time_range window_;
    std::string file_;
    std::vector<csv::row> rows_;
    std::size_t line_ = 0;
};

std::vector<double> parse_samples(const table_parser& p, const std::string& text) {
    std::vector<double> out;
    if (text.empty()) return out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto next = text.find(';', pos);
        auto part = std::string_view(text).substr(
            pos, next == std::string::npos ? std::string::npos : next - pos);
        double v = 0;
        if (part == "nan" || part == "NaN") {
            v = std::nan("");
        } else if (!parse_f64(part, v)) {
            p.fail(p.line(), "bad sample '" + std::string(part) + "'");
        }
        out.push_back(v);
        if (next == std::string::npos) break;
        pos = next + 1;
    }
    return out;
}

}  // namespace

extract_bundle parse_extract_day(const verified_bundle& verified) {
    extract_bundle b;
    b.day = verified.day;
    b.manifest = verified.manifest;
    const auto window = b.window();
    const auto& dir = verified.directory;

    {
        table_parser p(dir, table_kind::numerics, window);
        p.for_each([&](const std::vector<std::string>& f) {
            numeric_record r;
            r.monitor_patient_id = f[0];
            p.non_empty(f[0], "monitor_patient_id");
            r.lifetime_id = f[1];
            r.bed_label = f[2];
            p.non_empty(f[2], "bed_label");
            r.observed_at = p.in_day(f[3]);
            if (to_epoch_ms(r.observed_at) % 1000 != 0) p.fail(p.line(), "numerics need whole seconds");
            r.name = metric::parse(f[4]);
            p.non_empty(f[4], "metric");
            r.value = p.number(f[5]);
            r.unit = f[6];
            b.numerics.push_back(std::move(r));
        });
    }
    {
        table_parser p(dir, table_kind::wave_samples, window);
        p.for_each([&](const std::vector<std::string>& f) {
            wave_block w;
            w.monitor_patient_id = f[0];
            p.non_empty(f[0], "monitor_patient_id");
            w.bed_label = f[1];
            p.non_empty(f[1], "bed_label");
            w.wave = f[2];
            auto kind = find_wave(w.wave);
            if (!kind) p.fail(p.line(), "unknown wave symbol '" + w.wave + "'");
            w.block_start = p.in_day(f[3]);
            std::int64_t rate = 0;
            if (!parse_i64(f[4], rate) || rate != kind->rate) {
                p.fail(p.line(), "sample_rate " + f[4] + " != registry rate " +
                                     std::to_string(kind->rate) + " for " + w.wave);
            }
            w.sample_rate = static_cast<int>(rate);
            w.samples = parse_samples(p, f[5]);
            if (w.samples.empty()) p.fail(p.line(), "empty sample block");
            if (w.end_time() > window.end) {
                throw archive_error(error_code::out_of_day_timestamp,
                                    "wave_samples.csv:" + std::to_string(p.line()) +
                                        ": block extends past day end");
            }
            b.wave_samples.push_back(std::move(w));
        });
    }
    {
        table_parser p(dir, table_kind::enumerations, window);
        p.for_each([&](const std::vector<std::string>& f) {
            enumeration_record r{f[0], f[1], p.in_day(f[2]), f[3], f[4]};
            p.non_empty(f[0], "monitor_patient_id");
            p.non_empty(f[1], "bed_label");
            b.enumerations.push_back(std::move(r));
        });
    }
    {
        table_parser p(dir, table_kind::alerts, window);
        p.for_each([&](const std::vector<std::string>& f) {
            alert_record r;
            r.monitor_patient_id = f[0];
            p.non_empty(f[0], "monitor_patient_id");
            r.bed_label = f[1];
            p.non_empty(f[1], "bed_label");
            r.at = p.in_day(f[2]);
            if (f[3] == "red") r.severity = alert_severity::red;
            else if (f[3] == "yellow") r.severity = alert_severity::yellow;
            else if (f[3] == "technical") r.severity = alert_severity::technical;
            else p.fail(p.line(), "bad severity '" + f[3] + "'");
            r.text = f[4];
            p.non_empty(f[4], "text");
            b.alerts.push_back(std::move(r));
        });
    }
    {
        table_parser p(dir, table_kind::device_logs, window);
        p.for_each([&](const std::vector<std::string>& f) {
            device_log_record r;
            r.encounter_id = f[0];
            p.non_empty(f[0], "encounter_id");
            r.bed_label = f[1];
            p.non_empty(f[1], "bed_label");
            r.open_attach = f[2].empty();
            r.attach_at = r.open_attach ? window.start : p.in_day(f[2]);
            r.open_detach = f[3].empty();
            r.detach_at = r.open_detach ? window.end : p.in_day(f[3]);
            if (!(r.attach_at < r.detach_at)) p.fail(p.line(), "attach_at must precede detach_at");
            b.device_logs.push_back(std::move(r));
        });
    }
    {
        table_parser p(dir, table_kind::adt_events, window);
        std::unordered_set<std::int64_t> ids;
        p.for_each([&](const std::vector<std::string>& f) {
            adt_event e;
            if (!parse_i64(f[0], e.event_id)) p.fail(p.line(), "bad event_id");
            if (!ids.insert(e.event_id).second) p.fail(p.line(), "duplicate event_id " + f[0]);
            e.patient_name = f[1];
            e.mrn = f[2];
            p.non_empty(f[2], "mrn");
            e.visit_id = f[3];
            p.non_empty(f[3], "visit_id");
            auto kind = parse_adt_event_kind(f[4]);
            if (!kind) p.fail(p.line(), "bad event kind '" + f[4] + "'");
            e.event = *kind;
            e.bed = f[5];
            p.non_empty(f[5], "bed");
            e.at = p.in_day(f[6]);
            b.adt_events.push_back(std::move(e));
        });
    }

    auto counts_path = dir / counts_file;
    bool counts_listed = false;
    for (const auto& e : verified.manifest) counts_listed |= e.file_name == counts_file;
    if (counts_listed && stdfs::exists(counts_path)) {
        auto rows = csv::read_file(counts_path);
        if (rows.empty() || rows.front().fields != std::vector<std::string>{"table", "rows"}) {
            throw archive_error(error_code::schema_violation, "counts.csv: bad header");
        }
        std::map<table_kind, std::uint64_t> declared;
        for (std::size_t i = 1; i < rows.size(); ++i) {
            const auto& f = rows[i].fields;
            std::uint64_t n = 0;
            auto t = f.size() == 2 ? table_from_name(f[0]) : std::nullopt;
            if (!t || !parse_u64(f[1], n)) {
                throw archive_error(error_code::schema_violation,
                                    "counts.csv:" + std::to_string(rows[i].line) + ": bad row");
            }
            declared[*t] = n;
        }
        b.declared_counts = std::move(declared);
    }
    return b;
}

count_report validate_row_counts(const extract_bundle& bundle) {
    count_report report;
    bool all_match = true;
    for (auto t : all_tables) {
        count_entry e;
        e.table = t;
        e.actual = bundle.row_count(t);
        if (bundle.declared_counts) {
            auto it = bundle.declared_counts->find(t);
            if (it != bundle.declared_counts->end()) e.declared = it->second;
        }
        if (e.declared) {
            e.match = *e.declared == e.actual;
            all_match &= *e.match;
        }
        report.entries.push_back(e);
    }
    if (bundle.declared_counts) report.ok = all_match;
    return report;
}

// =============================================================================
// Rendering
// =============================================================================

std::string render_table(const extract_bundle& b, table_kind t) {
    csv::writer w;
    w.write_row(table_header(t));
    switch (t) {
        case table_kind::numerics:
            for (const auto& r : b.numerics) {
                w.add(r.monitor_patient_id).add(r.lifetime_id).add(r.bed_label)
                    .add(format_timestamp(r.observed_at)).add(r.name.label)
                    .add(format_decimal(r.value)).add(r.unit).end_row();
            }
            break;
        case table_kind::wave_samples:
            for (const auto& r : b.wave_samples) {
                std::string samples;
                for (std::size_t i = 0; i < r.samples.size(); ++i) {
                    if (i) samples.push_back(';');
                    samples += format_decimal(r.samples[i]);
                }
                w.add(r.monitor_patient_id).add(r.bed_label).add(r.wave)
                    .add(format_timestamp(r.block_start)).add(r.sample_rate)
                    .add_quoted(samples).end_row();
            }
            break;
        case table_kind::enumerations:
            for (const auto& r : b.enumerations) {
                w.add(r.monitor_patient_id).add(r.bed_label).add(format_timestamp(r.observed_at))
                    .add(r.label).add(r.value).end_row();
            }
            break;
        case table_kind::alerts:
            for (const auto& r : b.alerts) {
                w.add(r.monitor_patient_id).add(r.bed_label).add(format_timestamp(r.at))
                    .add(to_string(r.severity)).add(r.text).end_row();
            }
            break;
        case table_kind::device_logs:
            for (const auto& r : b.device_logs) {
                w.add(r.encounter_id).add(r.bed_label)
                    .add(r.open_attach ? std::string() : format_timestamp(r.attach_at))
                    .add(r.open_detach ? std::string() : format_timestamp(r.detach_at))
                    .end_row();
            }
            break;
        case table_kind::adt_events:
            for (const auto& r : b.adt_events) {
                w.add(r.event_id).add(r.patient_name).add(r.mrn).add(r.visit_id)
                    .add(to_string(r.event)).add(r.bed).add(format_timestamp(r.at)).end_row();
            }
            break;
    }
    return w.str();
}

void write_bundle(const extract_bundle& bundle, const stdfs::path& bundle_dir, timestamp created_at,
                  bool with_counts) {
    stdfs::create_directories(bundle_dir);
    std::vector<std::string> names;
    for (auto t : all_tables) {
        fs::write_atomic(bundle_dir / table_file(t), render_table(bundle, t));
        names.emplace_back(table_file(t));
    }
    if (with_counts) {
        csv::writer w;
        w.write_row({"table", "rows"});
        for (auto t : all_tables) w.add(table_name(t)).add_unsigned(bundle.row_count(t)).end_row();
        fs::write_atomic(bundle_dir / counts_file, w.str());
        names.emplace_back(counts_file);
    }
    std::sort(names.begin(), names.end());
    write_manifest(bundle_dir, names, created_at);
}

}  // namespace wavearchive::extract
