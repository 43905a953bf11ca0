/**
 * @file deid.cpp
 * @brief Keyed pseudonyms, date shifting and study copies
 */

#include "wavearchive/deid.hpp"

#include "wavearchive/core/csv.hpp"
#include "wavearchive/core/digest.hpp"
#include "wavearchive/core/error.hpp"
#include "wavearchive/core/fs.hpp"
#include "wavearchive/segmentation.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <set>

namespace wavearchive::deid {

namespace stdfs = std::filesystem;

namespace {

void require_inputs(std::string_view key, std::string_view seed) {
    if (key.empty() || seed.empty()) {
        throw archive_error(error_code::config_invalid, "pseudonymization needs a key and a seed");
    }
}

std::uint64_t leading_u64(const digest::sha256_bytes& mac) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | mac[static_cast<std::size_t>(i)];
    return v;
}

int shift_from(std::string_view label, std::string_view seed) {
    auto span = static_cast<std::uint64_t>(max_shift_days - min_shift_days + 1);
    return min_shift_days + static_cast<int>(leading_u64(digest::hmac_sha256(seed, label)) % span);
}

std::string token(char prefix, std::string_view label, std::string_view seed, std::size_t hex_chars) {
    return prefix + digest::to_hex(digest::hmac_sha256(seed, label)).substr(0, hex_chars);
}

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

/// Replaces case-insensitive occurrences of `term`; `whole_word` requires
/// non-alphanumeric neighbours.
std::string replace_term(const std::string& text, const std::string& term, bool whole_word) {
    if (term.empty()) return text;
    auto hay = lower(text);
    auto needle = lower(term);
    std::string out;
    std::size_t pos = 0;
    for (;;) {
        auto hit = hay.find(needle, pos);
        while (hit != std::string::npos && whole_word &&
               ((hit > 0 && is_word_char(hay[hit - 1])) ||
                (hit + needle.size() < hay.size() && is_word_char(hay[hit + needle.size()])))) {
            hit = hay.find(needle, hit + 1);
        }
        if (hit == std::string::npos) break;
        out.append(text, pos, hit - pos);
        out += redaction;
        pos = hit + needle.size();
    }
    out.append(text, pos, std::string::npos);
    return out;
}

std::string shift_text(const std::string& iso, int days) {
    return format_timestamp(parse_timestamp(iso) - std::chrono::days{days});
}

/// Rewrites a sidecar CSV: shifts column `time_col`, scrubs `text_cols`.
std::string rewrite_sidecar(const std::string& text, std::size_t time_col,
                            std::initializer_list<std::size_t> text_cols, int days,
                            const scrub_list& scrub) {
    auto rows = csv::parse(text);
    csv::writer w;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        auto fields = rows[i].fields;
        if (i > 0) {
            if (time_col >= fields.size()) {
                throw archive_error(error_code::incomplete_study, "short sidecar row");
            }
            fields[time_col] = shift_text(fields[time_col], days);
            for (auto c : text_cols) {
                if (c < fields.size()) fields[c] = scrub.apply(fields[c]);
            }
        }
        w.write_row(fields);
    }
    return w.str();
}

}  // namespace

int derive_shift(std::string_view mrn, std::string_view seed) {
    require_inputs(mrn, seed);
    return shift_from("shift:" + std::string(mrn), seed);
}

std::string derive_pseudo_id(std::string_view mrn, std::string_view seed) {
    require_inputs(mrn, seed);
    return token('P', "pid:" + std::string(mrn), seed, 24);
}

identity unmatched_identity(std::string_view monitor_patient_id, std::string_view seed) {
    require_inputs(monitor_patient_id, seed);
    auto label = "mpid:" + std::string(monitor_patient_id);
    return {token('U', label, seed, 24), shift_from("shift:" + label, seed)};
}

// =============================================================================
// Map
// =============================================================================

const identity& deid_map::ensure(const std::string& mrn, std::string_view seed) {
    if (auto it = entries_.find(mrn); it != entries_.end()) return it->second;
    identity id{derive_pseudo_id(mrn, seed), derive_shift(mrn, seed)};
    for (const auto& [other, e] : entries_) {
        if (e.pseudo_id == id.pseudo_id) {
            throw archive_error(error_code::config_invalid,
                                "pseudo id collision between two MRNs; rotate the seed");
        }
    }
    return entries_.emplace(mrn, std::move(id)).first->second;
}

const identity& deid_map::at(const std::string& mrn) const {
    auto it = entries_.find(mrn);
    if (it == entries_.end()) {
        throw archive_error(error_code::map_missing_entry, "no de-identification entry for a study MRN");
    }
    return it->second;
}

std::string deid_map::to_csv() const {
    csv::writer w;
    w.write_row({"mrn", "pseudo_id", "shift_days"});
    for (const auto& [mrn, e] : entries_) w.add(mrn).add(e.pseudo_id).add(e.shift_days).end_row();
    return w.str();
}

deid_map deid_map::from_csv(std::string_view text) {
    deid_map m;
    auto rows = csv::parse(text);
    if (rows.empty() || rows[0].fields != std::vector<std::string>{"mrn", "pseudo_id", "shift_days"}) {
        throw archive_error(error_code::schema_violation, "deid map: bad header");
    }
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& f = rows[i].fields;
        int days = 0;
        if (f.size() != 3 || std::from_chars(f[2].data(), f[2].data() + f[2].size(), days).ec != std::errc{} ||
            days < min_shift_days || days > max_shift_days) {
            throw archive_error(error_code::schema_violation,
                                "deid map: bad row " + std::to_string(rows[i].line));
        }
        m.entries_[f[0]] = {f[1], days};
    }
    return m;
}

deid_map deid_map::load(const stdfs::path& path, std::string_view seed) {
    if (!stdfs::exists(path)) return {};
    return from_csv(digest::unseal(seed, fs::read_text(path)));
}

void deid_map::save(const stdfs::path& path, std::string_view seed) const {
    fs::write_atomic(path, digest::seal(seed, to_csv()));
}

deid_map deid_map::update(const stdfs::path& path, std::string_view seed,
                          std::span<const std::string> mrns) {
    fs::lock_file lock(path.string() + ".lock");
    auto map = load(path, seed);
    auto before = map.size();
    for (const auto& m : mrns) map.ensure(m, seed);
    if (map.size() != before || !stdfs::exists(path)) map.save(path, seed);
    return map;
}

std::string batch_token(calendar_day day, std::string_view seed) {
    require_inputs("day", seed);
    return digest::to_hex(digest::hmac_sha256(seed, "batch:" + format_day(day))).substr(0, 16);
}

// =============================================================================
// Scrubbing
// =============================================================================

void scrub_list::add_name(std::string_view name) {
    auto add = [&](std::string_view n) {
        if (n.size() < 3) return;
        std::string s(n);
        if (std::find(names_.begin(), names_.end(), s) == names_.end()) names_.push_back(s);
    };
    add(name);
    std::size_t i = 0;
    while (i < name.size()) {
        while (i < name.size() && !is_word_char(name[i])) ++i;
        auto j = i;
        while (j < name.size() && is_word_char(name[j])) ++j;
        if (j > i) add(name.substr(i, j - i));
        i = j;
    }
    // longer terms first so full names are replaced before their parts
    std::stable_sort(names_.begin(), names_.end(),
                     [](const std::string& a, const std::string& b) { return a.size() > b.size(); });
}

void scrub_list::add_identifier(std::string_view id) {
    if (id.empty()) return;
    std::string s(id);
    if (std::find(ids_.begin(), ids_.end(), s) == ids_.end()) ids_.push_back(s);
    std::stable_sort(ids_.begin(), ids_.end(),
                     [](const std::string& a, const std::string& b) { return a.size() > b.size(); });
}

scrub_list scrub_list::from_events(std::span<const extract::adt_event> events) {
    scrub_list s;
    for (const auto& e : events) {
        s.add_name(e.patient_name);
        s.add_identifier(e.mrn);
        s.add_identifier(e.visit_id);
    }
    return s;
}

std::string scrub_list::apply(std::string_view text) const {
    std::string out(text);
    for (const auto& id : ids_) out = replace_term(out, id, false);
    for (const auto& n : names_) out = replace_term(out, n, true);
    return out;
}

// =============================================================================
// Studies
// =============================================================================

std::string deid_study_id(const identity& who, std::string_view bed, timestamp start) {
    return segmentation::study_identifier(who.pseudo_id, bed,
                                          start - std::chrono::days{who.shift_days});
}

signal_store::study_details deidentify_study(const stdfs::path& study_dir,
                                             const stdfs::path& dest_parent, const deid_map& map,
                                             std::string_view seed, const scrub_list& scrub) {
    auto details = signal_store::read_details(study_dir);
    if (details.deidentified) {
        auto dest = dest_parent / details.study_id;
        for (const auto& rel : fs::list_files(study_dir)) {
            fs::write_file(dest / rel, fs::read_text(study_dir / rel));
        }
        return details;
    }

    identity who;
    if (details.mrn) {
        who = map.at(*details.mrn);
    } else if (details.monitor_patient_id) {
        who = unmatched_identity(*details.monitor_patient_id, seed);
    } else {
        throw archive_error(error_code::incomplete_study, "study has neither MRN nor monitor id");
    }
    const int days = who.shift_days;
    const auto shift = std::chrono::days{days};

    signal_store::study_details out = details;
    out.study_id = deid_study_id(who, details.bed, details.start);
    out.start = details.start - shift;
    out.end = details.end - shift;
    out.mrn.reset();
    out.monitor_patient_id.reset();
    out.pseudo_id = who.pseudo_id;
    out.deidentified = true;

    const auto dest = dest_parent / out.study_id;
    stdfs::create_directories(dest);
    out.waves.clear();
    for (const auto& w : details.waves) {
        const auto original = signal_store::verify_record(study_dir / w.file);
        auto header = original;
        header.record_name = out.study_id + "_" + w.symbol;
        header.dat_file = header.record_name + ".dat";
        header.base_time -= shift;
        fs::write_file(dest / header.dat_file, fs::read_text(study_dir / original.dat_file));
        fs::write_file(dest / (header.record_name + ".hea"), signal_store::render_header(header));
        auto entry = w;
        entry.file = header.record_name + ".hea";
        out.waves.push_back(entry);
    }

    auto sidecar = [&](std::string_view name, std::size_t time_col,
                       std::initializer_list<std::size_t> text_cols) {
        auto src = study_dir / name;
        if (!stdfs::exists(src)) {
            throw archive_error(error_code::incomplete_study, "missing " + src.string());
        }
        fs::write_file(dest / name, rewrite_sidecar(fs::read_text(src), time_col, text_cols, days, scrub));
    };
    sidecar(signal_store::numerics_file, 0, {});
    sidecar(signal_store::alerts_file, 0, {2});
    sidecar(signal_store::enumerations_file, 0, {1, 2});
    fs::write_file(dest / signal_store::details_file, signal_store::render_details(out));
    return out;
}

}  // namespace wavearchive::deid
