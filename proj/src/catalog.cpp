/**
 * @file catalog.cpp
 * @brief Partition building, publishing, queries and statistics
 */

#include "wavearchive/catalog.hpp"

#include "wavearchive/core/csv.hpp"
#include "wavearchive/core/error.hpp"
#include "wavearchive/core/fs.hpp"
#include "wavearchive/wave_registry.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <set>
#include <sstream>

namespace wavearchive::catalog {

namespace stdfs = std::filesystem;

namespace {

constexpr std::string_view map_table = "study_map";
constexpr std::string_view details_table = "study_details";
constexpr std::string_view manifest_table = "waveform_manifest";
constexpr std::string_view audit_table = "linkage_audit";
constexpr std::string_view part_csv = "part.csv";
constexpr std::string_view part_jsonl = "part.jsonl";

const std::vector<std::string> map_header_tail{"lifetime_id_source", "bed", "clinical_unit", "start",
                                               "end", "storage_path", "linkage_method"};
const std::vector<std::string> details_header{"study_id", "symbol", "unit", "rate", "n_samples", "file",
                                              "size_bytes"};
const std::vector<std::string> manifest_header{"day", "zip", "size_bytes", "sha256"};

template <typename T>
T parse_number(const std::string& text, const std::string& what) {
    T v{};
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw archive_error(error_code::schema_violation, "catalog: bad " + what + " '" + text + "'");
    }
    return v;
}

std::vector<csv::row> read_table(const stdfs::path& path, const std::vector<std::string>& header) {
    auto rows = csv::read_file(path);
    if (rows.empty() || rows[0].fields != header) {
        throw archive_error(error_code::schema_violation, "catalog: bad header in " + path.string());
    }
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].fields.size() != header.size()) {
            throw archive_error(error_code::schema_violation,
                                "catalog: wrong field count on line " + std::to_string(rows[i].line) + " of " +
                                    path.string());
        }
    }
    rows.erase(rows.begin());
    return rows;
}

std::vector<std::string> map_header(flavor f) {
    std::vector<std::string> h{"study_id", f == flavor::identified ? "mrn" : "pseudo_id"};
    h.insert(h.end(), map_header_tail.begin(), map_header_tail.end());
    return h;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

}  // namespace

std::string unit_map::unit_for(const std::string& bed) const {
    auto it = units.find(bed);
    return it == units.end() ? std::string(unknown_unit) : it->second;
}

unit_map unit_map::load(const stdfs::path& path) {
    unit_map m;
    for (const auto& r : read_table(path, {"bed", "unit"})) m.units[r.fields[0]] = r.fields[1];
    return m;
}

std::string day_partition(calendar_day day) { return "day=" + format_day(day); }

partition build_partition(std::string name, std::string day_value, std::span<const packed_study> studies,
                          const unit_map& units, std::string audit_jsonl) {
    partition p;
    p.name = std::move(name);
    p.day_value = std::move(day_value);
    p.audit_jsonl = std::move(audit_jsonl);
    for (const auto& s : studies) {
        const auto& d = s.details;
        if (!s.pack || !stdfs::exists(s.pack->path)) {
            throw archive_error(error_code::partial_day, "study " + d.study_id + " is not packed");
        }
        study_map_row r;
        r.study_id = d.study_id;
        r.patient = d.pseudo_id ? *d.pseudo_id : d.mrn.value_or("");
        r.lifetime_id_source = d.linkage_method == "lifetime_id";
        r.bed = d.bed;
        r.clinical_unit = units.unit_for(d.bed);
        r.start = d.start;
        r.end = d.end;
        r.storage_path = s.storage_path;
        r.linkage_method = d.linkage_method;
        p.study_map.push_back(std::move(r));
        for (const auto& w : d.waves) {
            p.details.push_back({d.study_id, w.symbol, w.unit, w.rate, w.n_samples, w.file, w.size_bytes});
        }
        p.manifest.push_back({p.day_value, s.pack->path.filename().string(), s.pack->size_bytes, s.pack->sha256});
    }
    std::sort(p.study_map.begin(), p.study_map.end(),
              [](const auto& a, const auto& b) { return a.study_id < b.study_id; });
    std::sort(p.details.begin(), p.details.end(), [](const auto& a, const auto& b) {
        return std::tie(a.study_id, a.symbol) < std::tie(b.study_id, b.symbol);
    });
    std::sort(p.manifest.begin(), p.manifest.end(), [](const auto& a, const auto& b) { return a.zip < b.zip; });
    return p;
}

std::string render_study_map(std::span<const study_map_row> rows, flavor f) {
    csv::writer w;
    w.write_row(map_header(f));
    for (const auto& r : rows) {
        w.add(r.study_id)
            .add(r.patient)
            .add(r.lifetime_id_source ? "true" : "false")
            .add(r.bed)
            .add(r.clinical_unit)
            .add(format_timestamp(r.start))
            .add(format_timestamp(r.end))
            .add(r.storage_path)
            .add(r.linkage_method)
            .end_row();
    }
    return w.str();
}

std::string render_details(std::span<const study_detail_row> rows) {
    csv::writer w;
    w.write_row(details_header);
    for (const auto& r : rows) {
        w.add(r.study_id).add(r.symbol).add(r.unit).add(r.rate).add(r.n_samples).add(r.file);
        w.add_unsigned(r.size_bytes).end_row();
    }
    return w.str();
}

std::string render_manifest(std::span<const manifest_row> rows) {
    csv::writer w;
    w.write_row(manifest_header);
    for (const auto& r : rows) w.add(r.day).add(r.zip).add_unsigned(r.size_bytes).add(r.sha256).end_row();
    return w.str();
}

void publish_partition(const stdfs::path& root, const partition& p, flavor f) {
    if (p.name.empty() || !fs::is_safe_relative(p.name) || p.name.find('/') != std::string::npos) {
        throw archive_error(error_code::config_invalid, "bad partition name '" + p.name + "'");
    }
    stdfs::create_directories(root / ".locks");
    fs::lock_file lock(root / ".locks" / (p.name + ".lock"));

    auto put = [&](std::string_view table, std::string_view file, const std::string& content) {
        auto target = root / table / p.name;
        auto staging = root / table / (".staging-" + p.name);
        stdfs::remove_all(staging);
        fs::write_file(staging / file, content);
        fs::replace_directory(staging, target);
    };
    put(map_table, part_csv, render_study_map(p.study_map, f));
    put(details_table, part_csv, render_details(p.details));
    put(manifest_table, part_csv, render_manifest(p.manifest));
    if (f == flavor::identified) put(audit_table, part_jsonl, p.audit_jsonl);
}

std::vector<study_map_row> catalog_data::all_studies() const {
    std::vector<study_map_row> out;
    for (const auto& name : partitions) {
        const auto& rows = study_map.at(name);
        out.insert(out.end(), rows.begin(), rows.end());
    }
    return out;
}

catalog_data load_catalog(const stdfs::path& root) {
    catalog_data c;
    if (!stdfs::exists(root / map_table)) return c;
    for (const auto& entry : stdfs::directory_iterator(root / map_table)) {
        auto name = entry.path().filename().string();
        if (entry.is_directory() && name.rfind(".staging-", 0) != 0) c.partitions.push_back(name);
    }
    std::sort(c.partitions.begin(), c.partitions.end());

    for (const auto& name : c.partitions) {
        auto map_path = root / map_table / name / part_csv;
        auto raw = csv::read_file(map_path);
        if (raw.empty()) throw archive_error(error_code::schema_violation, "catalog: empty " + map_path.string());
        auto f = raw[0].fields.size() > 1 && raw[0].fields[1] == "pseudo_id" ? flavor::deidentified
                                                                             : flavor::identified;
        auto& rows = c.study_map[name];
        for (const auto& r : read_table(map_path, map_header(f))) {
            const auto& x = r.fields;
            if (x[2] != "true" && x[2] != "false") {
                throw archive_error(error_code::schema_violation, "catalog: bad lifetime_id_source");
            }
            rows.push_back({x[0], x[1], x[2] == "true", x[3], x[4], parse_timestamp(x[5]), parse_timestamp(x[6]),
                            x[7], x[8]});
        }
        for (const auto& r : read_table(root / details_table / name / part_csv, details_header)) {
            const auto& x = r.fields;
            c.details.push_back({x[0], x[1], x[2], parse_number<int>(x[3], "rate"),
                                 parse_number<std::int64_t>(x[4], "n_samples"), x[5],
                                 parse_number<std::uint64_t>(x[6], "size_bytes")});
        }
        for (const auto& r : read_table(root / manifest_table / name / part_csv, manifest_header)) {
            const auto& x = r.fields;
            c.manifest.push_back({x[0], x[1], parse_number<std::uint64_t>(x[2], "size_bytes"), x[3]});
        }
    }
    return c;
}

std::vector<std::string> integrity_problems(const catalog_data& c) {
    std::vector<std::string> problems;
    std::map<std::string, int> ids;
    std::map<std::string, int> zips;
    for (const auto& s : c.all_studies()) {
        if (++ids[s.study_id] == 2) problems.push_back("duplicate study id " + s.study_id);
        zips[stdfs::path(s.storage_path).filename().string()]++;
    }
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& d : c.details) {
        if (!ids.count(d.study_id)) problems.push_back("detail row for unknown study " + d.study_id);
        if (!seen.emplace(d.study_id, d.symbol).second) {
            problems.push_back("duplicate detail row " + d.study_id + "/" + d.symbol);
        }
    }
    for (const auto& m : c.manifest) {
        auto it = zips.find(m.zip);
        if (it == zips.end() || it->second != 1) problems.push_back("manifest row without one study: " + m.zip);
    }
    return problems;
}

std::vector<study_map_row> query_studies(const catalog_data& c, const study_filter& filter) {
    for (const auto& s : filter.wave_symbols) {
        if (!find_wave(s)) throw archive_error(error_code::unknown_wave_symbol, "'" + s + "' is not a known wave");
    }
    std::map<std::string, std::set<std::string>> symbols;
    for (const auto& d : c.details) symbols[d.study_id].insert(d.symbol);

    auto listed = [](const std::vector<std::string>& values, const std::string& v) {
        return values.empty() || std::find(values.begin(), values.end(), v) != values.end();
    };
    std::vector<study_map_row> out;
    for (const auto& s : c.all_studies()) {
        if (!listed(filter.patients, s.patient) || !listed(filter.beds, s.bed) ||
            !listed(filter.units, s.clinical_unit)) {
            continue;
        }
        if (filter.range && !filter.range->overlaps({s.start, s.end})) continue;
        const auto& have = symbols[s.study_id];
        if (!std::all_of(filter.wave_symbols.begin(), filter.wave_symbols.end(),
                         [&](const std::string& w) { return have.count(w) > 0; })) {
            continue;
        }
        out.push_back(s);
    }
    std::sort(out.begin(), out.end(),
              [](const auto& a, const auto& b) { return std::tie(a.start, a.study_id) < std::tie(b.start, b.study_id); });
    return out;
}

// =============================================================================
// Statistics
// =============================================================================

std::string_view to_string(age_group g) noexcept {
    switch (g) {
        case age_group::neonate: return "neonate";
        case age_group::infant: return "infant";
        case age_group::years_1_4: return "1-4y";
        case age_group::years_5_9: return "5-9y";
        case age_group::years_10_14: return "10-14y";
        case age_group::years_15_plus: return "15y+";
    }
    return "?";
}

age_group age_group_at(calendar_day birth, calendar_day on) {
    using namespace std::chrono;
    if ((on - birth).count() <= 28) return age_group::neonate;
    year_month_day b{birth};
    year_month_day o{on};
    int years = static_cast<int>(o.year()) - static_cast<int>(b.year());
    if (month_day{o.month(), o.day()} < month_day{b.month(), b.day()}) --years;
    if (years < 1) return age_group::infant;
    if (years < 5) return age_group::years_1_4;
    if (years < 10) return age_group::years_5_9;
    if (years < 15) return age_group::years_10_14;
    return age_group::years_15_plus;
}

archive_stats summarize(const catalog_data& c, const std::map<std::string, calendar_day>& birthdates) {
    archive_stats s;
    s.days = c.partitions.size();
    std::set<std::string> patients;
    double daily_patients = 0;
    for (const auto& name : c.partitions) {
        std::set<std::string> day_patients;
        for (const auto& r : c.study_map.at(name)) {
            if (!r.patient.empty()) day_patients.insert(r.patient);
        }
        daily_patients += static_cast<double>(day_patients.size());
        patients.insert(day_patients.begin(), day_patients.end());
    }
    auto studies = c.all_studies();
    std::map<std::string, const study_map_row*> by_id;
    for (const auto& r : studies) by_id[r.study_id] = &r;
    s.studies = studies.size();
    s.patients = patients.size();

    struct acc {
        std::set<std::string> patients;
        std::set<std::string> studies;
        std::uint64_t bytes = 0;
        std::string unit;
        int rate = 0;
    };
    std::map<std::string, acc> waves;
    for (const auto& d : c.details) {
        s.size_bytes += d.size_bytes;
        auto& a = waves[d.symbol];
        a.studies.insert(d.study_id);
        a.bytes += d.size_bytes;
        a.unit = d.unit;
        a.rate = d.rate;
        auto it = by_id.find(d.study_id);
        if (it != by_id.end() && !it->second->patient.empty()) a.patients.insert(it->second->patient);
    }
    for (const auto& k : wave_registry()) {
        auto it = waves.find(std::string(k.symbol));
        if (it == waves.end()) continue;
        const auto& a = it->second;
        s.per_wave.push_back({std::string(k.symbol), a.unit, a.rate, a.patients.size(), a.studies.size(), a.bytes});
    }
    if (s.days > 0) {
        const auto n = static_cast<double>(s.days);
        s.avg_daily_studies = static_cast<double>(s.studies) / n;
        s.avg_daily_patients = daily_patients / n;
        s.avg_daily_size_bytes = static_cast<double>(s.size_bytes) / n;
    }

    if (!birthdates.empty()) {
        std::map<std::pair<std::string, std::size_t>, std::set<std::string>> cell_patients;
        for (const auto& r : studies) {
            auto it = birthdates.find(r.patient);
            if (r.patient.empty() || it == birthdates.end()) continue;
            auto g = static_cast<std::size_t>(age_group_at(it->second, day_of(r.start)));
            auto& row = s.unit_by_age[r.clinical_unit];
            ++row[g].studies;
            cell_patients[{r.clinical_unit, g}].insert(r.patient);
        }
        for (const auto& [key, set] : cell_patients) s.unit_by_age[key.first][key.second].patients = set.size();
    }
    return s;
}

std::map<std::string, calendar_day> load_birthdates(const stdfs::path& path) {
    std::map<std::string, calendar_day> out;
    for (const auto& r : read_table(path, {"mrn", "birth_date"})) out[r.fields[0]] = parse_day(r.fields[1]);
    return out;
}

std::string render_stats_json(const archive_stats& s) {
    nlohmann::ordered_json j;
    j["days"] = s.days;
    j["studies"] = s.studies;
    j["patients"] = s.patients;
    j["size_bytes"] = s.size_bytes;
    j["avg_daily_studies"] = s.avg_daily_studies;
    j["avg_daily_patients"] = s.avg_daily_patients;
    j["avg_daily_size_bytes"] = s.avg_daily_size_bytes;
    j["per_wave"] = nlohmann::ordered_json::array();
    for (const auto& w : s.per_wave) {
        j["per_wave"].push_back({{"symbol", w.symbol},
                                 {"unit", w.unit},
                                 {"rate", w.rate},
                                 {"patients", w.patients},
                                 {"studies", w.studies},
                                 {"size_bytes", w.size_bytes}});
    }
    if (!s.unit_by_age.empty()) {
        auto& m = j["unit_by_age"];
        for (const auto& [unit, row] : s.unit_by_age) {
            for (std::size_t g = 0; g < age_group_count; ++g) {
                m[unit][std::string(to_string(static_cast<age_group>(g)))] = {{"patients", row[g].patients},
                                                                               {"studies", row[g].studies}};
            }
        }
    }
    return j.dump(2) + "\n";
}

std::string render_stats_text(const archive_stats& s) {
    std::ostringstream out;
    out << "days " << s.days << "\nstudies " << s.studies << "\npatients " << s.patients << "\nsize_bytes "
        << s.size_bytes << "\navg_daily_studies " << format_double(s.avg_daily_studies) << "\navg_daily_patients "
        << format_double(s.avg_daily_patients) << "\navg_daily_size_bytes " << format_double(s.avg_daily_size_bytes)
        << "\n\nsymbol,unit,rate,patients,studies,size_bytes\n";
    for (const auto& w : s.per_wave) {
        out << w.symbol << ',' << w.unit << ',' << w.rate << ',' << w.patients << ',' << w.studies << ','
            << w.size_bytes << '\n';
    }
    if (!s.unit_by_age.empty()) {
        out << "\nunit";
        for (std::size_t g = 0; g < age_group_count; ++g) {
            auto name = std::string(to_string(static_cast<age_group>(g)));
            out << ',' << name << " patients," << name << " studies";
        }
        out << '\n';
        for (const auto& [unit, row] : s.unit_by_age) {
            out << csv::escape(unit);
            for (const auto& c : row) out << ',' << c.patients << ',' << c.studies;
            out << '\n';
        }
    }
    return out.str();
}

}  // namespace wavearchive::catalog
