/**
 * @file signal_store.cpp
 * @brief WFDB format-16 records and study folder packing
 */

#include "wavearchive/signal_store.hpp"

#include "wavearchive/core/csv.hpp"
#include "wavearchive/core/digest.hpp"
#include "wavearchive/core/error.hpp"
#include "wavearchive/core/fs.hpp"
#include "wavearchive/core/zip.hpp"
#include "wavearchive/wave_registry.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numeric>
#include <sstream>

namespace wavearchive::signal_store {

namespace stdfs = std::filesystem;
using nlohmann::json;

// =============================================================================
// Quantization
// =============================================================================

std::int16_t quantization::quantize(double x) const {
    if (!std::isfinite(x)) return invalid_sample;
    auto v = std::llround(x * gain + static_cast<double>(baseline));
    return static_cast<std::int16_t>(std::clamp<long long>(v, -32767, 32767));
}

namespace {

std::string gain_string(double g) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", g);
    return buf;
}

quantization fixed_gain(double value) {
    quantization q;
    q.gain_text = "200";
    q.gain = 200;
    double scaled = value * q.gain;
    if (std::fabs(scaled) > 9.0e15) {
        throw archive_error(error_code::schema_violation, "sample magnitude out of range");
    }
    q.baseline = -std::llround(scaled);
    return q;
}

}  // namespace

quantization choose_quantization(std::span<const double> samples) {
    bool any = false;
    double lo = 0, hi = 0;
    for (double x : samples) {
        if (!std::isfinite(x)) continue;
        if (!any) {
            lo = hi = x;
            any = true;
        } else {
            lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
    }
    if (!any) throw archive_error(error_code::no_finite_samples, "no finite samples to quantize");

    // halves avoid overflow for extreme inputs
    double mid = lo / 2 + hi / 2;
    double half_range = hi / 2 - lo / 2;
    if (!(half_range > 0)) return fixed_gain(lo);
    double exact = 30000.0 / half_range;
    double magnitude = std::max(std::fabs(lo), std::fabs(hi));
    if (!std::isfinite(exact) || exact * magnitude > 1e12) return fixed_gain(mid);

    double scale = std::pow(10.0, 5 - std::floor(std::log10(exact)));
    double mantissa = std::floor(exact * scale);
    quantization q;
    for (;;) {
        q.gain_text = gain_string(mantissa / scale);
        q.gain = std::strtod(q.gain_text.c_str(), nullptr);
        if (q.gain <= exact || mantissa <= 1) break;
        mantissa -= 1;
    }
    if (!(q.gain > 0)) return fixed_gain(mid);
    q.baseline = -std::llround(q.gain * mid);
    return q;
}

std::int16_t checksum16(std::span<const std::int16_t> samples) noexcept {
    std::uint16_t sum = 0;
    for (auto s : samples) sum = static_cast<std::uint16_t>(sum + static_cast<std::uint16_t>(s));
    return static_cast<std::int16_t>(sum);
}

// =============================================================================
// Headers
// =============================================================================

namespace {

[[noreturn]] void header_error(const std::string& what) {
    throw archive_error(error_code::header_parse_error, what);
}

template <typename T>
T parse_number(std::string_view text, const char* what) {
    T v{};
    auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
        header_error(std::string("bad ") + what + " '" + std::string(text) + "'");
    }
    return v;
}

std::vector<std::string> split_ws(std::string_view line, std::size_t max_fields,
                                  std::string* rest = nullptr) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
        if (i >= line.size()) break;
        if (out.size() == max_fields) {
            if (rest) *rest = std::string(line.substr(i));
            break;
        }
        auto j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
        out.emplace_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

std::int64_t expected_span_ms(std::int64_t n, int rate) {
    return std::llround(static_cast<double>(n) * 1000.0 / rate);
}

}  // namespace

std::string render_header(const signal_record& r) {
    std::ostringstream out;
    out << r.record_name << " 1 " << r.rate << ' ' << r.n_samples << ' '
        << format_wfdb_time(r.base_time) << ' ' << format_wfdb_date(r.base_time) << '\n';
    out << r.dat_file << " 16 " << r.quant.gain_text << '(' << r.quant.baseline << ")/" << r.unit
        << " 16 0 " << r.first_value << ' ' << r.checksum << " 0 " << r.description << '\n';
    out << "# span_ms " << r.span_ms << '\n';
    return out.str();
}

signal_record parse_header(std::string_view text) {
    std::vector<std::string> lines;
    std::optional<std::int64_t> span;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            auto f = split_ws(std::string_view(line).substr(1), 3);
            if (f.size() == 2 && f[0] == "span_ms") span = parse_number<std::int64_t>(f[1], "span_ms");
            continue;
        }
        lines.push_back(line);
    }
    if (lines.size() != 2) header_error("expected one record line and one signal line");

    signal_record r;
    auto rec = split_ws(lines[0], 6);
    if (rec.size() != 6) header_error("record line needs 6 fields");
    r.record_name = rec[0];
    if (rec[1] != "1") header_error("only single-signal records are supported");
    r.rate = parse_number<int>(rec[2], "sampling frequency");
    r.n_samples = parse_number<std::int64_t>(rec[3], "sample count");
    if (r.rate <= 0 || r.n_samples < 0) header_error("non-positive rate or negative length");
    try {
        r.base_time = parse_wfdb_datetime(rec[4], rec[5]);
    } catch (const archive_error& e) {
        header_error(e.what());
    }

    std::string description;
    auto sig = split_ws(lines[1], 8, &description);
    if (sig.size() != 8) header_error("signal line needs at least 8 fields");
    r.dat_file = sig[0];
    if (r.dat_file.find('/') != std::string::npos || r.dat_file == ".." || r.dat_file == ".") {
        header_error("signal file must be a plain file name");
    }
    if (sig[1] != "16") header_error("only format 16 is supported");
    const auto& spec = sig[2];
    auto open = spec.find('(');
    auto close = spec.find(")/");
    if (open == std::string::npos || close == std::string::npos || close < open) {
        header_error("gain field must be gain(baseline)/unit");
    }
    r.quant.gain_text = spec.substr(0, open);
    r.quant.gain = parse_number<double>(r.quant.gain_text, "gain");
    if (!(r.quant.gain > 0)) header_error("gain must be positive");
    r.quant.baseline =
        parse_number<std::int64_t>(std::string_view(spec).substr(open + 1, close - open - 1), "baseline");
    r.unit = spec.substr(close + 2);
    if (sig[3] != "16") header_error("ADC resolution must be 16");
    r.first_value = parse_number<std::int16_t>(sig[5], "initial value");
    r.checksum = parse_number<std::int16_t>(sig[6], "checksum");
    r.description = description;
    if (!span) header_error("missing span_ms comment");
    r.span_ms = *span;

    // record names are <study_id>_<symbol>; symbols never contain '_'
    auto us = r.record_name.rfind('_');
    r.symbol = us == std::string::npos ? r.record_name : r.record_name.substr(us + 1);
    return r;
}

// =============================================================================
// Records
// =============================================================================

std::optional<signal_record> write_record(const std::string& study_id, const std::string& symbol,
                                          std::span<const extract::wave_block> blocks,
                                          const stdfs::path& out_dir) {
    if (blocks.empty()) return std::nullopt;
    auto kind = find_wave(symbol);
    if (!kind) throw archive_error(error_code::unknown_wave_symbol, "unknown wave '" + symbol + "'");

    const int rate = blocks.front().sample_rate;
    std::vector<std::size_t> order(blocks.size());
    std::iota(order.begin(), order.end(), 0);
    for (const auto& b : blocks) {
        if (b.wave != symbol || b.sample_rate != rate) {
            throw archive_error(error_code::schema_violation,
                                "record blocks must share wave and rate");
        }
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return blocks[a].sample_time_ms(0) < blocks[b].sample_time_ms(0);
    });

    const timestamp base = blocks[order.front()].first_time();
    std::vector<std::int64_t> first_slot(blocks.size());
    std::int64_t n = 0;
    for (auto i : order) {
        const auto& b = blocks[i];
        auto delta_ms = static_cast<double>((b.block_start - base).count());
        first_slot[i] = std::llround(delta_ms * rate / 1000.0) + b.sample_offset;
        n = std::max<std::int64_t>(n, first_slot[i] + static_cast<std::int64_t>(b.samples.size()));
    }

    std::vector<double> grid(static_cast<std::size_t>(n), std::numeric_limits<double>::quiet_NaN());
    std::vector<bool> filled(static_cast<std::size_t>(n), false);
    for (auto i : order) {
        const auto& b = blocks[i];
        for (std::size_t k = 0; k < b.samples.size(); ++k) {
            auto slot = static_cast<std::size_t>(first_slot[i] + static_cast<std::int64_t>(k));
            if (filled[slot]) {
                throw archive_error(error_code::overlapping_blocks,
                                    "wave " + symbol + " blocks overlap in study " + study_id);
            }
            filled[slot] = true;
            grid[slot] = b.samples[k];
        }
    }

    signal_record r;
    r.record_name = study_id + "_" + symbol;
    r.symbol = symbol;
    r.description = std::string(kind->name);
    r.unit = std::string(kind->unit);
    r.rate = rate;
    r.n_samples = n;
    r.base_time = base;
    r.quant = choose_quantization(grid);
    r.dat_file = r.record_name + ".dat";
    r.span_ms = expected_span_ms(n, rate);

    std::vector<std::int16_t> adu(grid.size());
    std::string bytes(grid.size() * 2, '\0');
    for (std::size_t i = 0; i < grid.size(); ++i) {
        adu[i] = r.quant.quantize(grid[i]);
        auto u = static_cast<std::uint16_t>(adu[i]);
        bytes[2 * i] = static_cast<char>(u & 0xff);
        bytes[2 * i + 1] = static_cast<char>(u >> 8);
    }
    r.first_value = adu.front();
    r.checksum = checksum16(adu);

    try {
        fs::write_file(out_dir / r.dat_file, bytes);
        fs::write_file(out_dir / (r.record_name + ".hea"), render_header(r));
    } catch (const std::exception& e) {
        throw archive_error(error_code::unwritable_output, e.what());
    }
    return r;
}

namespace {

/// Header plus validated samples, without the decoded values.
record_data load_checked(const stdfs::path& hea_path) {
    record_data out;
    out.header = parse_header(fs::read_text(hea_path));
    const auto& h = out.header;
    if (h.span_ms != expected_span_ms(h.n_samples, h.rate)) {
        throw archive_error(error_code::duration_mismatch,
                            hea_path.filename().string() + ": " + std::to_string(h.n_samples) +
                                " samples at " + std::to_string(h.rate) + " sps do not span " +
                                std::to_string(h.span_ms) + " ms");
    }
    auto dat = hea_path.parent_path() / h.dat_file;
    if (!stdfs::exists(dat)) {
        throw archive_error(error_code::io_error, "missing signal file " + dat.string());
    }
    auto bytes = fs::read_bytes(dat);
    if (bytes.size() != static_cast<std::size_t>(h.n_samples) * 2) {
        throw archive_error(error_code::length_mismatch,
                            h.dat_file + ": " + std::to_string(bytes.size()) + " bytes, header says " +
                                std::to_string(h.n_samples) + " samples");
    }
    out.adu.resize(static_cast<std::size_t>(h.n_samples));
    for (std::size_t i = 0; i < out.adu.size(); ++i) {
        auto u = static_cast<std::uint16_t>(bytes[2 * i] | (bytes[2 * i + 1] << 8));
        out.adu[i] = static_cast<std::int16_t>(u);
    }
    if (checksum16(out.adu) != h.checksum) {
        throw archive_error(error_code::checksum_mismatch, h.dat_file + ": checksum mismatch");
    }
    if (!out.adu.empty() && out.adu.front() != h.first_value) {
        throw archive_error(error_code::checksum_mismatch, h.dat_file + ": first value mismatch");
    }
    return out;
}

}  // namespace

signal_record verify_record(const stdfs::path& hea_path) { return load_checked(hea_path).header; }

record_data read_record(const stdfs::path& hea_path) {
    auto out = load_checked(hea_path);
    const auto& h = out.header;
    out.values.resize(out.adu.size());
    out.gap.resize(out.adu.size());
    for (std::size_t i = 0; i < out.adu.size(); ++i) {
        out.gap[i] = out.adu[i] == invalid_sample;
        out.values[i] = out.gap[i] ? std::numeric_limits<double>::quiet_NaN()
                                   : h.quant.dequantize(out.adu[i]);
    }
    return out;
}

// =============================================================================
// Study folders
// =============================================================================

std::string render_details(const study_details& d) {
    json j;
    j["study_id"] = d.study_id;
    j["mrn_present"] = d.mrn_present;
    j["bed"] = d.bed;
    j["start"] = format_timestamp(d.start);
    j["end"] = format_timestamp(d.end);
    auto waves = json::array();
    for (const auto& w : d.waves) {
        waves.push_back({{"symbol", w.symbol},
                         {"unit", w.unit},
                         {"rate", w.rate},
                         {"n_samples", w.n_samples},
                         {"file", w.file},
                         {"size_bytes", w.size_bytes}});
    }
    j["waves"] = std::move(waves);
    j["numerics_rows"] = d.numerics_rows;
    j["alert_rows"] = d.alert_rows;
    j["enumeration_rows"] = d.enumeration_rows;
    j["linkage_method"] = d.linkage_method;
    if (d.mrn) j["mrn"] = *d.mrn;
    if (d.monitor_patient_id) j["monitor_patient_id"] = *d.monitor_patient_id;
    if (d.pseudo_id) j["pseudo_id"] = *d.pseudo_id;
    if (d.deidentified) j["deidentified"] = true;
    return j.dump(2) + "\n";
}

study_details parse_details(std::string_view text) {
    try {
        auto j = json::parse(text);
        study_details d;
        d.study_id = j.at("study_id").get<std::string>();
        d.mrn_present = j.at("mrn_present").get<bool>();
        d.bed = j.at("bed").get<std::string>();
        d.start = parse_timestamp(j.at("start").get<std::string>());
        d.end = parse_timestamp(j.at("end").get<std::string>());
        for (const auto& w : j.at("waves")) {
            d.waves.push_back({w.at("symbol").get<std::string>(), w.at("unit").get<std::string>(),
                               w.at("rate").get<int>(), w.at("n_samples").get<std::int64_t>(),
                               w.at("file").get<std::string>(),
                               w.at("size_bytes").get<std::uint64_t>()});
        }
        d.numerics_rows = j.at("numerics_rows").get<std::uint64_t>();
        d.alert_rows = j.at("alert_rows").get<std::uint64_t>();
        d.enumeration_rows = j.value("enumeration_rows", std::uint64_t{0});
        d.linkage_method = j.value("linkage_method", std::string());
        if (j.contains("mrn")) d.mrn = j["mrn"].get<std::string>();
        if (j.contains("monitor_patient_id")) d.monitor_patient_id = j["monitor_patient_id"].get<std::string>();
        if (j.contains("pseudo_id")) d.pseudo_id = j["pseudo_id"].get<std::string>();
        d.deidentified = j.value("deidentified", false);
        return d;
    } catch (const archive_error& e) {
        throw archive_error(error_code::incomplete_study, std::string("study details: ") + e.what());
    } catch (const json::exception& e) {
        throw archive_error(error_code::incomplete_study, std::string("study details: ") + e.what());
    }
}

study_details read_details(const stdfs::path& study_dir) {
    auto path = study_dir / details_file;
    if (!stdfs::exists(path)) {
        throw archive_error(error_code::incomplete_study, "missing " + path.string());
    }
    return parse_details(fs::read_text(path));
}

std::string render_numerics(std::span<const extract::numeric_record> rows) {
    csv::writer w;
    w.write_row({"observed_at", "metric", "value", "unit"});
    for (const auto& r : rows) {
        w.add(format_timestamp(r.observed_at)).add(r.name.label).add(extract::format_decimal(r.value))
            .add(r.unit).end_row();
    }
    return w.str();
}

std::string render_alerts(std::span<const extract::alert_record> rows) {
    csv::writer w;
    w.write_row({"at", "severity", "text"});
    for (const auto& r : rows) {
        w.add(format_timestamp(r.at)).add(extract::to_string(r.severity)).add(r.text).end_row();
    }
    return w.str();
}

std::string render_enumerations(std::span<const extract::enumeration_record> rows) {
    csv::writer w;
    w.write_row({"observed_at", "label", "value"});
    for (const auto& r : rows) {
        w.add(format_timestamp(r.observed_at)).add(r.label).add(r.value).end_row();
    }
    return w.str();
}

study_details write_study(const segmentation::study& s, const stdfs::path& study_dir) {
    try {
        stdfs::create_directories(study_dir);
    } catch (const std::exception& e) {
        throw archive_error(error_code::unwritable_output, e.what());
    }
    study_details d;
    d.study_id = s.study_id;
    d.mrn_present = s.mrn.has_value();
    d.bed = s.bed_label;
    d.start = s.range.start;
    d.end = s.range.end;
    d.linkage_method = std::string(linkage::to_string(s.method));
    d.mrn = s.mrn;
    d.monitor_patient_id = s.monitor_patient_id;
    for (const auto& w : s.waves) {
        auto rec = write_record(s.study_id, w.symbol, w.blocks, study_dir);
        if (!rec) continue;
        d.waves.push_back({rec->symbol, rec->unit, rec->rate, rec->n_samples,
                           rec->record_name + ".hea",
                           static_cast<std::uint64_t>(rec->n_samples) * 2});
    }
    d.numerics_rows = s.numerics.size();
    d.alert_rows = s.alerts.size();
    d.enumeration_rows = s.enumerations.size();
    try {
        fs::write_file(study_dir / numerics_file, render_numerics(s.numerics));
        fs::write_file(study_dir / alerts_file, render_alerts(s.alerts));
        fs::write_file(study_dir / enumerations_file, render_enumerations(s.enumerations));
        fs::write_file(study_dir / details_file, render_details(d));
    } catch (const std::exception& e) {
        throw archive_error(error_code::unwritable_output, e.what());
    }
    return d;
}

pack_result pack_study(const stdfs::path& study_dir, const stdfs::path& zip_path) {
    if (!stdfs::exists(study_dir / details_file)) {
        throw archive_error(error_code::incomplete_study,
                            "refusing to pack " + study_dir.string() + " without study details");
    }
    const auto prefix = study_dir.filename().string();
    std::vector<zip::entry> entries;
    for (const auto& rel : fs::list_files(study_dir)) {
        entries.push_back({prefix + "/" + rel.generic_string(), fs::read_text(study_dir / rel)});
    }
    auto archive = zip::encode(std::move(entries));
    fs::write_atomic(zip_path, archive);
    return {zip_path, archive.size(), digest::sha256_hex(archive)};
}

}  // namespace wavearchive::signal_store
