/**
 * @file synthgen.cpp
 * @brief Synthetic day generation, truth files and linkage scoring
 */

#include "wavearchive/synthgen.hpp"

#include "wavearchive/core/csv.hpp"
#include "wavearchive/core/error.hpp"
#include "wavearchive/core/fs.hpp"
#include "wavearchive/core/kv.hpp"
#include "wavearchive/core/rng.hpp"
#include "wavearchive/wave_registry.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <set>

namespace wavearchive::synthgen {

namespace stdfs = std::filesystem;
using namespace std::chrono_literals;
using extract::adt_event_kind;

namespace {

[[noreturn]] void invalid(const std::string& what) { throw archive_error(error_code::config_invalid, what); }

const std::vector<std::string> first_names{"Zorion",  "Quillon", "Maelis",  "Ottorino", "Yevgenia", "Brannagh",
                                           "Tamsin",  "Lucasta", "Idriel",  "Wystan",   "Jovina",   "Perpetua",
                                           "Corwin",  "Sunniva", "Evander", "Rosmunda", "Thaddeus", "Ulrika",
                                           "Kestrel", "Marisol", "Osric",   "Philippa", "Torvald",  "Imogen"};
const std::vector<std::string> last_names{"Quagliano",  "Vonnegutt", "Okonkwo",  "Strzelecki",  "Haldorsen",
                                          "Pemberton",  "Yarborough", "Kowalczyk", "Thistlewood", "Ravensdale",
                                          "Lindqvist",  "Featherstone", "Montgomery", "Wojcik",   "Gallagher",
                                          "Nakashima",  "Oyelaran",  "Rutherford", "Szabo",       "Villalobos",
                                          "Whitcombe",  "Zielinski", "Hargreaves", "Moreau"};

const std::vector<std::string> neutral_alerts{"HR High",       "SpO2 Low, check probe", "Leads Off",
                                              "Apnea",         "ST Elevation",          "Irregular HR",
                                              "NBP Cuff Loose", "Resp Low"};
const std::vector<std::string> rhythms{"Sinus Rhythm", "Sinus Tachycardia", "Sinus Bradycardia", "Paced Rhythm"};

std::string format_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

template <typename T>
const T& pick(stable_rng& rng, const std::vector<T>& v) {
    return v[static_cast<std::size_t>(rng.between(0, static_cast<std::int64_t>(v.size()) - 1))];
}

std::string hex_id(stable_rng& rng, std::size_t n) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(digits[rng.next() % 16]);
    return out;
}

std::int64_t day_serial(calendar_day d) { return d.time_since_epoch().count(); }

std::string padded(std::int64_t v, int width) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%0*lld", width, static_cast<long long>(v));
    return buf;
}

double round_to(double v, double step) { return std::round(v / step) * step; }

millis minutes(double m) { return millis{static_cast<std::int64_t>(std::llround(m * 60'000.0))}; }

std::string unit_of_device_bed(const std::string& device_label) {
    auto emr = linkage::normalize_bed_label(device_label, linkage::bed_label_map{});
    if (device_label.rfind("OR", 0) == 0) return "Surgery";
    switch (emr.empty() ? '?' : emr.front()) {
        case 'A': return "ICU";
        case 'B': return "NICU";
        case 'C': return "Ward";
        default: return "Acute Care";
    }
}

// -----------------------------------------------------------------------------
// Morphologies
// -----------------------------------------------------------------------------

struct vitals {
    double hr = 80;
    double rr = 16;
};

double bump(double x, double centre, double width) {
    double z = (x - centre) / width;
    return std::exp(-z * z);
}

double wave_value(const wave_kind& kind, double t_seconds, const vitals& v) {
    const double two_pi = 2 * std::numbers::pi;
    const double beat = std::fmod(t_seconds * v.hr / 60.0, 1.0);
    if (kind.unit == "mV") {
        return 0.12 * bump(beat, 0.15, 0.03) - 0.12 * bump(beat, 0.27, 0.008) + 1.0 * bump(beat, 0.30, 0.012) -
               0.2 * bump(beat, 0.33, 0.01) + 0.3 * bump(beat, 0.55, 0.05);
    }
    if (kind.symbol == "Resp") return 0.6 * std::sin(two_pi * t_seconds * v.rr / 60.0);
    if (kind.unit == "mmHg") return 70 + 25 * std::sin(two_pi * beat) + 8 * std::sin(2 * two_pi * beat);
    return 1.0 + 0.6 * std::sin(two_pi * beat) + 0.2 * std::sin(2 * two_pi * beat);
}

// -----------------------------------------------------------------------------
// Day builder
// -----------------------------------------------------------------------------

struct stay {
    std::size_t patient = 0;
    std::string monitor_patient_id;
    std::string device_bed;
    std::string emr_bed;
    time_range monitored;   ///< when the monitor records
    timestamp adt_start{};  ///< EMR view; may precede `monitored.start` on a transfer
    bool open_start = false;
    bool open_end = false;
    bool in_or = false;
    bool from_transfer = false;
    bool to_transfer = false;
};

struct pending_event {
    extract::adt_event event;
    std::size_t order = 0;
};

class day_builder {
public:
    day_builder(const scenario_config& c, calendar_day day)
        : c_(c), day_(day), window_(day_window(day)), rng_(stable_rng::derive(c.seed, "day:" + format_day(day))),
          noise_(stable_rng::derive(c.seed, "noise:" + format_day(day))) {}

    generated_day run() {
        schedule();
        for (const auto& s : stays_) emit_monitor_data(s);
        emit_evidence();
        finish();
        return std::move(out_);
    }

private:
    void add_patient(bool in_or) {
        const auto i = out_.truth.patients.size();
        const auto serial = day_serial(day_) * 1000 + static_cast<std::int64_t>(i);
        truth_patient p;
        p.mrn = "MRN" + padded((serial * 7919 + static_cast<std::int64_t>(c_.seed % 1000) * 104729) % 10'000'000, 7);
        p.visit_id = "V" + padded((serial * 6271 + static_cast<std::int64_t>(c_.seed % 1000) * 7) % 100'000'000, 8);
        p.name = pick(rng_, first_names) + " " + pick(rng_, last_names);
        p.lifetime_id = !in_or && !rng_.chance(c_.missing_lifetime_id_fraction);
        out_.truth.patients.push_back(p);
    }

    std::string emr(const std::string& device) const {
        return linkage::normalize_bed_label(device, linkage::bed_label_map{});
    }

    std::string new_monitor_id() { return "mp" + hex_id(rng_, 8); }

    void schedule() {
        std::map<std::string, timestamp> free_at;
        for (const auto& b : c_.beds) free_at[b] = window_.start;
        for (const auto& b : c_.or_beds) free_at[b] = window_.start;
        std::map<std::string, std::string> or_stream;

        for (int n = 0; n < c_.patients_per_day; ++n) {
            const bool in_or = !c_.or_beds.empty() && rng_.chance(c_.or_shared_stream_fraction);
            if (in_or) {
                const auto& bed = pick(rng_, c_.or_beds);
                auto start = free_at[bed] == window_.start
                                 ? window_.start + minutes(rng_.between(6 * 60, 10 * 60))
                                 : free_at[bed] + minutes(rng_.between(20, 60));
                auto end = start + minutes(rng_.between(60, 180));
                if (end > window_.end - 1h) continue;
                add_patient(true);
                if (!or_stream.count(bed)) or_stream[bed] = "or" + hex_id(rng_, 8);
                stay s;
                s.patient = out_.truth.patients.size() - 1;
                s.monitor_patient_id = or_stream[bed];
                s.device_bed = bed;
                s.emr_bed = emr(bed);
                s.monitored = {start, end};
                s.adt_start = start;
                s.in_or = true;
                stays_.push_back(s);
                free_at[bed] = end;
                continue;
            }

            std::vector<std::string> open_beds;
            for (const auto& b : c_.beds) {
                if (free_at[b] < window_.end - 3h) open_beds.push_back(b);
            }
            if (open_beds.empty()) continue;
            const auto bed = pick(rng_, open_beds);
            timestamp start;
            bool open_start = false;
            if (free_at[bed] == window_.start) {
                open_start = rng_.chance(0.5);
                start = open_start ? window_.start : window_.start + minutes(rng_.between(0, 6 * 60));
            } else {
                start = free_at[bed] + minutes(rng_.between(15, 120));
            }
            auto end = start + minutes(rng_.between(2 * 60, 12 * 60));
            bool open_end = false;
            if (end >= window_.end - 15min) {
                end = window_.end;
                open_end = true;
            }
            if (start >= window_.end - 2h) continue;
            add_patient(false);
            const auto patient = out_.truth.patients.size() - 1;

            stay first;
            first.patient = patient;
            first.monitor_patient_id = new_monitor_id();
            first.device_bed = bed;
            first.emr_bed = emr(bed);
            first.monitored = {start, end};
            first.adt_start = start;
            first.open_start = open_start;
            first.open_end = open_end;

            // bed move part way through
            if (rng_.chance(c_.transfer_rate) && end - start >= 3h) {
                auto span_min = std::chrono::duration_cast<std::chrono::minutes>(end - start).count();
                auto cut = start + minutes(rng_.between(60, span_min - 60));
                auto arrive = cut + minutes(rng_.between(2, 10));
                std::vector<std::string> targets;
                for (const auto& b : c_.beds) {
                    if (b != bed && free_at[b] + 15min <= cut) targets.push_back(b);
                }
                if (!targets.empty()) {
                    const auto to = pick(rng_, targets);
                    stay second = first;
                    second.monitor_patient_id = new_monitor_id();
                    second.device_bed = to;
                    second.emr_bed = emr(to);
                    second.monitored = {arrive, end};
                    second.adt_start = cut;
                    second.open_start = false;
                    second.from_transfer = true;
                    first.monitored.end = cut;
                    first.open_end = false;
                    first.to_transfer = true;
                    stays_.push_back(first);
                    stays_.push_back(second);
                    free_at[bed] = cut;
                    free_at[to] = end;
                    continue;
                }
            }
            stays_.push_back(first);
            free_at[bed] = end;
        }
    }

    void emit_monitor_data(const stay& s) {
        const auto& p = out_.truth.patients[s.patient];
        auto& b = out_.bundle;
        const auto lifetime = p.lifetime_id ? p.mrn : std::string();
        vitals v{rng_.uniform(70, 130), rng_.uniform(12, 30)};

        truth_segment seg;
        seg.monitor_patient_id = s.monitor_patient_id;
        seg.bed_label = s.device_bed;
        seg.emr_bed_label = s.emr_bed;
        seg.mrn = p.mrn;
        seg.lifetime_id = p.lifetime_id;
        timestamp lo = s.monitored.end;
        timestamp hi = s.monitored.start;
        auto cover = [&](timestamp a, timestamp z) {
            lo = std::min(lo, a);
            hi = std::max(hi, z);
        };

        const auto step = std::chrono::seconds{c_.numeric_interval_seconds};
        for (auto t = s.monitored.start; t + 1s <= s.monitored.end; t += step) {
            const double hr = std::round(v.hr + 5 * rng_.gaussian());
            b.numerics.push_back({s.monitor_patient_id, lifetime, s.device_bed, t, extract::metric::parse("HR"), hr, "bpm"});
            const double spo2 = std::min(100.0, std::round(97 + 1.5 * rng_.gaussian()));
            b.numerics.push_back(
                {s.monitor_patient_id, lifetime, s.device_bed, t, extract::metric::parse("SpO2"), spo2, "%"});
            const double rr = std::round(v.rr + 2 * rng_.gaussian());
            b.numerics.push_back({s.monitor_patient_id, lifetime, s.device_bed, t, extract::metric::parse("RR"), rr, "rpm"});
            cover(t, t + 1s);
        }

        const auto enum_step = std::chrono::minutes{c_.enumeration_interval_minutes};
        for (auto t = s.monitored.start + 30s; t + 1s <= s.monitored.end; t += enum_step) {
            b.enumerations.push_back({s.monitor_patient_id, s.device_bed, t, "Rhythm", pick(rng_, rhythms)});
            cover(t, t + 1s);
        }

        const auto n_alerts = rng_.between(0, 3);
        const auto span_s = std::chrono::duration_cast<std::chrono::seconds>(s.monitored.length()).count();
        for (std::int64_t k = 0; k < n_alerts && span_s > 120; ++k) {
            auto t = s.monitored.start + std::chrono::seconds{rng_.between(60, span_s - 60)};
            auto severity = static_cast<extract::alert_severity>(rng_.between(0, 2));
            std::string text = pick(rng_, neutral_alerts);
            if (rng_.chance(c_.alert_identifier_rate)) {
                auto last = p.name.substr(p.name.find(' ') + 1);
                switch (rng_.between(0, 3)) {
                    case 0: text = "Family of " + p.name + " at bedside"; break;
                    case 1: text = last + " pulled leads"; break;
                    case 2: text = "Verify armband " + p.mrn; break;
                    default: text = "Encounter " + p.visit_id + " pending transfer"; break;
                }
            }
            b.alerts.push_back({s.monitor_patient_id, s.device_bed, t, severity, text});
            cover(t, t + 1s);
        }

        // patient's wave subset, in configured order
        std::vector<std::string> waves = c_.waves;
        rng_.shuffle(waves);
        waves.resize(std::min<std::size_t>(waves.size(), static_cast<std::size_t>(c_.waves_per_patient)));
        std::sort(waves.begin(), waves.end(), [&](const std::string& a, const std::string& z) {
            return std::find(c_.waves.begin(), c_.waves.end(), a) < std::find(c_.waves.begin(), c_.waves.end(), z);
        });
        const auto block_len = std::chrono::seconds{c_.wave_block_seconds};
        const auto block_step = std::chrono::minutes{c_.wave_interval_minutes};
        for (const auto& symbol : waves) {
            const auto kind = *find_wave(symbol);
            const double step_v = kind.unit == "mV" ? 0.001 : 0.01;
            std::optional<timestamp> first;
            timestamp last{};
            std::int64_t last_len = 0;
            for (auto t = s.monitored.start + 20s; t + block_len <= s.monitored.end; t += block_step) {
                extract::wave_block w;
                w.monitor_patient_id = s.monitor_patient_id;
                w.bed_label = s.device_bed;
                w.wave = symbol;
                w.block_start = t;
                w.sample_rate = kind.rate;
                const auto n = static_cast<std::size_t>(kind.rate) * static_cast<std::size_t>(c_.wave_block_seconds);
                const double t0 = static_cast<double>(to_epoch_ms(t) % 86'400'000) / 1000.0;
                w.samples.resize(n);
                for (std::size_t k = 0; k < n; ++k) {
                    double tk = t0 + static_cast<double>(k) / kind.rate;
                    w.samples[k] = round_to(wave_value(kind, tk, v) + 0.01 * rng_.gaussian() * (kind.unit == "mmHg" ? 10 : 1),
                                            step_v);
                }
                if (rng_.chance(c_.gap_rate)) {
                    auto g0 = static_cast<std::size_t>(rng_.between(static_cast<std::int64_t>(n / 4), static_cast<std::int64_t>(n / 2)));
                    auto len = static_cast<std::size_t>(rng_.between(static_cast<std::int64_t>(n / 10), static_cast<std::int64_t>(n / 5)));
                    for (std::size_t k = g0; k < g0 + len; ++k) w.samples[k] = std::nan("");
                }
                cover(w.first_time(), w.end_time());
                if (!first) first = t;
                last = t;
                last_len = static_cast<std::int64_t>(n);
                b.wave_samples.push_back(std::move(w));
            }
            if (first) {
                const auto gap_s = std::chrono::duration_cast<std::chrono::seconds>(last - *first).count();
                seg.wave_samples[symbol] = gap_s * kind.rate + last_len;
            }
        }

        if (lo < hi) {
            seg.range = {lo, hi};
            out_.truth.segments.push_back(std::move(seg));
        }
    }

    void add_event(adt_event_kind kind, const truth_patient& p, const std::string& bed, timestamp at) {
        at = std::clamp(at, window_.start, window_.end - 1s);
        events_.push_back({{0, p.name, p.mrn, p.visit_id, kind, bed, at}, events_.size()});
    }

    void emit_evidence() {
        const auto jitter = [&] {
            if (c_.adt_jitter_minutes <= 0) return millis{0};
            auto s = std::llround(rng_.uniform(-c_.adt_jitter_minutes, c_.adt_jitter_minutes) * 60.0);
            return millis{s * 1000};
        };
        auto beds = c_.beds;
        beds.insert(beds.end(), c_.or_beds.begin(), c_.or_beds.end());

        // the transfer-out/in pair shares one jittered instant
        std::optional<timestamp> pending_transfer;
        for (const auto& s : stays_) {
            const auto& p = out_.truth.patients[s.patient];
            if (!p.lifetime_id && rng_.chance(c_.device_log_rate)) {
                out_.bundle.device_logs.push_back({p.visit_id, s.device_bed, s.monitored.start, s.monitored.end,
                                                   s.open_start, s.open_end});
            }

            const bool recorded = !rng_.chance(c_.adt_missing_rate);
            auto bed = s.emr_bed;
            if (rng_.chance(c_.wrong_bed_rate) && beds.size() > 1) {
                std::string other;
                do other = emr(pick(rng_, beds));
                while (other == s.emr_bed);
                bed = other;
            }
            const std::size_t first_event = events_.size();
            timestamp open_at = s.adt_start + jitter();
            timestamp close_at = s.monitored.end + jitter();
            if (s.from_transfer && pending_transfer) open_at = *pending_transfer;
            if (s.to_transfer) {
                pending_transfer = close_at;
            } else {
                pending_transfer.reset();
            }
            if (!recorded) continue;
            if (close_at <= open_at) close_at = open_at + 1min;
            if (!s.open_start) add_event(s.from_transfer ? adt_event_kind::transfer_in : adt_event_kind::admission, p, bed, open_at);
            if (!s.open_end) add_event(s.to_transfer ? adt_event_kind::transfer_out : adt_event_kind::discharge, p, bed, close_at);
            // duplicates copy real events only; a copied half of a noise pair is not noise any more
            const std::size_t genuine = events_.size() - first_event;

            const auto inner_lo = std::max(open_at, s.monitored.start) + 10min;
            const auto inner_hi = std::min(close_at, s.monitored.end) - 10min;
            if (inner_hi <= inner_lo) continue;
            auto inside = [&] {
                auto span = std::chrono::duration_cast<std::chrono::seconds>(inner_hi - inner_lo).count();
                return inner_lo + std::chrono::seconds{noise_.between(0, span)};
            };
            if (noise_.chance(c_.zero_length_pair_rate)) {
                auto t = inside();
                add_event(adt_event_kind::admission, p, bed, t);
                add_event(adt_event_kind::discharge, p, bed, t);
            }
            if (noise_.chance(c_.readmit_chain_rate)) {
                auto t = inside();
                add_event(adt_event_kind::discharge, p, bed, t);
                add_event(adt_event_kind::admission, p, bed, t + minutes(noise_.between(1, 4)));
            }
            if (noise_.chance(c_.duplicate_rate) && genuine > 0) {
                auto copy = events_[first_event + static_cast<std::size_t>(
                                                      noise_.between(0, static_cast<std::int64_t>(genuine) - 1))];
                copy.order = events_.size();
                events_.push_back(copy);
            }
        }
    }

    void finish() {
        std::stable_sort(events_.begin(), events_.end(), [](const pending_event& a, const pending_event& b) {
            return std::tie(a.event.at, a.order) < std::tie(b.event.at, b.order);
        });
        auto& b = out_.bundle;
        b.day = day_;
        for (std::size_t i = 0; i < events_.size(); ++i) {
            auto e = events_[i].event;
            e.event_id = static_cast<std::int64_t>(i + 1);
            b.adt_events.push_back(std::move(e));
        }
        auto by_time = [](auto field) {
            return [field](const auto& x, const auto& y) { return x.*field < y.*field; };
        };
        std::stable_sort(b.numerics.begin(), b.numerics.end(), by_time(&extract::numeric_record::observed_at));
        std::stable_sort(b.wave_samples.begin(), b.wave_samples.end(), by_time(&extract::wave_block::block_start));
        std::stable_sort(b.enumerations.begin(), b.enumerations.end(),
                         by_time(&extract::enumeration_record::observed_at));
        std::stable_sort(b.alerts.begin(), b.alerts.end(), by_time(&extract::alert_record::at));
        std::stable_sort(b.device_logs.begin(), b.device_logs.end(),
                         by_time(&extract::device_log_record::attach_at));

        for (auto& p : out_.truth.patients) {
            const bool neonatal = std::any_of(stays_.begin(), stays_.end(), [&](const stay& s) {
                return out_.truth.patients[s.patient].mrn == p.mrn && unit_of_device_bed(s.device_bed) == "NICU";
            });
            auto age_days = neonatal ? rng_.between(0, 90) : rng_.between(0, 18 * 365);
            p.birth_date = day_ - std::chrono::days{age_days};
        }

        out_.truth.day = day_;
        out_.truth.seed = c_.seed;
        for (auto t : extract::all_tables) out_.truth.row_counts[t] = b.row_count(t);
        b.declared_counts = out_.truth.row_counts;
    }

    const scenario_config& c_;
    calendar_day day_;
    time_range window_;
    stable_rng rng_;
    stable_rng noise_;  ///< ADT pathologies only, so they never perturb the clean events
    std::vector<stay> stays_;
    std::vector<pending_event> events_;
    generated_day out_;
};

}  // namespace

// =============================================================================
// Config
// =============================================================================

void scenario_config::validate() const {
    if (days < 0 || days > 3650) invalid("days out of range");
    if (patients_per_day < 0 || patients_per_day > 999) invalid("patients_per_day must be in [0, 999]");
    if (beds.empty()) invalid("beds must not be empty");
    std::set<std::string> seen;
    for (const auto& b : beds) {
        if (b.empty() || !seen.insert(b).second) invalid("bed labels must be non-empty and distinct");
    }
    for (const auto& b : or_beds) {
        if (b.empty() || !seen.insert(b).second) invalid("bed labels must be non-empty and distinct");
    }
    std::set<std::string> emr_labels;
    for (const auto& b : seen) {
        if (!emr_labels.insert(linkage::normalize_bed_label(b, linkage::bed_label_map{})).second) {
            invalid("two beds normalize to the same label: " + b);
        }
    }
    if (waves.empty()) invalid("waves must not be empty");
    for (const auto& w : waves) {
        if (!find_wave(w)) invalid("unknown wave symbol '" + w + "'");
    }
    if (waves_per_patient < 1) invalid("waves_per_patient must be at least 1");
    for (auto [name, rate] : {std::pair{"transfer_rate", transfer_rate},
                              {"missing_lifetime_id_fraction", missing_lifetime_id_fraction},
                              {"or_shared_stream_fraction", or_shared_stream_fraction},
                              {"device_log_rate", device_log_rate},
                              {"adt_missing_rate", adt_missing_rate},
                              {"wrong_bed_rate", wrong_bed_rate},
                              {"zero_length_pair_rate", zero_length_pair_rate},
                              {"duplicate_rate", duplicate_rate},
                              {"readmit_chain_rate", readmit_chain_rate},
                              {"gap_rate", gap_rate},
                              {"alert_identifier_rate", alert_identifier_rate}}) {
        if (!(rate >= 0 && rate <= 1)) invalid(std::string(name) + " must be in [0, 1]");
    }
    if (!(adt_jitter_minutes >= 0 && adt_jitter_minutes <= 120)) invalid("adt_jitter_minutes must be in [0, 120]");
    if (numeric_interval_seconds < 1 || enumeration_interval_minutes < 1 || wave_interval_minutes < 1 ||
        wave_block_seconds < 1 || wave_block_seconds * 1000 >= wave_interval_minutes * 60'000) {
        invalid("intervals must be positive and blocks shorter than their spacing");
    }
}

scenario_config scenario_config::for_profile(std::string_view name) {
    scenario_config c;
    c.profile = std::string(name);
    c.beds = {"01ALPHA", "02ALPHA", "03ALPHA", "04ALPHA", "05ALPHA", "06ALPHA", "01BRAVO",
              "02BRAVO", "03BRAVO", "04BRAVO", "01CHARLIE", "02CHARLIE", "03CHARLIE", "04CHARLIE"};
    c.or_beds = {"OR-1", "OR-2"};
    c.waves = {"II", "Pleth", "Resp"};
    c.missing_lifetime_id_fraction = 0.5;
    c.transfer_rate = 0.15;
    c.or_shared_stream_fraction = 0.15;
    c.zero_length_pair_rate = 0.1;
    c.duplicate_rate = 0.1;
    c.readmit_chain_rate = 0.1;
    c.gap_rate = 0.1;
    c.alert_identifier_rate = 0.3;
    if (name == "default" || name == "paper") {
        c.device_log_rate = 0.3;
        c.adt_missing_rate = 0.2;
        c.adt_jitter_minutes = 30;
        c.wrong_bed_rate = 0.08;
    } else if (name == "clean") {
        c.device_log_rate = 1.0;
    } else {
        invalid("unknown profile '" + std::string(name) + "'");
    }
    return c;
}

scenario_config scenario_config::parse(std::string_view text) {
    kv::reader r(kv::parse(text));
    auto c = for_profile(r.text("profile", "default"));
    c.seed = static_cast<std::uint64_t>(r.integer("seed", static_cast<std::int64_t>(c.seed)));
    c.start_day = parse_day(r.text("start_day", format_day(c.start_day)));
    c.days = static_cast<int>(r.integer("days", c.days));
    c.patients_per_day = static_cast<int>(r.integer("patients_per_day", c.patients_per_day));
    c.beds = r.list("beds", c.beds);
    c.or_beds = r.list("or_beds", c.or_beds);
    c.waves = r.list("waves", c.waves);
    c.waves_per_patient = static_cast<int>(r.integer("waves_per_patient", c.waves_per_patient));
    c.transfer_rate = r.real("transfer_rate", c.transfer_rate);
    c.missing_lifetime_id_fraction = r.real("missing_lifetime_id_fraction", c.missing_lifetime_id_fraction);
    c.or_shared_stream_fraction = r.real("or_shared_stream_fraction", c.or_shared_stream_fraction);
    c.device_log_rate = r.real("device_log_rate", c.device_log_rate);
    c.adt_missing_rate = r.real("adt_missing_rate", c.adt_missing_rate);
    c.adt_jitter_minutes = r.real("adt_jitter_minutes", c.adt_jitter_minutes);
    c.wrong_bed_rate = r.real("wrong_bed_rate", c.wrong_bed_rate);
    c.zero_length_pair_rate = r.real("zero_length_pair_rate", c.zero_length_pair_rate);
    c.duplicate_rate = r.real("duplicate_rate", c.duplicate_rate);
    c.readmit_chain_rate = r.real("readmit_chain_rate", c.readmit_chain_rate);
    c.gap_rate = r.real("gap_rate", c.gap_rate);
    c.alert_identifier_rate = r.real("alert_identifier_rate", c.alert_identifier_rate);
    c.numeric_interval_seconds = static_cast<int>(r.integer("numeric_interval_seconds", c.numeric_interval_seconds));
    c.enumeration_interval_minutes =
        static_cast<int>(r.integer("enumeration_interval_minutes", c.enumeration_interval_minutes));
    c.wave_interval_minutes = static_cast<int>(r.integer("wave_interval_minutes", c.wave_interval_minutes));
    c.wave_block_seconds = static_cast<int>(r.integer("wave_block_seconds", c.wave_block_seconds));
    r.reject_unknown();
    c.validate();
    return c;
}

scenario_config scenario_config::load(const stdfs::path& path) {
    if (!stdfs::exists(path)) invalid("config file not found: " + path.string());
    return parse(fs::read_text(path));
}

std::string scenario_config::render() const {
    std::string out;
    auto put = [&](const char* key, const std::string& value) { out += std::string(key) + " = " + value + "\n"; };
    put("profile", profile);
    put("seed", std::to_string(seed));
    put("start_day", format_day(start_day));
    put("days", std::to_string(days));
    put("patients_per_day", std::to_string(patients_per_day));
    put("beds", kv::join(beds));
    put("or_beds", kv::join(or_beds));
    put("waves", kv::join(waves));
    put("waves_per_patient", std::to_string(waves_per_patient));
    put("transfer_rate", format_real(transfer_rate));
    put("missing_lifetime_id_fraction", format_real(missing_lifetime_id_fraction));
    put("or_shared_stream_fraction", format_real(or_shared_stream_fraction));
    put("device_log_rate", format_real(device_log_rate));
    put("adt_missing_rate", format_real(adt_missing_rate));
    put("adt_jitter_minutes", format_real(adt_jitter_minutes));
    put("wrong_bed_rate", format_real(wrong_bed_rate));
    put("zero_length_pair_rate", format_real(zero_length_pair_rate));
    put("duplicate_rate", format_real(duplicate_rate));
    put("readmit_chain_rate", format_real(readmit_chain_rate));
    put("gap_rate", format_real(gap_rate));
    put("alert_identifier_rate", format_real(alert_identifier_rate));
    put("numeric_interval_seconds", std::to_string(numeric_interval_seconds));
    put("enumeration_interval_minutes", std::to_string(enumeration_interval_minutes));
    put("wave_interval_minutes", std::to_string(wave_interval_minutes));
    put("wave_block_seconds", std::to_string(wave_block_seconds));
    return out;
}

std::vector<calendar_day> scenario_config::day_list() const {
    std::vector<calendar_day> out;
    for (int i = 0; i < days; ++i) out.push_back(start_day + std::chrono::days{i});
    return out;
}

// =============================================================================
// Generation
// =============================================================================

generated_day generate_day(const scenario_config& config, calendar_day day) {
    config.validate();
    return day_builder(config, day).run();
}

stdfs::path truth_path(const stdfs::path& extracts_root, calendar_day day) {
    return extracts_root / (format_day(day) + ".truth.json");
}

void write_day(const generated_day& g, const stdfs::path& extracts_root) {
    const auto day = g.bundle.day;
    const auto dir = extracts_root / format_day(day);
    stdfs::remove_all(dir);
    extract::write_bundle(g.bundle, dir, start_of(day + std::chrono::days{1}) + 1h);
    fs::write_atomic(truth_path(extracts_root, day), render_truth(g.truth));
}

std::string render_truth(const ground_truth& t) {
    nlohmann::ordered_json j;
    j["day"] = format_day(t.day);
    j["seed"] = t.seed;
    j["patients"] = nlohmann::ordered_json::array();
    for (const auto& p : t.patients) {
        j["patients"].push_back({{"mrn", p.mrn},
                                 {"name", p.name},
                                 {"visit_id", p.visit_id},
                                 {"birth_date", format_day(p.birth_date)},
                                 {"lifetime_id", p.lifetime_id}});
    }
    j["segments"] = nlohmann::ordered_json::array();
    for (const auto& s : t.segments) {
        nlohmann::ordered_json waves = nlohmann::ordered_json::object();
        for (const auto& [symbol, n] : s.wave_samples) waves[symbol] = n;
        j["segments"].push_back({{"monitor_patient_id", s.monitor_patient_id},
                                 {"bed_label", s.bed_label},
                                 {"emr_bed_label", s.emr_bed_label},
                                 {"mrn", s.mrn},
                                 {"lifetime_id", s.lifetime_id},
                                 {"start", format_timestamp(s.range.start)},
                                 {"end", format_timestamp(s.range.end)},
                                 {"wave_samples", waves}});
    }
    auto& counts = j["row_counts"];
    counts = nlohmann::ordered_json::object();
    for (const auto& [table, n] : t.row_counts) counts[std::string(extract::table_name(table))] = n;
    return j.dump(2) + "\n";
}

ground_truth parse_truth(std::string_view text) {
    try {
        auto j = nlohmann::json::parse(text);
        ground_truth t;
        t.day = parse_day(j.at("day").get<std::string>());
        t.seed = j.at("seed").get<std::uint64_t>();
        for (const auto& p : j.at("patients")) {
            t.patients.push_back({p.at("mrn").get<std::string>(), p.at("name").get<std::string>(),
                                  p.at("visit_id").get<std::string>(), parse_day(p.at("birth_date").get<std::string>()),
                                  p.at("lifetime_id").get<bool>()});
        }
        for (const auto& s : j.at("segments")) {
            truth_segment seg;
            seg.monitor_patient_id = s.at("monitor_patient_id").get<std::string>();
            seg.bed_label = s.at("bed_label").get<std::string>();
            seg.emr_bed_label = s.at("emr_bed_label").get<std::string>();
            seg.mrn = s.at("mrn").get<std::string>();
            seg.lifetime_id = s.at("lifetime_id").get<bool>();
            seg.range = {parse_timestamp(s.at("start").get<std::string>()),
                         parse_timestamp(s.at("end").get<std::string>())};
            for (const auto& [symbol, n] : s.at("wave_samples").items()) seg.wave_samples[symbol] = n.get<std::int64_t>();
            t.segments.push_back(std::move(seg));
        }
        for (const auto& [name, n] : j.at("row_counts").items()) {
            auto table = extract::table_from_name(name);
            if (!table) throw archive_error(error_code::schema_violation, "truth: unknown table " + name);
            t.row_counts[*table] = n.get<std::uint64_t>();
        }
        return t;
    } catch (const nlohmann::json::exception& e) {
        throw archive_error(error_code::schema_violation, std::string("truth: ") + e.what());
    }
}

ground_truth read_truth(const stdfs::path& path) { return parse_truth(fs::read_text(path)); }

catalog::unit_map unit_map_for(const scenario_config& config) {
    catalog::unit_map m;
    for (const auto* list : {&config.beds, &config.or_beds}) {
        for (const auto& b : *list) m.units[linkage::normalize_bed_label(b, linkage::bed_label_map{})] = unit_of_device_bed(b);
    }
    return m;
}

std::string render_unit_map(const catalog::unit_map& units) {
    csv::writer w;
    w.write_row({"bed", "unit"});
    for (const auto& [bed, unit] : units.units) w.add(bed).add(unit).end_row();
    return w.str();
}

std::string render_birthdates(std::span<const ground_truth> days) {
    std::map<std::string, calendar_day> births;
    for (const auto& t : days) {
        for (const auto& p : t.patients) births.emplace(p.mrn, p.birth_date);
    }
    csv::writer w;
    w.write_row({"mrn", "birth_date"});
    for (const auto& [mrn, d] : births) w.add(mrn).add(format_day(d)).end_row();
    return w.str();
}

std::string render_identity_registry(std::span<const ground_truth> days) {
    std::set<std::tuple<std::string, std::string, std::string>> rows;
    for (const auto& t : days) {
        for (const auto& p : t.patients) rows.emplace(p.mrn, p.name, p.visit_id);
    }
    csv::writer w;
    w.write_row({"mrn", "name", "visit_id"});
    for (const auto& [mrn, name, visit] : rows) w.add(mrn).add(name).add(visit).end_row();
    return w.str();
}

std::vector<ground_truth> write_corpus(const scenario_config& config, const std::filesystem::path& root) {
    config.validate();
    std::vector<ground_truth> truths;
    for (auto day : config.day_list()) {
        auto g = generate_day(config, day);
        write_day(g, root / "extracts");
        truths.push_back(std::move(g.truth));
    }
    fs::write_atomic(root / "units.csv", render_unit_map(unit_map_for(config)));
    fs::write_atomic(root / "birthdates.csv", render_birthdates(truths));
    fs::write_atomic(root / "patients.csv", render_identity_registry(truths));
    return truths;
}

catalog::archive_stats expected_stats(std::span<const ground_truth> days, const catalog::unit_map* units) {
    catalog::archive_stats s;
    s.days = days.size();
    std::set<std::string> patients;
    double daily_patients = 0;
    struct acc {
        std::set<std::string> patients;
        std::uint64_t studies = 0;
        std::uint64_t bytes = 0;
    };
    std::map<std::string, acc> waves;
    std::map<std::pair<std::string, std::size_t>, std::set<std::string>> cell_patients;
    for (const auto& t : days) {
        std::map<std::string, calendar_day> births;
        for (const auto& p : t.patients) births[p.mrn] = p.birth_date;
        std::set<std::string> today;
        for (const auto& seg : t.segments) {
            ++s.studies;
            today.insert(seg.mrn);
            for (const auto& [symbol, n] : seg.wave_samples) {
                auto& a = waves[symbol];
                a.patients.insert(seg.mrn);
                ++a.studies;
                a.bytes += 2 * static_cast<std::uint64_t>(n);
                s.size_bytes += 2 * static_cast<std::uint64_t>(n);
            }
            if (units) {
                auto g = static_cast<std::size_t>(catalog::age_group_at(births.at(seg.mrn), day_of(seg.range.start)));
                auto unit = units->unit_for(seg.emr_bed_label);
                ++s.unit_by_age[unit][g].studies;
                cell_patients[{unit, g}].insert(seg.mrn);
            }
        }
        daily_patients += static_cast<double>(today.size());
        patients.insert(today.begin(), today.end());
    }
    for (const auto& [key, set] : cell_patients) s.unit_by_age[key.first][key.second].patients = set.size();
    s.patients = patients.size();
    for (const auto& k : wave_registry()) {
        auto it = waves.find(std::string(k.symbol));
        if (it == waves.end()) continue;
        s.per_wave.push_back({std::string(k.symbol), std::string(k.unit), k.rate, it->second.patients.size(),
                              it->second.studies, it->second.bytes});
    }
    if (s.days > 0) {
        const auto n = static_cast<double>(s.days);
        s.avg_daily_studies = static_cast<double>(s.studies) / n;
        s.avg_daily_patients = daily_patients / n;
        s.avg_daily_size_bytes = static_cast<double>(s.size_bytes) / n;
    }
    return s;
}

// =============================================================================
// Scoring
// =============================================================================

linkage_score score_linkage(std::span<const linkage::linkage_result> results, const ground_truth& truth) {
    linkage_score score;
    for (const auto& r : results) {
        if (!r.lifetime_id.empty()) continue;
        ++score.missing_id_streams;
        bool any = false;
        for (const auto& seg : r.segments) {
            if (!seg.mrn) continue;
            any = true;
            ++score.assigned_segments;
            std::map<std::string, millis> share;
            for (const auto& t : truth.segments) {
                if (t.monitor_patient_id == r.monitor_patient_id && t.bed_label == r.bed_label) {
                    share[t.mrn] += t.range.overlap(seg.range);
                }
            }
            auto best = std::max_element(share.begin(), share.end(),
                                         [](const auto& a, const auto& b) { return a.second < b.second; });
            if (best != share.end() && best->second.count() > 0 && best->first == *seg.mrn) ++score.correct_segments;
        }
        if (any) ++score.assigned_streams;
    }
    score.coverage = score.missing_id_streams == 0
                         ? 0.0
                         : static_cast<double>(score.assigned_streams) / static_cast<double>(score.missing_id_streams);
    if (score.assigned_segments > 0) {
        score.accuracy =
            static_cast<double>(score.correct_segments) / static_cast<double>(score.assigned_segments);
    }
    return score;
}

std::vector<linkage::linkage_result> oracle_linkage(const ground_truth& truth) {
    std::map<std::pair<std::string, std::string>, linkage::linkage_result> streams;
    for (const auto& t : truth.segments) {
        auto& r = streams[{t.monitor_patient_id, t.bed_label}];
        if (r.segments.empty()) {
            r.monitor_patient_id = t.monitor_patient_id;
            r.bed_label = t.bed_label;
            r.emr_bed_label = t.emr_bed_label;
            r.lifetime_id = t.lifetime_id ? t.mrn : "";
            r.stream_range = t.range;
        }
        r.stream_range = {std::min(r.stream_range.start, t.range.start), std::max(r.stream_range.end, t.range.end)};
        linkage::link_segment seg;
        seg.range = t.range;
        seg.mrn = t.mrn;
        seg.method = t.lifetime_id ? linkage::link_method::lifetime_id : linkage::link_method::device_log;
        r.segments.push_back(std::move(seg));
    }
    std::vector<linkage::linkage_result> out;
    for (auto& [key, r] : streams) {
        std::sort(r.segments.begin(), r.segments.end(),
                  [](const auto& a, const auto& b) { return a.range.start < b.range.start; });
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace wavearchive::synthgen
