/**
 * @file test_deid.cpp
 * @brief Pseudonyms, date shifts, the sealed map and de-identified copies
 */

#include <gtest/gtest.h>

#include "support/test_support.hpp"
#include "wavearchive/core/digest.hpp"
#include "wavearchive/core/error.hpp"
#include "wavearchive/core/fs.hpp"
#include "wavearchive/deid.hpp"
#include "wavearchive/segmentation.hpp"

#include <cmath>
#include <functional>

using namespace wavearchive;
using namespace wavearchive::deid;
using wavearchive::testing::at;
using wavearchive::testing::scratch_dir;

namespace {

void expect_error(const std::function<void()>& fn, error_code code) {
    try {
        fn();
        ADD_FAILURE() << "expected " << to_string(code);
    } catch (const archive_error& e) {
        EXPECT_EQ(e.code(), code) << e.what();
    }
}

extract::wave_block block(const std::string& wave, int rate, timestamp start, std::size_t n) {
    extract::wave_block b;
    b.monitor_patient_id = "p42";
    b.bed_label = "13ALPHA";
    b.wave = wave;
    b.sample_rate = rate;
    b.block_start = start;
    for (std::size_t i = 0; i < n; ++i) b.samples.push_back(std::sin(0.01 * static_cast<double>(i)));
    return b;
}

segmentation::study make_study(const std::string& mrn, timestamp start) {
    segmentation::study s;
    if (!mrn.empty()) s.mrn = mrn;
    s.monitor_patient_id = "p42";
    s.device_bed_label = "13ALPHA";
    s.bed_label = "A13";
    s.range = {start, start + std::chrono::hours{1}};
    s.study_id = segmentation::study_identifier(mrn.empty() ? "p42" : mrn, "A13", start);
    s.method = mrn.empty() ? linkage::link_method::unmatched : linkage::link_method::lifetime_id;
    s.waves.push_back({"II", {block("II", 500, start, 1000)}});
    s.numerics.push_back({"p42", mrn, "13ALPHA", start, extract::metric::parse("HR"), 80, "bpm"});
    s.alerts.push_back({"p42", "13ALPHA", start + std::chrono::minutes{5}, extract::alert_severity::red,
                        "Page John Doe re " + (mrn.empty() ? std::string("V00000009") : mrn)});
    s.enumerations.push_back({"p42", "13ALPHA", start, "Rhythm", "Sinus"});
    return s;
}

scrub_list sample_scrub() {
    scrub_list s;
    s.add_name("John Doe");
    s.add_identifier("MRN0000042");
    s.add_identifier("V00000009");
    return s;
}

std::string all_bytes(const std::filesystem::path& dir) {
    std::string out;
    for (const auto& rel : fs::list_files(dir)) out += rel.generic_string() + "\n" + fs::read_text(dir / rel);
    return out;
}

const std::string seed = "test-seed";

}  // namespace

// =============================================================================
// Shifts and pseudonyms
// =============================================================================

TEST(ShiftTest, DeterministicAndInRange) {
    for (int i = 0; i < 1000; ++i) {
        auto mrn = "MRN" + std::to_string(i);
        auto d = derive_shift(mrn, seed);
        EXPECT_EQ(d, derive_shift(mrn, seed));
        EXPECT_GE(d, 30);
        EXPECT_LE(d, 365);
    }
}

TEST(ShiftTest, RotatingTheSeedChangesAssignments) {
    int same_shift = 0;
    int same_id = 0;
    for (int i = 0; i < 1000; ++i) {
        auto mrn = "MRN" + std::to_string(i);
        same_shift += derive_shift(mrn, "a") == derive_shift(mrn, "b");
        same_id += derive_pseudo_id(mrn, "a") == derive_pseudo_id(mrn, "b");
    }
    // 1/336 chance per MRN of a repeated shift
    EXPECT_LT(same_shift, 20);
    EXPECT_EQ(same_id, 0);
}

TEST(ShiftTest, UniformByChiSquare) {
    constexpr int n = 10000;
    constexpr int bins = 336;
    std::vector<int> counts(bins, 0);
    for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(derive_shift("MRN" + std::to_string(i), seed) - 30)];
    const double expected = static_cast<double>(n) / bins;
    double chi2 = 0;
    for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
    // Wilson-Hilferty approximation of the 0.999 quantile
    const double df = bins - 1;
    const double z = 3.0902;
    const double critical = df * std::pow(1 - 2 / (9 * df) + z * std::sqrt(2 / (9 * df)), 3);
    EXPECT_LT(chi2, critical);
}

TEST(ShiftTest, EmptyInputsAreRejected) {
    expect_error([] { derive_shift("", seed); }, error_code::config_invalid);
    expect_error([] { derive_shift("MRN1", ""); }, error_code::config_invalid);
}

TEST(PseudoIdTest, FormatAndUnmatchedPrefix) {
    auto p = derive_pseudo_id("MRN0000042", seed);
    ASSERT_EQ(p.size(), 25u);
    EXPECT_EQ(p[0], 'P');
    EXPECT_EQ(p.substr(1).find_first_not_of("0123456789abcdef"), std::string::npos);
    auto u = unmatched_identity("p42", seed);
    EXPECT_EQ(u.pseudo_id[0], 'U');
    EXPECT_EQ(u.pseudo_id.size(), 25u);
    EXPECT_EQ(u, unmatched_identity("p42", seed));
    EXPECT_NE(u.pseudo_id.substr(1), derive_pseudo_id("p42", seed).substr(1));
}

TEST(DeidStudyIdTest, HundredDayShiftMovesStartBack) {
    identity who{"Pabc", 100};
    EXPECT_EQ(deid_study_id(who, "A13", at("2021-03-01T08:00:00Z")), "Pabc_A13_20201121T080000Z");
}

TEST(BatchTokenTest, OpaqueAndStable) {
    auto t = batch_token(parse_day("2021-03-01"), seed);
    EXPECT_EQ(t, batch_token(parse_day("2021-03-01"), seed));
    EXPECT_NE(t, batch_token(parse_day("2021-03-02"), seed));
    EXPECT_EQ(t.find("2021"), std::string::npos);
}

// =============================================================================
// Map
// =============================================================================

TEST(DeidMapTest, SealedRoundTripHidesMrns) {
    scratch_dir dir("map");
    auto path = dir / std::string(map_file_name);
    std::vector<std::string> mrns{"MRN0000042", "MRN0000007"};
    auto m = deid_map::update(path, seed, mrns);
    EXPECT_EQ(m.size(), 2u);
    EXPECT_EQ(fs::read_text(path).find("MRN0000042"), std::string::npos);

    auto loaded = deid_map::load(path, seed);
    EXPECT_EQ(loaded.entries(), m.entries());
    EXPECT_EQ(loaded.at("MRN0000042").pseudo_id, derive_pseudo_id("MRN0000042", seed));
    expect_error([&] { deid_map::load(path, "other-seed"); }, error_code::checksum_mismatch);
}

TEST(DeidMapTest, UpdateMergesAndKeepsExistingEntries) {
    scratch_dir dir("map");
    auto path = dir / std::string(map_file_name);
    std::vector<std::string> first{"MRN1"};
    std::vector<std::string> second{"MRN1", "MRN2"};
    deid_map::update(path, seed, first);
    auto m = deid_map::update(path, seed, second);
    EXPECT_EQ(m.size(), 2u);
    EXPECT_TRUE(deid_map::load(path, seed).contains("MRN2"));
}

TEST(DeidMapTest, MissingEntryIsAnError) {
    deid_map m;
    expect_error([&] { (void)m.at("MRN9"); }, error_code::map_missing_entry);
}

TEST(DeidMapTest, CsvRejectsBadShift) {
    expect_error([] { deid_map::from_csv("mrn,pseudo_id,shift_days\nM,P1,7\n"); }, error_code::schema_violation);
}

// =============================================================================
// Scrubbing
// =============================================================================

TEST(ScrubTest, RemovesNamesAndIdentifiers) {
    auto s = sample_scrub();
    EXPECT_EQ(s.apply("Page john DOE now"), "Page [REDACTED] now");
    EXPECT_EQ(s.apply("Doe, John"), "[REDACTED], [REDACTED]");
    EXPECT_EQ(s.apply("id=MRN0000042;"), "id=[REDACTED];");
    EXPECT_EQ(s.apply("xV00000009y"), "x[REDACTED]y");
}

TEST(ScrubTest, NamePartsOnlyMatchWholeWords) {
    auto s = sample_scrub();
    EXPECT_EQ(s.apply("Johnson Doest"), "Johnson Doest");
}

TEST(ScrubTest, ShortNamePartsAreKept) {
    scrub_list s;
    s.add_name("Al Li");
    EXPECT_EQ(s.apply("Al and Li"), "Al and Li");
    EXPECT_EQ(s.apply("Al Li"), "[REDACTED]");
}

TEST(ScrubTest, FromEventsCollectsEveryIdentifier) {
    auto b = wavearchive::testing::small_bundle();
    auto s = scrub_list::from_events(b.adt_events);
    EXPECT_EQ(s.apply("John Doe MRN0000007 V00000001"), "[REDACTED] [REDACTED] [REDACTED]");
}

// =============================================================================
// Study copies
// =============================================================================

TEST(DeidentifyStudyTest, ShiftsTimesAndPreservesSignals) {
    scratch_dir dir("deid");
    auto s = make_study("MRN0000042", at("2021-03-01T08:00:00Z"));
    auto src = dir / "identified";
    signal_store::write_study(s, src / s.study_id);
    deid_map m;
    const auto& who = m.ensure("MRN0000042", seed);

    auto out = deidentify_study(src / s.study_id, dir / "deid", m, seed, sample_scrub());
    const auto shift = std::chrono::days{who.shift_days};
    EXPECT_EQ(out.start, s.range.start - shift);
    EXPECT_EQ(out.study_id, deid_study_id(who, "A13", s.range.start));
    EXPECT_TRUE(out.deidentified);
    EXPECT_EQ(out.pseudo_id, who.pseudo_id);

    auto folder = dir / "deid" / out.study_id;
    ASSERT_EQ(out.waves.size(), 1u);
    auto copy = signal_store::read_record(folder / out.waves[0].file);
    auto orig = signal_store::read_record(src / s.study_id / (s.study_id + "_II.hea"));
    EXPECT_EQ(copy.adu, orig.adu);
    EXPECT_EQ(copy.header.base_time, orig.header.base_time - shift);
    EXPECT_EQ(signal_store::read_details(folder), out);
}

TEST(DeidentifyStudyTest, OutputHoldsNoIdentifiers) {
    scratch_dir dir("deid");
    auto s = make_study("MRN0000042", at("2021-03-01T08:00:00Z"));
    signal_store::write_study(s, dir / "id" / s.study_id);
    deid_map m;
    m.ensure("MRN0000042", seed);
    auto out = deidentify_study(dir / "id" / s.study_id, dir / "deid", m, seed, sample_scrub());
    auto bytes = all_bytes(dir / "deid");
    for (const char* needle : {"MRN0000042", "John", "Doe", "p42", "2021-03-01", "20210301"}) {
        EXPECT_EQ(bytes.find(needle), std::string::npos) << needle;
    }
    EXPECT_NE(bytes.find("[REDACTED]"), std::string::npos);
}

TEST(DeidentifyStudyTest, UnmatchedStudyUsesMonitorToken) {
    scratch_dir dir("deid");
    auto s = make_study("", at("2021-03-01T08:00:00Z"));
    signal_store::write_study(s, dir / "id" / s.study_id);
    auto out = deidentify_study(dir / "id" / s.study_id, dir / "deid", deid_map{}, seed, sample_scrub());
    EXPECT_EQ(out.pseudo_id, unmatched_identity("p42", seed).pseudo_id);
    EXPECT_FALSE(out.mrn_present);
    auto bytes = all_bytes(dir / "deid");
    EXPECT_EQ(bytes.find("p42"), std::string::npos);
    EXPECT_EQ(bytes.find("V00000009"), std::string::npos);
}

TEST(DeidentifyStudyTest, MissingMapEntryFails) {
    scratch_dir dir("deid");
    auto s = make_study("MRN0000042", at("2021-03-01T08:00:00Z"));
    signal_store::write_study(s, dir / "id" / s.study_id);
    expect_error([&] { deidentify_study(dir / "id" / s.study_id, dir / "deid", deid_map{}, seed, sample_scrub()); },
                 error_code::map_missing_entry);
}

TEST(DeidentifyStudyTest, SpacingBetweenStudiesIsPreserved) {
    scratch_dir dir("deid");
    deid_map m;
    m.ensure("MRN0000042", seed);
    const timestamp starts[] = {at("2021-03-01T08:00:00Z"), at("2021-03-04T17:45:30Z"), at("2021-06-30T23:00:00Z")};
    std::vector<timestamp> shifted;
    for (auto t : starts) {
        auto s = make_study("MRN0000042", t);
        signal_store::write_study(s, dir / "id" / s.study_id);
        shifted.push_back(deidentify_study(dir / "id" / s.study_id, dir / "deid", m, seed, sample_scrub()).start);
    }
    for (std::size_t i = 1; i < shifted.size(); ++i) {
        EXPECT_EQ(shifted[i] - shifted[i - 1], starts[i] - starts[i - 1]);
    }
}

TEST(DeidentifyStudyTest, ApplyingTwiceIsIdentity) {
    scratch_dir dir("deid");
    auto s = make_study("MRN0000042", at("2021-03-01T08:00:00Z"));
    signal_store::write_study(s, dir / "id" / s.study_id);
    deid_map m;
    m.ensure("MRN0000042", seed);
    auto once = deidentify_study(dir / "id" / s.study_id, dir / "d1", m, seed, sample_scrub());
    auto twice = deidentify_study(dir / "d1" / once.study_id, dir / "d2", m, seed, sample_scrub());
    EXPECT_EQ(once, twice);
    EXPECT_EQ(all_bytes(dir / "d1"), all_bytes(dir / "d2"));
}
