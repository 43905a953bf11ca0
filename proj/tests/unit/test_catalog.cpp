/**
 * @file test_catalog.cpp
 * @brief Partition publishing, queries, integrity and statistics
 */

#include <gtest/gtest.h>

#include "support/test_support.hpp"
#include "wavearchive/catalog.hpp"
#include "wavearchive/core/error.hpp"
#include "wavearchive/core/fs.hpp"
#include "wavearchive/linkage.hpp"
#include "wavearchive/segmentation.hpp"

#include <functional>

using namespace wavearchive;
using namespace wavearchive::catalog;
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

/// Writes and packs every study of the small fixture bundle under `root`.
std::vector<packed_study> pack_fixture(const std::filesystem::path& root) {
    auto b = wavearchive::testing::small_bundle();
    auto linked = linkage::link_day(b, linkage::bed_label_map{});
    auto filled = segmentation::fill_studies(segmentation::plan_studies(linked.results, b.day), b);
    std::vector<packed_study> out;
    for (const auto& s : filled.studies) {
        auto dir = root / "studies" / s.study_id;
        packed_study p;
        p.details = signal_store::write_study(s, dir);
        p.storage_path = "packed/" + s.study_id + ".zip";
        p.pack = signal_store::pack_study(dir, root / p.storage_path);
        out.push_back(std::move(p));
    }
    return out;
}

unit_map fixture_units() {
    unit_map u;
    u.units["A13"] = "ICU";
    u.units["OR-1"] = "Surgery";
    return u;
}

study_map_row row(const std::string& id, const std::string& patient, const std::string& bed, const std::string& unit,
                  const char* start, const char* end) {
    return {id, patient, true, bed, unit, at(start), at(end), "packed/" + id + ".zip", "lifetime_id"};
}

/// Two studies from a transfer at 10:30 plus an unrelated one.
catalog_data transfer_catalog() {
    catalog_data c;
    c.partitions = {"day=2021-03-01"};
    c.study_map["day=2021-03-01"] = {
        row("s1", "M1", "A13", "ICU", "2021-03-01T08:00:00Z", "2021-03-01T10:30:00Z"),
        row("s2", "M1", "B02", "Ward", "2021-03-01T10:30:00Z", "2021-03-01T18:00:00Z"),
        row("s3", "M2", "A14", "ICU", "2021-03-01T01:00:00Z", "2021-03-01T02:00:00Z"),
    };
    c.details = {{"s1", "II", "mV", 500, 1000, "s1_II.hea", 2000},
                 {"s2", "Pleth", "NU", 125, 250, "s2_Pleth.hea", 500},
                 {"s3", "II", "mV", 500, 500, "s3_II.hea", 1000},
                 {"s3", "Resp", "Ohm", 63, 63, "s3_Resp.hea", 126}};
    for (const auto& id : {"s1", "s2", "s3"}) c.manifest.push_back({"2021-03-01", std::string(id) + ".zip", 10, "x"});
    return c;
}

std::vector<std::string> ids(const std::vector<study_map_row>& rows) {
    std::vector<std::string> out;
    for (const auto& r : rows) out.push_back(r.study_id);
    return out;
}

}  // namespace

// =============================================================================
// Publishing
// =============================================================================

TEST(PublishTest, FixtureDayIndexesEveryStudyAndWaveFile) {
    scratch_dir dir("cat");
    auto packed = pack_fixture(dir.path());
    std::size_t wave_files = 0;
    for (const auto& p : packed) wave_files += p.details.waves.size();

    auto day = parse_day("2021-03-01");
    auto part = build_partition(day_partition(day), "2021-03-01", packed, fixture_units(), "{}\n");
    publish_partition(dir / "catalog", part, flavor::identified);

    auto c = load_catalog(dir / "catalog");
    ASSERT_EQ(c.partitions, std::vector<std::string>{"day=2021-03-01"});
    EXPECT_EQ(c.all_studies().size(), packed.size());
    EXPECT_EQ(packed.size(), 2u);
    EXPECT_EQ(c.details.size(), wave_files);
    EXPECT_EQ(c.manifest.size(), packed.size());
    EXPECT_TRUE(integrity_problems(c).empty());
    for (const auto& s : c.all_studies()) EXPECT_TRUE(std::filesystem::exists(dir / s.storage_path));
    EXPECT_EQ(fs::read_text(dir / "catalog/linkage_audit/day=2021-03-01/part.jsonl"), "{}\n");
}

TEST(PublishTest, RepublishIsByteIdentical) {
    scratch_dir dir("cat");
    auto packed = pack_fixture(dir.path());
    auto part = build_partition("day=2021-03-01", "2021-03-01", packed, fixture_units());
    publish_partition(dir / "catalog", part, flavor::identified);
    auto before = fs::list_files(dir / "catalog");
    std::string bytes;
    for (const auto& f : before) bytes += fs::read_text(dir / "catalog" / f);

    publish_partition(dir / "catalog", part, flavor::identified);
    std::string again;
    for (const auto& f : fs::list_files(dir / "catalog")) again += fs::read_text(dir / "catalog" / f);
    EXPECT_EQ(fs::list_files(dir / "catalog"), before);
    EXPECT_EQ(again, bytes);
}

TEST(PublishTest, EmptyDayStillCreatesPartitionFiles) {
    scratch_dir dir("cat");
    auto part = build_partition("day=2021-03-02", "2021-03-02", {}, unit_map{});
    publish_partition(dir.path(), part, flavor::identified);
    EXPECT_EQ(fs::read_text(dir / "study_map/day=2021-03-02/part.csv"),
              "study_id,mrn,lifetime_id_source,bed,clinical_unit,start,end,storage_path,linkage_method\n");
    EXPECT_TRUE(std::filesystem::exists(dir / "study_details/day=2021-03-02/part.csv"));
    EXPECT_TRUE(std::filesystem::exists(dir / "waveform_manifest/day=2021-03-02/part.csv"));
    auto c = load_catalog(dir.path());
    EXPECT_EQ(c.partitions.size(), 1u);
    EXPECT_TRUE(c.all_studies().empty());
}

TEST(PublishTest, UnpackedStudyIsPartialDay) {
    scratch_dir dir("cat");
    auto packed = pack_fixture(dir.path());
    packed[1].pack.reset();
    expect_error([&] { build_partition("day=2021-03-01", "2021-03-01", packed, unit_map{}); }, error_code::partial_day);
    std::filesystem::remove(dir / packed[0].storage_path);
    packed.pop_back();
    expect_error([&] { build_partition("day=2021-03-01", "2021-03-01", packed, unit_map{}); }, error_code::partial_day);
}

TEST(PublishTest, DeidentifiedFlavorNamesPseudoColumnAndSkipsAudit) {
    scratch_dir dir("cat");
    auto part = build_partition("batch=abc", "abc", {}, unit_map{}, "secret\n");
    publish_partition(dir.path(), part, flavor::deidentified);
    EXPECT_EQ(fs::read_text(dir / "study_map/batch=abc/part.csv").substr(0, 19), "study_id,pseudo_id,");
    EXPECT_FALSE(std::filesystem::exists(dir / "linkage_audit"));
}

TEST(PublishTest, QueriesAreInvariantUnderRepublish) {
    scratch_dir dir("cat");
    auto packed = pack_fixture(dir.path());
    auto part = build_partition("day=2021-03-01", "2021-03-01", packed, fixture_units());
    publish_partition(dir / "catalog", part, flavor::identified);
    study_filter f;
    f.units = {"ICU"};
    auto first = query_studies(load_catalog(dir / "catalog"), f);
    publish_partition(dir / "catalog", part, flavor::identified);
    EXPECT_EQ(query_studies(load_catalog(dir / "catalog"), f), first);
    EXPECT_EQ(first.size(), 1u);
}

// =============================================================================
// Queries
// =============================================================================

TEST(QueryTest, UnitAndWaveJoinThroughDetails) {
    study_filter f;
    f.units = {"ICU"};
    f.wave_symbols = {"II"};
    EXPECT_EQ(ids(query_studies(transfer_catalog(), f)), (std::vector<std::string>{"s3", "s1"}));
    f.wave_symbols = {"II", "Resp"};
    EXPECT_EQ(ids(query_studies(transfer_catalog(), f)), std::vector<std::string>{"s3"});
}

TEST(QueryTest, UnknownPatientGivesNothing) {
    study_filter f;
    f.patients = {"M404"};
    EXPECT_TRUE(query_studies(transfer_catalog(), f).empty());
}

TEST(QueryTest, RangeSpanningTransferReturnsBothStudies) {
    study_filter f;
    f.range = time_range{at("2021-03-01T10:00:00Z"), at("2021-03-01T11:00:00Z")};
    EXPECT_EQ(ids(query_studies(transfer_catalog(), f)), (std::vector<std::string>{"s1", "s2"}));
    f.range = time_range{at("2021-03-01T10:30:00Z"), at("2021-03-01T11:00:00Z")};
    EXPECT_EQ(ids(query_studies(transfer_catalog(), f)), std::vector<std::string>{"s2"});
}

TEST(QueryTest, UnknownWaveSymbolIsRejected) {
    study_filter f;
    f.wave_symbols = {"Lead2"};
    expect_error([&] { query_studies(transfer_catalog(), f); }, error_code::unknown_wave_symbol);
}

TEST(QueryTest, EmptyFilterReturnsAllTimeOrdered) {
    EXPECT_EQ(ids(query_studies(transfer_catalog(), {})), (std::vector<std::string>{"s3", "s1", "s2"}));
}

// =============================================================================
// Integrity
// =============================================================================

TEST(IntegrityTest, DetectsOrphansAndDuplicates) {
    auto c = transfer_catalog();
    EXPECT_TRUE(integrity_problems(c).empty());
    c.details.push_back({"ghost", "II", "mV", 500, 1, "g.hea", 2});
    c.manifest.push_back({"2021-03-01", "ghost.zip", 1, "y"});
    c.study_map["day=2021-03-01"].push_back(c.study_map["day=2021-03-01"][0]);
    EXPECT_EQ(integrity_problems(c).size(), 4u);
}

// =============================================================================
// Statistics
// =============================================================================

TEST(AgeGroupTest, BoundaryGoldens) {
    auto birth = parse_day("2021-01-01");
    EXPECT_EQ(age_group_at(birth, parse_day("2021-01-29")), age_group::neonate);
    EXPECT_EQ(age_group_at(birth, parse_day("2021-01-30")), age_group::infant);
    EXPECT_EQ(age_group_at(birth, parse_day("2021-12-31")), age_group::infant);
    EXPECT_EQ(age_group_at(birth, parse_day("2022-01-01")), age_group::years_1_4);
    EXPECT_EQ(age_group_at(birth, parse_day("2025-12-31")), age_group::years_1_4);
    EXPECT_EQ(age_group_at(birth, parse_day("2026-01-01")), age_group::years_5_9);
    EXPECT_EQ(age_group_at(birth, parse_day("2035-06-01")), age_group::years_10_14);
    EXPECT_EQ(age_group_at(birth, parse_day("2036-01-01")), age_group::years_15_plus);
}

TEST(SummarizeTest, SingleStudyAveragesEqualItsValues) {
    catalog_data c;
    c.partitions = {"day=2021-03-01"};
    c.study_map["day=2021-03-01"] = {row("s1", "M1", "A13", "ICU", "2021-03-01T08:00:00Z", "2021-03-01T09:00:00Z")};
    c.details = {{"s1", "II", "mV", 500, 1000, "s1_II.hea", 2000}};
    auto s = summarize(c);
    EXPECT_EQ(s.studies, 1u);
    EXPECT_EQ(s.patients, 1u);
    EXPECT_EQ(s.size_bytes, 2000u);
    EXPECT_DOUBLE_EQ(s.avg_daily_studies, 1.0);
    EXPECT_DOUBLE_EQ(s.avg_daily_patients, 1.0);
    EXPECT_DOUBLE_EQ(s.avg_daily_size_bytes, 2000.0);
    ASSERT_EQ(s.per_wave.size(), 1u);
    EXPECT_EQ(s.per_wave[0], (wave_stats{"II", "mV", 500, 1, 1, 2000}));
}

TEST(SummarizeTest, PerWaveTotalsFollowRegistryOrder) {
    auto s = summarize(transfer_catalog());
    EXPECT_EQ(s.days, 1u);
    EXPECT_EQ(s.patients, 2u);
    EXPECT_EQ(s.size_bytes, 2000u + 500u + 1000u + 126u);
    ASSERT_EQ(s.per_wave.size(), 3u);
    EXPECT_EQ(s.per_wave[0], (wave_stats{"II", "mV", 500, 2, 2, 3000}));
    EXPECT_EQ(s.per_wave[1].symbol, "Pleth");
    EXPECT_EQ(s.per_wave[1].rate, 125);
    EXPECT_EQ(s.per_wave[2], (wave_stats{"Resp", "Ohm", 63, 1, 1, 126}));
}

TEST(SummarizeTest, AgeMatrixCountsPatientsOncePerCell) {
    std::map<std::string, calendar_day> births{{"M1", parse_day("2021-02-20")}, {"M2", parse_day("2010-01-01")}};
    auto s = summarize(transfer_catalog(), births);
    auto neonate = static_cast<std::size_t>(age_group::neonate);
    auto ten = static_cast<std::size_t>(age_group::years_10_14);
    EXPECT_EQ(s.unit_by_age.at("ICU")[neonate], (cell{1, 1}));
    EXPECT_EQ(s.unit_by_age.at("ICU")[ten], (cell{1, 1}));
    EXPECT_EQ(s.unit_by_age.at("Ward")[neonate], (cell{1, 1}));
    EXPECT_TRUE(summarize(transfer_catalog()).unit_by_age.empty());
}

TEST(SummarizeTest, MultiDayAverages) {
    auto c = transfer_catalog();
    c.partitions.push_back("day=2021-03-02");
    c.study_map["day=2021-03-02"] = {row("s4", "M1", "A13", "ICU", "2021-03-02T08:00:00Z", "2021-03-02T09:00:00Z")};
    auto s = summarize(c);
    EXPECT_EQ(s.days, 2u);
    EXPECT_EQ(s.studies, 4u);
    EXPECT_EQ(s.patients, 2u);
    EXPECT_DOUBLE_EQ(s.avg_daily_studies, 2.0);
    EXPECT_DOUBLE_EQ(s.avg_daily_patients, 1.5);
}

TEST(UnitMapTest, LoadsAndDefaults) {
    scratch_dir dir("units");
    fs::write_file(dir / "units.csv", "bed,unit\nA13,ICU\n");
    auto u = unit_map::load(dir / "units.csv");
    EXPECT_EQ(u.unit_for("A13"), "ICU");
    EXPECT_EQ(u.unit_for("Z99"), "Unknown");
    fs::write_file(dir / "bad.csv", "bed;unit\n");
    expect_error([&] { unit_map::load(dir / "bad.csv"); }, error_code::schema_violation);
}
