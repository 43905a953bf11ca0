/**
 * @file test_support.hpp
 * @brief Scratch directories, shell oracles and small bundle fixtures
 */

#pragma once

#include "wavearchive/core/time.hpp"
#include "wavearchive/extract_model.hpp"

#include <array>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <unistd.h>

namespace wavearchive::testing {

namespace stdfs = std::filesystem;

/// Fresh directory under the build tree, removed on destruction.
class scratch_dir {
public:
    explicit scratch_dir(const std::string& label) {
        static std::atomic<int> counter{0};
        path_ = stdfs::path(WAVEARCHIVE_TEST_TMP) /
                (label + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        stdfs::remove_all(path_);
        stdfs::create_directories(path_);
    }
    ~scratch_dir() {
        std::error_code ec;
        stdfs::remove_all(path_, ec);
    }
    scratch_dir(const scratch_dir&) = delete;
    scratch_dir& operator=(const scratch_dir&) = delete;

    [[nodiscard]] const stdfs::path& path() const noexcept { return path_; }
    stdfs::path operator/(const std::string& rel) const { return path_ / rel; }

private:
    stdfs::path path_;
};

struct command_result {
    int status = -1;
    std::string output;
};

/// Runs a shell command and captures stdout.
inline command_result run_command(const std::string& cmd) {
    command_result r;
    std::unique_ptr<FILE, int (*)(FILE*)> pipe(::popen(cmd.c_str(), "r"), ::pclose);
    if (!pipe) return r;
    std::array<char, 4096> buf{};
    std::size_t n;
    while ((n = std::fread(buf.data(), 1, buf.size(), pipe.get())) > 0) r.output.append(buf.data(), n);
    r.status = ::pclose(pipe.release());
    return r;
}

inline bool have_command(const std::string& name) {
    return run_command("command -v " + name + " >/dev/null 2>&1 && echo yes").output == "yes\n";
}

inline timestamp at(const char* iso) { return parse_timestamp(iso); }

/// A small consistent bundle for 2021-03-01: one patient in A13 with a
/// lifetime id, one shared OR stream, device log and ADT evidence.
inline extract::extract_bundle small_bundle() {
    using namespace extract;
    extract_bundle b;
    b.day = parse_day("2021-03-01");
    auto hr = metric::parse("HR");
    b.numerics.push_back({"p42", "MRN0000042", "13ALPHA", at("2021-03-01T08:00:00Z"), hr, 81, "bpm"});
    b.numerics.push_back({"p42", "MRN0000042", "13ALPHA", at("2021-03-01T08:00:01Z"), hr, 82.5, "bpm"});
    b.numerics.push_back({"or1", "", "OR-1", at("2021-03-01T10:00:00Z"), hr, 70, "bpm"});
    wave_block w;
    w.monitor_patient_id = "p42";
    w.bed_label = "13ALPHA";
    w.wave = "II";
    w.block_start = at("2021-03-01T08:00:00Z");
    w.sample_rate = 500;
    for (int i = 0; i < 1000; ++i) w.samples.push_back(0.001 * (i % 50) - 0.02);
    b.wave_samples.push_back(w);
    b.enumerations.push_back({"p42", "13ALPHA", at("2021-03-01T08:00:00Z"), "Rhythm", "Sinus"});
    b.alerts.push_back({"or1", "OR-1", at("2021-03-01T10:00:00Z"), alert_severity::yellow, "SpO2 Low, check probe"});
    b.device_logs.push_back({"V00000001", "OR-1", at("2021-03-01T09:30:00Z"), at("2021-03-01T11:00:00Z"), false, false});
    b.adt_events.push_back({1, "John Doe", "MRN0000007", "V00000001", adt_event_kind::admission, "OR-1", at("2021-03-01T09:30:00Z")});
    b.adt_events.push_back({2, "John Doe", "MRN0000007", "V00000001", adt_event_kind::discharge, "OR-1", at("2021-03-01T11:00:00Z")});
    return b;
}

}  // namespace wavearchive::testing
