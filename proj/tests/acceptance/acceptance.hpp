/**
 * @file acceptance.hpp
 * @brief Acceptance checks, one function per criterion
 *
 * Each check builds its own inputs under the work directory and returns a
 * verdict; the harness prints one line per criterion.
 */

#pragma once

#include <filesystem>
#include <sstream>
#include <string>

namespace wavearchive::acceptance {

struct verdict {
    bool pass = false;
    std::string detail;
};

/// Accumulates failed sub-checks; the first few are kept for the report.
class findings {
public:
    void check(bool ok, const std::string& what) {
        ++checks_;
        if (ok) return;
        if (failures_++ < 5) notes_ << (failures_ > 1 ? "; " : "") << what;
    }
    [[nodiscard]] bool ok() const noexcept { return failures_ == 0; }
    [[nodiscard]] int checks() const noexcept { return checks_; }
    [[nodiscard]] verdict result(const std::string& summary) const {
        if (ok()) return {true, summary};
        return {false, summary + " | " + std::to_string(failures_) + " failed: " + notes_.str()};
    }

private:
    int checks_ = 0;
    int failures_ = 0;
    std::ostringstream notes_;
};

/// Scratch root for every check; set once by the harness.
void set_work_root(const std::filesystem::path& root);
const std::filesystem::path& work_root();

verdict check_adt_goldens();          // 1
verdict check_bed_label_goldens();    // 2
verdict check_linkage_targets();      // 3
verdict check_segmentation();         // 4
verdict check_signal_round_trip();    // 5
verdict check_integrity();            // 6
verdict check_determinism();          // 7
verdict check_deidentification();     // 8
verdict check_catalog();              // 9
verdict check_throughput();           // 10

}  // namespace wavearchive::acceptance
