/**
 * @file wave_registry.hpp
 * @brief Registry of monitor waveform kinds: symbol, unit and sampling rate
 *
 * Seeded from the bedside-monitor waveform inventory (27 kinds at 63, 125
 * or 500 samples per second).
 */

#pragma once

#include <optional>
#include <span>
#include <string_view>

namespace wavearchive {

struct wave_kind {
    std::string_view symbol;
    std::string_view name;
    std::string_view unit;
    int rate = 0;  ///< samples per second

    friend bool operator==(const wave_kind&, const wave_kind&) = default;
};

std::span<const wave_kind> wave_registry();

std::optional<wave_kind> find_wave(std::string_view symbol);

}  // namespace wavearchive
