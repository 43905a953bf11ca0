/**
 * @file wave_registry.cpp
 * @brief Waveform kind table
 */

#include "wavearchive/wave_registry.hpp"

#include <array>

namespace wavearchive {

namespace {

// The chest-lead row has no symbol in the source inventory ("N/A"); it is
// registered as "V1-V6" so it can name files.
constexpr std::array<wave_kind, 27> kinds{{
    {"AWF", "Airway Flow", "l/min", 125},
    {"O2", "Airway Oxygen", "mmHg", 125},
    {"ABP", "Arterial Blood Pressure", "mmHg", 125},
    {"ART", "Arterial Blood Pressure", "mmHg", 125},
    {"CO2", "(Airway Expired) Carbon Dioxide", "mmHg", 125},
    {"CVP", "Central Venous Pressure", "mmHg", 125},
    {"AGT", "Gas Analyzer Agent", "%", 125},
    {"SEV", "Gas Analyzer Sevoflurane", "%", 125},
    {"ICP", "Intra-Cranial Pressure", "mmHg", 125},
    {"aVR", "Lead aVR - ECG Wave Label", "mV", 500},
    {"I", "Lead I - ECG Wave Label", "mV", 500},
    {"II", "Lead II - ECG Wave Label", "mV", 500},
    {"III", "Lead III - ECG Wave Label", "mV", 500},
    {"V", "Lead V - ECG Wave Label", "mV", 500},
    {"V1-V6", "Chest/Percordial leads (V1-V6)", "mV", 500},
    {"LAP", "Left Arterial Pressure", "mmHg", 125},
    {"PLETHI", "Pleth Left Wave", "N/A", 125},
    {"PLTHpo", "Pleth Post Ductal", "N/A", 125},
    {"PLTHpr", "Pleth Pre Ductal", "N/A", 125},
    {"PLETHr", "Pleth Right Wave", "N/A", 125},
    {"Pleth", "Pleth Wave", "N/A", 125},
    {"PlethT", "Pleth wave from Telemetry", "N/A", 125},
    {"PAP", "Pulmonary Artery Pressure", "mmHg", 125},
    {"Resp", "Resp Wave (Impedance via ECG electrodes)", "Ohm", 63},
    {"RAP", "Right Arterial Pressure", "mmHg", 63},
    {"UAP", "Umbilical Arterial Pressure", "mmHg", 125},
    {"UVP", "Umbilical Venous Pressure", "mmHg", 125},
}};

}  // namespace

std::span<const wave_kind> wave_registry() { return kinds; }

std::optional<wave_kind> find_wave(std::string_view symbol) {
    for (const auto& k : kinds) {
        if (k.symbol == symbol) return k;
    }
    return std::nullopt;
}

}  // namespace wavearchive
