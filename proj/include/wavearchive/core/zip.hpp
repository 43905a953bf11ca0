/**
 * @file zip.hpp
 * @brief Deterministic ZIP archives (deflate, fixed timestamps, sorted entries)
 */

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace wavearchive::zip {

struct entry {
    std::string name;     ///< forward-slash separated path inside the archive
    std::string content;  ///< raw bytes
};

/// Encodes entries in lexicographic name order with DOS time 1980-01-01
/// 00:00 and no extra fields, so equal inputs give byte-equal archives.
std::string encode(std::vector<entry> entries);

/// Decodes and CRC-checks every entry, then requires the archive to be
/// exactly what encode() produces for those entries. Throws
/// archive_error(zip_format_error).
std::vector<entry> decode(const std::string& archive);

}  // namespace wavearchive::zip
