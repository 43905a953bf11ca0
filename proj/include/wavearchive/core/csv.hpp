/**
 * @file csv.hpp
 * @brief RFC 4180 CSV reading and writing
 */

#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace wavearchive::csv {

struct row {
    std::size_t line = 0;  ///< 1-based line where the record starts
    std::vector<std::string> fields;
};

/// Parses a whole document. Quoted fields may contain separators, CR/LF and
/// doubled quotes. A trailing newline does not produce an empty record.
/// Throws archive_error(schema_violation) on an unterminated quote.
std::vector<row> parse(std::string_view text);

std::vector<row> read_file(const std::filesystem::path& path);

/// Quotes the field only when it contains `,`, `"`, CR or LF.
std::string escape(std::string_view field);

class writer {
public:
    writer& add(std::string_view field);
    writer& add(long long value);
    /// Always quotes, even when the field has no special characters.
    writer& add_quoted(std::string_view field);
    writer& add_unsigned(unsigned long long value);
    /// Finishes the current record with `\n`.
    writer& end_row();
    writer& write_row(const std::vector<std::string>& fields);

    [[nodiscard]] const std::string& str() const noexcept { return out_; }

private:
    std::string out_;
    bool row_open_ = false;
};

}  // namespace wavearchive::csv
