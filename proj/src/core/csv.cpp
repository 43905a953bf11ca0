/**
 * @file csv.cpp
 * @brief RFC 4180 CSV implementation
 */

#include "wavearchive/core/csv.hpp"

#include "wavearchive/core/error.hpp"
#include "wavearchive/core/fs.hpp"

namespace wavearchive::csv {

std::vector<row> parse(std::string_view text) {
    std::vector<row> rows;
    row current;
    std::string field;
    bool in_quotes = false;
    bool has_content = false;  // current field has characters or an opening quote
    bool closed_quote = false; // current field's quoted section has ended
    bool pending = false;      // a separator was seen, so the row has a field
    std::size_t line = 1;
    current.line = 1;

    auto stray = [&] {
        throw archive_error(error_code::schema_violation, "stray quote on line " + std::to_string(line));
    };
    auto finish_field = [&] {
        current.fields.push_back(std::move(field));
        field.clear();
        has_content = false;
        closed_quote = false;
    };
    auto finish_row = [&] {
        finish_field();
        rows.push_back(std::move(current));
        current = row{};
        pending = false;
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                    closed_quote = true;
                }
            } else {
                if (c == '\n') ++line;
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"':
                if (has_content) stray();
                in_quotes = true;
                has_content = true;
                break;
            case ',':
                finish_field();
                pending = true;
                break;
            case '\r':
                break;
            case '\n':
                // blank lines carry no record
                if (has_content || pending) finish_row();
                ++line;
                current.line = line;
                break;
            default:
                if (closed_quote) stray();
                field.push_back(c);
                has_content = true;
        }
    }
    if (in_quotes) {
        throw archive_error(error_code::schema_violation,
                            "unterminated quote starting on line " + std::to_string(current.line));
    }
    if (has_content || pending) finish_row();
    return rows;
}

std::vector<row> read_file(const std::filesystem::path& path) {
    return parse(fs::read_text(path));
}

std::string escape(std::string_view field) {
    if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
    std::string out;
    out.reserve(field.size() + 2);
    out.push_back('"');
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

writer& writer::add(std::string_view field) {
    if (row_open_) out_.push_back(',');
    out_ += escape(field);
    row_open_ = true;
    return *this;
}

writer& writer::add_quoted(std::string_view field) {
    if (row_open_) out_.push_back(',');
    out_.push_back('"');
    for (char c : field) {
        if (c == '"') out_.push_back('"');
        out_.push_back(c);
    }
    out_.push_back('"');
    row_open_ = true;
    return *this;
}

writer& writer::add(long long value) { return add(std::to_string(value)); }

writer& writer::add_unsigned(unsigned long long value) { return add(std::to_string(value)); }

writer& writer::end_row() {
    out_.push_back('\n');
    row_open_ = false;
    return *this;
}

writer& writer::write_row(const std::vector<std::string>& fields) {
    for (const auto& f : fields) add(f);
    return end_row();
}

}  // namespace wavearchive::csv
