/**
 * @file kv.hpp
 * @brief `key = value` configuration files
 *
 * One assignment per line. Blank lines and lines starting with `#` are
 * ignored; whitespace around keys and values is trimmed. Keys are
 * `[a-z0-9_]+` and may appear once.
 */

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace wavearchive::kv {

/// Throws archive_error(config_invalid) naming the offending line.
std::map<std::string, std::string> parse(std::string_view text);

/// Typed accessors over a parsed file; every read key is remembered so
/// leftovers can be rejected.
class reader {
public:
    explicit reader(std::map<std::string, std::string> values) : values_(std::move(values)) {}

    bool has(const std::string& key) const { return values_.count(key) > 0; }
    std::string text(const std::string& key, const std::string& fallback);
    std::int64_t integer(const std::string& key, std::int64_t fallback);
    double real(const std::string& key, double fallback);
    bool boolean(const std::string& key, bool fallback);
    /// Comma-separated, items trimmed, empty items dropped.
    std::vector<std::string> list(const std::string& key, const std::vector<std::string>& fallback);

    /// Throws archive_error(config_invalid) when a key was never read.
    void reject_unknown() const;

private:
    const std::string* find(const std::string& key);

    std::map<std::string, std::string> values_;
    std::map<std::string, bool> used_;
};

std::string join(const std::vector<std::string>& items, char sep = ',');

}  // namespace wavearchive::kv
