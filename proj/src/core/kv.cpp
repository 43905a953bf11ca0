/**
 * @file kv.cpp
 * @brief key=value parsing
 */

#include "wavearchive/core/kv.hpp"

#include "wavearchive/core/error.hpp"

#include <charconv>
#include <cstdlib>

namespace wavearchive::kv {

namespace {

std::string_view trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void invalid(const std::string& what) { throw archive_error(error_code::config_invalid, what); }

}  // namespace

std::map<std::string, std::string> parse(std::string_view text) {
    std::map<std::string, std::string> out;
    std::size_t line_no = 0;
    while (!text.empty()) {
        ++line_no;
        auto nl = text.find('\n');
        auto line = trim(text.substr(0, nl));
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (line.empty() || line.front() == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string_view::npos) invalid("line " + std::to_string(line_no) + ": expected key = value");
        auto key = std::string(trim(line.substr(0, eq)));
        auto value = std::string(trim(line.substr(eq + 1)));
        if (key.empty() || key.find_first_not_of("abcdefghijklmnopqrstuvwxyz0123456789_") != std::string::npos) {
            invalid("line " + std::to_string(line_no) + ": bad key '" + key + "'");
        }
        if (!out.emplace(key, value).second) invalid("line " + std::to_string(line_no) + ": duplicate key " + key);
    }
    return out;
}

const std::string* reader::find(const std::string& key) {
    used_[key] = true;
    auto it = values_.find(key);
    return it == values_.end() ? nullptr : &it->second;
}

std::string reader::text(const std::string& key, const std::string& fallback) {
    auto v = find(key);
    return v ? *v : fallback;
}

std::int64_t reader::integer(const std::string& key, std::int64_t fallback) {
    auto v = find(key);
    if (!v) return fallback;
    std::int64_t out = 0;
    auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc{} || ptr != v->data() + v->size()) invalid(key + ": not an integer: '" + *v + "'");
    return out;
}

double reader::real(const std::string& key, double fallback) {
    auto v = find(key);
    if (!v) return fallback;
    char* end = nullptr;
    double out = std::strtod(v->c_str(), &end);
    if (v->empty() || end != v->c_str() + v->size()) invalid(key + ": not a number: '" + *v + "'");
    return out;
}

bool reader::boolean(const std::string& key, bool fallback) {
    auto v = find(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    invalid(key + ": not a boolean: '" + *v + "'");
}

std::vector<std::string> reader::list(const std::string& key, const std::vector<std::string>& fallback) {
    auto v = find(key);
    if (!v) return fallback;
    std::vector<std::string> out;
    std::string_view rest = *v;
    while (true) {
        auto comma = rest.find(',');
        auto item = trim(rest.substr(0, comma));
        if (!item.empty()) out.emplace_back(item);
        if (comma == std::string_view::npos) break;
        rest = rest.substr(comma + 1);
    }
    return out;
}

void reader::reject_unknown() const {
    for (const auto& [key, value] : values_) {
        if (!used_.count(key)) invalid("unknown key '" + key + "'");
    }
}

std::string join(const std::vector<std::string>& items, char sep) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out.push_back(sep);
        out += items[i];
    }
    return out;
}

}  // namespace wavearchive::kv
