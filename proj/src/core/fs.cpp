/**
 * @file fs.cpp
 * @brief File helper implementation
 */

#include "wavearchive/core/fs.hpp"

#include "wavearchive/core/error.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iterator>
#include <sstream>
#include <thread>

namespace wavearchive::fs {

namespace {

std::atomic<unsigned> temp_counter{0};

stdfs::path temp_sibling(const stdfs::path& path) {
    auto n = temp_counter.fetch_add(1);
    return path.parent_path() /
           ("." + path.filename().string() + ".tmp" + std::to_string(::getpid()) + "_" +
            std::to_string(n));
}

}  // namespace

std::string read_text(const stdfs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw archive_error(error_code::io_error, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::uint8_t> read_bytes(const stdfs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw archive_error(error_code::io_error, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const stdfs::path& path, std::string_view content) {
    if (path.has_parent_path()) stdfs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw archive_error(error_code::unwritable_output, "cannot write " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw archive_error(error_code::unwritable_output, "short write " + path.string());
}

void write_atomic(const stdfs::path& path, std::string_view content) {
    if (path.has_parent_path()) stdfs::create_directories(path.parent_path());
    auto tmp = temp_sibling(path);
    write_file(tmp, content);
    std::error_code ec;
    stdfs::rename(tmp, path, ec);
    if (ec) {
        stdfs::remove(tmp);
        throw archive_error(error_code::unwritable_output,
                            "rename " + tmp.string() + ": " + ec.message());
    }
}

void replace_directory(const stdfs::path& staging, const stdfs::path& target) {
    if (target.has_parent_path()) stdfs::create_directories(target.parent_path());
    if (stdfs::exists(target)) {
        auto old = temp_sibling(target);
        stdfs::rename(target, old);
        stdfs::rename(staging, target);
        stdfs::remove_all(old);
    } else {
        stdfs::rename(staging, target);
    }
}

std::vector<stdfs::path> list_files(const stdfs::path& root) {
    std::vector<stdfs::path> out;
    if (!stdfs::exists(root)) return out;
    for (const auto& entry : stdfs::recursive_directory_iterator(root)) {
        if (entry.is_regular_file()) out.push_back(stdfs::relative(entry.path(), root));
    }
    std::sort(out.begin(), out.end(),
              [](const stdfs::path& a, const stdfs::path& b) {
                  return a.generic_string() < b.generic_string();
              });
    return out;
}

bool is_safe_relative(std::string_view path) {
    if (path.empty() || path.front() == '/' || path.front() == '\\') return false;
    if (path.size() > 1 && path[1] == ':') return false;
    std::size_t pos = 0;
    while (pos <= path.size()) {
        auto next = path.find_first_of("/\\", pos);
        auto part = path.substr(pos, next == std::string_view::npos ? std::string_view::npos
                                                                      : next - pos);
        if (part == ".." || part.empty()) return false;
        if (next == std::string_view::npos) break;
        pos = next + 1;
    }
    return true;
}

lock_file::lock_file(stdfs::path path, std::chrono::milliseconds timeout)
    : path_(std::move(path)) {
    if (path_.has_parent_path()) stdfs::create_directories(path_.parent_path());
    auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
        int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd >= 0) {
            auto pid = std::to_string(::getpid());
            [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
            ::close(fd);
            return;
        }
        if (std::chrono::steady_clock::now() >= deadline) {
            throw archive_error(error_code::io_error, "lock held: " + path_.string());
        }
        std::this_thread::sleep_for(std::chrono::milliseconds{5});
    }
}

lock_file::~lock_file() {
    std::error_code ec;
    stdfs::remove(path_, ec);
}

}  // namespace wavearchive::fs
