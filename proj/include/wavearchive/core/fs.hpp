/**
 * @file fs.hpp
 * @brief File helpers: whole-file IO, atomic replacement, partition locks
 */

#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace wavearchive::fs {

namespace stdfs = std::filesystem;

std::string read_text(const stdfs::path& path);
std::vector<std::uint8_t> read_bytes(const stdfs::path& path);

/// Writes through a sibling temp file and renames over the target.
void write_atomic(const stdfs::path& path, std::string_view content);

/// Plain write, creating parent directories.
void write_file(const stdfs::path& path, std::string_view content);

/// Swaps a fully written staging directory into place. Any existing
/// `target` is removed first; the rename itself is atomic on POSIX.
void replace_directory(const stdfs::path& staging, const stdfs::path& target);

/// Regular files under `root`, relative paths, sorted lexicographically.
std::vector<stdfs::path> list_files(const stdfs::path& root);

/// True when `path` is relative and has no `..` component.
bool is_safe_relative(std::string_view path);

/**
 * @brief Exclusive lock held by creating `<path>` with O_EXCL
 *
 * Waits up to `timeout` for a competing holder to release. Stale locks are
 * not broken automatically.
 */
class lock_file {
public:
    explicit lock_file(stdfs::path path,
                       std::chrono::milliseconds timeout = std::chrono::seconds{30});
    ~lock_file();

    lock_file(const lock_file&) = delete;
    lock_file& operator=(const lock_file&) = delete;

private:
    stdfs::path path_;
};

}  // namespace wavearchive::fs
