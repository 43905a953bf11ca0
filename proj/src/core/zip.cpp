/**
 * @file zip.cpp
 * @brief Minimal deterministic ZIP writer and verifying reader
 */

#include "wavearchive/core/zip.hpp"

#include "wavearchive/core/error.hpp"

#include <zlib.h>

#include <algorithm>
#include <limits>

namespace wavearchive::zip {

namespace {

constexpr std::uint32_t local_sig = 0x04034b50;
constexpr std::uint32_t central_sig = 0x02014b50;
constexpr std::uint32_t end_sig = 0x06054b50;
constexpr std::uint16_t dos_date_1980 = (0 << 9) | (1 << 5) | 1;
constexpr std::uint16_t version = 20;
constexpr std::uint16_t method_deflate = 8;
constexpr std::uint16_t method_store = 0;

void put16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>(v >> 8));
}

void put32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

[[noreturn]] void fail(const std::string& what) {
    throw archive_error(error_code::zip_format_error, what);
}

std::uint16_t get16(const std::string& in, std::size_t pos) {
    if (pos + 2 > in.size()) fail("truncated archive");
    return static_cast<std::uint16_t>(static_cast<unsigned char>(in[pos]) |
                                      (static_cast<unsigned char>(in[pos + 1]) << 8));
}

std::uint32_t get32(const std::string& in, std::size_t pos) {
    if (pos + 4 > in.size()) fail("truncated archive");
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(in[pos + i]);
    return v;
}

std::string deflate_raw(const std::string& data) {
    z_stream zs{};
    if (deflateInit2(&zs, 1, Z_DEFLATED, -15, 8, Z_DEFAULT_STRATEGY) != Z_OK) {
        fail("deflateInit2 failed");
    }
    std::string out(deflateBound(&zs, static_cast<uLong>(data.size())), '\0');
    zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data.data()));
    zs.avail_in = static_cast<uInt>(data.size());
    zs.next_out = reinterpret_cast<Bytef*>(out.data());
    zs.avail_out = static_cast<uInt>(out.size());
    int rc = deflate(&zs, Z_FINISH);
    deflateEnd(&zs);
    if (rc != Z_STREAM_END) fail("deflate did not finish");
    out.resize(zs.total_out);
    return out;
}

std::string inflate_raw(const std::string& data, std::size_t expected) {
    z_stream zs{};
    if (inflateInit2(&zs, -15) != Z_OK) fail("inflateInit2 failed");
    std::string out(expected + 1, '\0');
    zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data.data()));
    zs.avail_in = static_cast<uInt>(data.size());
    zs.next_out = reinterpret_cast<Bytef*>(out.data());
    zs.avail_out = static_cast<uInt>(out.size());
    int rc = inflate(&zs, Z_FINISH);
    auto produced = zs.total_out;
    inflateEnd(&zs);
    if (rc != Z_STREAM_END || produced != expected) fail("corrupt deflate stream");
    out.resize(expected);
    return out;
}

std::uint32_t crc_of(const std::string& data) {
    return static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(data.data()), static_cast<uInt>(data.size())));
}

}  // namespace

std::string encode(std::vector<entry> entries) {
    std::sort(entries.begin(), entries.end(),
              [](const entry& a, const entry& b) { return a.name < b.name; });
    std::string out;
    std::string central;
    for (const auto& e : entries) {
        if (e.content.size() > std::numeric_limits<std::uint32_t>::max()) {
            fail("entry too large for non-zip64 archive: " + e.name);
        }
        auto packed = deflate_raw(e.content);
        auto crc = crc_of(e.content);
        auto offset = static_cast<std::uint32_t>(out.size());

        put32(out, local_sig);
        put16(out, version);
        put16(out, 0);
        put16(out, method_deflate);
        put16(out, 0);
        put16(out, dos_date_1980);
        put32(out, crc);
        put32(out, static_cast<std::uint32_t>(packed.size()));
        put32(out, static_cast<std::uint32_t>(e.content.size()));
        put16(out, static_cast<std::uint16_t>(e.name.size()));
        put16(out, 0);
        out += e.name;
        out += packed;

        put32(central, central_sig);
        put16(central, (3 << 8) | version);
        put16(central, version);
        put16(central, 0);
        put16(central, method_deflate);
        put16(central, 0);
        put16(central, dos_date_1980);
        put32(central, crc);
        put32(central, static_cast<std::uint32_t>(packed.size()));
        put32(central, static_cast<std::uint32_t>(e.content.size()));
        put16(central, static_cast<std::uint16_t>(e.name.size()));
        put16(central, 0);
        put16(central, 0);
        put16(central, 0);
        put16(central, 0);
        put32(central, 0100644u << 16);
        put32(central, offset);
        central += e.name;
    }
    auto cd_offset = static_cast<std::uint32_t>(out.size());
    out += central;
    put32(out, end_sig);
    put16(out, 0);
    put16(out, 0);
    put16(out, static_cast<std::uint16_t>(entries.size()));
    put16(out, static_cast<std::uint16_t>(entries.size()));
    put32(out, static_cast<std::uint32_t>(central.size()));
    put32(out, cd_offset);
    put16(out, 0);
    return out;
}

std::vector<entry> decode(const std::string& archive) {
    if (archive.size() < 22) fail("archive too small");
    // no archive comment is ever written, so the end record sits at the tail
    std::size_t eocd = archive.size() - 22;
    if (get32(archive, eocd) != end_sig) fail("missing end of central directory");
    std::uint16_t count = get16(archive, eocd + 10);
    std::uint32_t cd_size = get32(archive, eocd + 12);
    std::uint32_t cd_offset = get32(archive, eocd + 16);
    if (static_cast<std::size_t>(cd_offset) + cd_size != eocd) fail("central directory bounds");

    std::vector<entry> entries;
    std::size_t pos = cd_offset;
    for (std::uint16_t i = 0; i < count; ++i) {
        if (get32(archive, pos) != central_sig) fail("bad central header");
        std::uint16_t method = get16(archive, pos + 10);
        std::uint32_t crc = get32(archive, pos + 16);
        std::uint32_t csize = get32(archive, pos + 20);
        std::uint32_t usize = get32(archive, pos + 24);
        std::uint16_t name_len = get16(archive, pos + 28);
        std::uint16_t extra_len = get16(archive, pos + 30);
        std::uint16_t comment_len = get16(archive, pos + 32);
        std::uint32_t local = get32(archive, pos + 42);
        if (pos + 46 + name_len > archive.size()) fail("truncated central header");
        std::string name = archive.substr(pos + 46, name_len);
        pos += 46u + name_len + extra_len + comment_len;

        if (get32(archive, local) != local_sig) fail("bad local header for " + name);
        std::uint16_t lname = get16(archive, local + 26);
        std::uint16_t lextra = get16(archive, local + 28);
        if (get32(archive, local + 14) != crc || get32(archive, local + 18) != csize ||
            get32(archive, local + 22) != usize || get16(archive, local + 8) != method ||
            archive.compare(local + 30, lname, name) != 0) {
            fail("local/central header mismatch for " + name);
        }
        std::size_t data_pos = local + 30u + lname + lextra;
        if (data_pos + csize > cd_offset) fail("entry data out of bounds: " + name);
        std::string raw = archive.substr(data_pos, csize);
        std::string content;
        if (method == method_deflate) {
            content = inflate_raw(raw, usize);
        } else if (method == method_store) {
            content = std::move(raw);
        } else {
            fail("unsupported compression method for " + name);
        }
        if (content.size() != usize || crc_of(content) != crc) fail("CRC mismatch for " + name);
        entries.push_back({std::move(name), std::move(content)});
    }
    // only canonical archives are accepted: any byte outside the checked
    // fields (times, attributes, flags) must also match what encode writes
    if (encode(entries) != archive) fail("archive is not in canonical form");
    return entries;
}

}  // namespace wavearchive::zip
