/**
 * @file digest.hpp
 * @brief SHA-256 and HMAC-SHA256 helpers (OpenSSL backed)
 */

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace wavearchive::digest {

using sha256_bytes = std::array<std::uint8_t, 32>;

sha256_bytes sha256(std::string_view data);
std::string sha256_hex(std::string_view data);
std::string sha256_file_hex(const std::filesystem::path& path);

sha256_bytes hmac_sha256(std::string_view key, std::string_view message);

std::string to_hex(const std::uint8_t* data, std::size_t size);

template <std::size_t N>
std::string to_hex(const std::array<std::uint8_t, N>& bytes) {
    return to_hex(bytes.data(), N);
}

/// 64 lowercase hex characters.
bool is_sha256_hex(std::string_view text) noexcept;

/**
 * @brief AES-256-GCM with a synthetic nonce
 *
 * The key is HMAC-SHA256(secret, "seal-key") and the 12-byte nonce is a
 * keyed hash of the plaintext, so equal inputs give equal outputs (only
 * plaintext equality leaks). Layout: "WASEAL1" | nonce | tag | ciphertext.
 */
std::string seal(std::string_view secret, std::string_view plaintext);

/// Inverse of seal; throws archive_error(checksum_mismatch) when the secret
/// is wrong or the data was altered.
std::string unseal(std::string_view secret, std::string_view sealed);

/**
 * @brief Incremental SHA-256 over a sequence of labelled parts
 *
 * Used for phase and archive digests: each part is length-prefixed so that
 * concatenation ambiguities cannot produce equal digests.
 */
class accumulator {
public:
    accumulator();
    ~accumulator();
    accumulator(const accumulator&) = delete;
    accumulator& operator=(const accumulator&) = delete;

    accumulator& add(std::string_view part);
    std::string hex();

private:
    void* ctx_;
};

}  // namespace wavearchive::digest
