/**
 * @file digest.cpp
 * @brief OpenSSL-backed digests
 */

#include "wavearchive/core/digest.hpp"

#include "wavearchive/core/error.hpp"

#include <openssl/evp.h>
#include <openssl/hmac.h>

#include <algorithm>
#include <fstream>
#include <vector>

namespace wavearchive::digest {

namespace {

EVP_MD_CTX* ctx_cast(void* p) { return static_cast<EVP_MD_CTX*>(p); }

}  // namespace

sha256_bytes sha256(std::string_view data) {
    sha256_bytes out{};
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr) != 1) {
        throw archive_error(error_code::io_error, "EVP_Digest failed");
    }
    return out;
}

std::string sha256_hex(std::string_view data) { return to_hex(sha256(data)); }

std::string sha256_file_hex(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw archive_error(error_code::io_error, "cannot open " + path.string());
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        auto got = in.gcount();
        if (got > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(got));
    }
    sha256_bytes out{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, out.data(), &len);
    EVP_MD_CTX_free(ctx);
    return to_hex(out);
}

sha256_bytes hmac_sha256(std::string_view key, std::string_view message) {
    sha256_bytes out{};
    unsigned int len = 0;
    if (!HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()),
              reinterpret_cast<const unsigned char*>(message.data()), message.size(), out.data(),
              &len)) {
        throw archive_error(error_code::io_error, "HMAC failed");
    }
    return out;
}

std::string to_hex(const std::uint8_t* data, std::size_t size) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(size * 2, '0');
    for (std::size_t i = 0; i < size; ++i) {
        out[2 * i] = digits[data[i] >> 4];
        out[2 * i + 1] = digits[data[i] & 0xF];
    }
    return out;
}

namespace {

constexpr std::string_view seal_magic = "WASEAL1";
constexpr std::size_t nonce_size = 12;
constexpr std::size_t tag_size = 16;

struct cipher_ctx {
    EVP_CIPHER_CTX* p = EVP_CIPHER_CTX_new();
    ~cipher_ctx() { EVP_CIPHER_CTX_free(p); }
};

[[noreturn]] void seal_error(const char* what) {
    throw archive_error(error_code::checksum_mismatch, what);
}

}  // namespace

std::string seal(std::string_view secret, std::string_view plaintext) {
    auto key = hmac_sha256(secret, "seal-key");
    auto nonce = hmac_sha256(std::string_view(reinterpret_cast<const char*>(key.data()), key.size()),
                             plaintext);
    cipher_ctx ctx;
    std::string cipher(plaintext.size(), '\0');
    int len = 0;
    std::array<std::uint8_t, tag_size> tag{};
    std::array<unsigned char, 32> tail{};
    if (EVP_EncryptInit_ex(ctx.p, EVP_aes_256_gcm(), nullptr, nullptr, nullptr) != 1 ||
        EVP_CIPHER_CTX_ctrl(ctx.p, EVP_CTRL_GCM_SET_IVLEN, nonce_size, nullptr) != 1 ||
        EVP_EncryptInit_ex(ctx.p, nullptr, nullptr, key.data(), nonce.data()) != 1 ||
        EVP_EncryptUpdate(ctx.p, reinterpret_cast<unsigned char*>(cipher.data()), &len,
                          reinterpret_cast<const unsigned char*>(plaintext.data()),
                          static_cast<int>(plaintext.size())) != 1 ||
        EVP_EncryptFinal_ex(ctx.p, tail.data(), &len) != 1 ||
        EVP_CIPHER_CTX_ctrl(ctx.p, EVP_CTRL_GCM_GET_TAG, tag_size, tag.data()) != 1) {
        throw archive_error(error_code::io_error, "AES-GCM encryption failed");
    }
    std::string out(seal_magic);
    out.append(reinterpret_cast<const char*>(nonce.data()), nonce_size);
    out.append(reinterpret_cast<const char*>(tag.data()), tag_size);
    out += cipher;
    return out;
}

std::string unseal(std::string_view secret, std::string_view sealed) {
    const auto header = seal_magic.size() + nonce_size + tag_size;
    if (sealed.size() < header || sealed.substr(0, seal_magic.size()) != seal_magic) {
        seal_error("sealed data has no valid header");
    }
    auto key = hmac_sha256(secret, "seal-key");
    auto nonce = reinterpret_cast<const unsigned char*>(sealed.data() + seal_magic.size());
    std::array<std::uint8_t, tag_size> tag{};
    std::copy_n(sealed.data() + seal_magic.size() + nonce_size, tag_size, tag.begin());
    auto cipher = sealed.substr(header);
    std::string plain(cipher.size(), '\0');
    int len = 0;
    std::array<unsigned char, 32> tail{};
    cipher_ctx ctx;
    if (EVP_DecryptInit_ex(ctx.p, EVP_aes_256_gcm(), nullptr, nullptr, nullptr) != 1 ||
        EVP_CIPHER_CTX_ctrl(ctx.p, EVP_CTRL_GCM_SET_IVLEN, nonce_size, nullptr) != 1 ||
        EVP_DecryptInit_ex(ctx.p, nullptr, nullptr, key.data(), nonce) != 1 ||
        EVP_DecryptUpdate(ctx.p, reinterpret_cast<unsigned char*>(plain.data()), &len,
                          reinterpret_cast<const unsigned char*>(cipher.data()),
                          static_cast<int>(cipher.size())) != 1 ||
        EVP_CIPHER_CTX_ctrl(ctx.p, EVP_CTRL_GCM_SET_TAG, tag_size, tag.data()) != 1 ||
        EVP_DecryptFinal_ex(ctx.p, tail.data(), &len) != 1) {
        seal_error("sealed data failed authentication");
    }
    return plain;
}

bool is_sha256_hex(std::string_view text) noexcept {
    if (text.size() != 64) return false;
    for (char c : text) {
        if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return false;
    }
    return true;
}

accumulator::accumulator() : ctx_(EVP_MD_CTX_new()) {
    EVP_DigestInit_ex(ctx_cast(ctx_), EVP_sha256(), nullptr);
}

accumulator::~accumulator() { EVP_MD_CTX_free(ctx_cast(ctx_)); }

accumulator& accumulator::add(std::string_view part) {
    std::string len = std::to_string(part.size()) + ":";
    EVP_DigestUpdate(ctx_cast(ctx_), len.data(), len.size());
    EVP_DigestUpdate(ctx_cast(ctx_), part.data(), part.size());
    return *this;
}

std::string accumulator::hex() {
    sha256_bytes out{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_cast(ctx_), out.data(), &len);
    EVP_DigestInit_ex(ctx_cast(ctx_), EVP_sha256(), nullptr);
    return to_hex(out);
}

}  // namespace wavearchive::digest
