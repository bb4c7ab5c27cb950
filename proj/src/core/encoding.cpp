#include "dift/core/encoding.hpp"

#include <bit>
#include <cstring>

#include <Eigen/Core>
#include <openssl/evp.h>
#include <openssl/sha.h>

#include "dift/core/errors.hpp"

static_assert(std::endian::native == std::endian::little, "wire formats assume a little-endian host");

namespace dift {

std::string base64_encode(std::string_view bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                  reinterpret_cast<const unsigned char*>(bytes.data()), static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

std::string base64_decode(std::string_view text) {
    if (text.size() % 4 != 0) throw DecodeError("base64 input length is not a multiple of 4");
    std::string out(3 * (text.size() / 4), '\0');
    const int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                  reinterpret_cast<const unsigned char*>(text.data()), static_cast<int>(text.size()));
    if (n < 0) throw DecodeError("malformed base64 input");
    // EVP_DecodeBlock keeps the bytes produced by '=' padding; drop them.
    std::size_t pad = 0;
    if (!text.empty() && text.back() == '=') ++pad;
    if (text.size() > 1 && text[text.size() - 2] == '=') ++pad;
    out.resize(static_cast<std::size_t>(n) - pad);
    return out;
}

std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[SHA256_DIGEST_LENGTH];
    SHA256(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(), digest);
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * SHA256_DIGEST_LENGTH);
    for (unsigned char b : digest) {
        out.push_back(kHex[b >> 4]);
        out.push_back(kHex[b & 0xf]);
    }
    return out;
}

namespace {

template <typename T>
std::string pack(std::span<const T> values) {
    std::string out(values.size() * sizeof(T), '\0');
    if (!values.empty()) std::memcpy(out.data(), values.data(), out.size());
    return out;
}

template <typename T>
std::vector<T> unpack(std::string_view bytes) {
    if (bytes.size() % sizeof(T) != 0) throw DecodeError("packed array has a truncated element");
    std::vector<T> out(bytes.size() / sizeof(T));
    if (!out.empty()) std::memcpy(out.data(), bytes.data(), bytes.size());
    return out;
}

}  // namespace

std::string pack_f32(std::span<const float> values) { return pack(values); }
std::string pack_f64(std::span<const double> values) { return pack(values); }
std::vector<float> unpack_f32(std::string_view bytes) { return unpack<float>(bytes); }
std::vector<double> unpack_f64(std::string_view bytes) { return unpack<double>(bytes); }

std::string pack_f16(std::span<const double> values) {
    std::vector<std::uint16_t> halves(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        halves[i] = Eigen::numext::bit_cast<std::uint16_t>(Eigen::half(static_cast<float>(values[i])));
    }
    return pack(std::span<const std::uint16_t>(halves));
}

std::vector<float> unpack_f16(std::string_view bytes) {
    const auto halves = unpack<std::uint16_t>(bytes);
    std::vector<float> out(halves.size());
    for (std::size_t i = 0; i < halves.size(); ++i) {
        out[i] = static_cast<float>(Eigen::numext::bit_cast<Eigen::half>(halves[i]));
    }
    return out;
}

}  // namespace dift
