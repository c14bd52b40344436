#include "veilblock/bytes.hpp"

#include <sodium.h>

#include <fstream>
#include <iterator>

namespace veilblock {

std::string to_hex(ByteView v) {
    std::string out(v.size() * 2 + 1, '\0');
    sodium_bin2hex(out.data(), out.size(), v.data(), v.size());
    out.pop_back();
    return out;
}

Bytes from_hex(std::string_view hex) {
    Bytes out(hex.size() / 2);
    std::size_t len = 0;
    const char* end = nullptr;
    if (hex.size() % 2 != 0 ||
        sodium_hex2bin(out.data(), out.size(), hex.data(), hex.size(), nullptr, &len, &end) != 0 ||
        len != out.size()) {
        throw DecodeError("invalid hex string");
    }
    return out;
}

std::string to_base64(ByteView v) {
    constexpr int variant = sodium_base64_VARIANT_ORIGINAL;
    std::string out(sodium_base64_encoded_len(v.size(), variant), '\0');
    sodium_bin2base64(out.data(), out.size(), v.data(), v.size(), variant);
    out.resize(out.size() - 1);
    return out;
}

Bytes from_base64(std::string_view b64) {
    Bytes out(b64.size() / 4 * 3 + 3);
    std::size_t len = 0;
    const char* end = nullptr;
    if (sodium_base642bin(out.data(), out.size(), b64.data(), b64.size(), nullptr, &len, &end,
                          sodium_base64_VARIANT_ORIGINAL) != 0 ||
        end != b64.data() + b64.size()) {
        throw DecodeError("invalid base64 string");
    }
    out.resize(len);
    return out;
}

void ByteWriter::u16(std::uint16_t v) {
    u8(static_cast<std::uint8_t>(v >> 8));
    u8(static_cast<std::uint8_t>(v));
}

void ByteWriter::u32(std::uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8) u8(static_cast<std::uint8_t>(v >> shift));
}

void ByteWriter::u64(std::uint64_t v) {
    for (int shift = 56; shift >= 0; shift -= 8) u8(static_cast<std::uint8_t>(v >> shift));
}

void ByteWriter::short_string(std::string_view s) {
    if (s.size() > 255) throw Error("string too long for u8 length prefix");
    u8(static_cast<std::uint8_t>(s.size()));
    raw(as_bytes(s));
}

void ByteWriter::blob(ByteView v) {
    u32(static_cast<std::uint32_t>(v.size()));
    raw(v);
}

ByteView ByteReader::raw(std::size_t n) {
    if (n > remaining()) throw DecodeError("unexpected end of input");
    ByteView out = in_.subspan(pos_, n);
    pos_ += n;
    return out;
}

std::uint8_t ByteReader::u8() { return raw(1)[0]; }

std::uint16_t ByteReader::u16() {
    auto b = raw(2);
    return static_cast<std::uint16_t>((b[0] << 8) | b[1]);
}

std::uint32_t ByteReader::u32() {
    std::uint32_t v = 0;
    for (auto b : raw(4)) v = (v << 8) | b;
    return v;
}

std::uint64_t ByteReader::u64() {
    std::uint64_t v = 0;
    for (auto b : raw(8)) v = (v << 8) | b;
    return v;
}

std::string ByteReader::short_string() {
    auto n = u8();
    auto b = raw(n);
    return {b.begin(), b.end()};
}

ByteView ByteReader::blob() { return raw(u32()); }

void ByteReader::expect_done() const {
    if (!done()) throw DecodeError("trailing bytes after record");
}

Bytes read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, ByteView data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path);
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
}

}  // namespace veilblock
