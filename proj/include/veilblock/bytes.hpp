#ifndef VEILBLOCK_BYTES_HPP
#define VEILBLOCK_BYTES_HPP

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace veilblock {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

// Seconds since the Unix epoch.
using UnixSeconds = std::uint64_t;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Truncated or malformed serialized input.
class DecodeError : public Error {
public:
    using Error::Error;
};

// Fixed-length byte string tagged by role so a Digest can't be passed where a
// SymKey is expected.
template <std::size_t N, typename Tag>
struct FixedBytes {
    static constexpr std::size_t size_bytes = N;
    std::array<std::uint8_t, N> bytes{};

    static FixedBytes from(ByteView v) {
        if (v.size() != N) {
            throw DecodeError("expected " + std::to_string(N) + " bytes, got " +
                              std::to_string(v.size()));
        }
        FixedBytes out;
        std::copy(v.begin(), v.end(), out.bytes.begin());
        return out;
    }

    ByteView view() const { return {bytes.data(), N}; }
    const std::uint8_t* data() const { return bytes.data(); }
    std::uint8_t* data() { return bytes.data(); }
    constexpr std::size_t size() const { return N; }
    bool is_zero() const {
        std::uint8_t acc = 0;
        for (auto b : bytes) acc |= b;
        return acc == 0;
    }

    friend auto operator<=>(const FixedBytes&, const FixedBytes&) = default;
};

std::string to_hex(ByteView v);
Bytes from_hex(std::string_view hex);
std::string to_base64(ByteView v);
Bytes from_base64(std::string_view b64);

inline ByteView as_bytes(std::string_view s) {
    return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

template <std::size_t N, typename Tag>
std::string to_hex(const FixedBytes<N, Tag>& v) {
    return to_hex(v.view());
}

// Big-endian append-only encoder.
class ByteWriter {
public:
    void u8(std::uint8_t v) { out_.push_back(v); }
    void u16(std::uint16_t v);
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void raw(ByteView v) { out_.insert(out_.end(), v.begin(), v.end()); }
    template <std::size_t N, typename Tag>
    void fixed(const FixedBytes<N, Tag>& v) {
        raw(v.view());
    }
    // u8 length prefix; throws if longer than 255 bytes.
    void short_string(std::string_view s);
    // u32 length prefix.
    void blob(ByteView v);

    const Bytes& bytes() const& { return out_; }
    Bytes take() && { return std::move(out_); }
    std::size_t size() const { return out_.size(); }

private:
    Bytes out_;
};

// Big-endian cursor over a borrowed buffer; throws DecodeError on overrun.
class ByteReader {
public:
    explicit ByteReader(ByteView in) : in_(in) {}

    std::uint8_t u8();
    std::uint16_t u16();
    std::uint32_t u32();
    std::uint64_t u64();
    ByteView raw(std::size_t n);
    template <typename Fixed>
    Fixed fixed() {
        return Fixed::from(raw(Fixed::size_bytes));
    }
    std::string short_string();
    ByteView blob();

    std::size_t remaining() const { return in_.size() - pos_; }
    std::size_t position() const { return pos_; }
    bool done() const { return remaining() == 0; }
    void expect_done() const;

private:
    ByteView in_;
    std::size_t pos_ = 0;
};

Bytes read_file(const std::string& path);
void write_file(const std::string& path, ByteView data);

}  // namespace veilblock

#endif  // VEILBLOCK_BYTES_HPP
