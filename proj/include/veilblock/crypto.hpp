#ifndef VEILBLOCK_CRYPTO_HPP
#define VEILBLOCK_CRYPTO_HPP

#include <cstdint>
#include <string_view>

#include "veilblock/bytes.hpp"

// Primitive layer: SHA-256 object hashing, HKDF-SHA256 key derivation, the
// ristretto255 prime-order group used for blinding, Ed25519 signatures, and
// the length-preserving signature cipher. Every function here is pure and
// thread-safe.
namespace veilblock::crypto {

struct DigestTag;
struct SymKeyTag;
struct PublicKeyTag;
struct SignatureTag;
struct SigCiphertextTag;

using Digest = FixedBytes<32, DigestTag>;
using SymKey = FixedBytes<32, SymKeyTag>;
using PublicKey = FixedBytes<32, PublicKeyTag>;
using Signature = FixedBytes<64, SignatureTag>;
using SigCiphertext = FixedBytes<64, SigCiphertextTag>;

// Rejected group element or scalar encoding.
class InvalidEncoding : public Error {
public:
    using Error::Error;
};

struct GroupParams {
    // p = 2^252 + 27742317777372353535851937790883648493, little-endian.
    static constexpr std::array<std::uint8_t, 32> group_order_le = {
        0xed, 0xd3, 0xf5, 0x5c, 0x1a, 0x63, 0x12, 0x58, 0xd6, 0x9c, 0xf7,
        0xa2, 0xde, 0xf9, 0xde, 0x14, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00,
        0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x10};
    static constexpr std::size_t element_encoding_len = 32;
    static constexpr std::size_t scalar_encoding_len = 32;
    static constexpr unsigned security_param_lambda = 128;
};

// Canonical, non-identity ristretto255 element.
class GroupElement {
public:
    static constexpr std::size_t size_bytes = GroupParams::element_encoding_len;

    // Throws InvalidEncoding for non-canonical encodings and the identity.
    static GroupElement decode(ByteView encoding);
    static bool is_valid_encoding(ByteView encoding);
    // Fixed public generator, mainly for tests.
    static GroupElement generator();

    ByteView encoding() const { return {enc_.data(), enc_.size()}; }
    const std::array<std::uint8_t, 32>& bytes() const { return enc_; }

    friend bool operator==(const GroupElement&, const GroupElement&) = default;

private:
    GroupElement() = default;
    std::array<std::uint8_t, 32> enc_{};
};

// Scalar in [1, p-1], stored little-endian.
class Scalar {
public:
    static Scalar random();
    static Scalar one();
    static Scalar from_u64(std::uint64_t v);
    // Rejects zero and anything >= p.
    static Scalar decode(ByteView le_bytes);

    Scalar inverse() const;
    Scalar operator*(const Scalar& rhs) const;
    ByteView encoding() const { return {v_.data(), v_.size()}; }

    friend bool operator==(const Scalar&, const Scalar&) = default;

private:
    Scalar() = default;
    std::array<std::uint8_t, 32> v_{};
};

// Ed25519 secret key (seed || public key); wiped on destruction.
class SecretKey {
public:
    SecretKey() = default;
    static SecretKey from_bytes(ByteView sk64);
    SecretKey(const SecretKey&) = default;
    SecretKey& operator=(const SecretKey&) = default;
    ~SecretKey();

    ByteView bytes() const { return {sk_.data(), sk_.size()}; }
    PublicKey public_key() const;

private:
    std::array<std::uint8_t, 64> sk_{};
};

struct SigningKeypair {
    PublicKey public_key;
    SecretKey secret_key;
};

Digest sha256(ByteView data);
Digest object_hash(ByteView object_bytes);

Digest hmac_sha256(ByteView key, ByteView message);
Digest hkdf_extract(ByteView salt, ByteView ikm);
Bytes hkdf_expand(const Digest& prk, ByteView info, std::size_t length);

GroupElement hash_to_group(const Digest& d);
GroupElement blind(const GroupElement& point, const Scalar& s);
GroupElement unblind(const GroupElement& point, const Scalar& s);

inline constexpr std::string_view kIdLabel = "id";
inline constexpr std::string_view kKeyLabel = "key";

// The exact bytes fed to the hash for a labelled derivation:
// encoding || 0x00 || label.
Bytes derivation_input(const GroupElement& x, std::string_view label);
// Raw 32-byte output for label "id" or "key"; any other label throws.
Bytes derive(const GroupElement& x, std::string_view label);
Digest derive_id(const GroupElement& x);
SymKey derive_key(const GroupElement& x);

SigningKeypair keygen();
SigningKeypair keypair_from_seed(ByteView seed32);
Signature sign(const SecretKey& sk, ByteView message);
bool verify(const PublicKey& pk, ByteView message, const Signature& sig);
// Accepts arbitrary byte strings; malformed key or signature lengths verify as false.
bool verify(ByteView pk, ByteView message, ByteView sig);

// ChaCha20 keystream XOR, nonce bound to the curator slot. No tag: a wrong
// key yields a signature that fails verification.
SigCiphertext encrypt_sig(const SymKey& k, const Signature& sig, std::uint16_t slot);
Signature decrypt_sig(const SymKey& k, const SigCiphertext& ct, std::uint16_t slot);

void random_bytes(std::span<std::uint8_t> out);

}  // namespace veilblock::crypto

#endif  // VEILBLOCK_CRYPTO_HPP
