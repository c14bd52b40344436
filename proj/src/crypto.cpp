#include "veilblock/crypto.hpp"

#include <sodium.h>

#include <cstring>

namespace veilblock::crypto {
namespace {

void ensure_init() {
    static const bool ok = sodium_init() >= 0;
    if (!ok) throw Error("libsodium initialization failed");
}

constexpr std::string_view kHashToGroupDomain = "veilblock-h2g-v1";

bool is_canonical_nonzero_scalar(const std::uint8_t* s) {
    std::array<std::uint8_t, 64> wide{};
    std::memcpy(wide.data(), s, 32);
    std::array<std::uint8_t, 32> reduced{};
    crypto_core_ristretto255_scalar_reduce(reduced.data(), wide.data());
    return sodium_memcmp(reduced.data(), s, 32) == 0 && !sodium_is_zero(s, 32);
}

}  // namespace

GroupElement GroupElement::decode(ByteView encoding) {
    if (!is_valid_encoding(encoding)) {
        throw InvalidEncoding("not a canonical non-identity group element");
    }
    GroupElement out;
    std::memcpy(out.enc_.data(), encoding.data(), 32);
    return out;
}

bool GroupElement::is_valid_encoding(ByteView encoding) {
    ensure_init();
    return encoding.size() == size_bytes && !sodium_is_zero(encoding.data(), 32) &&
           crypto_core_ristretto255_is_valid_point(encoding.data()) == 1;
}

GroupElement GroupElement::generator() {
    ensure_init();
    GroupElement out;
    auto one = Scalar::one();
    crypto_scalarmult_ristretto255_base(out.enc_.data(), one.encoding().data());
    return out;
}

Scalar Scalar::random() {
    ensure_init();
    Scalar out;
    // Rejection sampling over [1, p-1]; p is just above 2^252 so the top
    // three bits are always cleared and acceptance is ~1/2.
    do {
        randombytes_buf(out.v_.data(), out.v_.size());
        out.v_[31] &= 0x1f;
    } while (!is_canonical_nonzero_scalar(out.v_.data()));
    return out;
}

Scalar Scalar::one() { return from_u64(1); }

Scalar Scalar::from_u64(std::uint64_t v) {
    if (v == 0) throw InvalidEncoding("scalar must be nonzero");
    Scalar out;
    for (int i = 0; i < 8; ++i) out.v_[i] = static_cast<std::uint8_t>(v >> (8 * i));
    return out;
}

Scalar Scalar::decode(ByteView le_bytes) {
    ensure_init();
    if (le_bytes.size() != 32 || !is_canonical_nonzero_scalar(le_bytes.data())) {
        throw InvalidEncoding("scalar must be in [1, p-1]");
    }
    Scalar out;
    std::memcpy(out.v_.data(), le_bytes.data(), 32);
    return out;
}

Scalar Scalar::inverse() const {
    ensure_init();
    Scalar out;
    if (crypto_core_ristretto255_scalar_invert(out.v_.data(), v_.data()) != 0) {
        throw InvalidEncoding("scalar not invertible");
    }
    return out;
}

Scalar Scalar::operator*(const Scalar& rhs) const {
    Scalar out;
    crypto_core_ristretto255_scalar_mul(out.v_.data(), v_.data(), rhs.v_.data());
    return out;
}

SecretKey SecretKey::from_bytes(ByteView sk64) {
    if (sk64.size() != 64) throw InvalidEncoding("secret key must be 64 bytes");
    SecretKey out;
    std::memcpy(out.sk_.data(), sk64.data(), 64);
    return out;
}

SecretKey::~SecretKey() { sodium_memzero(sk_.data(), sk_.size()); }

PublicKey SecretKey::public_key() const {
    PublicKey pk;
    crypto_sign_ed25519_sk_to_pk(pk.data(), sk_.data());
    return pk;
}

Digest sha256(ByteView data) {
    ensure_init();
    Digest out;
    crypto_hash_sha256(out.data(), data.data(), data.size());
    return out;
}

Digest object_hash(ByteView object_bytes) { return sha256(object_bytes); }

Digest hmac_sha256(ByteView key, ByteView message) {
    ensure_init();
    crypto_auth_hmacsha256_state st;
    crypto_auth_hmacsha256_init(&st, key.data(), key.size());
    crypto_auth_hmacsha256_update(&st, message.data(), message.size());
    Digest out;
    crypto_auth_hmacsha256_final(&st, out.data());
    sodium_memzero(&st, sizeof st);
    return out;
}

Digest hkdf_extract(ByteView salt, ByteView ikm) {
    static const std::array<std::uint8_t, 32> zero_salt{};
    if (salt.empty()) salt = {zero_salt.data(), zero_salt.size()};
    return hmac_sha256(salt, ikm);
}

Bytes hkdf_expand(const Digest& prk, ByteView info, std::size_t length) {
    if (length > 255 * 32) throw Error("hkdf output too long");
    Bytes out;
    out.reserve(length);
    Bytes block;
    for (std::uint8_t counter = 1; out.size() < length; ++counter) {
        Bytes msg = block;
        msg.insert(msg.end(), info.begin(), info.end());
        msg.push_back(counter);
        auto t = hmac_sha256(prk.view(), msg);
        block.assign(t.bytes.begin(), t.bytes.end());
        auto take = std::min<std::size_t>(32, length - out.size());
        out.insert(out.end(), block.begin(), block.begin() + static_cast<std::ptrdiff_t>(take));
    }
    return out;
}

GroupElement hash_to_group(const Digest& d) {
    ensure_init();
    std::array<std::uint8_t, 64> wide{};
    crypto_hash_sha512_state st;
    crypto_hash_sha512_init(&st);
    crypto_hash_sha512_update(&st, reinterpret_cast<const std::uint8_t*>(kHashToGroupDomain.data()),
                              kHashToGroupDomain.size());
    crypto_hash_sha512_update(&st, d.data(), d.size());
    crypto_hash_sha512_final(&st, wide.data());
    std::array<std::uint8_t, 32> enc{};
    crypto_core_ristretto255_from_hash(enc.data(), wide.data());
    // Identity only with negligible probability; decode rejects it.
    return GroupElement::decode(enc);
}

GroupElement blind(const GroupElement& point, const Scalar& s) {
    ensure_init();
    std::array<std::uint8_t, 32> out{};
    if (crypto_scalarmult_ristretto255(out.data(), s.encoding().data(), point.encoding().data()) != 0) {
        throw InvalidEncoding("scalar multiplication produced the identity");
    }
    return GroupElement::decode(out);
}

GroupElement unblind(const GroupElement& point, const Scalar& s) { return blind(point, s.inverse()); }

Bytes derivation_input(const GroupElement& x, std::string_view label) {
    Bytes in(x.encoding().begin(), x.encoding().end());
    in.push_back(0x00);
    in.insert(in.end(), label.begin(), label.end());
    return in;
}

Bytes derive(const GroupElement& x, std::string_view label) {
    if (label == kIdLabel) {
        auto d = sha256(derivation_input(x, label));
        return {d.bytes.begin(), d.bytes.end()};
    }
    if (label == kKeyLabel) {
        auto prk = hkdf_extract({}, derivation_input(x, label));
        return hkdf_expand(prk, {}, 32);
    }
    throw Error("unknown derivation label");
}

Digest derive_id(const GroupElement& x) { return Digest::from(derive(x, kIdLabel)); }

SymKey derive_key(const GroupElement& x) { return SymKey::from(derive(x, kKeyLabel)); }

SigningKeypair keygen() {
    ensure_init();
    std::array<std::uint8_t, 32> pk{};
    std::array<std::uint8_t, 64> sk{};
    crypto_sign_keypair(pk.data(), sk.data());
    SigningKeypair kp{PublicKey::from(pk), SecretKey::from_bytes(sk)};
    sodium_memzero(sk.data(), sk.size());
    return kp;
}

SigningKeypair keypair_from_seed(ByteView seed32) {
    ensure_init();
    if (seed32.size() != 32) throw InvalidEncoding("seed must be 32 bytes");
    std::array<std::uint8_t, 32> pk{};
    std::array<std::uint8_t, 64> sk{};
    crypto_sign_seed_keypair(pk.data(), sk.data(), seed32.data());
    SigningKeypair kp{PublicKey::from(pk), SecretKey::from_bytes(sk)};
    sodium_memzero(sk.data(), sk.size());
    return kp;
}

Signature sign(const SecretKey& sk, ByteView message) {
    ensure_init();
    Signature sig;
    crypto_sign_detached(sig.data(), nullptr, message.data(), message.size(), sk.bytes().data());
    return sig;
}

bool verify(const PublicKey& pk, ByteView message, const Signature& sig) {
    ensure_init();
    return crypto_sign_verify_detached(sig.data(), message.data(), message.size(), pk.data()) == 0;
}

bool verify(ByteView pk, ByteView message, ByteView sig) {
    if (pk.size() != PublicKey::size_bytes || sig.size() != Signature::size_bytes) return false;
    return verify(PublicKey::from(pk), message, Signature::from(sig));
}

namespace {

std::array<std::uint8_t, crypto_stream_chacha20_ietf_NONCEBYTES> slot_nonce(std::uint16_t slot) {
    // "sigslot" || 0x00 || 0x00 || 0x00 || slot (big-endian)
    std::array<std::uint8_t, crypto_stream_chacha20_ietf_NONCEBYTES> n{'s', 'i', 'g', 's', 'l', 'o', 't'};
    n[10] = static_cast<std::uint8_t>(slot >> 8);
    n[11] = static_cast<std::uint8_t>(slot);
    return n;
}

}  // namespace

SigCiphertext encrypt_sig(const SymKey& k, const Signature& sig, std::uint16_t slot) {
    ensure_init();
    SigCiphertext ct;
    auto nonce = slot_nonce(slot);
    crypto_stream_chacha20_ietf_xor(ct.data(), sig.data(), sig.size(), nonce.data(), k.data());
    return ct;
}

Signature decrypt_sig(const SymKey& k, const SigCiphertext& ct, std::uint16_t slot) {
    ensure_init();
    Signature sig;
    auto nonce = slot_nonce(slot);
    crypto_stream_chacha20_ietf_xor(sig.data(), ct.data(), ct.size(), nonce.data(), k.data());
    return sig;
}

void random_bytes(std::span<std::uint8_t> out) {
    ensure_init();
    randombytes_buf(out.data(), out.size());
}

}  // namespace veilblock::crypto
