#include "veilblock/pir.hpp"

#include <algorithm>
#include <cstring>

namespace veilblock::pir {
namespace {

using enforcer::ProtocolError;

constexpr std::size_t kTagLen = 8;
constexpr std::size_t kHeaderLen = kTagLen + 4;

// Reference ciphertext: key tag (8) || coefficient count (u32 BE) ||
// coefficients (u32 little-endian each).
struct RefCiphertext {
    std::array<std::uint8_t, kTagLen> tag{};
    std::vector<std::uint32_t> coeffs;
};

RefCiphertext parse_ref(const Ciphertext& c) {
    if (c.size() < kHeaderLen) throw ProtocolError("ciphertext too short");
    RefCiphertext out;
    std::memcpy(out.tag.data(), c.data(), kTagLen);
    ByteReader r(ByteView(c).subspan(kTagLen, 4));
    auto n = r.u32();
    if (c.size() != kHeaderLen + std::size_t{n} * 4) throw ProtocolError("ciphertext length mismatch");
    out.coeffs.resize(n);
    std::memcpy(out.coeffs.data(), c.data() + kHeaderLen, std::size_t{n} * 4);
    return out;
}

Ciphertext serialize_ref(const std::array<std::uint8_t, kTagLen>& tag, const std::vector<std::uint32_t>& coeffs) {
    ByteWriter w;
    w.raw(tag);
    w.u32(static_cast<std::uint32_t>(coeffs.size()));
    Bytes out = std::move(w).take();
    out.resize(kHeaderLen + coeffs.size() * 4);
    std::memcpy(out.data() + kHeaderLen, coeffs.data(), coeffs.size() * 4);
    return out;
}

// Slot-wise binary op; a single-coefficient operand broadcasts.
template <typename Op>
Ciphertext combine(const Ciphertext& a, const Ciphertext& b, Op op) {
    auto x = parse_ref(a);
    auto y = parse_ref(b);
    if (x.tag != y.tag) throw ProtocolError("ciphertexts under different keys");
    auto n = std::max(x.coeffs.size(), y.coeffs.size());
    auto at = [](const std::vector<std::uint32_t>& v, std::size_t i) -> std::uint32_t {
        if (v.size() == 1) return v[0];
        return i < v.size() ? v[i] : 0;
    };
    std::vector<std::uint32_t> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = op(at(x.coeffs, i), at(y.coeffs, i));
    return serialize_ref(x.tag, out);
}

}  // namespace

Ciphertext FheBackend::absorb_sum(std::span<const Ciphertext> cts, std::span<const ByteView> pts) const {
    if (cts.size() != pts.size() || cts.empty()) throw ProtocolError("absorb_sum: operand count mismatch");
    Ciphertext acc = absorb(cts[0], pts[0]);
    for (std::size_t j = 1; j < cts.size(); ++j) acc = add(acc, absorb(cts[j], pts[j]));
    return acc;
}

BackendSecretKey NonPrivateReferenceBackend::keygen() const {
    BackendSecretKey sk;
    sk.bytes.resize(kTagLen);
    crypto::random_bytes(sk.bytes);
    return sk;
}

Ciphertext NonPrivateReferenceBackend::enc(const BackendSecretKey& sk, std::uint64_t value) const {
    if (sk.bytes.size() != kTagLen) throw Error("reference backend key must be 8 bytes");
    std::array<std::uint8_t, kTagLen> tag{};
    std::copy(sk.bytes.begin(), sk.bytes.end(), tag.begin());
    return serialize_ref(tag, {static_cast<std::uint32_t>(value)});
}

Ciphertext NonPrivateReferenceBackend::add(const Ciphertext& a, const Ciphertext& b) const {
    return combine(a, b, [](std::uint32_t x, std::uint32_t y) { return x + y; });
}

Ciphertext NonPrivateReferenceBackend::multiply(const Ciphertext& a, const Ciphertext& b) const {
    return combine(a, b, [](std::uint32_t x, std::uint32_t y) { return x * y; });
}

Ciphertext NonPrivateReferenceBackend::absorb(const Ciphertext& c, ByteView plaintext) const {
    if (plaintext.size() > slot_bytes_) throw ProtocolError("plaintext exceeds slot capacity");
    auto x = parse_ref(c);
    if (x.coeffs.size() != 1) throw ProtocolError("absorb expects a selector ciphertext");
    std::vector<std::uint32_t> out(plaintext.size());
    for (std::size_t i = 0; i < plaintext.size(); ++i) out[i] = x.coeffs[0] * plaintext[i];
    return serialize_ref(x.tag, out);
}

Ciphertext NonPrivateReferenceBackend::absorb_sum(std::span<const Ciphertext> cts,
                                                  std::span<const ByteView> pts) const {
    if (cts.size() != pts.size() || cts.empty()) throw ProtocolError("absorb_sum: operand count mismatch");
    std::size_t width = 0;
    for (auto p : pts) width = std::max(width, p.size());
    if (width > slot_bytes_) throw ProtocolError("plaintext exceeds slot capacity");
    auto first = parse_ref(cts[0]);
    std::vector<std::uint32_t> acc(width, 0);
    for (std::size_t j = 0; j < cts.size(); ++j) {
        const auto& c = cts[j];
        if (c.size() != kHeaderLen + 4 || !std::equal(first.tag.begin(), first.tag.end(), c.begin())) {
            throw ProtocolError("malformed selector ciphertext");
        }
        std::uint32_t sel = 0;
        std::memcpy(&sel, c.data() + kHeaderLen, 4);
        const auto* p = pts[j].data();
        const auto n = pts[j].size();
        for (std::size_t i = 0; i < n; ++i) acc[i] += sel * p[i];
    }
    return serialize_ref(first.tag, acc);
}

Bytes NonPrivateReferenceBackend::dec(const BackendSecretKey& sk, const Ciphertext& c) const {
    auto x = parse_ref(c);
    if (sk.bytes.size() != kTagLen || !std::equal(sk.bytes.begin(), sk.bytes.end(), x.tag.begin())) {
        throw Error("decryption under the wrong key");
    }
    Bytes out(x.coeffs.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<std::uint8_t>(x.coeffs[i]);
    return out;
}

void NonPrivateReferenceBackend::check_ciphertext(const Ciphertext& c) const { (void)parse_ref(c); }

std::unique_ptr<FheBackend> make_backend(std::string_view name, std::size_t plaintext_slot_bytes) {
    if (name == "reference" || name == "reference-not-private") {
        return std::make_unique<NonPrivateReferenceBackend>(plaintext_slot_bytes);
    }
    throw Error("unknown PIR backend: " + std::string(name));
}

std::uint32_t prefix_of(const Digest& id, unsigned k) {
    if (k == 0 || k > 24) throw Error("prefix bits must be in [1, 24]");
    std::uint32_t top = (std::uint32_t{id.bytes[0]} << 24) | (std::uint32_t{id.bytes[1]} << 16) |
                        (std::uint32_t{id.bytes[2]} << 8) | id.bytes[3];
    return top >> (32 - k);
}

Digest bucket_commitment(ByteView bucket) { return crypto::sha256(bucket); }

Digest commitments_hash(const std::vector<Digest>& coms) {
    Bytes buf;
    buf.reserve(coms.size() * 32);
    for (const auto& c : coms) buf.insert(buf.end(), c.bytes.begin(), c.bytes.end());
    return crypto::sha256(buf);
}

BucketedDB build_buckets(const std::vector<enforcer::BlindedRecord>& records, std::vector<std::string> curators,
                         unsigned k, const BucketOptions& options) {
    if (k == 0 || k > 24) throw Error("prefix bits must be in [1, 24]");
    std::size_t nbuckets = std::size_t{1} << k;
    if (nbuckets * 32 > options.max_commitment_bytes) throw Error("2^k commitments exceed the response budget");

    BucketedDB db;
    db.prefix_bits = k;
    db.curators = std::move(curators);

    std::vector<std::vector<const enforcer::BlindedRecord*>> members(nbuckets);
    for (const auto& r : records) members[prefix_of(r.blinded_id, k)].push_back(&r);
    std::size_t s = options.min_slots;
    for (const auto& m : members) s = std::max(s, m.size());
    db.bucket_slots = std::max<std::size_t>(s, 1);

    const auto slot_bytes = db.slot_bytes();
    db.buckets.assign(nbuckets, Bytes(db.bucket_bytes(), 0));
    for (std::size_t b = 0; b < nbuckets; ++b) {
        auto& bucket = db.buckets[b];
        for (std::size_t i = 0; i < members[b].size(); ++i) {
            const auto& rec = *members[b][i];
            auto* slot = bucket.data() + i * slot_bytes;
            std::memcpy(slot, rec.blinded_id.data(), 32);
            for (const auto& enc : rec.enc_sigs) {
                if (enc.slot >= db.curators.size()) throw Error("record references an unknown curator slot");
                std::memcpy(slot + 32 + 64 * std::size_t{enc.slot}, enc.ciphertext.data(), 64);
            }
        }
    }
    db.coms.reserve(nbuckets);
    for (const auto& bucket : db.buckets) db.coms.push_back(bucket_commitment(bucket));
    db.db_hash = commitments_hash(db.coms);
    return db;
}

BucketedDB build_and_commit(enforcer::Enforcer& enf, const std::vector<enforcer::BlindedRecord>& records,
                            std::vector<std::string> curators, unsigned k, UnixSeconds now,
                            const BucketOptions& options) {
    auto db = build_buckets(records, std::move(curators), k, options);
    auto [chkpt, proof] = enf.commit_leaf(db.db_hash, now);
    db.checkpoint = std::move(chkpt);
    db.inclusion = std::move(proof);
    return db;
}

Bytes PirQuery::encode() const {
    ByteWriter w;
    w.u8(static_cast<std::uint8_t>(prefix_bits));
    w.u32(static_cast<std::uint32_t>(selectors.size()));
    for (const auto& c : selectors) w.blob(c);
    return std::move(w).take();
}

PirQuery PirQuery::decode(ByteView in) {
    ByteReader r(in);
    PirQuery q;
    q.prefix_bits = r.u8();
    auto n = r.u32();
    if (n > r.remaining() / 4) throw DecodeError("selector count exceeds input");
    q.selectors.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        auto b = r.blob();
        q.selectors.emplace_back(b.begin(), b.end());
    }
    r.expect_done();
    return q;
}

Bytes PirAnswer::encode() const {
    ByteWriter w;
    w.u32(static_cast<std::uint32_t>(payload.size()));
    for (const auto& c : payload) w.blob(c);
    w.u32(static_cast<std::uint32_t>(bucket_slots));
    w.u16(static_cast<std::uint16_t>(curators.size()));
    for (const auto& c : curators) w.short_string(c);
    unsigned k = 0;
    while ((std::size_t{1} << k) < coms.size()) ++k;
    w.u8(static_cast<std::uint8_t>(k));
    for (const auto& c : coms) w.fixed(c);
    w.raw(inclusion.encode());
    w.blob(checkpoint.encode());
    return std::move(w).take();
}

PirAnswer PirAnswer::decode(ByteView in) {
    ByteReader r(in);
    PirAnswer a;
    auto n = r.u32();
    if (n > r.remaining() / 4) throw DecodeError("chunk count exceeds input");
    for (std::uint32_t i = 0; i < n; ++i) {
        auto b = r.blob();
        a.payload.emplace_back(b.begin(), b.end());
    }
    a.bucket_slots = r.u32();
    a.curators.resize(r.u16());
    for (auto& c : a.curators) c = r.short_string();
    auto k = r.u8();
    if (k > 24) throw DecodeError("prefix bits out of range");
    a.coms.resize(std::size_t{1} << k);
    for (auto& c : a.coms) c = r.fixed<Digest>();
    a.inclusion = log::InclusionProof::decode(r);
    a.checkpoint = log::Checkpoint::decode(r.blob());
    r.expect_done();
    return a;
}

std::pair<PirQuery, BackendSecretKey> client_pir_query(const Digest& lookup_key, unsigned k,
                                                       const FheBackend& backend) {
    auto alpha = prefix_of(lookup_key, k);
    auto sk = backend.keygen();
    PirQuery q;
    q.prefix_bits = k;
    std::size_t n = std::size_t{1} << k;
    q.selectors.reserve(n);
    for (std::size_t j = 0; j < n; ++j) q.selectors.push_back(backend.enc(sk, j == alpha ? 1 : 0));
    return {std::move(q), std::move(sk)};
}

PirAnswer server_pir_answer(const PirQuery& query, const BucketedDB& db, const FheBackend& backend) {
    if (query.prefix_bits != db.prefix_bits || query.selectors.size() != db.bucket_count()) {
        throw ProtocolError("query does not match the database's prefix length");
    }
    for (const auto& c : query.selectors) backend.check_ciphertext(c);

    PirAnswer a;
    const auto chunk = backend.plaintext_slot_bytes();
    const auto total = db.bucket_bytes();
    std::vector<ByteView> pts(db.bucket_count());
    for (std::size_t off = 0; off < total; off += chunk) {
        auto len = std::min(chunk, total - off);
        for (std::size_t j = 0; j < pts.size(); ++j) pts[j] = ByteView(db.buckets[j]).subspan(off, len);
        a.payload.push_back(backend.absorb_sum(query.selectors, pts));
    }
    a.bucket_slots = db.bucket_slots;
    a.curators = db.curators;
    a.coms = db.coms;
    a.checkpoint = db.checkpoint;
    a.inclusion = db.inclusion;
    return a;
}

client::Verdict client_pir_decode(const PirAnswer& answer, const BackendSecretKey& sk, const FheBackend& backend,
                                  const client::QueryResult& query, ByteView obj_bytes, const PirVerifyContext& ctx,
                                  UnixSeconds now) {
    client::Verdict benign;
    auto reject = [&](std::string why) {
        benign.diagnostic = std::move(why);
        return benign;
    };

    Bytes bucket;
    try {
        for (const auto& c : answer.payload) {
            auto part = backend.dec(sk, c);
            bucket.insert(bucket.end(), part.begin(), part.end());
        }
    } catch (const std::exception& e) {
        return reject(std::string("undecryptable answer: ") + e.what());
    }
    const std::size_t slot_bytes = 32 + 64 * answer.curators.size();
    if (answer.bucket_slots == 0 || bucket.size() != answer.bucket_slots * slot_bytes) {
        return reject("answer has the wrong bucket size");
    }

    std::optional<enforcer::BlindedRecord> found;
    for (std::size_t i = 0; i < answer.bucket_slots; ++i) {
        const auto* slot = bucket.data() + i * slot_bytes;
        if (std::memcmp(slot, query.lookup_key.data(), 32) != 0) continue;
        enforcer::BlindedRecord rec;
        rec.blinded_id = query.lookup_key;
        for (std::size_t j = 0; j < answer.curators.size(); ++j) {
            rec.enc_sigs.push_back({static_cast<std::uint16_t>(j),
                                    crypto::SigCiphertext::from(ByteView(slot + 32 + 64 * j, 64))});
        }
        found = std::move(rec);
        break;
    }
    if (!found) return reject("not listed");

    const auto& chkpt = answer.checkpoint;
    if (!log::verify_checkpoint_signatures(chkpt, ctx.enforcer_pk, ctx.witness_pks) ||
        log::count_witness_signatures(chkpt, ctx.witness_pks) < ctx.witness_quorum) {
        return reject("checkpoint signatures");
    }
    if (answer.coms.empty() || answer.coms.size() > (std::size_t{1} << 24)) return reject("malformed commitments");
    unsigned k = 0;
    while ((std::size_t{1} << k) < answer.coms.size()) ++k;
    if ((std::size_t{1} << k) != answer.coms.size() || k == 0) return reject("malformed commitments");
    auto alpha = prefix_of(query.lookup_key, k);
    if (bucket_commitment(bucket) != answer.coms[alpha]) return reject("bucket commitment mismatch");
    auto db_hash = commitments_hash(answer.coms);
    if (!log::verify_inclusion(chkpt, db_hash, answer.inclusion, ctx.enforcer_pk, ctx.witness_pks)) {
        return reject("inclusion proof");
    }

    auto v = client::evaluate_record(crypto::object_hash(obj_bytes), query.unblinded, *found, answer.curators,
                                     ctx.keyrings, ctx.policy, now);
    return v;
}

}  // namespace veilblock::pir
