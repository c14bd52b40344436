#ifndef VEILBLOCK_PIR_HPP
#define VEILBLOCK_PIR_HPP

#include <memory>
#include <string>
#include <vector>

#include "veilblock/client.hpp"
#include "veilblock/enforcer.hpp"
#include "veilblock/transparency.hpp"

// Space-efficient lookup: the enforcer keeps the blinded records, bucketed by
// k-bit prefix and padded to a common size S, and the client fetches its
// bucket with an encrypted one-hot selector.
namespace veilblock::pir {

using crypto::Digest;

using Ciphertext = Bytes;

struct BackendSecretKey {
    Bytes bytes;
};

// Homomorphic encryption used for oblivious bucket selection. A selector
// ciphertext encrypts a small integer; absorb multiplies it into a plaintext
// payload of at most plaintext_slot_bytes bytes; add sums ciphertexts
// slot-wise; dec returns the payload bytes.
class FheBackend {
public:
    virtual ~FheBackend() = default;

    virtual std::string name() const = 0;
    virtual std::size_t plaintext_slot_bytes() const = 0;

    virtual BackendSecretKey keygen() const = 0;
    virtual Ciphertext enc(const BackendSecretKey& sk, std::uint64_t value) const = 0;
    virtual Ciphertext add(const Ciphertext& a, const Ciphertext& b) const = 0;
    virtual Ciphertext multiply(const Ciphertext& a, const Ciphertext& b) const = 0;
    virtual Ciphertext absorb(const Ciphertext& c, ByteView plaintext) const = 0;
    virtual Bytes dec(const BackendSecretKey& sk, const Ciphertext& c) const = 0;

    // Throws enforcer::ProtocolError if c is not a well-formed ciphertext.
    virtual void check_ciphertext(const Ciphertext& c) const = 0;

    // Sum over j of absorb(cts[j], pts[j]). Backends may fuse the loop.
    virtual Ciphertext absorb_sum(std::span<const Ciphertext> cts, std::span<const ByteView> pts) const;
};

// NOT PRIVATE. Ciphertexts carry their plaintext in the clear, tagged with a
// per-key id so decryption under another key fails. Exists for functional and
// equivalence testing of the protocol above the backend; it provides no
// confidentiality for the selector.
class NonPrivateReferenceBackend final : public FheBackend {
public:
    explicit NonPrivateReferenceBackend(std::size_t plaintext_slot_bytes = 10240)
        : slot_bytes_(plaintext_slot_bytes) {}

    std::string name() const override { return "reference-not-private"; }
    std::size_t plaintext_slot_bytes() const override { return slot_bytes_; }

    BackendSecretKey keygen() const override;
    Ciphertext enc(const BackendSecretKey& sk, std::uint64_t value) const override;
    Ciphertext add(const Ciphertext& a, const Ciphertext& b) const override;
    Ciphertext multiply(const Ciphertext& a, const Ciphertext& b) const override;
    Ciphertext absorb(const Ciphertext& c, ByteView plaintext) const override;
    Bytes dec(const BackendSecretKey& sk, const Ciphertext& c) const override;
    void check_ciphertext(const Ciphertext& c) const override;
    Ciphertext absorb_sum(std::span<const Ciphertext> cts, std::span<const ByteView> pts) const override;

private:
    std::size_t slot_bytes_;
};

std::unique_ptr<FheBackend> make_backend(std::string_view name, std::size_t plaintext_slot_bytes);

struct BucketOptions {
    // Lower bound on S; an empty database still has S = min_slots.
    std::size_t min_slots = 1;
    // Upper bound on 2^k * 32 bytes of commitments sent with every answer.
    std::size_t max_commitment_bytes = std::size_t{1} << 22;
};

struct BucketedDB {
    unsigned prefix_bits = 0;
    std::size_t bucket_slots = 0;
    std::vector<std::string> curators;
    // 2^k buckets, each bucket_slots * slot_bytes() bytes.
    std::vector<Bytes> buckets;
    std::vector<Digest> coms;
    Digest db_hash;
    log::Checkpoint checkpoint;
    log::InclusionProof inclusion;

    // blinded_id || one 64-byte ciphertext per curator (zero when absent).
    std::size_t slot_bytes() const { return 32 + 64 * curators.size(); }
    std::size_t bucket_bytes() const { return bucket_slots * slot_bytes(); }
    std::size_t bucket_count() const { return buckets.size(); }
};

// First k bits of id, big-endian.
std::uint32_t prefix_of(const Digest& id, unsigned k);
Digest bucket_commitment(ByteView bucket);
Digest commitments_hash(const std::vector<Digest>& coms);

// Buckets and commitments only; the caller appends db_hash to its log and
// fills in checkpoint and inclusion.
BucketedDB build_buckets(const std::vector<enforcer::BlindedRecord>& records, std::vector<std::string> curators,
                         unsigned k, const BucketOptions& options = {});
// build_buckets followed by a commitment through the enforcer's log.
BucketedDB build_and_commit(enforcer::Enforcer& enf, const std::vector<enforcer::BlindedRecord>& records,
                            std::vector<std::string> curators, unsigned k, UnixSeconds now,
                            const BucketOptions& options = {});

struct PirQuery {
    unsigned prefix_bits = 0;
    std::vector<Ciphertext> selectors;

    Bytes encode() const;
    static PirQuery decode(ByteView in);
};

struct PirAnswer {
    std::vector<Ciphertext> payload;
    std::size_t bucket_slots = 0;
    std::vector<std::string> curators;
    std::vector<Digest> coms;
    log::Checkpoint checkpoint;
    log::InclusionProof inclusion;

    // u32 chunk count || u32-prefixed chunks || trailer: S (u32) || curator
    // table || k (u8) || coms (2^k * 32) || inclusion proof || checkpoint.
    Bytes encode() const;
    static PirAnswer decode(ByteView in);
};

std::pair<PirQuery, BackendSecretKey> client_pir_query(const Digest& lookup_key, unsigned k,
                                                       const FheBackend& backend);
// Sum over buckets of absorb(selector_j, bucket_j), one ciphertext per
// plaintext-sized chunk. Throws enforcer::ProtocolError on a malformed query.
PirAnswer server_pir_answer(const PirQuery& query, const BucketedDB& db, const FheBackend& backend);

struct PirVerifyContext {
    const curator::Keyrings& keyrings;
    const crypto::PublicKey& enforcer_pk;
    const log::WitnessKeys& witness_pks;
    std::size_t witness_quorum = 0;
    client::EvaluationPolicy policy;
};

// Decodes the bucket, checks it against coms and the checkpoint, and then
// evaluates signatures exactly as the time-efficient client does. Every
// failure yields Benign.
client::Verdict client_pir_decode(const PirAnswer& answer, const BackendSecretKey& sk, const FheBackend& backend,
                                  const client::QueryResult& query, ByteView obj_bytes, const PirVerifyContext& ctx,
                                  UnixSeconds now);

// Whole entries that fit in one plaintext slot.
constexpr std::size_t entries_per_plaintext(std::size_t plaintext_slot_bytes, std::size_t entry_bytes) {
    return plaintext_slot_bytes / entry_bytes;
}

}  // namespace veilblock::pir

#endif  // VEILBLOCK_PIR_HPP
