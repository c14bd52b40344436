#ifndef VEILBLOCK_ENFORCER_HPP
#define VEILBLOCK_ENFORCER_HPP

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "veilblock/crypto.hpp"
#include "veilblock/curator.hpp"
#include "veilblock/transparency.hpp"

namespace veilblock::enforcer {

using crypto::Digest;
using crypto::GroupElement;
using crypto::Scalar;

// Malformed request from a peer; answered with an error frame.
class ProtocolError : public Error {
public:
    using Error::Error;
};

class RateLimited : public ProtocolError {
public:
    using ProtocolError::ProtocolError;
};

struct EncryptedSig {
    // Index into the snapshot's curator table; also the cipher's slot.
    std::uint16_t slot = 0;
    crypto::SigCiphertext ciphertext;
    friend auto operator<=>(const EncryptedSig&, const EncryptedSig&) = default;
};

struct BlindedRecord {
    Digest blinded_id;
    std::vector<EncryptedSig> enc_sigs;

    // blinded_id || count (u8) || (slot u16 || ciphertext 64)*
    void encode_to(ByteWriter& w) const;
    static BlindedRecord decode(ByteReader& in);
    std::size_t encoded_size() const { return 32 + 1 + enc_sigs.size() * (2 + 64); }
    friend auto operator<=>(const BlindedRecord&, const BlindedRecord&) = default;
};

// Hash over epoch, curator table and the records in sorted order.
Digest compute_db_hash(std::uint64_t epoch, const std::vector<std::string>& curators,
                       const std::vector<BlindedRecord>& records);

struct DatabaseSnapshot {
    std::uint64_t epoch = 0;
    crypto::PublicKey enforcer_pk;
    std::vector<std::string> curators;
    std::vector<BlindedRecord> records;
    Digest db_hash;
    log::Checkpoint checkpoint;
    log::InclusionProof inclusion;

    bool empty() const { return records.empty(); }

    // "VBS1" || epoch || record count || pk_E || curator table || records ||
    // db_hash || checkpoint (u32-prefixed) || inclusion proof. The decoded
    // db_hash is the enforcer's claim; verifiers recompute it.
    Bytes encode() const;
    static DatabaseSnapshot decode(ByteView in);
};

struct SnapshotDiff {
    // New or changed records, sorted by blinded_id.
    std::vector<BlindedRecord> added;
    std::vector<Digest> removed;
    bool empty() const { return added.empty() && removed.empty(); }
};

// Throws if old.epoch > new.epoch.
SnapshotDiff snapshot_diff(const DatabaseSnapshot& old_snap, const DatabaseSnapshot& new_snap);
std::vector<BlindedRecord> apply_diff(const std::vector<BlindedRecord>& records, const SnapshotDiff& diff);

struct DroppedSignature {
    std::string curator_id;
    std::uint64_t idx = 0;
    std::string reason;
};

// Admission check run before every PSI response. Returns false to refuse.
using PsiAdmission = std::function<bool(const std::string& peer)>;

struct EnforcerOptions {
    unsigned policy_m = 1;
    UnixSeconds update_interval = 3600;
    UnixSeconds clock_skew = 300;
};

class Enforcer {
public:
    Enforcer(Scalar blind_b, crypto::SigningKeypair keys, EnforcerOptions options);
    static Enforcer create(EnforcerOptions options);

    // Builds the next epoch from the supplied curator sets, replacing any
    // held sets. Invalid or stale signatures are dropped.
    DatabaseSnapshot build_database(const std::vector<curator::CuratorExport>& curator_sets,
                                    const curator::Keyrings& keyrings, UnixSeconds now);
    // Merges additions into the held sets (by curator and idx) and rebuilds.
    DatabaseSnapshot publish_update(const std::vector<curator::CuratorExport>& additions,
                                    const curator::Keyrings& keyrings, UnixSeconds now);
    // Commits an already-blinded record set as the next epoch.
    DatabaseSnapshot commit_records(std::vector<std::string> curators, std::vector<BlindedRecord> records,
                                    UnixSeconds now);

    // Appends an arbitrary database commitment (e.g. a bucketed db_hash) to
    // the log without advancing the epoch or counting as a publication.
    std::pair<log::Checkpoint, log::InclusionProof> commit_leaf(const Digest& db_hash, UnixSeconds now);

    // Req^B. Throws ProtocolError on identity or non-canonical input.
    GroupElement respond_psi(const GroupElement& request) const;
    Bytes respond_psi(ByteView request, const std::string& peer = {}) const;
    void set_admission(PsiAdmission admission) { admission_ = std::move(admission); }

    log::ConsistencyProof prove_consistency(std::uint64_t old_size, std::uint64_t new_size) const;

    const crypto::PublicKey& public_key() const { return keys_.public_key; }
    const crypto::SigningKeypair& keypair() const { return keys_; }
    const Scalar& blind_b() const { return blind_b_; }
    const EnforcerOptions& options() const { return options_; }
    std::uint64_t epoch() const { return epoch_; }
    const log::TransparencyLog& log() const { return log_; }
    const std::vector<DroppedSignature>& last_dropped() const { return dropped_; }
    // Publishes that landed inside update_interval of the previous one.
    std::size_t rapid_updates() const { return rapid_updates_; }
    const std::vector<curator::CuratorExport>& held_sets() const { return held_; }

    // Directory layout: enforcer.json plus sets/<curator_id>.vbx.
    void save(const std::string& dir) const;
    static Enforcer load(const std::string& dir);

private:
    DatabaseSnapshot rebuild(const curator::Keyrings& keyrings, UnixSeconds now);

    Scalar blind_b_;
    crypto::SigningKeypair keys_;
    EnforcerOptions options_;
    std::uint64_t epoch_ = 0;
    log::TransparencyLog log_;
    std::vector<curator::CuratorExport> held_;
    std::vector<DroppedSignature> dropped_;
    std::optional<UnixSeconds> last_publish_;
    std::size_t rapid_updates_ = 0;
    PsiAdmission admission_;
};

// Blinded record for one object hash: derive_id/derive_key of
// hash_to_group(h)^B, with each (slot, signature) encrypted under the key.
BlindedRecord blind_record(const Digest& obj_hash, const Scalar& blind_b,
                           const std::vector<std::pair<std::uint16_t, crypto::Signature>>& sigs);

}  // namespace veilblock::enforcer

#endif  // VEILBLOCK_ENFORCER_HPP
