#ifndef VEILBLOCK_TRANSPARENCY_HPP
#define VEILBLOCK_TRANSPARENCY_HPP

#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "veilblock/crypto.hpp"

// Append-only Merkle log over database commitments. Tree shape and proof
// algorithms follow the RFC 6962 / RFC 9162 convention: leaf hash
// H(0x00 || leaf), node hash H(0x01 || left || right), left-balanced tree.
namespace veilblock::log {

using crypto::Digest;

using WitnessKeys = std::map<std::string, crypto::PublicKey>;

struct InclusionProof {
    std::vector<Digest> path;

    Bytes encode() const;
    static InclusionProof decode(ByteReader& in);
    friend bool operator==(const InclusionProof&, const InclusionProof&) = default;
};

struct ConsistencyProof {
    std::uint64_t old_size = 0;
    std::uint64_t new_size = 0;
    std::vector<Digest> path;

    Bytes encode() const;
    static ConsistencyProof decode(ByteReader& in);
    friend bool operator==(const ConsistencyProof&, const ConsistencyProof&) = default;
};

Digest leaf_hash(const Digest& leaf);
Digest node_hash(const Digest& left, const Digest& right);
Digest empty_root();

class MerkleTree {
public:
    static MerkleTree from_leaf_hashes(std::vector<Digest> leaf_hashes);

    void append(const Digest& leaf);

    std::uint64_t size() const { return leaf_hashes_.size(); }
    // Incrementally maintained root of the full tree.
    Digest root() const;
    // Root of the prefix of the first n leaves, recomputed from leaf hashes.
    Digest root_at(std::uint64_t n) const;

    InclusionProof prove_inclusion(std::uint64_t index, std::uint64_t tree_size) const;
    // Throws if old_size > new_size or new_size > size().
    ConsistencyProof prove_consistency(std::uint64_t old_size, std::uint64_t new_size) const;

    const std::vector<Digest>& leaf_hashes() const { return leaf_hashes_; }

private:
    void append_hash(const Digest& h);
    Digest subtree_hash(std::uint64_t begin, std::uint64_t end) const;
    void inclusion_path(std::uint64_t index, std::uint64_t begin, std::uint64_t end,
                        std::vector<Digest>& out) const;
    void consistency_path(std::uint64_t m, std::uint64_t begin, std::uint64_t end, bool complete,
                          std::vector<Digest>& out) const;

    std::vector<Digest> leaf_hashes_;
    // Roots of the perfect subtrees covering the leaves, largest first.
    std::vector<std::pair<std::uint64_t, Digest>> frontier_;
};

bool verify_inclusion_path(const Digest& leaf, std::uint64_t index, std::uint64_t tree_size,
                           const std::vector<Digest>& path, const Digest& root);
bool verify_consistency_path(std::uint64_t old_size, std::uint64_t new_size, const Digest& old_root,
                             const Digest& new_root, const std::vector<Digest>& path);

struct WitnessSignature {
    std::string witness_id;
    crypto::Signature signature;
    friend bool operator==(const WitnessSignature&, const WitnessSignature&) = default;
};

struct Checkpoint {
    Digest root;
    std::uint64_t size = 0;
    UnixSeconds timestamp = 0;
    crypto::Signature enforcer_sig;
    std::vector<WitnessSignature> witness_sigs;

    // root || size (8-byte BE) || timestamp (8-byte BE)
    Bytes canonical_body() const;
    Bytes encode() const;
    static Checkpoint decode(ByteView in);
    static Checkpoint decode(ByteReader& in);

    friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

Checkpoint sign_checkpoint(const Digest& root, std::uint64_t size, UnixSeconds timestamp,
                           const crypto::SecretKey& enforcer_sk);

// Enforcer signature valid and every present witness signature from a known
// witness valid. Signatures from unknown witnesses are ignored.
bool verify_checkpoint_signatures(const Checkpoint& chkpt, const crypto::PublicKey& enforcer_pk,
                                  const WitnessKeys& witness_pks);
// Number of distinct known witnesses with a valid signature on chkpt.
std::size_t count_witness_signatures(const Checkpoint& chkpt, const WitnessKeys& witness_pks);

// 1 iff the checkpoint signatures verify and proof places leaf at position
// size-1 of the tree with the checkpoint's root. Never throws.
bool verify_inclusion(const Checkpoint& chkpt, const Digest& leaf, const InclusionProof& proof,
                      const crypto::PublicKey& enforcer_pk, const WitnessKeys& witness_pks);

// Checks old_chkpt.size <= new_chkpt.size and the proof against both roots.
// Signatures are not checked here.
bool verify_consistency(const Checkpoint& old_chkpt, const Checkpoint& new_chkpt,
                        const ConsistencyProof& proof);

class ClockRegression : public Error {
public:
    using Error::Error;
};

// Enforcer-side log: tree plus the most recent signed checkpoint.
class TransparencyLog {
public:
    TransparencyLog() = default;
    explicit TransparencyLog(MerkleTree tree, std::optional<Checkpoint> last = std::nullopt)
        : tree_(std::move(tree)), last_(std::move(last)) {}

    // Throws ClockRegression if now precedes the previous checkpoint.
    std::pair<Checkpoint, InclusionProof> append_leaf(const Digest& leaf, UnixSeconds now,
                                                      const crypto::SecretKey& enforcer_sk);

    const MerkleTree& tree() const { return tree_; }
    const std::optional<Checkpoint>& last_checkpoint() const { return last_; }

private:
    MerkleTree tree_;
    std::optional<Checkpoint> last_;
};

struct ForkEvidence {
    Checkpoint earlier;
    Checkpoint later;
    ConsistencyProof proof;
};

class WitnessRefusal : public Error {
public:
    WitnessRefusal(const std::string& what, ForkEvidence evidence)
        : Error(what), evidence_(std::move(evidence)) {}
    const ForkEvidence& evidence() const { return evidence_; }

private:
    ForkEvidence evidence_;
};

// Cosigns chkpt after checking the enforcer signature and, when a prior
// checkpoint exists, the consistency proof prior -> chkpt. Throws
// WitnessRefusal carrying the offending pair otherwise.
crypto::Signature witness_attest(const Checkpoint& chkpt, const ConsistencyProof& proof,
                                 const crypto::SecretKey& witness_sk,
                                 const std::optional<Checkpoint>& prior,
                                 const crypto::PublicKey& enforcer_pk);

class Witness {
public:
    Witness(std::string id, crypto::SigningKeypair keys, crypto::PublicKey enforcer_pk)
        : id_(std::move(id)), keys_(std::move(keys)), enforcer_pk_(enforcer_pk) {}

    // Returns chkpt with this witness's signature appended. Refusals are
    // recorded in evidence() before the exception propagates.
    Checkpoint attest(const Checkpoint& chkpt, const ConsistencyProof& proof);

    const std::string& id() const { return id_; }
    const crypto::PublicKey& public_key() const { return keys_.public_key; }
    const std::optional<Checkpoint>& last_seen() const { return last_seen_; }
    const std::vector<ForkEvidence>& evidence() const { return evidence_; }

private:
    std::string id_;
    crypto::SigningKeypair keys_;
    crypto::PublicKey enforcer_pk_;
    std::optional<Checkpoint> last_seen_;
    std::vector<ForkEvidence> evidence_;
};

// Gossip abstraction: a public bulletin of checkpoints in publication order.
class CheckpointStore {
public:
    virtual ~CheckpointStore() = default;
    virtual void publish(const Checkpoint& chkpt) = 0;
    virtual std::vector<Checkpoint> fetch_checkpoints() const = 0;
};

class MemoryCheckpointStore final : public CheckpointStore {
public:
    void publish(const Checkpoint& chkpt) override;
    std::vector<Checkpoint> fetch_checkpoints() const override;

private:
    mutable std::mutex mu_;
    std::vector<Checkpoint> items_;
};

// One base64 line per checkpoint, appended.
class FileCheckpointStore final : public CheckpointStore {
public:
    explicit FileCheckpointStore(std::string path) : path_(std::move(path)) {}
    void publish(const Checkpoint& chkpt) override;
    std::vector<Checkpoint> fetch_checkpoints() const override;

private:
    std::string path_;
    mutable std::mutex mu_;
};

std::vector<Checkpoint> parse_checkpoint_lines(std::string_view text);
std::string format_checkpoint_line(const Checkpoint& chkpt);

}  // namespace veilblock::log

#endif  // VEILBLOCK_TRANSPARENCY_HPP
