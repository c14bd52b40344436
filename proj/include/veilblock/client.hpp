#ifndef VEILBLOCK_CLIENT_HPP
#define VEILBLOCK_CLIENT_HPP

#include <optional>
#include <string>
#include <vector>

#include "veilblock/crypto.hpp"
#include "veilblock/curator.hpp"
#include "veilblock/enforcer.hpp"
#include "veilblock/transparency.hpp"

namespace veilblock::client {

using crypto::Digest;
using crypto::GroupElement;
using crypto::Scalar;
using enforcer::BlindedRecord;

enum class RejectReason { EnforcerSignature, WitnessQuorum, DbHashMismatch, Inclusion, WrongEnforcer };

std::string_view to_string(RejectReason r);

class SnapshotRejected : public Error {
public:
    explicit SnapshotRejected(RejectReason reason)
        : Error("snapshot rejected: " + std::string(to_string(reason))), reason_(reason) {}
    RejectReason reason() const { return reason_; }

private:
    RejectReason reason_;
};

// A snapshot whose checkpoint, witness quorum, db_hash and inclusion proof all
// checked out. Immutable and shareable across threads.
class VerifiedDB {
public:
    const BlindedRecord* find(const Digest& blinded_id) const;

    std::uint64_t epoch() const { return epoch_; }
    const log::Checkpoint& checkpoint() const { return checkpoint_; }
    const std::vector<std::string>& curators() const { return curators_; }
    std::size_t size() const { return records_.size(); }

private:
    friend VerifiedDB verify_snapshot(const enforcer::DatabaseSnapshot&, const crypto::PublicKey&,
                                      const log::WitnessKeys&, std::size_t);
    std::uint64_t epoch_ = 0;
    log::Checkpoint checkpoint_;
    std::vector<std::string> curators_;
    // Sorted by blinded_id.
    std::vector<BlindedRecord> records_;
};

// Throws SnapshotRejected; checks run in order: enforcer signature, witness
// signatures and quorum, db_hash recomputation, inclusion of db_hash as the
// rightmost leaf.
VerifiedDB verify_snapshot(const enforcer::DatabaseSnapshot& snapshot, const crypto::PublicKey& enforcer_pk,
                           const log::WitnessKeys& witness_pks, std::size_t quorum);

class StateReused : public Error {
public:
    using Error::Error;
};

struct QueryResult {
    Digest lookup_key;
    GroupElement unblinded;
};

class QueryState;
std::pair<GroupElement, QueryState> begin_query_with(const Digest& obj_hash, const Scalar& a);
QueryResult complete_query(QueryState& state, const GroupElement& resp);

// Per-query secret. Move-only and single use; the blinding scalar is never
// serialized.
class QueryState {
public:
    QueryState(QueryState&&) = default;
    QueryState& operator=(QueryState&&) = default;
    QueryState(const QueryState&) = delete;
    QueryState& operator=(const QueryState&) = delete;

    const Digest& obj_hash() const { return obj_hash_; }
    const GroupElement& request() const { return request_; }
    bool used() const { return used_; }

private:
    friend std::pair<GroupElement, QueryState> begin_query_with(const Digest&, const Scalar&);
    friend QueryResult complete_query(QueryState&, const GroupElement&);
    QueryState(Scalar a, Digest h, GroupElement req) : a_(a), obj_hash_(h), request_(req) {}

    Scalar a_;
    Digest obj_hash_;
    GroupElement request_;
    bool used_ = false;
};

// Request = hash_to_group(H(obj))^A for fresh uniform A.
std::pair<GroupElement, QueryState> begin_query(ByteView obj_bytes);
std::pair<GroupElement, QueryState> begin_query_with(const Digest& obj_hash, const Scalar& a);

// unblinded = resp^(1/A), lookup_key = derive_id(unblinded). Consumes state;
// throws StateReused on a second call.
QueryResult complete_query(QueryState& state, const GroupElement& resp);
// Throws crypto::InvalidEncoding for identity or non-canonical responses.
QueryResult complete_query(QueryState& state, ByteView resp);

enum class Status { Benign, Harmful };

struct Evidence {
    std::string curator_id;
    crypto::Signature signature;
    UnixSeconds signed_at = 0;
    friend bool operator==(const Evidence&, const Evidence&) = default;
};

struct Verdict {
    Status status = Status::Benign;
    std::vector<std::string> attesting_curators;
    std::vector<Evidence> evidence;
    std::uint64_t epoch = 0;
    // Why the verdict is what it is; never shown to the enforcer.
    std::string diagnostic;

    bool harmful() const { return status == Status::Harmful; }
};

struct EvaluationPolicy {
    unsigned policy_m = 1;
    UnixSeconds clock_skew = 300;
};

// Signature evaluation for one decoded record, shared by both protocols.
// Every anomaly yields Benign.
Verdict evaluate_record(const Digest& obj_hash, const GroupElement& unblinded, const BlindedRecord& record,
                        const std::vector<std::string>& curators, const curator::Keyrings& keyrings,
                        const EvaluationPolicy& policy, UnixSeconds now);

// Purely local: no I/O.
Verdict evaluate(ByteView obj_bytes, const GroupElement& unblinded, const VerifiedDB& db,
                 const curator::Keyrings& keyrings, const EvaluationPolicy& policy, UnixSeconds now);

struct AppealBundle {
    Bytes object;
    std::vector<Evidence> signatures;

    std::string to_json() const;
    static AppealBundle from_json(std::string_view text);
    friend bool operator==(const AppealBundle&, const AppealBundle&) = default;
};

// Throws if the verdict is Benign.
AppealBundle export_appeal(ByteView obj_bytes, const Verdict& verdict);

}  // namespace veilblock::client

#endif  // VEILBLOCK_CLIENT_HPP
