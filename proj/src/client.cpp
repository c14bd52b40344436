#include "veilblock/client.hpp"

#include <algorithm>
#include <set>

#include <json.hpp>

namespace veilblock::client {

std::string_view to_string(RejectReason r) {
    switch (r) {
        case RejectReason::EnforcerSignature: return "enforcer-signature";
        case RejectReason::WitnessQuorum: return "witness-quorum";
        case RejectReason::DbHashMismatch: return "db-hash-mismatch";
        case RejectReason::Inclusion: return "inclusion";
        case RejectReason::WrongEnforcer: return "wrong-enforcer";
    }
    return "unknown";
}

const BlindedRecord* VerifiedDB::find(const Digest& blinded_id) const {
    auto it = std::lower_bound(records_.begin(), records_.end(), blinded_id,
                               [](const BlindedRecord& r, const Digest& id) { return r.blinded_id < id; });
    return it != records_.end() && it->blinded_id == blinded_id ? &*it : nullptr;
}

VerifiedDB verify_snapshot(const enforcer::DatabaseSnapshot& snapshot, const crypto::PublicKey& enforcer_pk,
                           const log::WitnessKeys& witness_pks, std::size_t quorum) {
    const auto& chkpt = snapshot.checkpoint;
    if (snapshot.enforcer_pk != enforcer_pk) throw SnapshotRejected(RejectReason::WrongEnforcer);
    if (!crypto::verify(enforcer_pk, chkpt.canonical_body(), chkpt.enforcer_sig)) {
        throw SnapshotRejected(RejectReason::EnforcerSignature);
    }
    if (!log::verify_checkpoint_signatures(chkpt, enforcer_pk, witness_pks) ||
        log::count_witness_signatures(chkpt, witness_pks) < quorum) {
        throw SnapshotRejected(RejectReason::WitnessQuorum);
    }
    bool sorted = std::adjacent_find(snapshot.records.begin(), snapshot.records.end(), [](const auto& a, const auto& b) {
                      return !(a.blinded_id < b.blinded_id);
                  }) == snapshot.records.end();
    auto recomputed = enforcer::compute_db_hash(snapshot.epoch, snapshot.curators, snapshot.records);
    if (!sorted || recomputed != snapshot.db_hash) throw SnapshotRejected(RejectReason::DbHashMismatch);
    if (!log::verify_inclusion(chkpt, recomputed, snapshot.inclusion, enforcer_pk, witness_pks)) {
        throw SnapshotRejected(RejectReason::Inclusion);
    }
    VerifiedDB db;
    db.epoch_ = snapshot.epoch;
    db.checkpoint_ = chkpt;
    db.curators_ = snapshot.curators;
    db.records_ = snapshot.records;
    return db;
}

std::pair<GroupElement, QueryState> begin_query_with(const Digest& obj_hash, const Scalar& a) {
    auto request = crypto::blind(crypto::hash_to_group(obj_hash), a);
    return {request, QueryState(a, obj_hash, request)};
}

std::pair<GroupElement, QueryState> begin_query(ByteView obj_bytes) {
    return begin_query_with(crypto::object_hash(obj_bytes), Scalar::random());
}

QueryResult complete_query(QueryState& state, const GroupElement& resp) {
    if (state.used_) throw StateReused("query state already consumed");
    state.used_ = true;
    auto unblinded = crypto::unblind(resp, state.a_);
    return {crypto::derive_id(unblinded), unblinded};
}

QueryResult complete_query(QueryState& state, ByteView resp) {
    if (state.used()) throw StateReused("query state already consumed");
    return complete_query(state, GroupElement::decode(resp));
}

Verdict evaluate_record(const Digest& obj_hash, const GroupElement& unblinded, const BlindedRecord& record,
                        const std::vector<std::string>& curators, const curator::Keyrings& keyrings,
                        const EvaluationPolicy& policy, UnixSeconds now) {
    Verdict v;
    auto key = crypto::derive_key(unblinded);
    std::set<std::string> attesting;
    for (const auto& enc : record.enc_sigs) {
        if (enc.slot >= curators.size()) continue;
        const auto& cid = curators[enc.slot];
        auto ring = keyrings.find(cid);
        if (ring == keyrings.end() || attesting.contains(cid)) continue;
        auto sig = crypto::decrypt_sig(key, enc.ciphertext, enc.slot);
        if (ring->second.accepts_current(obj_hash, sig, now, policy.clock_skew)) {
            attesting.insert(cid);
            v.evidence.push_back({cid, sig, ring->second.timestamp});
        }
    }
    if (attesting.size() >= policy.policy_m && !attesting.empty()) {
        v.status = Status::Harmful;
        v.attesting_curators.assign(attesting.begin(), attesting.end());
        v.diagnostic = "listed";
    } else {
        v.evidence.clear();
        v.diagnostic = "listed but only " + std::to_string(attesting.size()) + " valid curator signature(s)";
    }
    return v;
}

Verdict evaluate(ByteView obj_bytes, const GroupElement& unblinded, const VerifiedDB& db,
                 const curator::Keyrings& keyrings, const EvaluationPolicy& policy, UnixSeconds now) {
    const auto* record = db.find(crypto::derive_id(unblinded));
    Verdict v;
    if (record == nullptr) {
        v.diagnostic = "not listed";
    } else {
        v = evaluate_record(crypto::object_hash(obj_bytes), unblinded, *record, db.curators(), keyrings, policy, now);
    }
    v.epoch = db.epoch();
    return v;
}

std::string AppealBundle::to_json() const {
    nlohmann::json j{{"object", to_base64(object)}, {"signatures", nlohmann::json::array()}};
    for (const auto& e : signatures) {
        j["signatures"].push_back(
            {{"curator_id", e.curator_id}, {"signature", to_hex(e.signature)}, {"signed_at", e.signed_at}});
    }
    return j.dump(2);
}

AppealBundle AppealBundle::from_json(std::string_view text) {
    auto j = nlohmann::json::parse(text);
    AppealBundle b;
    b.object = from_base64(j.at("object").get<std::string>());
    for (const auto& s : j.at("signatures")) {
        b.signatures.push_back({s.at("curator_id").get<std::string>(),
                                crypto::Signature::from(from_hex(s.at("signature").get<std::string>())),
                                s.at("signed_at").get<UnixSeconds>()});
    }
    return b;
}

AppealBundle export_appeal(ByteView obj_bytes, const Verdict& verdict) {
    if (!verdict.harmful()) throw Error("appeal requires a Harmful verdict");
    return {Bytes(obj_bytes.begin(), obj_bytes.end()), verdict.evidence};
}

}  // namespace veilblock::client
