#include "veilblock/auditor.hpp"

#include <map>
#include <set>
#include <sstream>

namespace veilblock::audit {
namespace {

using log::Checkpoint;

enum class InconsistencyType : std::uint8_t { Fork = 1, TimestampRegression = 2, ProofFails = 3, Refused = 4 };
enum class MismatchType : std::uint8_t { Unmatched = 1, BadSignature = 2, BelowPolicy = 3, Commitment = 4 };

Bytes evidence_pair(std::uint8_t type, const Checkpoint& a, const Checkpoint& b,
                    const std::optional<log::ConsistencyProof>& proof = std::nullopt) {
    ByteWriter w;
    w.u8(type);
    w.blob(a.encode());
    w.blob(b.encode());
    if (proof) w.blob(proof->encode());
    return std::move(w).take();
}

Bytes evidence_oscillation(const Checkpoint& a, const Checkpoint& b) {
    ByteWriter w;
    w.blob(a.encode());
    w.blob(b.encode());
    return std::move(w).take();
}

bool enforcer_signed(const Checkpoint& c, const crypto::PublicKey& pk) {
    return crypto::verify(pk, c.canonical_body(), c.enforcer_sig);
}

std::map<crypto::Digest, crypto::Digest> index_objects(const std::vector<Bytes>& objects, const crypto::Scalar& b) {
    std::map<crypto::Digest, crypto::Digest> id_to_hash;
    for (const auto& obj : objects) {
        auto h = crypto::object_hash(obj);
        id_to_hash.emplace(crypto::derive_id(crypto::blind(crypto::hash_to_group(h), b)), h);
    }
    return id_to_hash;
}

// Valid distinct curator signatures on record, and whether any present
// signature failed.
std::pair<std::size_t, bool> count_valid(const enforcer::BlindedRecord& rec, const crypto::Digest& h,
                                         const crypto::Scalar& b, const std::vector<std::string>& curators,
                                         const curator::Keyrings& keyrings, UnixSeconds now, UnixSeconds skew) {
    auto key = crypto::derive_key(crypto::blind(crypto::hash_to_group(h), b));
    std::set<std::string> ok;
    bool any_bad = false;
    for (const auto& enc : rec.enc_sigs) {
        bool good = false;
        if (enc.slot < curators.size()) {
            auto ring = keyrings.find(curators[enc.slot]);
            auto sig = crypto::decrypt_sig(key, enc.ciphertext, enc.slot);
            good = ring != keyrings.end() && ring->second.accepts_current(h, sig, now, skew);
            if (good) ok.insert(curators[enc.slot]);
        }
        any_bad = any_bad || !good;
    }
    return {ok.size(), any_bad};
}

}  // namespace

void AuditPolicy::validate() const {
    if (min_update_interval == 0 || max_checkpoint_age == 0) throw Error("audit policy durations must be positive");
}

std::string_view to_string(ViolationKind k) {
    switch (k) {
        case ViolationKind::Inconsistency: return "inconsistency";
        case ViolationKind::Oscillation: return "oscillation";
        case ViolationKind::Stale: return "stale";
        case ViolationKind::Signature: return "signature";
        case ViolationKind::ContentMismatch: return "content-mismatch";
    }
    return "unknown";
}

std::size_t AuditReport::count(ViolationKind k) const {
    std::size_t n = 0;
    for (const auto& v : violations) n += v.kind == k ? 1 : 0;
    return n;
}

std::string AuditReport::to_text() const {
    std::ostringstream out;
    out << "verdict " << (clean() ? "clean" : "violations") << '\n';
    for (const auto& v : violations) {
        out << "violation " << to_string(v.kind) << " evidence=" << to_base64(v.evidence) << " detail=" << v.detail
            << '\n';
    }
    return out.str();
}

std::optional<log::ConsistencyProof> EnforcerOracle::prove(std::uint64_t old_size, std::uint64_t new_size) {
    try {
        return enf_.prove_consistency(old_size, new_size);
    } catch (const Error&) {
        return std::nullopt;
    }
}

AuditReport audit_checkpoints(const std::vector<Checkpoint>& checkpoints, ConsistencyOracle& oracle,
                              const crypto::PublicKey& enforcer_pk, const log::WitnessKeys& witness_pks,
                              const AuditPolicy& policy, UnixSeconds now) {
    policy.validate();
    if (checkpoints.empty()) throw Error("audit requires at least one checkpoint");
    AuditReport report;

    std::vector<const Checkpoint*> valid;
    for (const auto& c : checkpoints) {
        if (!log::verify_checkpoint_signatures(c, enforcer_pk, witness_pks) ||
            log::count_witness_signatures(c, witness_pks) < policy.witness_quorum) {
            ByteWriter w;
            w.blob(c.encode());
            report.violations.push_back({ViolationKind::Signature,
                                         "checkpoint of size " + std::to_string(c.size) + " fails signature checks",
                                         std::move(w).take()});
            continue;
        }
        valid.push_back(&c);
    }
    if (valid.empty()) return report;

    for (std::size_t i = 0; i + 1 < valid.size(); ++i) {
        const auto& a = *valid[i];
        const auto& b = *valid[i + 1];
        if (a.size == b.size && a.root != b.root) {
            report.violations.push_back({ViolationKind::Inconsistency,
                                         "two roots for tree size " + std::to_string(a.size),
                                         evidence_pair(std::uint8_t(InconsistencyType::Fork), a, b)});
        }
        if (b.timestamp < a.timestamp) {
            report.violations.push_back({ViolationKind::Inconsistency, "checkpoint timestamps regress",
                                         evidence_pair(std::uint8_t(InconsistencyType::TimestampRegression), a, b)});
        }
        if (b.size > a.size && b.timestamp < a.timestamp + policy.min_update_interval) {
            report.violations.push_back({ViolationKind::Oscillation,
                                         "update " + std::to_string(a.size) + "->" + std::to_string(b.size) +
                                             " within " + std::to_string(b.timestamp - a.timestamp) + "s",
                                         evidence_oscillation(a, b)});
        }
    }

    // Every checkpoint must be consistent with the latest one.
    const auto& last = *valid.back();
    for (std::size_t i = 0; i + 1 < valid.size(); ++i) {
        const auto& c = *valid[i];
        const bool forward = c.size <= last.size;
        const auto& older = forward ? c : last;
        const auto& newer = forward ? last : c;
        if (older.size == newer.size) {
            if (older.root != newer.root) {
                report.violations.push_back({ViolationKind::Inconsistency,
                                             "two roots for tree size " + std::to_string(older.size),
                                             evidence_pair(std::uint8_t(InconsistencyType::Fork), older, newer)});
            }
            continue;
        }
        auto proof = oracle.prove(older.size, newer.size);
        if (!proof) {
            report.violations.push_back({ViolationKind::Inconsistency,
                                         "enforcer refused consistency proof " + std::to_string(older.size) + "->" +
                                             std::to_string(newer.size),
                                         evidence_pair(std::uint8_t(InconsistencyType::Refused), older, newer)});
        } else if (!log::verify_consistency(older, newer, *proof)) {
            report.violations.push_back({ViolationKind::Inconsistency,
                                         "consistency proof " + std::to_string(older.size) + "->" +
                                             std::to_string(newer.size) + " fails",
                                         evidence_pair(std::uint8_t(InconsistencyType::ProofFails), older, newer,
                                                       proof)});
        }
    }

    if (now > last.timestamp + policy.max_checkpoint_age) {
        ByteWriter w;
        w.blob(last.encode());
        w.u64(now);
        report.violations.push_back({ViolationKind::Stale,
                                     "latest checkpoint is " + std::to_string(now - last.timestamp) + "s old",
                                     std::move(w).take()});
    }
    return report;
}

AuditReport privileged_audit(const enforcer::DatabaseSnapshot& snapshot, const std::vector<Bytes>& objects,
                             const crypto::Scalar& blind_b, const curator::Keyrings& keyrings, unsigned policy_m,
                             const crypto::PublicKey& enforcer_pk, UnixSeconds now, UnixSeconds clock_skew) {
    AuditReport report;
    auto recomputed = enforcer::compute_db_hash(snapshot.epoch, snapshot.curators, snapshot.records);
    if (!enforcer_signed(snapshot.checkpoint, enforcer_pk)) {
        ByteWriter w;
        w.blob(snapshot.checkpoint.encode());
        report.violations.push_back({ViolationKind::Signature, "snapshot checkpoint not signed by the enforcer",
                                     std::move(w).take()});
    }
    if (recomputed != snapshot.db_hash ||
        !log::verify_inclusion(snapshot.checkpoint, recomputed, snapshot.inclusion, enforcer_pk, {})) {
        ByteWriter w;
        w.u8(std::uint8_t(MismatchType::Commitment));
        w.blob(snapshot.encode());
        report.violations.push_back({ViolationKind::ContentMismatch,
                                     "records do not hash to the committed db_hash", std::move(w).take()});
    }

    auto id_to_hash = index_objects(objects, blind_b);
    for (const auto& rec : snapshot.records) {
        auto mismatch = [&](MismatchType t, std::string why) {
            ByteWriter w;
            w.u8(std::uint8_t(t));
            w.fixed(rec.blinded_id);
            ByteWriter body;
            rec.encode_to(body);
            w.blob(body.bytes());
            w.u16(static_cast<std::uint16_t>(snapshot.curators.size()));
            for (const auto& c : snapshot.curators) w.short_string(c);
            report.violations.push_back(
                {ViolationKind::ContentMismatch, to_hex(rec.blinded_id) + ": " + why, std::move(w).take()});
        };
        auto it = id_to_hash.find(rec.blinded_id);
        if (it == id_to_hash.end()) {
            mismatch(MismatchType::Unmatched, "no supplied object derives this blinded id");
            continue;
        }
        auto [valid, any_bad] = count_valid(rec, it->second, blind_b, snapshot.curators, keyrings, now, clock_skew);
        if (any_bad) {
            mismatch(MismatchType::BadSignature, "a decrypted curator signature does not verify");
        } else if (valid < policy_m || rec.enc_sigs.empty()) {
            mismatch(MismatchType::BelowPolicy, "only " + std::to_string(valid) + " curator signature(s)");
        }
    }
    return report;
}

AppealCheck verify_appeal(const client::AppealBundle& bundle, const curator::Keyrings& keyrings, UnixSeconds now,
                          UnixSeconds clock_skew) {
    if (bundle.signatures.empty()) return {false, "bundle carries no signatures"};
    auto h = crypto::object_hash(bundle.object);
    for (const auto& s : bundle.signatures) {
        auto ring = keyrings.find(s.curator_id);
        if (ring == keyrings.end()) return {false, "unknown curator " + s.curator_id};
        if (!ring->second.accepts(h, s.signature, s.signed_at, now, clock_skew)) {
            return {false, "signature from " + s.curator_id + " does not verify or is stale"};
        }
    }
    return {true, "all signatures verify"};
}

bool recheck_violation(const Violation& v, const crypto::PublicKey& enforcer_pk, const log::WitnessKeys& witness_pks,
                       const AuditPolicy& policy, const PrivilegedContext* privileged) {
    try {
        ByteReader r(v.evidence);
        switch (v.kind) {
            case ViolationKind::Signature: {
                auto c = Checkpoint::decode(r.blob());
                return !log::verify_checkpoint_signatures(c, enforcer_pk, witness_pks) ||
                       log::count_witness_signatures(c, witness_pks) < policy.witness_quorum;
            }
            case ViolationKind::Stale: {
                auto c = Checkpoint::decode(r.blob());
                auto now = r.u64();
                return enforcer_signed(c, enforcer_pk) && now > c.timestamp + policy.max_checkpoint_age;
            }
            case ViolationKind::Oscillation: {
                auto a = Checkpoint::decode(r.blob());
                auto b = Checkpoint::decode(r.blob());
                return enforcer_signed(a, enforcer_pk) && enforcer_signed(b, enforcer_pk) && b.size > a.size &&
                       b.timestamp >= a.timestamp && b.timestamp < a.timestamp + policy.min_update_interval;
            }
            case ViolationKind::Inconsistency: {
                auto type = static_cast<InconsistencyType>(r.u8());
                auto a = Checkpoint::decode(r.blob());
                auto b = Checkpoint::decode(r.blob());
                if (!enforcer_signed(a, enforcer_pk) || !enforcer_signed(b, enforcer_pk)) return false;
                switch (type) {
                    case InconsistencyType::Fork: return a.size == b.size && a.root != b.root;
                    case InconsistencyType::TimestampRegression: return b.timestamp < a.timestamp;
                    case InconsistencyType::ProofFails: {
                        ByteReader pr(r.blob());
                        auto proof = log::ConsistencyProof::decode(pr);
                        return a.size < b.size && !log::verify_consistency(a, b, proof);
                    }
                    case InconsistencyType::Refused: return a.size < b.size;
                }
                return false;
            }
            case ViolationKind::ContentMismatch: {
                auto type = static_cast<MismatchType>(r.u8());
                if (type == MismatchType::Commitment) {
                    auto snap = enforcer::DatabaseSnapshot::decode(r.blob());
                    auto recomputed = enforcer::compute_db_hash(snap.epoch, snap.curators, snap.records);
                    return enforcer_signed(snap.checkpoint, enforcer_pk) &&
                           (recomputed != snap.db_hash ||
                            !log::verify_inclusion(snap.checkpoint, recomputed, snap.inclusion, enforcer_pk, {}));
                }
                auto id = r.fixed<crypto::Digest>();
                ByteReader body(r.blob());
                auto rec = enforcer::BlindedRecord::decode(body);
                std::vector<std::string> curators(r.u16());
                for (auto& c : curators) c = r.short_string();
                if (rec.blinded_id != id || privileged == nullptr) return false;
                auto ids = index_objects(privileged->objects, privileged->blind_b);
                auto it = ids.find(id);
                if (type == MismatchType::Unmatched) return it == ids.end();
                if (it == ids.end()) return false;
                auto [valid, any_bad] = count_valid(rec, it->second, privileged->blind_b, curators,
                                                    privileged->keyrings, privileged->now, privileged->clock_skew);
                return type == MismatchType::BadSignature ? any_bad : valid < privileged->policy_m;
            }
        }
    } catch (const std::exception&) {
        return false;
    }
    return false;
}

}  // namespace veilblock::audit
