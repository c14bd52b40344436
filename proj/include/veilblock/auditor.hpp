#ifndef VEILBLOCK_AUDITOR_HPP
#define VEILBLOCK_AUDITOR_HPP

#include <optional>
#include <string>
#include <vector>

#include "veilblock/client.hpp"
#include "veilblock/curator.hpp"
#include "veilblock/enforcer.hpp"
#include "veilblock/transparency.hpp"

namespace veilblock::audit {

struct AuditPolicy {
    UnixSeconds min_update_interval = 3600;
    UnixSeconds max_checkpoint_age = 7 * 24 * 3600;
    std::size_t witness_quorum = 0;

    // Throws if either duration is zero.
    void validate() const;
};

enum class ViolationKind { Inconsistency, Oscillation, Stale, Signature, ContentMismatch };

std::string_view to_string(ViolationKind k);

struct Violation {
    ViolationKind kind;
    std::string detail;
    // Self-contained, see recheck_violation for the layout per kind.
    Bytes evidence;
};

struct AuditReport {
    std::vector<Violation> violations;

    bool clean() const { return violations.empty(); }
    std::size_t count(ViolationKind k) const;
    // One record per line: "verdict clean|violations" then
    // "violation <kind> evidence=<base64> detail=<text>".
    std::string to_text() const;
};

// Source of consistency proofs, normally the enforcer. nullopt means the
// enforcer refused.
class ConsistencyOracle {
public:
    virtual ~ConsistencyOracle() = default;
    virtual std::optional<log::ConsistencyProof> prove(std::uint64_t old_size, std::uint64_t new_size) = 0;
};

class EnforcerOracle final : public ConsistencyOracle {
public:
    explicit EnforcerOracle(const enforcer::Enforcer& enf) : enf_(enf) {}
    std::optional<log::ConsistencyProof> prove(std::uint64_t old_size, std::uint64_t new_size) override;

private:
    const enforcer::Enforcer& enf_;
};

// Unprivileged: consumes only public checkpoints, proofs and keys.
AuditReport audit_checkpoints(const std::vector<log::Checkpoint>& checkpoints, ConsistencyOracle& oracle,
                              const crypto::PublicKey& enforcer_pk, const log::WitnessKeys& witness_pks,
                              const AuditPolicy& policy, UnixSeconds now);

// Privileged: re-derives every record from raw objects and the enforcer's B.
AuditReport privileged_audit(const enforcer::DatabaseSnapshot& snapshot, const std::vector<Bytes>& objects,
                             const crypto::Scalar& blind_b, const curator::Keyrings& keyrings, unsigned policy_m,
                             const crypto::PublicKey& enforcer_pk, UnixSeconds now, UnixSeconds clock_skew = 300);

struct AppealCheck {
    bool ok = false;
    std::string reason;
};

AppealCheck verify_appeal(const client::AppealBundle& bundle, const curator::Keyrings& keyrings, UnixSeconds now,
                          UnixSeconds clock_skew = 300);

// Privileged material for rechecking content-mismatch evidence.
struct PrivilegedContext {
    const crypto::Scalar& blind_b;
    const std::vector<Bytes>& objects;
    const curator::Keyrings& keyrings;
    unsigned policy_m;
    UnixSeconds now;
    UnixSeconds clock_skew = 300;
};

// Re-verifies a violation from its evidence bytes alone (plus public keys,
// the policy, and for content mismatches the privileged context).
bool recheck_violation(const Violation& v, const crypto::PublicKey& enforcer_pk, const log::WitnessKeys& witness_pks,
                       const AuditPolicy& policy, const PrivilegedContext* privileged = nullptr);

}  // namespace veilblock::audit

#endif  // VEILBLOCK_AUDITOR_HPP
