#ifndef VEILBLOCK_CURATOR_HPP
#define VEILBLOCK_CURATOR_HPP

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "veilblock/crypto.hpp"

namespace veilblock::curator {

using crypto::Digest;
using crypto::PublicKey;
using crypto::Signature;

// How a curator's signatures go stale. KeyRotation bounds each key to an
// interval; Timestamped binds every signature to a published T_j that is only
// honoured for validity_window seconds.
enum class RevocationMode { None, KeyRotation, Timestamped };

std::string_view to_string(RevocationMode m);
RevocationMode revocation_mode_from_string(std::string_view s);

// A public key and the interval during which its signatures are accepted.
// not_after == 0 means open-ended.
struct KeyPeriod {
    PublicKey public_key;
    UnixSeconds not_before = 0;
    UnixSeconds not_after = 0;

    bool covers(UnixSeconds now, UnixSeconds skew) const;
    friend bool operator==(const KeyPeriod&, const KeyPeriod&) = default;
};

// "entry-v1" || T (8-byte BE, 0 when untimestamped) || h
Bytes signed_payload(UnixSeconds signed_at, const Digest& obj_hash);

// Everything a verifier needs from a curator. Published alongside pk_j.
struct CuratorKeyring {
    std::string curator_id;
    RevocationMode mode = RevocationMode::None;
    UnixSeconds validity_window = 0;
    // Current T_j in Timestamped mode, 0 otherwise.
    UnixSeconds timestamp = 0;
    std::vector<KeyPeriod> keys;

    // Signature check plus staleness rules at time now.
    bool accepts(const Digest& obj_hash, const Signature& sig, UnixSeconds signed_at, UnixSeconds now,
                 UnixSeconds skew) const;
    // Client-side form: T is the keyring's published timestamp.
    bool accepts_current(const Digest& obj_hash, const Signature& sig, UnixSeconds now,
                         UnixSeconds skew) const {
        return accepts(obj_hash, sig, timestamp, now, skew);
    }

    std::string to_json() const;
    static CuratorKeyring from_json(std::string_view text);
    friend bool operator==(const CuratorKeyring&, const CuratorKeyring&) = default;
};

using Keyrings = std::map<std::string, CuratorKeyring>;

struct CuratorEntry {
    std::uint64_t idx = 0;
    Digest obj_hash;
    Signature sig;
    UnixSeconds signed_at = 0;
    friend bool operator==(const CuratorEntry&, const CuratorEntry&) = default;
};

// What enforcers receive: never object bytes.
struct CuratorExport {
    std::string curator_id;
    PublicKey public_key;
    std::vector<CuratorEntry> records;

    // magic "VBX1" || curator_id (u8-prefixed) || pk || count (8-byte BE) ||
    // count * (u32 length || idx 8 || h 32 || sig 64 || T 8)
    Bytes encode() const;
    static CuratorExport decode(ByteView in);
    friend bool operator==(const CuratorExport&, const CuratorExport&) = default;
};

struct CuratorIdentity {
    std::string curator_id;
    crypto::SigningKeypair keypair;
    RevocationMode mode = RevocationMode::None;
    UnixSeconds validity_window = 0;
    UnixSeconds key_created_at = 0;
    UnixSeconds timestamp = 0;
    // Retired keys with their closed intervals.
    std::vector<KeyPeriod> archived;

    // Throws if validity_window is zero in KeyRotation or Timestamped mode.
    static CuratorIdentity create(std::string curator_id, RevocationMode mode, UnixSeconds validity_window,
                                  UnixSeconds now);
    KeyPeriod current_period() const;
    CuratorKeyring keyring() const;
};

// Fresh keypair effective at now; the old key is archived with its interval
// closed at now.
CuratorIdentity rotate_key(const CuratorIdentity& identity, UnixSeconds now);

class Unauthorized : public Error {
public:
    using Error::Error;
};

class NotFound : public Error {
public:
    using Error::Error;
};

// Append-only store of harmful objects held by one curator.
class CuratorDatabase {
public:
    explicit CuratorDatabase(CuratorIdentity identity, std::set<std::string> auditor_allowlist = {});

    // Duplicate objects get a fresh idx and signature.
    CuratorEntry add_object(ByteView object_bytes, UnixSeconds now);
    CuratorExport export_set() const;
    Bytes disclose_object(std::uint64_t idx, const std::string& auditor_credential) const;

    // Rotates the signing key and re-signs every entry that is not revoked.
    void rotate_key(UnixSeconds now);
    // Timestamped mode: publishes T_j = now and re-signs non-revoked entries.
    void renew(UnixSeconds now);
    // Stops renewing idx; its current signature lapses with the window.
    void revoke(std::uint64_t idx);

    const CuratorIdentity& identity() const { return identity_; }
    CuratorKeyring keyring() const { return identity_.keyring(); }
    const std::vector<CuratorEntry>& entries() const { return entries_; }
    const std::set<std::uint64_t>& revoked() const { return revoked_; }

    // Directory layout: curator.json plus objects/<idx>.
    void save(const std::string& dir) const;
    static CuratorDatabase load(const std::string& dir);

private:
    Signature sign_entry(const Digest& h, UnixSeconds signed_at) const;
    void resign_active();

    CuratorIdentity identity_;
    std::set<std::string> auditors_;
    std::vector<CuratorEntry> entries_;
    std::map<std::uint64_t, Bytes> objects_;
    std::set<std::uint64_t> revoked_;
};

}  // namespace veilblock::curator

#endif  // VEILBLOCK_CURATOR_HPP
