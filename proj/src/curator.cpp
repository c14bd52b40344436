#include "veilblock/curator.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace veilblock::curator {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr std::string_view kPayloadTag = "entry-v1";
constexpr std::uint32_t kExportRecordLen = 8 + 32 + 64 + 8;

json period_to_json(const KeyPeriod& p) {
    return {{"public_key", to_hex(p.public_key)}, {"not_before", p.not_before}, {"not_after", p.not_after}};
}

KeyPeriod period_from_json(const json& j) {
    return {PublicKey::from(from_hex(j.at("public_key").get<std::string>())), j.at("not_before").get<UnixSeconds>(),
            j.at("not_after").get<UnixSeconds>()};
}

}  // namespace

std::string_view to_string(RevocationMode m) {
    switch (m) {
        case RevocationMode::None: return "none";
        case RevocationMode::KeyRotation: return "key-rotation";
        case RevocationMode::Timestamped: return "timestamped";
    }
    return "none";
}

RevocationMode revocation_mode_from_string(std::string_view s) {
    if (s == "none") return RevocationMode::None;
    if (s == "key-rotation") return RevocationMode::KeyRotation;
    if (s == "timestamped") return RevocationMode::Timestamped;
    throw Error("unknown revocation mode: " + std::string(s));
}

bool KeyPeriod::covers(UnixSeconds now, UnixSeconds skew) const {
    if (now + skew < not_before) return false;
    return not_after == 0 || now <= not_after + skew;
}

Bytes signed_payload(UnixSeconds signed_at, const Digest& obj_hash) {
    ByteWriter w;
    w.raw(as_bytes(kPayloadTag));
    w.u64(signed_at);
    w.fixed(obj_hash);
    return std::move(w).take();
}

bool CuratorKeyring::accepts(const Digest& obj_hash, const Signature& sig, UnixSeconds signed_at, UnixSeconds now,
                             UnixSeconds skew) const {
    if (mode == RevocationMode::Timestamped) {
        if (signed_at == 0 || signed_at > now + skew) return false;
        if (now > signed_at + validity_window + skew) return false;
    }
    auto payload = signed_payload(signed_at, obj_hash);
    for (const auto& k : keys) {
        if (k.covers(now, skew) && crypto::verify(k.public_key, payload, sig)) return true;
    }
    return false;
}

std::string CuratorKeyring::to_json() const {
    json j{{"curator_id", curator_id},
           {"mode", std::string(to_string(mode))},
           {"validity_window", validity_window},
           {"timestamp", timestamp},
           {"keys", json::array()}};
    for (const auto& k : keys) j["keys"].push_back(period_to_json(k));
    return j.dump(2);
}

CuratorKeyring CuratorKeyring::from_json(std::string_view text) {
    auto j = json::parse(text);
    CuratorKeyring r;
    r.curator_id = j.at("curator_id").get<std::string>();
    r.mode = revocation_mode_from_string(j.at("mode").get<std::string>());
    r.validity_window = j.at("validity_window").get<UnixSeconds>();
    r.timestamp = j.at("timestamp").get<UnixSeconds>();
    for (const auto& k : j.at("keys")) r.keys.push_back(period_from_json(k));
    return r;
}

Bytes CuratorExport::encode() const {
    ByteWriter w;
    w.raw(as_bytes("VBX1"));
    w.short_string(curator_id);
    w.fixed(public_key);
    w.u64(records.size());
    for (const auto& e : records) {
        w.u32(kExportRecordLen);
        w.u64(e.idx);
        w.fixed(e.obj_hash);
        w.fixed(e.sig);
        w.u64(e.signed_at);
    }
    return std::move(w).take();
}

CuratorExport CuratorExport::decode(ByteView in) {
    ByteReader r(in);
    auto magic = r.raw(4);
    if (!std::equal(magic.begin(), magic.end(), as_bytes("VBX1").begin())) {
        throw DecodeError("not a curator export file");
    }
    CuratorExport ex;
    ex.curator_id = r.short_string();
    ex.public_key = r.fixed<PublicKey>();
    auto count = r.u64();
    if (count > r.remaining() / (4 + kExportRecordLen)) throw DecodeError("export record count exceeds input");
    ex.records.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        ByteReader rec(r.blob());
        CuratorEntry e;
        e.idx = rec.u64();
        e.obj_hash = rec.fixed<Digest>();
        e.sig = rec.fixed<Signature>();
        e.signed_at = rec.u64();
        rec.expect_done();
        ex.records.push_back(e);
    }
    r.expect_done();
    return ex;
}

CuratorIdentity CuratorIdentity::create(std::string curator_id, RevocationMode mode, UnixSeconds validity_window,
                                        UnixSeconds now) {
    if (curator_id.empty() || curator_id.size() > 255) throw Error("curator id must be 1..255 bytes");
    if (mode != RevocationMode::None && validity_window == 0) {
        throw Error("validity window must be positive when signatures expire");
    }
    CuratorIdentity id;
    id.curator_id = std::move(curator_id);
    id.keypair = crypto::keygen();
    id.mode = mode;
    id.validity_window = validity_window;
    id.key_created_at = now;
    id.timestamp = mode == RevocationMode::Timestamped ? now : 0;
    return id;
}

KeyPeriod CuratorIdentity::current_period() const {
    UnixSeconds not_after = mode == RevocationMode::KeyRotation ? key_created_at + validity_window : 0;
    return {keypair.public_key, key_created_at, not_after};
}

CuratorKeyring CuratorIdentity::keyring() const {
    CuratorKeyring r;
    r.curator_id = curator_id;
    r.mode = mode;
    r.validity_window = validity_window;
    r.timestamp = timestamp;
    r.keys = archived;
    r.keys.push_back(current_period());
    return r;
}

CuratorIdentity rotate_key(const CuratorIdentity& identity, UnixSeconds now) {
    CuratorIdentity next = identity;
    auto old = identity.current_period();
    if (old.not_after == 0 || old.not_after > now) old.not_after = now;
    next.archived.push_back(old);
    next.keypair = crypto::keygen();
    next.key_created_at = now;
    return next;
}

CuratorDatabase::CuratorDatabase(CuratorIdentity identity, std::set<std::string> auditor_allowlist)
    : identity_(std::move(identity)), auditors_(std::move(auditor_allowlist)) {}

Signature CuratorDatabase::sign_entry(const Digest& h, UnixSeconds signed_at) const {
    return crypto::sign(identity_.keypair.secret_key, signed_payload(signed_at, h));
}

CuratorEntry CuratorDatabase::add_object(ByteView object_bytes, UnixSeconds now) {
    if (identity_.mode == RevocationMode::Timestamped && identity_.timestamp == 0) identity_.timestamp = now;
    CuratorEntry e;
    e.idx = entries_.empty() ? 1 : entries_.back().idx + 1;
    e.obj_hash = crypto::object_hash(object_bytes);
    e.signed_at = identity_.mode == RevocationMode::Timestamped ? identity_.timestamp : 0;
    e.sig = sign_entry(e.obj_hash, e.signed_at);
    entries_.push_back(e);
    objects_.emplace(e.idx, Bytes(object_bytes.begin(), object_bytes.end()));
    return e;
}

CuratorExport CuratorDatabase::export_set() const {
    return {identity_.curator_id, identity_.keypair.public_key, entries_};
}

Bytes CuratorDatabase::disclose_object(std::uint64_t idx, const std::string& auditor_credential) const {
    if (!auditors_.contains(auditor_credential)) throw Unauthorized("auditor credential not on the allowlist");
    auto it = objects_.find(idx);
    if (it == objects_.end()) throw NotFound("no entry with idx " + std::to_string(idx));
    return it->second;
}

void CuratorDatabase::resign_active() {
    for (auto& e : entries_) {
        if (revoked_.contains(e.idx)) continue;
        e.signed_at = identity_.mode == RevocationMode::Timestamped ? identity_.timestamp : 0;
        e.sig = sign_entry(e.obj_hash, e.signed_at);
    }
}

void CuratorDatabase::rotate_key(UnixSeconds now) {
    identity_ = curator::rotate_key(identity_, now);
    if (identity_.mode == RevocationMode::Timestamped) identity_.timestamp = now;
    resign_active();
}

void CuratorDatabase::renew(UnixSeconds now) {
    if (identity_.mode == RevocationMode::Timestamped) identity_.timestamp = now;
    resign_active();
}

void CuratorDatabase::revoke(std::uint64_t idx) {
    if (idx == 0 || entries_.empty() || idx > entries_.back().idx) {
        throw NotFound("no entry with idx " + std::to_string(idx));
    }
    revoked_.insert(idx);
}

void CuratorDatabase::save(const std::string& dir) const {
    fs::create_directories(fs::path(dir) / "objects");
    json j{{"curator_id", identity_.curator_id},
           {"mode", std::string(to_string(identity_.mode))},
           {"validity_window", identity_.validity_window},
           {"key_created_at", identity_.key_created_at},
           {"timestamp", identity_.timestamp},
           {"secret_key", to_hex(identity_.keypair.secret_key.bytes())},
           {"archived", json::array()},
           {"auditors", auditors_},
           {"revoked", revoked_},
           {"entries", json::array()}};
    for (const auto& p : identity_.archived) j["archived"].push_back(period_to_json(p));
    for (const auto& e : entries_) {
        j["entries"].push_back({{"idx", e.idx},
                                {"obj_hash", to_hex(e.obj_hash)},
                                {"sig", to_hex(e.sig)},
                                {"signed_at", e.signed_at}});
    }
    std::ofstream(fs::path(dir) / "curator.json") << j.dump(2) << '\n';
    for (const auto& [idx, bytes] : objects_) {
        write_file((fs::path(dir) / "objects" / std::to_string(idx)).string(), bytes);
    }
}

CuratorDatabase CuratorDatabase::load(const std::string& dir) {
    auto text = read_file((fs::path(dir) / "curator.json").string());
    auto j = json::parse(text.begin(), text.end());
    CuratorIdentity id;
    id.curator_id = j.at("curator_id").get<std::string>();
    id.mode = revocation_mode_from_string(j.at("mode").get<std::string>());
    id.validity_window = j.at("validity_window").get<UnixSeconds>();
    id.key_created_at = j.at("key_created_at").get<UnixSeconds>();
    id.timestamp = j.at("timestamp").get<UnixSeconds>();
    auto sk = crypto::SecretKey::from_bytes(from_hex(j.at("secret_key").get<std::string>()));
    id.keypair = {sk.public_key(), sk};
    for (const auto& p : j.at("archived")) id.archived.push_back(period_from_json(p));

    CuratorDatabase db(std::move(id), j.at("auditors").get<std::set<std::string>>());
    db.revoked_ = j.at("revoked").get<std::set<std::uint64_t>>();
    for (const auto& e : j.at("entries")) {
        CuratorEntry entry;
        entry.idx = e.at("idx").get<std::uint64_t>();
        entry.obj_hash = Digest::from(from_hex(e.at("obj_hash").get<std::string>()));
        entry.sig = Signature::from(from_hex(e.at("sig").get<std::string>()));
        entry.signed_at = e.at("signed_at").get<UnixSeconds>();
        db.entries_.push_back(entry);
        db.objects_.emplace(entry.idx, read_file((fs::path(dir) / "objects" / std::to_string(entry.idx)).string()));
    }
    return db;
}

}  // namespace veilblock::curator
