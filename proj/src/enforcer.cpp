#include "veilblock/enforcer.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace veilblock::enforcer {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr std::string_view kDbHashTag = "veilblock-db-v1";

void encode_curator_table(ByteWriter& w, const std::vector<std::string>& curators) {
    if (curators.size() > 0xffff) throw Error("too many curators");
    w.u16(static_cast<std::uint16_t>(curators.size()));
    for (const auto& c : curators) w.short_string(c);
}

std::vector<std::string> decode_curator_table(ByteReader& in) {
    std::vector<std::string> out(in.u16());
    for (auto& c : out) c = in.short_string();
    return out;
}

}  // namespace

void BlindedRecord::encode_to(ByteWriter& w) const {
    if (enc_sigs.size() > 255) throw Error("too many signatures on one record");
    w.fixed(blinded_id);
    w.u8(static_cast<std::uint8_t>(enc_sigs.size()));
    for (const auto& s : enc_sigs) {
        w.u16(s.slot);
        w.fixed(s.ciphertext);
    }
}

BlindedRecord BlindedRecord::decode(ByteReader& in) {
    BlindedRecord r;
    r.blinded_id = in.fixed<Digest>();
    r.enc_sigs.resize(in.u8());
    for (auto& s : r.enc_sigs) {
        s.slot = in.u16();
        s.ciphertext = in.fixed<crypto::SigCiphertext>();
    }
    return r;
}

Digest compute_db_hash(std::uint64_t epoch, const std::vector<std::string>& curators,
                       const std::vector<BlindedRecord>& records) {
    ByteWriter w;
    w.raw(as_bytes(kDbHashTag));
    w.u64(epoch);
    encode_curator_table(w, curators);
    w.u64(records.size());
    for (const auto& r : records) r.encode_to(w);
    return crypto::sha256(w.bytes());
}

Bytes DatabaseSnapshot::encode() const {
    ByteWriter w;
    w.raw(as_bytes("VBS1"));
    w.u64(epoch);
    w.u64(records.size());
    w.fixed(enforcer_pk);
    encode_curator_table(w, curators);
    for (const auto& r : records) r.encode_to(w);
    w.fixed(db_hash);
    w.blob(checkpoint.encode());
    w.raw(inclusion.encode());
    return std::move(w).take();
}

DatabaseSnapshot DatabaseSnapshot::decode(ByteView in) {
    ByteReader r(in);
    auto magic = r.raw(4);
    if (!std::equal(magic.begin(), magic.end(), as_bytes("VBS1").begin())) {
        throw DecodeError("not a database snapshot");
    }
    DatabaseSnapshot s;
    s.epoch = r.u64();
    auto count = r.u64();
    s.enforcer_pk = r.fixed<crypto::PublicKey>();
    s.curators = decode_curator_table(r);
    if (count > r.remaining() / 33) throw DecodeError("record count exceeds input");
    s.records.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) s.records.push_back(BlindedRecord::decode(r));
    s.db_hash = r.fixed<Digest>();
    s.checkpoint = log::Checkpoint::decode(r.blob());
    s.inclusion = log::InclusionProof::decode(r);
    r.expect_done();
    return s;
}

SnapshotDiff snapshot_diff(const DatabaseSnapshot& old_snap, const DatabaseSnapshot& new_snap) {
    if (old_snap.epoch > new_snap.epoch) throw Error("snapshot diff: epochs out of order");
    SnapshotDiff d;
    auto a = old_snap.records.begin();
    auto b = new_snap.records.begin();
    while (a != old_snap.records.end() || b != new_snap.records.end()) {
        if (b == new_snap.records.end() || (a != old_snap.records.end() && a->blinded_id < b->blinded_id)) {
            d.removed.push_back(a->blinded_id);
            ++a;
        } else if (a == old_snap.records.end() || b->blinded_id < a->blinded_id) {
            d.added.push_back(*b);
            ++b;
        } else {
            if (*a != *b) d.added.push_back(*b);
            ++a;
            ++b;
        }
    }
    return d;
}

std::vector<BlindedRecord> apply_diff(const std::vector<BlindedRecord>& records, const SnapshotDiff& diff) {
    std::map<Digest, BlindedRecord> merged;
    for (const auto& r : records) merged.emplace(r.blinded_id, r);
    for (const auto& id : diff.removed) merged.erase(id);
    for (const auto& r : diff.added) merged.insert_or_assign(r.blinded_id, r);
    std::vector<BlindedRecord> out;
    out.reserve(merged.size());
    for (auto& [id, r] : merged) out.push_back(std::move(r));
    return out;
}

BlindedRecord blind_record(const Digest& obj_hash, const Scalar& blind_b,
                           const std::vector<std::pair<std::uint16_t, crypto::Signature>>& sigs) {
    auto unblinded = crypto::blind(crypto::hash_to_group(obj_hash), blind_b);
    BlindedRecord r;
    r.blinded_id = crypto::derive_id(unblinded);
    auto key = crypto::derive_key(unblinded);
    for (const auto& [slot, sig] : sigs) r.enc_sigs.push_back({slot, crypto::encrypt_sig(key, sig, slot)});
    return r;
}

Enforcer::Enforcer(Scalar blind_b, crypto::SigningKeypair keys, EnforcerOptions options)
    : blind_b_(blind_b), keys_(std::move(keys)), options_(options) {
    if (options_.policy_m < 1) throw Error("policy_m must be at least 1");
}

Enforcer Enforcer::create(EnforcerOptions options) { return {Scalar::random(), crypto::keygen(), options}; }

DatabaseSnapshot Enforcer::build_database(const std::vector<curator::CuratorExport>& curator_sets,
                                          const curator::Keyrings& keyrings, UnixSeconds now) {
    held_ = curator_sets;
    return rebuild(keyrings, now);
}

DatabaseSnapshot Enforcer::publish_update(const std::vector<curator::CuratorExport>& additions,
                                          const curator::Keyrings& keyrings, UnixSeconds now) {
    for (const auto& add : additions) {
        auto it = std::find_if(held_.begin(), held_.end(),
                               [&](const auto& h) { return h.curator_id == add.curator_id; });
        if (it == held_.end()) {
            held_.push_back(add);
            continue;
        }
        std::map<std::uint64_t, curator::CuratorEntry> by_idx;
        for (const auto& e : it->records) by_idx[e.idx] = e;
        for (const auto& e : add.records) by_idx[e.idx] = e;
        it->public_key = add.public_key;
        it->records.clear();
        for (const auto& [idx, e] : by_idx) it->records.push_back(e);
    }
    return rebuild(keyrings, now);
}

DatabaseSnapshot Enforcer::rebuild(const curator::Keyrings& keyrings, UnixSeconds now) {
    if (log_.last_checkpoint() && now < log_.last_checkpoint()->timestamp) {
        throw log::ClockRegression("build time precedes the previous checkpoint");
    }
    dropped_.clear();

    std::vector<std::string> curators;
    for (const auto& set : held_) curators.push_back(set.curator_id);
    std::sort(curators.begin(), curators.end());
    curators.erase(std::unique(curators.begin(), curators.end()), curators.end());
    auto slot_of = [&](const std::string& id) {
        return static_cast<std::uint16_t>(std::lower_bound(curators.begin(), curators.end(), id) - curators.begin());
    };

    // obj_hash -> slot -> signature; later idx wins within one curator.
    std::map<Digest, std::map<std::uint16_t, crypto::Signature>> attested;
    for (const auto& set : held_) {
        auto ring = keyrings.find(set.curator_id);
        for (const auto& e : set.records) {
            if (ring == keyrings.end()) {
                dropped_.push_back({set.curator_id, e.idx, "unknown curator"});
                continue;
            }
            if (!ring->second.accepts(e.obj_hash, e.sig, e.signed_at, now, options_.clock_skew)) {
                dropped_.push_back({set.curator_id, e.idx, "signature invalid or stale"});
                continue;
            }
            attested[e.obj_hash][slot_of(set.curator_id)] = e.sig;
        }
    }

    std::vector<BlindedRecord> records;
    for (const auto& [h, sigs] : attested) {
        if (sigs.size() < options_.policy_m) continue;
        std::vector<std::pair<std::uint16_t, crypto::Signature>> ordered(sigs.begin(), sigs.end());
        records.push_back(blind_record(h, blind_b_, ordered));
    }
    return commit_records(std::move(curators), std::move(records), now);
}

DatabaseSnapshot Enforcer::commit_records(std::vector<std::string> curators, std::vector<BlindedRecord> records,
                                          UnixSeconds now) {
    std::sort(records.begin(), records.end(),
              [](const auto& a, const auto& b) { return a.blinded_id < b.blinded_id; });
    auto dup = std::adjacent_find(records.begin(), records.end(),
                                  [](const auto& a, const auto& b) { return a.blinded_id == b.blinded_id; });
    if (dup != records.end()) throw Error("duplicate blinded id in database");

    DatabaseSnapshot s;
    s.epoch = epoch_ + 1;
    s.enforcer_pk = keys_.public_key;
    s.curators = std::move(curators);
    s.records = std::move(records);
    s.db_hash = compute_db_hash(s.epoch, s.curators, s.records);
    auto [chkpt, proof] = commit_leaf(s.db_hash, now);
    s.checkpoint = std::move(chkpt);
    s.inclusion = std::move(proof);
    epoch_ = s.epoch;
    if (last_publish_ && now < *last_publish_ + options_.update_interval) ++rapid_updates_;
    last_publish_ = now;
    return s;
}

std::pair<log::Checkpoint, log::InclusionProof> Enforcer::commit_leaf(const Digest& db_hash, UnixSeconds now) {
    return log_.append_leaf(db_hash, now, keys_.secret_key);
}

GroupElement Enforcer::respond_psi(const GroupElement& request) const { return crypto::blind(request, blind_b_); }

Bytes Enforcer::respond_psi(ByteView request, const std::string& peer) const {
    if (admission_ && !admission_(peer)) throw RateLimited("psi request refused by admission policy");
    if (!GroupElement::is_valid_encoding(request)) throw ProtocolError("psi request is not a valid group element");
    auto resp = respond_psi(GroupElement::decode(request));
    return {resp.encoding().begin(), resp.encoding().end()};
}

log::ConsistencyProof Enforcer::prove_consistency(std::uint64_t old_size, std::uint64_t new_size) const {
    return log_.tree().prove_consistency(old_size, new_size);
}

void Enforcer::save(const std::string& dir) const {
    fs::create_directories(fs::path(dir) / "sets");
    json j{{"blind_b", to_hex(blind_b_.encoding())},
           {"secret_key", to_hex(keys_.secret_key.bytes())},
           {"policy_m", options_.policy_m},
           {"update_interval", options_.update_interval},
           {"clock_skew", options_.clock_skew},
           {"epoch", epoch_},
           {"rapid_updates", rapid_updates_},
           {"leaf_hashes", json::array()},
           {"sets", json::array()}};
    if (last_publish_) j["last_publish"] = *last_publish_;
    if (log_.last_checkpoint()) j["last_checkpoint"] = log::format_checkpoint_line(*log_.last_checkpoint());
    for (const auto& h : log_.tree().leaf_hashes()) j["leaf_hashes"].push_back(to_hex(h));
    for (const auto& set : held_) {
        auto file = set.curator_id + ".vbx";
        write_file((fs::path(dir) / "sets" / file).string(), set.encode());
        j["sets"].push_back(file);
    }
    std::ofstream(fs::path(dir) / "enforcer.json") << j.dump(2) << '\n';
}

Enforcer Enforcer::load(const std::string& dir) {
    auto text = read_file((fs::path(dir) / "enforcer.json").string());
    auto j = json::parse(text.begin(), text.end());
    auto sk = crypto::SecretKey::from_bytes(from_hex(j.at("secret_key").get<std::string>()));
    EnforcerOptions opts;
    opts.policy_m = j.at("policy_m").get<unsigned>();
    opts.update_interval = j.at("update_interval").get<UnixSeconds>();
    opts.clock_skew = j.at("clock_skew").get<UnixSeconds>();
    Enforcer e(Scalar::decode(from_hex(j.at("blind_b").get<std::string>())), {sk.public_key(), sk}, opts);
    e.epoch_ = j.at("epoch").get<std::uint64_t>();
    e.rapid_updates_ = j.at("rapid_updates").get<std::size_t>();
    if (j.contains("last_publish")) e.last_publish_ = j.at("last_publish").get<UnixSeconds>();
    std::vector<Digest> hashes;
    for (const auto& h : j.at("leaf_hashes")) hashes.push_back(Digest::from(from_hex(h.get<std::string>())));
    std::optional<log::Checkpoint> last;
    if (j.contains("last_checkpoint")) {
        last = log::Checkpoint::decode(from_base64(j.at("last_checkpoint").get<std::string>()));
    }
    e.log_ = log::TransparencyLog(log::MerkleTree::from_leaf_hashes(std::move(hashes)), std::move(last));
    for (const auto& f : j.at("sets")) {
        e.held_.push_back(curator::CuratorExport::decode(read_file((fs::path(dir) / "sets" / f.get<std::string>()).string())));
    }
    return e;
}

}  // namespace veilblock::enforcer
