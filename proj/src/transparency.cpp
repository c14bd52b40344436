#include "veilblock/transparency.hpp"

#include <fstream>
#include <sstream>

namespace veilblock::log {
namespace {

std::uint64_t split_point(std::uint64_t n) {
    // Largest power of two strictly less than n (n >= 2).
    std::uint64_t k = 1;
    while (k << 1 < n) k <<= 1;
    return k;
}

bool lsb(std::uint64_t v) { return (v & 1) != 0; }

void encode_path(ByteWriter& w, const std::vector<Digest>& path) {
    if (path.size() > 255) throw Error("proof path too long");
    w.u8(static_cast<std::uint8_t>(path.size()));
    for (const auto& d : path) w.fixed(d);
}

std::vector<Digest> decode_path(ByteReader& in) {
    std::vector<Digest> path(in.u8());
    for (auto& d : path) d = in.fixed<Digest>();
    return path;
}

}  // namespace

Bytes InclusionProof::encode() const {
    ByteWriter w;
    encode_path(w, path);
    return std::move(w).take();
}

InclusionProof InclusionProof::decode(ByteReader& in) { return {decode_path(in)}; }

Bytes ConsistencyProof::encode() const {
    ByteWriter w;
    w.u64(old_size);
    w.u64(new_size);
    encode_path(w, path);
    return std::move(w).take();
}

ConsistencyProof ConsistencyProof::decode(ByteReader& in) {
    ConsistencyProof p;
    p.old_size = in.u64();
    p.new_size = in.u64();
    p.path = decode_path(in);
    return p;
}

Digest leaf_hash(const Digest& leaf) {
    Bytes buf{0x00};
    buf.insert(buf.end(), leaf.bytes.begin(), leaf.bytes.end());
    return crypto::sha256(buf);
}

Digest node_hash(const Digest& left, const Digest& right) {
    Bytes buf{0x01};
    buf.insert(buf.end(), left.bytes.begin(), left.bytes.end());
    buf.insert(buf.end(), right.bytes.begin(), right.bytes.end());
    return crypto::sha256(buf);
}

Digest empty_root() { return crypto::sha256({}); }

MerkleTree MerkleTree::from_leaf_hashes(std::vector<Digest> leaf_hashes) {
    MerkleTree t;
    for (const auto& h : leaf_hashes) t.append_hash(h);
    return t;
}

void MerkleTree::append(const Digest& leaf) { append_hash(leaf_hash(leaf)); }

void MerkleTree::append_hash(const Digest& h) {
    leaf_hashes_.push_back(h);
    frontier_.emplace_back(1, h);
    while (frontier_.size() >= 2 && frontier_[frontier_.size() - 2].first == frontier_.back().first) {
        auto right = frontier_.back();
        frontier_.pop_back();
        auto& left = frontier_.back();
        left = {left.first * 2, node_hash(left.second, right.second)};
    }
}

Digest MerkleTree::root() const {
    if (frontier_.empty()) return empty_root();
    Digest r = frontier_.back().second;
    for (auto it = frontier_.rbegin() + 1; it != frontier_.rend(); ++it) r = node_hash(it->second, r);
    return r;
}

Digest MerkleTree::root_at(std::uint64_t n) const {
    if (n > size()) throw Error("root_at beyond tree size");
    if (n == 0) return empty_root();
    return subtree_hash(0, n);
}

Digest MerkleTree::subtree_hash(std::uint64_t begin, std::uint64_t end) const {
    if (end - begin == 1) return leaf_hashes_[begin];
    auto k = split_point(end - begin);
    return node_hash(subtree_hash(begin, begin + k), subtree_hash(begin + k, end));
}

void MerkleTree::inclusion_path(std::uint64_t index, std::uint64_t begin, std::uint64_t end,
                                std::vector<Digest>& out) const {
    if (end - begin == 1) return;
    auto k = split_point(end - begin);
    if (index < k) {
        inclusion_path(index, begin, begin + k, out);
        out.push_back(subtree_hash(begin + k, end));
    } else {
        inclusion_path(index - k, begin + k, end, out);
        out.push_back(subtree_hash(begin, begin + k));
    }
}

InclusionProof MerkleTree::prove_inclusion(std::uint64_t index, std::uint64_t tree_size) const {
    if (tree_size > size() || index >= tree_size) throw Error("inclusion proof index out of range");
    InclusionProof p;
    inclusion_path(index, 0, tree_size, p.path);
    return p;
}

void MerkleTree::consistency_path(std::uint64_t m, std::uint64_t begin, std::uint64_t end, bool complete,
                                  std::vector<Digest>& out) const {
    auto n = end - begin;
    if (m == n) {
        if (!complete) out.push_back(subtree_hash(begin, end));
        return;
    }
    auto k = split_point(n);
    if (m <= k) {
        consistency_path(m, begin, begin + k, complete, out);
        out.push_back(subtree_hash(begin + k, end));
    } else {
        consistency_path(m - k, begin + k, end, false, out);
        out.push_back(subtree_hash(begin, begin + k));
    }
}

ConsistencyProof MerkleTree::prove_consistency(std::uint64_t old_size, std::uint64_t new_size) const {
    if (old_size > new_size) throw Error("consistency proof: old size exceeds new size");
    if (new_size > size()) throw Error("consistency proof: new size exceeds tree size");
    ConsistencyProof p{old_size, new_size, {}};
    if (old_size > 0 && old_size < new_size) consistency_path(old_size, 0, new_size, true, p.path);
    return p;
}

bool verify_inclusion_path(const Digest& leaf, std::uint64_t index, std::uint64_t tree_size,
                           const std::vector<Digest>& path, const Digest& root) {
    if (index >= tree_size) return false;
    std::uint64_t fn = index;
    std::uint64_t sn = tree_size - 1;
    Digest r = leaf_hash(leaf);
    for (const auto& p : path) {
        if (sn == 0) return false;
        if (lsb(fn) || fn == sn) {
            r = node_hash(p, r);
            while (!lsb(fn) && fn != 0) {
                fn >>= 1;
                sn >>= 1;
            }
        } else {
            r = node_hash(r, p);
        }
        fn >>= 1;
        sn >>= 1;
    }
    return sn == 0 && r == root;
}

bool verify_consistency_path(std::uint64_t old_size, std::uint64_t new_size, const Digest& old_root,
                             const Digest& new_root, const std::vector<Digest>& path) {
    if (old_size > new_size) return false;
    if (old_size == new_size) return path.empty() && old_root == new_root;
    if (old_size == 0) return path.empty() && old_root == empty_root();

    std::vector<Digest> proof;
    if ((old_size & (old_size - 1)) == 0) proof.push_back(old_root);
    proof.insert(proof.end(), path.begin(), path.end());
    if (proof.empty()) return false;

    std::uint64_t fn = old_size - 1;
    std::uint64_t sn = new_size - 1;
    while (lsb(fn)) {
        fn >>= 1;
        sn >>= 1;
    }
    Digest fr = proof[0];
    Digest sr = proof[0];
    for (std::size_t i = 1; i < proof.size(); ++i) {
        const auto& c = proof[i];
        if (sn == 0) return false;
        if (lsb(fn) || fn == sn) {
            fr = node_hash(c, fr);
            sr = node_hash(c, sr);
            while (!lsb(fn) && fn != 0) {
                fn >>= 1;
                sn >>= 1;
            }
        } else {
            sr = node_hash(sr, c);
        }
        fn >>= 1;
        sn >>= 1;
    }
    return fr == old_root && sr == new_root && sn == 0;
}

Bytes Checkpoint::canonical_body() const {
    ByteWriter w;
    w.fixed(root);
    w.u64(size);
    w.u64(timestamp);
    return std::move(w).take();
}

Bytes Checkpoint::encode() const {
    ByteWriter w;
    w.raw(canonical_body());
    w.fixed(enforcer_sig);
    if (witness_sigs.size() > 255) throw Error("too many witness signatures");
    w.u8(static_cast<std::uint8_t>(witness_sigs.size()));
    for (const auto& ws : witness_sigs) {
        w.short_string(ws.witness_id);
        w.fixed(ws.signature);
    }
    return std::move(w).take();
}

Checkpoint Checkpoint::decode(ByteReader& in) {
    Checkpoint c;
    c.root = in.fixed<Digest>();
    c.size = in.u64();
    c.timestamp = in.u64();
    c.enforcer_sig = in.fixed<crypto::Signature>();
    auto n = in.u8();
    for (std::uint8_t i = 0; i < n; ++i) {
        WitnessSignature ws;
        ws.witness_id = in.short_string();
        ws.signature = in.fixed<crypto::Signature>();
        c.witness_sigs.push_back(std::move(ws));
    }
    return c;
}

Checkpoint Checkpoint::decode(ByteView in) {
    ByteReader r(in);
    auto c = decode(r);
    r.expect_done();
    return c;
}

Checkpoint sign_checkpoint(const Digest& root, std::uint64_t size, UnixSeconds timestamp,
                           const crypto::SecretKey& enforcer_sk) {
    Checkpoint c;
    c.root = root;
    c.size = size;
    c.timestamp = timestamp;
    c.enforcer_sig = crypto::sign(enforcer_sk, c.canonical_body());
    return c;
}

bool verify_checkpoint_signatures(const Checkpoint& chkpt, const crypto::PublicKey& enforcer_pk,
                                  const WitnessKeys& witness_pks) {
    auto body = chkpt.canonical_body();
    if (!crypto::verify(enforcer_pk, body, chkpt.enforcer_sig)) return false;
    for (const auto& ws : chkpt.witness_sigs) {
        auto it = witness_pks.find(ws.witness_id);
        if (it != witness_pks.end() && !crypto::verify(it->second, body, ws.signature)) return false;
    }
    return true;
}

std::size_t count_witness_signatures(const Checkpoint& chkpt, const WitnessKeys& witness_pks) {
    auto body = chkpt.canonical_body();
    std::map<std::string, bool> seen;
    for (const auto& ws : chkpt.witness_sigs) {
        auto it = witness_pks.find(ws.witness_id);
        if (it != witness_pks.end() && crypto::verify(it->second, body, ws.signature)) seen[ws.witness_id] = true;
    }
    return seen.size();
}

bool verify_inclusion(const Checkpoint& chkpt, const Digest& leaf, const InclusionProof& proof,
                      const crypto::PublicKey& enforcer_pk, const WitnessKeys& witness_pks) {
    if (!verify_checkpoint_signatures(chkpt, enforcer_pk, witness_pks)) return false;
    if (chkpt.size == 0) return false;
    return verify_inclusion_path(leaf, chkpt.size - 1, chkpt.size, proof.path, chkpt.root);
}

bool verify_consistency(const Checkpoint& old_chkpt, const Checkpoint& new_chkpt,
                        const ConsistencyProof& proof) {
    if (proof.old_size != old_chkpt.size || proof.new_size != new_chkpt.size) return false;
    return verify_consistency_path(old_chkpt.size, new_chkpt.size, old_chkpt.root, new_chkpt.root, proof.path);
}

std::pair<Checkpoint, InclusionProof> TransparencyLog::append_leaf(const Digest& leaf, UnixSeconds now,
                                                                   const crypto::SecretKey& enforcer_sk) {
    if (last_ && now < last_->timestamp) {
        throw ClockRegression("checkpoint timestamp precedes the previous checkpoint");
    }
    tree_.append(leaf);
    auto chkpt = sign_checkpoint(tree_.root(), tree_.size(), now, enforcer_sk);
    auto proof = tree_.prove_inclusion(tree_.size() - 1, tree_.size());
    last_ = chkpt;
    return {chkpt, proof};
}

crypto::Signature witness_attest(const Checkpoint& chkpt, const ConsistencyProof& proof,
                                 const crypto::SecretKey& witness_sk, const std::optional<Checkpoint>& prior,
                                 const crypto::PublicKey& enforcer_pk) {
    if (!crypto::verify(enforcer_pk, chkpt.canonical_body(), chkpt.enforcer_sig)) {
        throw WitnessRefusal("checkpoint not signed by the enforcer", {prior.value_or(chkpt), chkpt, proof});
    }
    if (prior) {
        if (chkpt.timestamp < prior->timestamp) {
            throw WitnessRefusal("checkpoint timestamp regresses", {*prior, chkpt, proof});
        }
        if (!verify_consistency(*prior, chkpt, proof)) {
            throw WitnessRefusal("checkpoint inconsistent with last seen", {*prior, chkpt, proof});
        }
    }
    return crypto::sign(witness_sk, chkpt.canonical_body());
}

Checkpoint Witness::attest(const Checkpoint& chkpt, const ConsistencyProof& proof) {
    try {
        auto sig = witness_attest(chkpt, proof, keys_.secret_key, last_seen_, enforcer_pk_);
        Checkpoint out = chkpt;
        out.witness_sigs.push_back({id_, sig});
        last_seen_ = chkpt;
        last_seen_->witness_sigs.clear();
        return out;
    } catch (const WitnessRefusal& r) {
        evidence_.push_back(r.evidence());
        throw;
    }
}

std::string format_checkpoint_line(const Checkpoint& chkpt) { return to_base64(chkpt.encode()); }

std::vector<Checkpoint> parse_checkpoint_lines(std::string_view text) {
    std::vector<Checkpoint> out;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        out.push_back(Checkpoint::decode(from_base64(line)));
    }
    return out;
}

void MemoryCheckpointStore::publish(const Checkpoint& chkpt) {
    std::lock_guard lock(mu_);
    items_.push_back(chkpt);
}

std::vector<Checkpoint> MemoryCheckpointStore::fetch_checkpoints() const {
    std::lock_guard lock(mu_);
    return items_;
}

void FileCheckpointStore::publish(const Checkpoint& chkpt) {
    std::lock_guard lock(mu_);
    std::ofstream out(path_, std::ios::app);
    if (!out) throw Error("cannot append to checkpoint store " + path_);
    out << format_checkpoint_line(chkpt) << '\n';
}

std::vector<Checkpoint> FileCheckpointStore::fetch_checkpoints() const {
    std::lock_guard lock(mu_);
    std::ifstream in(path_);
    if (!in) return {};
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_checkpoint_lines(ss.str());
}

}  // namespace veilblock::log
