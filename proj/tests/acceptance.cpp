// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers as
// arguments to run a subset.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "fixtures.hpp"
#include "veilblock/auditor.hpp"
#include "veilblock/bench.hpp"
#include "veilblock/pir.hpp"
#include "veilblock/wire.hpp"

using namespace veilblock;
using vbt::kT0;

namespace {

constexpr UnixSeconds kSkew = 300;

struct Outcome {
    bool pass = false;
    std::string detail;
};

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// Runs f(i) for i in [0, n) across the available cores and sums the results.
std::size_t parallel_sum(std::size_t n, const std::function<std::size_t(std::size_t)>& f) {
    std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
    std::atomic<std::size_t> next{0}, total{0};
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < workers; ++t) {
        pool.emplace_back([&] {
            std::size_t local = 0;
            for (std::size_t i; (i = next.fetch_add(1)) < n;) local += f(i);
            total += local;
        });
    }
    for (auto& th : pool) th.join();
    return total;
}

// A randomized listing: every object signed by a random non-empty subset of
// curators, with some database records carrying a corrupted signature. The
// plaintext side keeps exactly what was placed in the database so the oracle
// can verify signatures directly.
struct Listing {
    vbt::World world;
    std::map<crypto::Digest, std::vector<std::pair<std::string, crypto::Signature>>> placed;
    client::VerifiedDB db;
    unsigned policy_m = 1;
    UnixSeconds now = kT0;
};

Listing make_listing(std::size_t n, std::size_t curators, unsigned policy_m, std::size_t tampered,
                     std::mt19937_64& rng) {
    Listing l;
    l.policy_m = policy_m;
    std::uint64_t full = (std::uint64_t{1} << curators) - 1;
    l.world = vbt::make_world({.n_curators = curators,
                               .n_objects = n,
                               .policy_m = policy_m,
                               .signers = [&](std::size_t) {
                                   auto mask = rng() % full + 1;
                                   std::set<std::size_t> s;
                                   for (std::size_t j = 0; j < curators; ++j) {
                                       if (mask >> j & 1) s.insert(j);
                                   }
                                   return s;
                               }});
    auto& w = l.world;
    for (const auto& c : w.curators) {
        for (const auto& e : c.entries()) l.placed[e.obj_hash].push_back({c.identity().curator_id, e.sig});
    }

    std::vector<std::size_t> listed;
    for (std::size_t i = 0; i < n; ++i) {
        if (w.signers[i].size() >= policy_m) listed.push_back(i);
    }
    std::shuffle(listed.begin(), listed.end(), rng);
    listed.resize(std::min(tampered, listed.size()));
    auto records = w.snapshot.records;
    const auto& table = w.snapshot.curators;
    auto forger = crypto::keygen();
    for (auto i : listed) {
        auto h = crypto::object_hash(w.objects[i]);
        auto& sigs = l.placed[h];
        sigs[rng() % sigs.size()].second = crypto::sign(forger.secret_key, curator::signed_payload(0, h));
        std::vector<std::pair<std::uint16_t, crypto::Signature>> slots;
        for (const auto& [cid, sig] : sigs) {
            auto slot = std::find(table.begin(), table.end(), cid) - table.begin();
            slots.push_back({static_cast<std::uint16_t>(slot), sig});
        }
        std::sort(slots.begin(), slots.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        auto rec = enforcer::blind_record(h, w.enf->blind_b(), slots);
        auto it = std::lower_bound(records.begin(), records.end(), rec,
                                   [](const auto& a, const auto& b) { return a.blinded_id < b.blinded_id; });
        if (it == records.end() || it->blinded_id != rec.blinded_id) throw Error("tampered record not found");
        *it = rec;
    }
    l.now = kT0 + 60;
    w.snapshot = w.enf->commit_records(table, records, l.now);
    l.db = client::verify_snapshot(w.snapshot, w.enf->public_key(), {}, 0);
    return l;
}

struct OracleVerdict {
    bool harmful = false;
    std::vector<std::string> curators;
};

OracleVerdict oracle(const Listing& l, ByteView obj) {
    auto h = crypto::object_hash(obj);
    auto it = l.placed.find(h);
    if (it == l.placed.end()) return {};
    std::vector<std::string> valid;
    for (const auto& [cid, sig] : it->second) {
        if (l.world.keyrings.at(cid).accepts_current(h, sig, l.now, kSkew)) valid.push_back(cid);
    }
    std::sort(valid.begin(), valid.end());
    if (valid.size() < l.policy_m) return {};
    return {true, valid};
}

std::vector<std::string> sorted(std::vector<std::string> v) {
    std::sort(v.begin(), v.end());
    return v;
}

bool agrees(const client::Verdict& v, const OracleVerdict& o) {
    if (v.harmful() != o.harmful) return false;
    return !o.harmful || sorted(v.attesting_curators) == o.curators;
}

bool same_verdict(const client::Verdict& a, const client::Verdict& b) {
    if (a.harmful() != b.harmful()) return false;
    return !a.harmful() || sorted(a.attesting_curators) == sorted(b.attesting_curators);
}

client::Verdict local_verdict(const Listing& l, ByteView obj, const client::QueryResult& r) {
    return client::evaluate(obj, r.unblinded, l.db, l.world.keyrings, {l.policy_m, kSkew}, l.now);
}

client::Verdict pir_verdict(const Listing& l, const pir::BucketedDB& db, const pir::FheBackend& backend,
                            ByteView obj, const client::QueryResult& r) {
    auto [q, sk] = pir::client_pir_query(r.lookup_key, db.prefix_bits, backend);
    auto answer = pir::PirAnswer::decode(pir::server_pir_answer(pir::PirQuery::decode(q.encode()), db, backend).encode());
    pir::PirVerifyContext ctx{l.world.keyrings, l.world.enf->public_key(), {}, 0, {l.policy_m, kSkew}};
    return pir::client_pir_decode(answer, sk, backend, r, obj, ctx, l.now);
}

// 1
Outcome psi_identity() {
    Stopwatch sw;
    constexpr int kTrials = 1000;
    int exact = 0;
    for (int i = 0; i < kTrials; ++i) {
        auto obj = vbt::random_object();
        auto h = crypto::object_hash(obj);
        auto a = crypto::Scalar::random();
        auto b = crypto::Scalar::random();
        auto [req, state] = client::begin_query_with(h, a);
        auto r = client::complete_query(state, crypto::blind(req, b));
        auto expect = crypto::blind(crypto::hash_to_group(h), b);
        exact += r.unblinded == expect && r.lookup_key == crypto::derive_id(expect) ? 1 : 0;
    }
    auto t = sw.seconds();
    return {exact == kTrials && t < 5.0, fmt("%d/%d exact, %.2f s", exact, kTrials, t)};
}

// 2
Outcome oracle_equivalence() {
    Stopwatch sw;
    std::mt19937_64 rng(2);
    auto l = make_listing(10000, 3, 2, 200, rng);
    auto build = sw.seconds();
    const auto& w = l.world;

    std::atomic<std::size_t> harmful{0};
    auto member_fp = parallel_sum(w.objects.size(), [&](std::size_t i) -> std::size_t {
        const auto& obj = w.objects[i];
        auto v = local_verdict(l, obj, vbt::psi_lookup(*w.enf, obj));
        auto o = oracle(l, obj);
        harmful += o.harmful ? 1 : 0;
        return agrees(v, o) ? 0 : 1;
    });
    constexpr std::size_t kNonMembers = 1000000;
    auto nonmember_fp = parallel_sum(kNonMembers, [&](std::size_t) -> std::size_t {
        auto obj = vbt::random_object();
        auto v = local_verdict(l, obj, vbt::psi_lookup(*w.enf, obj));
        return agrees(v, oracle(l, obj)) ? 0 : 1;
    });
    auto t = sw.seconds();
    return {member_fp == 0 && nonmember_fp == 0 && harmful > 0 && t < 600,
            fmt("members 10000 (%zu harmful by oracle) mismatches %zu; non-members %zu mismatches %zu; "
                "build %.1f s, total %.1f s",
                harmful.load(), member_fp, kNonMembers, nonmember_fp, build, t)};
}

// 3
Outcome path_equivalence() {
    Stopwatch sw;
    std::mt19937_64 rng(3);
    pir::NonPrivateReferenceBackend backend(10240);
    std::size_t queries = 0, mismatches = 0, uncovered = 0;

    auto l = make_listing(4000, 2, 1, 60, rng);
    auto& w = l.world;
    std::vector<client::QueryResult> members;
    for (const auto& obj : w.objects) members.push_back(vbt::psi_lookup(*w.enf, obj));
    std::vector<std::pair<Bytes, client::QueryResult>> strangers;
    for (unsigned k = 1; k <= 8; ++k) {
        l.now = kT0 + 60 + k;
        auto db = pir::build_and_commit(*w.enf, w.snapshot.records, w.snapshot.curators, k, l.now);
        std::size_t buckets = std::size_t{1} << k;
        std::vector<int> member_at(buckets, -1), stranger_at(buckets, -1);
        for (std::size_t i = 0; i < members.size(); ++i) {
            auto a = pir::prefix_of(members[i].lookup_key, k);
            if (member_at[a] < 0) member_at[a] = static_cast<int>(i);
        }
        auto fill = [&] {
            for (std::size_t i = 0; i < strangers.size(); ++i) {
                auto a = pir::prefix_of(strangers[i].second.lookup_key, k);
                if (stranger_at[a] < 0) stranger_at[a] = static_cast<int>(i);
            }
            return std::count(stranger_at.begin(), stranger_at.end(), -1) == 0;
        };
        while (!fill()) {
            for (int i = 0; i < 256; ++i) {
                auto obj = vbt::random_object();
                auto r = vbt::psi_lookup(*w.enf, obj);
                strangers.push_back({std::move(obj), r});
            }
        }
        for (std::size_t a = 0; a < buckets; ++a) {
            if (member_at[a] < 0) {
                ++uncovered;
            } else {
                const auto& obj = w.objects[member_at[a]];
                const auto& r = members[member_at[a]];
                ++queries;
                mismatches += same_verdict(pir_verdict(l, db, backend, obj, r), local_verdict(l, obj, r)) ? 0 : 1;
            }
            const auto& [obj, r] = strangers[stranger_at[a]];
            ++queries;
            mismatches += same_verdict(pir_verdict(l, db, backend, obj, r), local_verdict(l, obj, r)) ? 0 : 1;
        }
    }
    auto exhaustive = queries;

    auto big = make_listing(10000, 3, 2, 200, rng);
    big.now = kT0 + 100;
    auto db = pir::build_and_commit(*big.world.enf, big.world.snapshot.records, big.world.snapshot.curators, 8,
                                    big.now);
    std::vector<std::size_t> picks(big.world.objects.size());
    std::iota(picks.begin(), picks.end(), 0);
    std::shuffle(picks.begin(), picks.end(), rng);
    for (std::size_t i = 0; i < 1000; ++i) {
        const auto& obj = big.world.objects[picks[i]];
        auto r = vbt::psi_lookup(*big.world.enf, obj);
        auto local = local_verdict(big, obj, r);
        mismatches += same_verdict(pir_verdict(big, db, backend, obj, r), local) ? 0 : 1;
        mismatches += agrees(local, oracle(big, obj)) ? 0 : 1;
        auto stranger = vbt::random_object();
        auto rs = vbt::psi_lookup(*big.world.enf, stranger);
        mismatches += same_verdict(pir_verdict(big, db, backend, stranger, rs), local_verdict(big, stranger, rs))
                          ? 0
                          : 1;
        queries += 2;
    }
    auto t = sw.seconds();
    return {mismatches == 0 && uncovered == 0,
            fmt("k=1..8 every bucket: %zu queries; 10^4 entries k=8: %zu queries; mismatches %zu, "
                "buckets without a member %zu, %.1f s",
                exhaustive, queries - exhaustive, mismatches, uncovered, t)};
}

// 4
Outcome storage_model() {
    Stopwatch sw;
    bool ok = true;
    std::string sizes;
    auto b = crypto::Scalar::random();
    auto kp = crypto::keygen();
    for (std::size_t j = 1; j <= 8; ++j) {
        auto h = crypto::sha256(vbt::random_object());
        std::vector<std::pair<std::uint16_t, crypto::Signature>> sigs;
        for (std::size_t s = 0; s < j; ++s) {
            sigs.push_back({static_cast<std::uint16_t>(s), crypto::sign(kp.secret_key, curator::signed_payload(0, h))});
        }
        ByteWriter out;
        enforcer::blind_record(h, b, sigs).encode_to(out);
        auto measured = out.bytes().size();
        auto model = bench::model_entry_bytes(j);
        auto diff = static_cast<long>(measured) - static_cast<long>(model);
        ok = ok && diff >= -16 && diff <= 16;
        sizes += fmt(" j=%zu:%zu/%zu", j, measured, model);
    }
    auto w = vbt::make_world({.n_curators = 1, .n_objects = 50000});
    auto bytes = w.snapshot.encode().size();
    client::verify_snapshot(enforcer::DatabaseSnapshot::decode(w.snapshot.encode()), w.enf->public_key(), {}, 0);
    ok = ok && bytes <= 5000000;
    return {ok, fmt("entry bytes measured/model%s; 50K snapshot %zu bytes (%.3f MB), %.1f s", sizes.c_str(), bytes,
                    bytes / 1e6, sw.seconds())};
}

// 5
Outcome bandwidth() {
    auto w = vbt::make_world({.n_curators = 1, .n_objects = 50});
    wire::Handler handler(*w.enf, pir::make_backend("reference", 10240));
    auto snap = std::make_shared<enforcer::DatabaseSnapshot>(w.snapshot);
    handler.publish({snap, {}, nullptr, {snap->checkpoint}});
    wire::Server server(handler, {.workers = 2});
    auto port = server.start();
    auto conn = wire::Connection::open("127.0.0.1", port);
    auto db = client::verify_snapshot(conn.snapshot(), w.enf->public_key(), {}, 0);

    std::size_t trials = 0, exact = 0, correct = 0;
    for (std::size_t i = 0; i < 100; ++i) {
        Bytes obj = i % 2 ? w.objects[i / 2] : vbt::random_object();
        auto [req, state] = client::begin_query(obj);
        wire::WireMessage m{wire::Kind::PsiReq, Bytes(req.bytes().begin(), req.bytes().end())};
        conn.send(m);
        auto reply = conn.receive();
        ++trials;
        exact += m.body.size() == 32 && m.encode().size() == 6 + 32 && reply.kind == wire::Kind::PsiResp &&
                         reply.body.size() == 32
                     ? 1
                     : 0;
        auto r = client::complete_query(state, reply.body);
        auto v = client::evaluate(obj, r.unblinded, db, w.keyrings, {1, kSkew}, kT0);
        correct += v.harmful() == (i % 2 == 1) ? 1 : 0;
    }
    server.stop();
    return {exact == trials && correct == trials,
            fmt("%zu/%zu exchanges with 32-byte request and response bodies, %zu/%zu correct verdicts", exact, trials,
                correct, trials)};
}

// 6
Outcome bucket_capacity() {
    auto entry = bench::model_entry_bytes(1);
    auto per_slot = pir::entries_per_plaintext(10240, entry);
    auto encoded = pir::entries_per_plaintext(10240, bench::record_entry_bytes(1));
    return {entry == 98 && per_slot == 104,
            fmt("10240 / %zu = %zu entries per slot (%zu at the %zu-byte encoded record)", entry, per_slot, encoded,
                bench::record_entry_bytes(1))};
}

// 7
Outcome transparency_suite() {
    std::size_t cases = 0, detected = 0;
    std::vector<std::string> misses;
    auto tally = [&](bool ok, const std::string& name) {
        ++cases;
        detected += ok ? 1 : 0;
        if (!ok) misses.push_back(name);
    };
    constexpr UnixSeconds kInterval = 3600;
    audit::AuditPolicy policy{.min_update_interval = kInterval};

    // (a) honest 20-epoch run, cosigned by a witness.
    auto w = vbt::make_world({.n_curators = 1, .n_objects = 5});
    log::Witness witness("w1", crypto::keygen(), w.enf->public_key());
    log::WitnessKeys wk{{"w1", witness.public_key()}};
    std::vector<log::Checkpoint> cps;
    bool cosigned = true;
    for (int e = 0; e < 20; ++e) {
        if (e > 0) {
            auto now = kT0 + e * kInterval;
            w.curators[0].add_object(vbt::random_object(), now);
            w.rebuild(now);
        }
        const auto& cp = w.snapshot.checkpoint;
        auto prev = cps.empty() ? cp.size : cps.back().size;
        try {
            cps.push_back(witness.attest(cp, w.enf->prove_consistency(prev, cp.size)));
        } catch (const log::WitnessRefusal&) {
            cosigned = false;
            cps.push_back(cp);
        }
    }
    std::size_t pairs = 0, pairs_ok = 0;
    for (std::size_t i = 0; i < cps.size(); ++i) {
        for (std::size_t j = i; j < cps.size(); ++j) {
            ++pairs;
            pairs_ok += log::verify_consistency(cps[i], cps[j], w.enf->prove_consistency(cps[i].size, cps[j].size));
        }
    }
    audit::EnforcerOracle oracle(*w.enf);
    auto honest_end = cps.back().timestamp + 1;
    bool honest_clean = audit::audit_checkpoints(cps, oracle, w.enf->public_key(), wk, policy, honest_end).clean();
    bool honest_ok = pairs == pairs_ok && cosigned && honest_clean;

    // (b) split view forked after each honest epoch.
    for (std::size_t f = 1; f + 1 < cps.size(); ++f) {
        auto leaves = w.enf->log().tree().leaf_hashes();
        leaves.resize(cps[f].size - 1);
        log::TransparencyLog evil(log::MerkleTree::from_leaf_hashes(leaves));
        const auto& sk = w.enf->keypair().secret_key;
        auto ts = cps[f].timestamp;
        auto [e1, _p1] = evil.append_leaf(crypto::sha256(vbt::random_object()), ts, sk);
        auto [e2, _p2] = evil.append_leaf(crypto::sha256(vbt::random_object()), ts + kInterval, sk);
        log::Witness wf("wf", crypto::keygen(), w.enf->public_key());
        for (std::size_t e = 0; e <= f; ++e) {
            wf.attest(cps[e], w.enf->prove_consistency(e ? cps[e - 1].size : cps[e].size, cps[e].size));
        }
        bool refused = false, portable = false;
        try {
            wf.attest(e2, evil.tree().prove_consistency(cps[f].size, e2.size));
        } catch (const log::WitnessRefusal& r) {
            const auto& ev = r.evidence();
            refused = true;
            portable = log::verify_checkpoint_signatures(ev.earlier, w.enf->public_key(), {}) &&
                       log::verify_checkpoint_signatures(ev.later, w.enf->public_key(), {}) &&
                       !log::verify_consistency(ev.earlier, ev.later, ev.proof);
        }
        // The auditor sees the honest prefix and then the forked view.
        std::vector<log::Checkpoint> seen(cps.begin(), cps.begin() + static_cast<long>(f) + 1);
        seen.push_back(e1);
        seen.push_back(e2);
        auto report = audit::audit_checkpoints(seen, oracle, w.enf->public_key(), {}, policy, e2.timestamp + 1);
        bool rechecks = report.count(audit::ViolationKind::Inconsistency) > 0;
        for (const auto& v : report.violations) {
            if (v.kind == audit::ViolationKind::Inconsistency) {
                rechecks = rechecks && audit::recheck_violation(v, w.enf->public_key(), {}, policy);
            }
        }
        tally(refused && portable && rechecks, fmt("fork@%zu", f));
    }

    // (c) more than one update per interval, with alternating contents.
    for (UnixSeconds gap : {1, 60, 600, 1800, 3599}) {
        auto ow = vbt::make_world({.n_curators = 1, .n_objects = 4});
        std::vector<log::Checkpoint> seen{ow.snapshot.checkpoint};
        for (int e = 1; e <= 3; ++e) {
            auto ex = ow.exports();
            if (e % 2) ex[0].records.pop_back();
            seen.push_back(ow.enf->build_database(ex, ow.keyrings, kT0 + e * gap).checkpoint);
        }
        audit::EnforcerOracle o(*ow.enf);
        auto report = audit::audit_checkpoints(seen, o, ow.enf->public_key(), {}, policy, seen.back().timestamp + 1);
        bool ok = report.count(audit::ViolationKind::Oscillation) > 0;
        for (const auto& v : report.violations) ok = ok && audit::recheck_violation(v, ow.enf->public_key(), {}, policy);
        tally(ok, fmt("oscillation gap %lld", static_cast<long long>(gap)));
    }
    // Spacing at or above the interval is not oscillation.
    bool no_false_alarm = true;
    for (UnixSeconds gap : {kInterval, 2 * kInterval}) {
        auto ow = vbt::make_world({.n_curators = 1, .n_objects = 4});
        std::vector<log::Checkpoint> seen{ow.snapshot.checkpoint};
        for (int e = 1; e <= 3; ++e) {
            auto ex = ow.exports();
            if (e % 2) ex[0].records.pop_back();
            seen.push_back(ow.enf->build_database(ex, ow.keyrings, kT0 + e * gap).checkpoint);
        }
        audit::EnforcerOracle o(*ow.enf);
        no_false_alarm = no_false_alarm && audit::audit_checkpoints(seen, o, ow.enf->public_key(), {}, policy,
                                                                    seen.back().timestamp + 1)
                                               .clean();
    }

    // (d) tampered snapshots.
    using client::RejectReason;
    auto tw = vbt::make_world({.n_curators = 2, .n_objects = 8});
    // A second epoch so the inclusion proof has a sibling to alter.
    tw.rebuild(kT0 + kInterval);
    const auto pk = tw.enf->public_key();
    auto wit = crypto::keygen();
    log::WitnessKeys twk{{"w", wit.public_key}};
    auto good = tw.snapshot;
    good.checkpoint.witness_sigs.push_back({"w", crypto::sign(wit.secret_key, good.checkpoint.canonical_body())});
    bool good_ok = true;
    try {
        client::verify_snapshot(good, pk, twk, 1);
    } catch (const client::SnapshotRejected&) {
        good_ok = false;
    }
    struct Tamper {
        std::string name;
        std::function<void(enforcer::DatabaseSnapshot&)> apply;
        RejectReason expect;
        crypto::PublicKey key;
    };
    std::vector<Tamper> tampers{
        {"ciphertext", [](auto& s) { s.records[2].enc_sigs[0].ciphertext = crypto::SigCiphertext{}; },
         RejectReason::DbHashMismatch, pk},
        {"record order", [](auto& s) { std::swap(s.records[0], s.records[1]); }, RejectReason::DbHashMismatch, pk},
        {"record dropped", [](auto& s) { s.records.pop_back(); }, RejectReason::DbHashMismatch, pk},
        {"record added",
         [&](auto& s) {
             s.records.push_back(enforcer::blind_record(crypto::sha256(vbt::random_object()), tw.enf->blind_b(), {}));
         },
         RejectReason::DbHashMismatch, pk},
        {"blinded id", [](auto& s) { s.records[3].blinded_id = crypto::sha256(as_bytes("x")); },
         RejectReason::DbHashMismatch, pk},
        {"epoch", [](auto& s) { s.epoch += 1; }, RejectReason::DbHashMismatch, pk},
        {"curator table", [](auto& s) { std::swap(s.curators[0], s.curators[1]); }, RejectReason::DbHashMismatch, pk},
        {"claimed db_hash", [](auto& s) { s.db_hash = crypto::sha256(as_bytes("y")); }, RejectReason::DbHashMismatch,
         pk},
        {"checkpoint timestamp", [](auto& s) { s.checkpoint.timestamp += 1; }, RejectReason::EnforcerSignature, pk},
        {"checkpoint root", [](auto& s) { s.checkpoint.root = crypto::sha256(as_bytes("z")); },
         RejectReason::EnforcerSignature, pk},
        {"witness signature", [](auto& s) { s.checkpoint.witness_sigs.clear(); }, RejectReason::WitnessQuorum, pk},
        {"inclusion path", [](auto& s) { s.inclusion.path.push_back(crypto::sha256(as_bytes("p"))); },
         RejectReason::Inclusion, pk},
        {"inclusion sibling", [](auto& s) { s.inclusion.path.at(0) = crypto::sha256(as_bytes("q")); },
         RejectReason::Inclusion, pk},
        {"enforcer key", [](auto&) {}, RejectReason::WrongEnforcer, crypto::keygen().public_key},
    };
    for (const auto& t : tampers) {
        auto s = enforcer::DatabaseSnapshot::decode(good.encode());
        t.apply(s);
        bool ok = false;
        try {
            client::verify_snapshot(s, t.key, twk, 1);
        } catch (const client::SnapshotRejected& e) {
            ok = e.reason() == t.expect;
        }
        tally(ok, "tamper " + t.name);
    }

    std::string missed;
    for (const auto& m : misses) missed += " " + m;
    return {honest_ok && no_false_alarm && good_ok && detected == cases,
            fmt("honest: %zu/%zu epoch pairs consistent, cosigned %s, audit clean %s; adversarial matrix %zu/%zu "
                "detected%s%s; no false oscillation %s",
                pairs_ok, pairs, cosigned ? "yes" : "no", honest_clean ? "yes" : "no", detected, cases,
                missed.empty() ? "" : ", missed:", missed.c_str(), no_false_alarm ? "yes" : "no")};
}

// 8
Outcome privileged_audit_runs() {
    Stopwatch sw;
    std::mt19937_64 rng(8);
    int clean = 0, flagged = 0;
    constexpr int kRuns = 50;
    for (int run = 0; run < kRuns; ++run) {
        std::size_t curators = 1 + rng() % 3;
        unsigned policy_m = 1 + static_cast<unsigned>(rng() % curators);
        auto w = vbt::make_world({.n_curators = curators, .n_objects = 1000, .policy_m = policy_m});
        const auto pk = w.enf->public_key();
        const auto& b = w.enf->blind_b();
        auto now = kT0 + 10;
        auto honest = audit::privileged_audit(w.snapshot, w.objects, b, w.keyrings, policy_m, pk, now);
        clean += honest.clean() && w.snapshot.records.size() == 1000 ? 1 : 0;

        auto rogue_obj = vbt::random_object();
        auto rogue = enforcer::blind_record(crypto::object_hash(rogue_obj), b, {});
        auto records = w.snapshot.records;
        records.insert(std::upper_bound(records.begin(), records.end(), rogue,
                                        [](const auto& x, const auto& y) { return x.blinded_id < y.blinded_id; }),
                       rogue);
        auto snap = w.enf->commit_records(w.snapshot.curators, records, now);
        auto objects = w.objects;
        objects.push_back(rogue_obj);
        auto report = audit::privileged_audit(snap, objects, b, w.keyrings, policy_m, pk, now);
        audit::PrivilegedContext ctx{b, objects, w.keyrings, policy_m, now};
        bool ok = report.violations.size() == 1 &&
                  report.violations[0].kind == audit::ViolationKind::ContentMismatch &&
                  report.violations[0].detail.rfind(to_hex(rogue.blinded_id), 0) == 0 &&
                  audit::recheck_violation(report.violations[0], pk, {}, {}, &ctx);
        flagged += ok ? 1 : 0;
    }
    return {clean == kRuns && flagged == kRuns,
            fmt("%d/%d honest builds clean, %d/%d injected unsigned records flagged, %.1f s", clean, kRuns, flagged,
                kRuns, sw.seconds())};
}

// 9
Outcome revocation() {
    constexpr UnixSeconds kWindow = 86400;
    std::vector<std::string> notes;
    bool all = true;
    for (auto mode : {curator::RevocationMode::KeyRotation, curator::RevocationMode::Timestamped}) {
        auto w = vbt::make_world({.n_curators = 1, .n_objects = 2, .mode = mode, .window = kWindow});
        wire::Handler handler(*w.enf, pir::make_backend("reference", 10240));
        auto publish = [&] {
            auto snap = std::make_shared<enforcer::DatabaseSnapshot>(w.snapshot);
            handler.publish({snap, {}, nullptr, {snap->checkpoint}});
        };
        publish();
        wire::Server server(handler, {.workers = 2});
        auto conn = wire::Connection::open("127.0.0.1", server.start());
        auto check = [&](std::size_t i, UnixSeconds now) {
            auto db = client::verify_snapshot(conn.snapshot(), w.enf->public_key(), {}, 0);
            auto [req, state] = client::begin_query(w.objects[i]);
            auto r = client::complete_query(state, conn.psi(req));
            return client::evaluate(w.objects[i], r.unblinded, db, w.keyrings, {1, kSkew}, now).harmful();
        };

        // Nothing renewed: both lapse once the window has passed.
        bool fresh = check(0, kT0 + 10) && check(1, kT0 + 10);
        bool lapsed = !check(0, kT0 + kWindow + kSkew + 1) && !check(1, kT0 + kWindow + kSkew + 1);

        // Object 1 revoked, the rest renewed halfway through.
        auto mid = kT0 + kWindow / 2;
        w.curators[0].revoke(w.curators[0].entries()[1].idx);
        if (mode == curator::RevocationMode::KeyRotation) {
            w.curators[0].rotate_key(mid);
        } else {
            w.curators[0].renew(mid);
        }
        w.rebuild(mid);
        publish();
        auto after = mid + kSkew + 1;
        bool renewed = check(0, after) && !check(1, after);
        bool renewal_lapses = !check(0, mid + kWindow + kSkew + 1);
        server.stop();

        bool ok = fresh && lapsed && renewed && renewal_lapses;
        all = all && ok;
        notes.push_back(fmt("%s: listed %s, lapse after window %s, revoked entry drops while renewed stays %s, "
                            "renewal lapses %s",
                            std::string(curator::to_string(mode)).c_str(), fresh ? "harmful" : "BENIGN",
                            lapsed ? "benign" : "STILL HARMFUL", renewed ? "yes" : "NO",
                            renewal_lapses ? "yes" : "NO"));
    }
    return {all, notes[0] + "; " + notes[1]};
}

// 10
Outcome bench_properties() {
    Stopwatch sw;
    bench::BenchOptions opts;
    std::ofstream csv("acceptance_bench.csv");
    csv << bench::kCsvHeader << '\n';
    auto s = bench::run_suite(opts, [&](const bench::BenchRecord& r) { csv << bench::to_csv_row(r) << '\n'; });
    auto t = sw.seconds();
    double blind = 0, unblind = 0;
    for (const auto& r : s.records) {
        if (r.operation == "client_blind_hash") blind = r.mean_us;
        if (r.operation == "client_unblind") unblind = r.mean_us;
    }
    bool ratio_ok = s.psi_ratio <= 1.5 && s.psi_ratio >= 1 / 1.5;
    return {blind > 0 && blind < 1000 && unblind > 0 && unblind < 1000 && ratio_ok && s.pir_fit.r2 >= 0.95 && t < 900,
            fmt("blind %.1f us, unblind %.1f us, server PSI 10^6/10^3 ratio %.3f, PIR fit R^2 %.4f "
                "(%.4f us/element), suite %.0f s, csv acceptance_bench.csv",
                blind, unblind, s.psi_ratio, s.pir_fit.r2, s.pir_fit.slope, t)};
}

}  // namespace

int main(int argc, char** argv) {
    struct Criterion {
        int id;
        const char* name;
        Outcome (*run)();
    };
    const std::vector<Criterion> criteria{
        {1, "psi correctness identity", psi_identity},
        {2, "end-to-end oracle equivalence", oracle_equivalence},
        {3, "bucketed and direct paths agree", path_equivalence},
        {4, "storage model", storage_model},
        {5, "psi bandwidth", bandwidth},
        {6, "bucket capacity", bucket_capacity},
        {7, "transparency", transparency_suite},
        {8, "privileged audit", privileged_audit_runs},
        {9, "revocation", revocation},
        {10, "performance properties", bench_properties},
    };
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

    int failed = 0;
    for (const auto& c : criteria) {
        if (!only.empty() && !only.count(c.id)) continue;
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += o.pass ? 0 : 1;
        std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
