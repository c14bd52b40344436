#include <doctest.h>

#include "fixtures.hpp"
#include "veilblock/pir.hpp"

using namespace veilblock;
using namespace veilblock::pir;
using vbt::kT0;

namespace {

client::Verdict pir_check(vbt::World& w, const BucketedDB& db, ByteView obj, const FheBackend& backend,
                          UnixSeconds now) {
    auto r = vbt::psi_lookup(*w.enf, obj);
    auto [q, sk] = client_pir_query(r.lookup_key, db.prefix_bits, backend);
    auto a = PirAnswer::decode(server_pir_answer(q, db, backend).encode());
    PirVerifyContext ctx{w.keyrings, w.enf->public_key(), {}, 0, {}};
    return client_pir_decode(a, sk, backend, r, obj, ctx, now);
}

}  // namespace

TEST_SUITE("pir") {

TEST_CASE("capacity arithmetic") {
    CHECK(entries_per_plaintext(10240, 98) == 104);
    CHECK(entries_per_plaintext(20480, 98) == 208);
    static_assert(entries_per_plaintext(10240, 98) == 104);
}

TEST_CASE("prefix_of takes leading bits big-endian") {
    auto id = crypto::Digest::from(from_hex("a5c3000000000000000000000000000000000000000000000000000000000000"));
    CHECK(prefix_of(id, 1) == 1);
    CHECK(prefix_of(id, 4) == 0xa);
    CHECK(prefix_of(id, 8) == 0xa5);
    CHECK(prefix_of(id, 12) == 0xa5c);
    CHECK_THROWS(prefix_of(id, 0));
    CHECK_THROWS(prefix_of(id, 25));
}

TEST_CASE("reference backend arithmetic") {
    NonPrivateReferenceBackend be(16);
    auto sk = be.keygen();
    auto one = be.enc(sk, 1);
    auto zero = be.enc(sk, 0);
    Bytes pt{1, 2, 3, 250};
    CHECK(be.dec(sk, be.absorb(one, pt)) == pt);
    CHECK(be.dec(sk, be.absorb(zero, pt)) == Bytes(4, 0));
    CHECK(be.dec(sk, be.add(be.absorb(one, pt), be.absorb(zero, Bytes{9, 9, 9, 9}))) == pt);
    CHECK(be.dec(sk, be.multiply(be.enc(sk, 3), be.enc(sk, 5))) == Bytes{15});
    std::vector<Ciphertext> cts{zero, one};
    Bytes other{7, 7};
    std::vector<ByteView> pts{other, pt};
    CHECK(be.dec(sk, be.absorb_sum(cts, pts)) == pt);
    CHECK_THROWS(be.dec(be.keygen(), one));
    CHECK_THROWS(be.absorb(one, Bytes(17, 0)));
    CHECK_THROWS_AS(be.check_ciphertext(Bytes(3, 0)), enforcer::ProtocolError);
    CHECK_THROWS(make_backend("seal", 10240));
}

TEST_CASE("buckets pad to the largest occupancy") {
    auto w = vbt::make_world({.n_curators = 2, .n_objects = 40});
    auto db = build_buckets(w.snapshot.records, w.snapshot.curators, 3);
    CHECK(db.bucket_count() == 8);
    CHECK(db.slot_bytes() == 32 + 128);
    std::size_t max_occ = 0;
    std::vector<std::size_t> occ(8);
    for (const auto& r : w.snapshot.records) max_occ = std::max(max_occ, ++occ[prefix_of(r.blinded_id, 3)]);
    CHECK(db.bucket_slots == max_occ);
    for (std::size_t b = 0; b < 8; ++b) {
        CHECK(db.buckets[b].size() == db.bucket_bytes());
        CHECK(db.coms[b] == bucket_commitment(db.buckets[b]));
    }
    CHECK(db.db_hash == commitments_hash(db.coms));
}

TEST_CASE("empty database and budget limits") {
    auto db = build_buckets({}, {"c"}, 4);
    CHECK(db.bucket_slots == 1);
    for (const auto& b : db.buckets) CHECK(b == Bytes(db.bucket_bytes(), 0));
    CHECK_THROWS(build_buckets({}, {"c"}, 20, {.max_commitment_bytes = 1024}));
    CHECK_THROWS(build_buckets({}, {"c"}, 0));
}

TEST_CASE("bucketed lookup matches the local verdict") {
    auto w = vbt::make_world({.n_curators = 2,
                              .n_objects = 30,
                              .signers = [](std::size_t i) {
                                  return i % 3 == 0 ? std::set<std::size_t>{1} : std::set<std::size_t>{0, 1};
                              }});
    NonPrivateReferenceBackend backend(512);
    auto db = build_and_commit(*w.enf, w.snapshot.records, w.snapshot.curators, 4, kT0 + 1);
    auto local = client::verify_snapshot(w.snapshot, w.enf->public_key(), {}, 0);
    for (const auto& obj : w.objects) {
        auto v = pir_check(w, db, obj, backend, kT0 + 1);
        auto t = vbt::check_local(w, local, obj, kT0 + 1);
        CHECK(v.harmful());
        CHECK(v.attesting_curators == t.attesting_curators);
    }
    for (int i = 0; i < 20; ++i) CHECK_FALSE(pir_check(w, db, vbt::random_object(), backend, kT0 + 1).harmful());
}

TEST_CASE("tampered answers are benign") {
    auto w = vbt::make_world({.n_curators = 1, .n_objects = 10});
    NonPrivateReferenceBackend backend;
    auto db = build_and_commit(*w.enf, w.snapshot.records, w.snapshot.curators, 2, kT0 + 1);
    const auto& obj = w.objects[0];
    auto r = vbt::psi_lookup(*w.enf, obj);
    auto [q, sk] = client_pir_query(r.lookup_key, 2, backend);
    auto good = server_pir_answer(q, db, backend);
    PirVerifyContext ctx{w.keyrings, w.enf->public_key(), {}, 0, {}};
    REQUIRE(client_pir_decode(good, sk, backend, r, obj, ctx, kT0 + 1).harmful());

    SUBCASE("commitment swapped") {
        auto a = good;
        auto alpha = prefix_of(r.lookup_key, 2);
        a.coms[alpha] = a.coms[(alpha + 1) % 4];
        CHECK(client_pir_decode(a, sk, backend, r, obj, ctx, kT0 + 1).diagnostic == "bucket commitment mismatch");
    }
    SUBCASE("bucket contents changed with matching commitment") {
        auto db2 = db;
        auto alpha = prefix_of(r.lookup_key, 2);
        db2.buckets[alpha][40] ^= 1;
        db2.coms[alpha] = bucket_commitment(db2.buckets[alpha]);
        auto a = server_pir_answer(q, db2, backend);
        CHECK(client_pir_decode(a, sk, backend, r, obj, ctx, kT0 + 1).diagnostic == "inclusion proof");
    }
    SUBCASE("wrong enforcer key") {
        auto other = crypto::keygen().public_key;
        PirVerifyContext bad{w.keyrings, other, {}, 0, {}};
        CHECK_FALSE(client_pir_decode(good, sk, backend, r, obj, bad, kT0 + 1).harmful());
    }
    SUBCASE("truncated payload") {
        auto a = good;
        a.bucket_slots += 1;
        CHECK_FALSE(client_pir_decode(a, sk, backend, r, obj, ctx, kT0 + 1).harmful());
    }
    SUBCASE("malformed queries raise protocol errors") {
        auto q2 = q;
        q2.selectors.pop_back();
        CHECK_THROWS_AS(server_pir_answer(q2, db, backend), enforcer::ProtocolError);
        auto q3 = q;
        q3.prefix_bits = 3;
        CHECK_THROWS_AS(server_pir_answer(q3, db, backend), enforcer::ProtocolError);
        auto q4 = q;
        q4.selectors[0] = Bytes(5, 0);
        CHECK_THROWS_AS(server_pir_answer(q4, db, backend), enforcer::ProtocolError);
    }
}

TEST_CASE("query and answer encodings round-trip") {
    NonPrivateReferenceBackend backend;
    auto [q, sk] = client_pir_query(crypto::sha256(as_bytes("k")), 3, backend);
    auto back = PirQuery::decode(q.encode());
    CHECK(back.prefix_bits == 3);
    CHECK(back.selectors == q.selectors);
    auto truncated = q.encode();
    truncated.pop_back();
    CHECK_THROWS(PirQuery::decode(truncated));
}

TEST_CASE("bucket spanning several plaintext slots") {
    auto w = vbt::make_world({.n_curators = 3, .n_objects = 25});
    NonPrivateReferenceBackend backend(100);
    auto db = build_and_commit(*w.enf, w.snapshot.records, w.snapshot.curators, 1, kT0 + 1);
    REQUIRE(db.bucket_bytes() > 100);
    for (const auto& obj : w.objects) CHECK(pir_check(w, db, obj, backend, kT0 + 1).harmful());
}

}  // TEST_SUITE
