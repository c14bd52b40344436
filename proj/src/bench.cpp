#include "veilblock/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <optional>
#include <sstream>

#include "veilblock/client.hpp"
#include "veilblock/wire.hpp"

namespace veilblock::bench {
namespace {

using Clock = std::chrono::steady_clock;

double percentile(std::vector<double> sorted, double q) {
    if (sorted.empty()) return 0;
    auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(sorted.size())));
    return sorted[std::clamp<std::size_t>(rank, 1, sorted.size()) - 1];
}

}  // namespace

std::string to_csv_row(const BenchRecord& r) {
    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(3);
    out << r.operation << ',' << r.device << ',' << r.iterations << ',' << r.mean_us << ',' << r.p50_us << ','
        << r.p95_us << ',' << r.payload_bytes;
    return out.str();
}

BenchRecord measure(std::string operation, std::string device, std::size_t iterations, std::size_t payload_bytes,
                    const std::function<void()>& fn, const std::function<void()>& setup) {
    iterations = std::max(iterations, kMinIterations);
    std::vector<double> samples;
    samples.reserve(iterations);
    for (std::size_t i = 0; i < iterations; ++i) {
        if (setup) setup();
        auto t0 = Clock::now();
        fn();
        auto t1 = Clock::now();
        samples.push_back(std::chrono::duration<double, std::micro>(t1 - t0).count());
    }
    BenchRecord r{std::move(operation), std::move(device), iterations, 0, 0, 0, payload_bytes};
    r.mean_us = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(samples.size());
    std::sort(samples.begin(), samples.end());
    r.p50_us = percentile(samples, 0.50);
    r.p95_us = percentile(samples, 0.95);
    return r;
}

LinearFit linear_fit(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size() || xs.size() < 2) throw Error("linear fit needs at least two points");
    const double n = static_cast<double>(xs.size());
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    if (sxx == 0) throw Error("linear fit needs distinct x values");
    LinearFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r2 = syy == 0 ? 1.0 : (sxy * sxy) / (sxx * syy);
    return f;
}

std::vector<std::string> synthetic_curators(std::size_t curators) {
    std::vector<std::string> out;
    for (std::size_t j = 0; j < curators; ++j) out.push_back("curator-" + std::to_string(j));
    return out;
}

std::vector<enforcer::BlindedRecord> synthetic_records(std::size_t n, std::size_t curators) {
    std::vector<enforcer::BlindedRecord> out(n);
    Bytes buf(32 + 64 * curators);
    for (auto& r : out) {
        crypto::random_bytes(buf);
        r.blinded_id = crypto::Digest::from(ByteView(buf).first(32));
        for (std::size_t j = 0; j < curators; ++j) {
            r.enc_sigs.push_back({static_cast<std::uint16_t>(j),
                                  crypto::SigCiphertext::from(ByteView(buf).subspan(32 + 64 * j, 64))});
        }
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.blinded_id < b.blinded_id; });
    out.erase(std::unique(out.begin(), out.end(),
                          [](const auto& a, const auto& b) { return a.blinded_id == b.blinded_id; }),
              out.end());
    return out;
}

pir::BucketedDB synthetic_buckets(std::size_t elements, unsigned k, std::size_t curators) {
    pir::BucketedDB db;
    db.prefix_bits = k;
    db.curators = synthetic_curators(curators);
    const std::size_t count = std::size_t{1} << k;
    db.bucket_slots = std::max<std::size_t>(1, (elements + count - 1) / count);
    db.buckets.resize(count);
    db.coms.resize(count);
    for (std::size_t l = 0; l < count; ++l) {
        db.buckets[l].resize(db.bucket_bytes());
        crypto::random_bytes(db.buckets[l]);
        db.coms[l] = pir::bucket_commitment(db.buckets[l]);
    }
    db.db_hash = pir::commitments_hash(db.coms);
    return db;
}

std::vector<PirRow> pir_scaling_rows() {
    return {{6, 6826},     {7, 13653},    {8, 27306},    {9, 54613},     {10, 109226},
            {11, 218453},  {12, 436906},  {13, 873813},  {14, 1747626},  {15, 3495253}};
}

BenchSummary run_suite(const BenchOptions& options, const std::function<void(const BenchRecord&)>& sink) {
    BenchSummary summary;
    auto emit = [&](BenchRecord r) {
        if (sink) sink(r);
        summary.records.push_back(std::move(r));
        return summary.records.back();
    };
    const auto& dev = options.device;
    const auto iters = options.iterations;

    // (a), (b): client blinding and unblinding.
    Bytes object(1024);
    crypto::random_bytes(object);
    emit(measure("client_blind_hash", dev, iters, wire::kPsiBodyBytes, [&] {
        auto q = client::begin_query(object);
        (void)q;
    }));
    {
        auto b = crypto::Scalar::random();
        std::optional<client::QueryState> state;
        crypto::GroupElement resp = crypto::GroupElement::generator();
        emit(measure(
            "client_unblind", dev, iters, wire::kPsiBodyBytes,
            [&] { (void)client::complete_query(*state, resp); },
            [&] {
                auto [req, st] = client::begin_query(object);
                resp = crypto::blind(req, b);
                state.emplace(std::move(st));
            }));
    }

    // (c): server PSI over the wire handler, with databases of two sizes.
    {
        std::vector<double> means;
        for (auto n : {options.psi_small, options.psi_large}) {
            auto enf = enforcer::Enforcer::create({});
            auto snap = std::make_shared<enforcer::DatabaseSnapshot>(
                enf.commit_records(synthetic_curators(1), synthetic_records(n, 1), 1'700'000'000));
            wire::Handler handler(enf, pir::make_backend("reference", options.plaintext_slot_bytes));
            handler.publish({snap, {}, nullptr, {snap->checkpoint}});
            wire::Header h{wire::kVersion, static_cast<std::uint8_t>(wire::Kind::PsiReq), 32};
            Bytes body;
            auto r = measure(
                "server_psi_db" + std::to_string(n), dev, iters, wire::kPsiBodyBytes,
                [&] {
                    auto reply = handler.handle(h, body, "bench");
                    if (reply.kind != wire::Kind::PsiResp) throw Error("bench: psi failed");
                },
                [&] {
                    auto e = crypto::hash_to_group(crypto::object_hash(object));
                    auto req = crypto::blind(e, crypto::Scalar::random());
                    body.assign(req.bytes().begin(), req.bytes().end());
                });
            means.push_back(emit(std::move(r)).mean_us);
        }
        summary.psi_ratio = means[1] / means[0];
    }

    // (d): reference-backend PIR answers across the scaling rows.
    {
        pir::NonPrivateReferenceBackend backend(options.plaintext_slot_bytes);
        std::vector<double> xs, ys;
        for (const auto& row : options.pir_rows) {
            auto db = synthetic_buckets(row.elements, row.prefix_bits);
            auto lookup = crypto::Digest::from(ByteView(db.buckets[0]).first(32));
            auto [query, sk] = pir::client_pir_query(lookup, row.prefix_bits, backend);
            std::size_t answer_bytes = pir::server_pir_answer(query, db, backend).encode().size();
            auto r = measure("pir_answer_S" + std::to_string(row.prefix_bits) + "_n" + std::to_string(row.elements),
                             dev, iters, answer_bytes, [&] { (void)pir::server_pir_answer(query, db, backend); });
            xs.push_back(static_cast<double>(row.elements));
            ys.push_back(emit(std::move(r)).mean_us);
        }
        if (xs.size() >= 2) summary.pir_fit = linear_fit(xs, ys);
    }

    // (e): full snapshot verification on the client.
    for (auto n : options.verify_sizes) {
        auto enf = enforcer::Enforcer::create({});
        auto snap = enf.commit_records(synthetic_curators(1), synthetic_records(n, 1), 1'700'000'000);
        auto bytes = snap.encode().size();
        emit(measure("snapshot_verify_" + std::to_string(n), dev, iters, bytes, [&] {
            (void)client::verify_snapshot(snap, enf.public_key(), {}, 0);
        }));
    }
    return summary;
}

}  // namespace veilblock::bench
