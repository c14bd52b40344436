#include <atomic>
#include <chrono>
#include <csignal>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "veilblock/auditor.hpp"
#include "veilblock/bench.hpp"
#include "veilblock/client.hpp"
#include "veilblock/config.hpp"
#include "veilblock/curator.hpp"
#include "veilblock/enforcer.hpp"
#include "veilblock/pir.hpp"
#include "veilblock/wire.hpp"

namespace fs = std::filesystem;
using namespace veilblock;

namespace {

enum Exit { kClean = 0, kFlagged = 1, kUsage = 2, kProtocol = 3 };

class UsageError : public Error {
public:
    using Error::Error;
};

std::atomic<bool> g_stop{false};

struct Common {
    std::string config_path = config::config_path_from_env();
    std::int64_t now = -1;

    // Loaded on first use so that --config is parsed before any subcommand
    // callback reads it.
    const config::Config& cfg() const {
        if (!loaded_) {
            if (!config_path.empty()) cfg_ = config::load_config(config_path);
            loaded_ = true;
        }
        return cfg_;
    }

    UnixSeconds clock() const {
        return now >= 0 ? static_cast<UnixSeconds>(now) : static_cast<UnixSeconds>(std::time(nullptr));
    }

private:
    mutable config::Config cfg_;
    mutable bool loaded_ = false;
};

std::string read_text(const std::string& path) {
    auto b = read_file(path);
    return {b.begin(), b.end()};
}

std::string trim(std::string s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
    std::size_t i = 0;
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    return s.substr(i);
}

crypto::PublicKey load_public_key(const std::string& path) {
    if (path.empty()) throw UsageError("an enforcer public key file is required (--enforcer-key)");
    return crypto::PublicKey::from(from_hex(trim(read_text(path))));
}

curator::Keyrings load_keyrings(const std::vector<std::string>& paths) {
    curator::Keyrings rings;
    for (const auto& p : paths) {
        auto ring = curator::CuratorKeyring::from_json(read_text(p));
        rings[ring.curator_id] = std::move(ring);
    }
    return rings;
}

log::WitnessKeys witness_keys(const config::Config& cfg) {
    log::WitnessKeys keys;
    for (const auto& [id, hex] : cfg.witnesses) keys[id] = crypto::PublicKey::from(from_hex(hex));
    return keys;
}

std::vector<curator::CuratorExport> load_sets(const std::vector<std::string>& paths) {
    std::vector<curator::CuratorExport> sets;
    for (const auto& p : paths) sets.push_back(curator::CuratorExport::decode(read_file(p)));
    return sets;
}

void print_verdict(const client::Verdict& v) {
    std::cout << "verdict " << (v.harmful() ? "harmful" : "benign") << '\n';
    std::cout << "epoch " << v.epoch << '\n';
    for (const auto& c : v.attesting_curators) std::cout << "curator " << c << '\n';
    std::cout << "diagnostic " << v.diagnostic << '\n';
}

// A build commits the snapshot and its bucketed form at the same instant.
// Only the final checkpoint goes to checkpoints.log, so one build reads as one
// update to an auditor. buckets.vbc holds what serve needs to rebuild the
// buckets without touching the log: k || checkpoint || inclusion proof.
void write_build_outputs(const std::string& dir, const enforcer::DatabaseSnapshot& snap, enforcer::Enforcer& enf,
                         unsigned prefix_bits, UnixSeconds now) {
    auto bucketed = pir::build_and_commit(enf, snap.records, snap.curators, prefix_bits, now);
    write_file((fs::path(dir) / "snapshot.vbs").string(), snap.encode());
    ByteWriter w;
    w.u8(static_cast<std::uint8_t>(prefix_bits));
    w.blob(bucketed.checkpoint.encode());
    w.raw(bucketed.inclusion.encode());
    write_file((fs::path(dir) / "buckets.vbc").string(), w.bytes());
    log::FileCheckpointStore((fs::path(dir) / "checkpoints.log").string()).publish(bucketed.checkpoint);
    std::cout << "epoch " << snap.epoch << " records " << snap.records.size() << " tree_size "
              << bucketed.checkpoint.size << " buckets " << bucketed.bucket_count() << '\n';
    for (const auto& d : enf.last_dropped()) {
        std::cout << "dropped " << d.curator_id << ' ' << d.idx << ' ' << d.reason << '\n';
    }
}

pir::BucketedDB load_buckets(const std::string& dir, const enforcer::DatabaseSnapshot& snap,
                             const crypto::PublicKey& enforcer_pk) {
    auto bytes = read_file((fs::path(dir) / "buckets.vbc").string());
    ByteReader r(bytes);
    auto k = r.u8();
    auto cp = log::Checkpoint::decode(r.blob());
    auto inclusion = log::InclusionProof::decode(r);
    r.expect_done();
    auto db = pir::build_buckets(snap.records, snap.curators, k);
    if (!log::verify_inclusion(cp, db.db_hash, inclusion, enforcer_pk, {})) {
        throw Error("buckets.vbc does not commit to the buckets of snapshot.vbs");
    }
    db.checkpoint = cp;
    db.inclusion = inclusion;
    return db;
}

// ---- curator ----

void add_curator(CLI::App& app, Common& common) {
    auto* cur = app.add_subcommand("curator", "Curator signing database");
    cur->require_subcommand(1);

    static std::string dir, id, mode = "none", out, credential;
    static UnixSeconds window = 86400;
    static std::vector<std::string> files, auditors;
    static std::uint64_t idx = 0;

    auto* init = cur->add_subcommand("init", "Create a curator identity");
    init->add_option("dir", dir)->required();
    init->add_option("--id", id)->required();
    init->add_option("--mode", mode, "none | key-rotation | timestamped")->capture_default_str();
    init->add_option("--window", window, "Validity window in seconds")->capture_default_str();
    init->add_option("--auditor", auditors, "Credential allowed to request disclosures");
    init->callback([&common] {
        auto identity = curator::CuratorIdentity::create(id, curator::revocation_mode_from_string(mode), window,
                                                         common.clock());
        curator::CuratorDatabase db(std::move(identity), {auditors.begin(), auditors.end()});
        db.save(dir);
        std::cout << "curator " << id << " public_key " << to_hex(db.keyring().keys.back().public_key) << '\n';
    });

    auto* add = cur->add_subcommand("add", "Sign and add objects");
    add->add_option("dir", dir)->required();
    add->add_option("files", files)->required();
    add->callback([&common] {
        auto db = curator::CuratorDatabase::load(dir);
        for (const auto& f : files) {
            auto e = db.add_object(read_file(f), common.clock());
            std::cout << "idx " << e.idx << ' ' << to_hex(e.obj_hash) << '\n';
        }
        db.save(dir);
    });

    auto* exp = cur->add_subcommand("export", "Write the signed set for the enforcer");
    exp->add_option("dir", dir)->required();
    exp->add_option("out", out)->required();
    exp->callback([] {
        auto db = curator::CuratorDatabase::load(dir);
        write_file(out, db.export_set().encode());
    });

    auto* ring = cur->add_subcommand("keyring", "Write the public keyring");
    ring->add_option("dir", dir)->required();
    ring->add_option("out", out)->required();
    ring->callback([] {
        auto db = curator::CuratorDatabase::load(dir);
        std::ofstream(out) << db.keyring().to_json() << '\n';
    });

    auto* rot = cur->add_subcommand("rotate", "Rotate the signing key and re-sign active entries");
    rot->add_option("dir", dir)->required();
    rot->callback([&common] {
        auto db = curator::CuratorDatabase::load(dir);
        db.rotate_key(common.clock());
        db.save(dir);
    });

    auto* ren = cur->add_subcommand("renew", "Re-sign active entries with a fresh timestamp");
    ren->add_option("dir", dir)->required();
    ren->callback([&common] {
        auto db = curator::CuratorDatabase::load(dir);
        db.renew(common.clock());
        db.save(dir);
    });

    auto* rev = cur->add_subcommand("revoke", "Stop re-signing an entry");
    rev->add_option("dir", dir)->required();
    rev->add_option("idx", idx)->required();
    rev->callback([] {
        auto db = curator::CuratorDatabase::load(dir);
        db.revoke(idx);
        db.save(dir);
    });

    auto* dis = cur->add_subcommand("disclose", "Release a raw object to an allowlisted auditor");
    dis->add_option("dir", dir)->required();
    dis->add_option("idx", idx)->required();
    dis->add_option("--credential", credential)->required();
    dis->add_option("--out", out)->required();
    dis->callback([] {
        auto db = curator::CuratorDatabase::load(dir);
        write_file(out, db.disclose_object(idx, credential));
    });
}

// ---- enforcer ----

void add_enforcer(CLI::App& app, Common& common) {
    auto* enf_cmd = app.add_subcommand("enforcer", "Blinded database and query endpoint");
    enf_cmd->require_subcommand(1);

    static std::string dir, out, old_path, new_path, listen;
    static std::vector<std::string> sets, keyrings;
    static std::size_t workers = 0;
    static unsigned k = 0;

    auto* init = enf_cmd->add_subcommand("init", "Create enforcer keys and blinding value");
    init->add_option("dir", dir)->required();
    init->callback([&common] {
        enforcer::EnforcerOptions o;
        o.policy_m = common.cfg().policy_m;
        o.update_interval = common.cfg().update_interval;
        o.clock_skew = common.cfg().clock_skew;
        auto enf = enforcer::Enforcer::create(o);
        enf.save(dir);
        std::ofstream(fs::path(dir) / "enforcer.pk") << to_hex(enf.public_key()) << '\n';
        std::cout << "public_key " << to_hex(enf.public_key()) << '\n';
    });

    auto add_build_opts = [](CLI::App* c) {
        c->add_option("dir", dir)->required();
        c->add_option("--set", sets, "Curator export (.vbx)")->required();
        c->add_option("--keyring", keyrings, "Curator keyring JSON");
        c->add_option("--prefix-bits", k, "Bucket prefix bits (default from config)");
    };
    auto* build = enf_cmd->add_subcommand("build", "Build and commit a new epoch");
    add_build_opts(build);
    build->callback([&common] {
        auto enf = enforcer::Enforcer::load(dir);
        auto rings = load_keyrings(keyrings.empty() ? common.cfg().keyrings : keyrings);
        auto now = common.clock();
        auto snap = enf.build_database(load_sets(sets), rings, now);
        write_build_outputs(dir, snap, enf, k != 0 ? k : common.cfg().prefix_bits, now);
        enf.save(dir);
    });

    auto* update = enf_cmd->add_subcommand("update", "Merge additions into the held sets and commit");
    add_build_opts(update);
    update->callback([&common] {
        auto enf = enforcer::Enforcer::load(dir);
        auto rings = load_keyrings(keyrings.empty() ? common.cfg().keyrings : keyrings);
        auto now = common.clock();
        auto snap = enf.publish_update(load_sets(sets), rings, now);
        write_build_outputs(dir, snap, enf, k != 0 ? k : common.cfg().prefix_bits, now);
        enf.save(dir);
        if (enf.rapid_updates() > 0) std::cout << "rapid_updates " << enf.rapid_updates() << '\n';
    });

    auto* diff = enf_cmd->add_subcommand("diff", "Compare two snapshots");
    diff->add_option("old", old_path)->required();
    diff->add_option("new", new_path)->required();
    diff->callback([] {
        auto d = enforcer::snapshot_diff(enforcer::DatabaseSnapshot::decode(read_file(old_path)),
                                         enforcer::DatabaseSnapshot::decode(read_file(new_path)));
        for (const auto& r : d.added) std::cout << "+ " << to_hex(r.blinded_id) << '\n';
        for (const auto& id : d.removed) std::cout << "- " << to_hex(id) << '\n';
        std::cout << "added " << d.added.size() << " removed " << d.removed.size() << '\n';
    });

    auto* pk = enf_cmd->add_subcommand("export-b", "Write the blinding value for a privileged auditor");
    pk->add_option("dir", dir)->required();
    pk->add_option("out", out)->required();
    pk->callback([] {
        auto enf = enforcer::Enforcer::load(dir);
        std::ofstream(out) << to_hex(enf.blind_b().encoding()) << '\n';
    });

    auto* serve = enf_cmd->add_subcommand("serve", "Answer PSI, PIR, snapshot and checkpoint requests");
    serve->add_option("dir", dir)->required();
    serve->add_option("--listen", listen, "host:port (default from config)");
    serve->add_option("--workers", workers);
    serve->callback([&common] {
        const auto& cfg = common.cfg();
        auto enf = enforcer::Enforcer::load(dir);
        auto snap = std::make_shared<enforcer::DatabaseSnapshot>(
            enforcer::DatabaseSnapshot::decode(read_file((fs::path(dir) / "snapshot.vbs").string())));
        auto bucketed = std::make_shared<pir::BucketedDB>(load_buckets(dir, *snap, enf.public_key()));
        log::FileCheckpointStore store((fs::path(dir) / "checkpoints.log").string());

        auto backend = pir::make_backend(cfg.backend, cfg.plaintext_slot_bytes);
        std::cout << "backend " << backend->name() << '\n';
        wire::Handler handler(enf, std::move(backend));
        handler.publish({snap, {}, bucketed, store.fetch_checkpoints()});
        auto [host, port] = wire::split_listen_address(listen.empty() ? cfg.listen : listen);
        wire::ServerOptions so;
        so.host = host;
        so.port = port;
        so.workers = workers != 0 ? workers : cfg.workers;
        wire::Server server(handler, so);
        auto bound = server.start();
        std::cout << "listening " << host << ':' << bound << std::endl;
        std::signal(SIGINT, [](int) { g_stop = true; });
        std::signal(SIGTERM, [](int) { g_stop = true; });
        while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
        server.stop();
    });
}

// ---- client ----

struct CheckArgs {
    std::string file, snapshot, enforcer_key, out;
    std::vector<std::string> keyrings;
    bool use_pir = false;
};

client::Verdict run_check(const CheckArgs& a, const Common& common) {
    const auto& cfg = common.cfg();
    auto pk = load_public_key(a.enforcer_key.empty() ? cfg.enforcer_key : a.enforcer_key);
    auto rings = load_keyrings(a.keyrings.empty() ? cfg.keyrings : a.keyrings);
    auto witnesses = witness_keys(cfg);
    client::EvaluationPolicy policy{cfg.policy_m, cfg.clock_skew};
    auto object = read_file(a.file);

    auto conn = wire::Connection::open(cfg.enforcer);
    auto [req, state] = client::begin_query(object);
    auto result = client::complete_query(state, conn.psi(req));

    if (a.use_pir) {
        auto backend = pir::make_backend(cfg.backend, cfg.plaintext_slot_bytes);
        auto [query, sk] = pir::client_pir_query(result.lookup_key, cfg.prefix_bits, *backend);
        auto answer = conn.pir(query);
        pir::PirVerifyContext ctx{rings, pk, witnesses, cfg.witness_quorum, policy};
        return pir::client_pir_decode(answer, sk, *backend, result, object, ctx, common.clock());
    }
    if (a.snapshot.empty()) throw UsageError("--snapshot is required unless --pir is given");
    auto db = client::verify_snapshot(enforcer::DatabaseSnapshot::decode(read_file(a.snapshot)), pk, witnesses,
                                      cfg.witness_quorum);
    return client::evaluate(object, result.unblinded, db, rings, policy, common.clock());
}

void add_client(CLI::App& app, Common& common, int& exit_code) {
    auto* cl = app.add_subcommand("client", "Private lookups against an enforcer");
    cl->require_subcommand(1);

    static CheckArgs args;
    auto* sync = cl->add_subcommand("sync", "Fetch and verify the current snapshot");
    sync->add_option("--out", args.out)->required();
    sync->add_option("--enforcer-key", args.enforcer_key);
    sync->callback([&common] {
        const auto& cfg = common.cfg();
        auto pk = load_public_key(args.enforcer_key.empty() ? cfg.enforcer_key : args.enforcer_key);
        auto snap = wire::Connection::open(cfg.enforcer).snapshot();
        auto db = client::verify_snapshot(snap, pk, witness_keys(cfg), cfg.witness_quorum);
        write_file(args.out, snap.encode());
        std::cout << "epoch " << db.epoch() << " records " << db.size() << '\n';
    });

    auto add_check_opts = [](CLI::App* c) {
        c->add_option("file", args.file)->required();
        c->add_option("--snapshot", args.snapshot, "Verified snapshot from client sync");
        c->add_option("--enforcer-key", args.enforcer_key);
        c->add_option("--keyring", args.keyrings);
        c->add_flag("--pir", args.use_pir, "Use the bucketed lookup instead of a local snapshot");
    };
    auto* check = cl->add_subcommand("check", "Evaluate an object");
    add_check_opts(check);
    check->callback([&common, &exit_code] {
        auto v = run_check(args, common);
        print_verdict(v);
        exit_code = v.harmful() ? kFlagged : kClean;
    });

    auto* appeal = cl->add_subcommand("appeal", "Evaluate an object and export the appeal bundle");
    add_check_opts(appeal);
    appeal->add_option("--out", args.out)->required();
    appeal->callback([&common, &exit_code] {
        auto v = run_check(args, common);
        print_verdict(v);
        if (!v.harmful()) {
            exit_code = kClean;
            return;
        }
        std::ofstream(args.out) << client::export_appeal(read_file(args.file), v).to_json() << '\n';
        exit_code = kFlagged;
    });
}

// ---- audit ----

class NetworkOracle final : public audit::ConsistencyOracle {
public:
    explicit NetworkOracle(wire::Connection conn) : conn_(std::move(conn)) {}
    std::optional<log::ConsistencyProof> prove(std::uint64_t old_size, std::uint64_t new_size) override {
        try {
            return conn_.consistency(old_size, new_size);
        } catch (const wire::RemoteError&) {
            return std::nullopt;
        }
    }

private:
    wire::Connection conn_;
};

std::vector<Bytes> read_objects(const std::string& dir) {
    std::vector<Bytes> out;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) out.push_back(read_file(e.path().string()));
    }
    return out;
}

audit::AuditPolicy audit_policy(const config::Config& cfg) {
    audit::AuditPolicy p;
    p.min_update_interval = cfg.update_interval;
    p.max_checkpoint_age = cfg.max_checkpoint_age;
    p.witness_quorum = cfg.witness_quorum;
    return p;
}

void add_audit(CLI::App& app, Common& common, int& exit_code) {
    auto* au = app.add_subcommand("audit", "Unprivileged and privileged audits");
    au->require_subcommand(1);

    static std::string path, objects_dir, b_file, enforcer_key, enforcer_dir;
    static std::vector<std::string> keyrings;

    auto* lg = au->add_subcommand("log", "Check a checkpoint history");
    lg->add_option("checkpoints", path)->required();
    lg->add_option("--enforcer-key", enforcer_key);
    lg->add_option("--enforcer-dir", enforcer_dir, "Use a local enforcer state instead of the network");
    lg->callback([&common, &exit_code] {
        const auto& cfg = common.cfg();
        auto pk = load_public_key(enforcer_key.empty() ? cfg.enforcer_key : enforcer_key);
        auto cps = log::parse_checkpoint_lines(read_text(path));
        audit::AuditReport report;
        if (!enforcer_dir.empty()) {
            auto enf = enforcer::Enforcer::load(enforcer_dir);
            audit::EnforcerOracle oracle(enf);
            report = audit::audit_checkpoints(cps, oracle, pk, witness_keys(cfg), audit_policy(cfg), common.clock());
        } else {
            NetworkOracle oracle(wire::Connection::open(cfg.enforcer));
            report = audit::audit_checkpoints(cps, oracle, pk, witness_keys(cfg), audit_policy(cfg), common.clock());
        }
        std::cout << report.to_text();
        exit_code = report.clean() ? kClean : kFlagged;
    });

    auto* db = au->add_subcommand("db", "Rebuild a snapshot from raw objects and B");
    db->add_option("snapshot", path)->required();
    db->add_option("objects", objects_dir)->required();
    db->add_option("b_file", b_file)->required();
    db->add_option("--keyring", keyrings);
    db->add_option("--enforcer-key", enforcer_key);
    db->callback([&common, &exit_code] {
        const auto& cfg = common.cfg();
        auto pk = load_public_key(enforcer_key.empty() ? cfg.enforcer_key : enforcer_key);
        auto snap = enforcer::DatabaseSnapshot::decode(read_file(path));
        auto b = crypto::Scalar::decode(from_hex(trim(read_text(b_file))));
        auto report = audit::privileged_audit(snap, read_objects(objects_dir), b,
                                              load_keyrings(keyrings.empty() ? cfg.keyrings : keyrings),
                                              cfg.policy_m, pk, common.clock(), cfg.clock_skew);
        std::cout << report.to_text();
        exit_code = report.clean() ? kClean : kFlagged;
    });

    auto* ap = au->add_subcommand("appeal", "Verify an appeal bundle");
    ap->add_option("bundle", path)->required();
    ap->add_option("--keyring", keyrings);
    ap->callback([&common, &exit_code] {
        const auto& cfg = common.cfg();
        auto bundle = client::AppealBundle::from_json(read_text(path));
        auto check = audit::verify_appeal(bundle, load_keyrings(keyrings.empty() ? cfg.keyrings : keyrings),
                                          common.clock(), cfg.clock_skew);
        std::cout << "appeal " << (check.ok ? "valid" : "invalid") << '\n' << "reason " << check.reason << '\n';
        exit_code = check.ok ? kFlagged : kClean;
    });
}

// ---- bench ----

void add_bench(CLI::App& app) {
    static bench::BenchOptions opts;
    static std::string out;
    static bool quick = false;
    auto* b = app.add_subcommand("bench", "Run the benchmark suite and emit CSV");
    b->add_option("--out", out, "CSV file (default stdout)");
    b->add_option("--iterations", opts.iterations)->capture_default_str();
    b->add_option("--device", opts.device)->capture_default_str();
    b->add_flag("--quick", quick, "Small databases and the first PIR scaling rows only");
    b->callback([] {
        if (quick) {
            opts.psi_large = 100000;
            opts.verify_sizes = {50000};
            opts.pir_rows.resize(5);
        }
        std::ofstream file;
        if (!out.empty()) file.open(out);
        std::ostream& os = out.empty() ? std::cout : file;
        os << bench::kCsvHeader << '\n';
        auto summary = bench::run_suite(opts, [&](const bench::BenchRecord& r) {
            os << bench::to_csv_row(r) << '\n';
            os.flush();
        });
        std::cerr << "psi_cost_ratio " << summary.psi_ratio << '\n'
                  << "pir_linear_fit slope_us_per_element " << summary.pir_fit.slope << " r2 " << summary.pir_fit.r2
                  << '\n';
    });
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"veilblock: private blocklist curation, enforcement and audit"};
    app.require_subcommand(1);
    Common common;
    int exit_code = kClean;
    app.add_option("--config", common.config_path, std::string("JSON config (default $") + config::kConfigEnv + ")");
    app.add_option("--now", common.now, "Override the clock (unix seconds)");

    add_curator(app, common);
    add_enforcer(app, common);
    add_client(app, common, exit_code);
    add_audit(app, common, exit_code);
    add_bench(app);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kClean : kUsage;
    } catch (const config::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kProtocol;
    }
    return exit_code;
}
