#ifndef VEILBLOCK_TESTS_FIXTURES_HPP
#define VEILBLOCK_TESTS_FIXTURES_HPP

#include <functional>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "veilblock/client.hpp"
#include "veilblock/curator.hpp"
#include "veilblock/enforcer.hpp"

namespace vbt {

using namespace veilblock;

inline constexpr UnixSeconds kT0 = 1'700'000'000;

inline Bytes random_object(std::size_t n = 48) {
    Bytes b(n);
    crypto::random_bytes(b);
    return b;
}

inline Bytes text_object(std::string_view s) { return Bytes(s.begin(), s.end()); }

// Curators, their listed objects, and an enforcer built over them.
struct World {
    std::vector<curator::CuratorDatabase> curators;
    curator::Keyrings keyrings;
    std::vector<Bytes> objects;
    // objects[i] signed by curator j iff signers[i] contains j.
    std::vector<std::set<std::size_t>> signers;
    std::optional<enforcer::Enforcer> enf;
    enforcer::DatabaseSnapshot snapshot;

    std::vector<curator::CuratorExport> exports() const {
        std::vector<curator::CuratorExport> out;
        for (const auto& c : curators) out.push_back(c.export_set());
        return out;
    }

    void refresh_keyrings() {
        keyrings.clear();
        for (const auto& c : curators) keyrings[c.identity().curator_id] = c.keyring();
    }

    void rebuild(UnixSeconds now) {
        refresh_keyrings();
        snapshot = enf->build_database(exports(), keyrings, now);
    }
};

struct WorldSpec {
    std::size_t n_curators = 1;
    std::size_t n_objects = 10;
    unsigned policy_m = 1;
    curator::RevocationMode mode = curator::RevocationMode::None;
    UnixSeconds window = 86400;
    // Which curators sign object i; default: all of them.
    std::function<std::set<std::size_t>(std::size_t)> signers = {};
};

inline World make_world(const WorldSpec& spec, UnixSeconds now = kT0) {
    World w;
    for (std::size_t j = 0; j < spec.n_curators; ++j) {
        w.curators.emplace_back(
            curator::CuratorIdentity::create("curator-" + std::to_string(j), spec.mode, spec.window, now));
    }
    for (std::size_t i = 0; i < spec.n_objects; ++i) {
        auto obj = random_object();
        std::set<std::size_t> who;
        if (spec.signers) {
            who = spec.signers(i);
        } else {
            for (std::size_t j = 0; j < spec.n_curators; ++j) who.insert(j);
        }
        for (auto j : who) w.curators[j].add_object(obj, now);
        w.objects.push_back(std::move(obj));
        w.signers.push_back(std::move(who));
    }
    enforcer::EnforcerOptions o;
    o.policy_m = spec.policy_m;
    w.enf.emplace(enforcer::Enforcer::create(o));
    w.rebuild(now);
    return w;
}

// Runs the PSI exchange locally against enf.
inline client::QueryResult psi_lookup(const enforcer::Enforcer& enf, ByteView obj) {
    auto [req, state] = client::begin_query(obj);
    return client::complete_query(state, enf.respond_psi(req));
}

inline client::Verdict check_local(const World& w, const client::VerifiedDB& db, ByteView obj, UnixSeconds now,
                                   unsigned policy_m = 1) {
    auto r = psi_lookup(*w.enf, obj);
    return client::evaluate(obj, r.unblinded, db, w.keyrings, {policy_m, 300}, now);
}

}  // namespace vbt

#endif  // VEILBLOCK_TESTS_FIXTURES_HPP
