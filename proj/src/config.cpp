#include "veilblock/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <set>

#include <json.hpp>

#include "veilblock/crypto.hpp"
#include "veilblock/pir.hpp"

namespace veilblock::config {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

const std::set<std::string> kFields = {
    "role",         "state_dir",         "key_file",       "enforcer_key",       "keyrings",
    "witnesses",    "policy_m",          "prefix_bits",    "update_interval",    "clock_skew",
    "max_checkpoint_age", "witness_quorum", "backend",     "plaintext_slot_bytes", "listen",
    "enforcer",     "workers",
};

template <typename T>
T field(const json& j, const char* name, T fallback) {
    auto it = j.find(name);
    if (it == j.end()) return fallback;
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        throw ConfigError(ConfigErrorKind::InvalidValue, std::string("field '") + name + "' has the wrong type");
    }
}

std::uint64_t unsigned_field(const json& j, const char* name, std::uint64_t fallback) {
    auto it = j.find(name);
    if (it == j.end()) return fallback;
    if (!it->is_number_integer()) {
        throw ConfigError(ConfigErrorKind::InvalidValue, std::string("field '") + name + "' must be an integer");
    }
    if (it->get<std::int64_t>() < 0) {
        if (std::string(name) == "policy_m") throw ConfigError(ConfigErrorKind::InvalidPolicy, "policy_m must be >= 1");
        throw ConfigError(ConfigErrorKind::InvalidValue, std::string("field '") + name + "' must be non-negative");
    }
    return it->get<std::uint64_t>();
}

void require_file(const std::string& path, const std::string& base, const char* what) {
    if (path.empty()) return;
    fs::path p(path);
    if (p.is_relative()) p = fs::path(base) / p;
    if (!fs::is_regular_file(p)) {
        throw ConfigError(ConfigErrorKind::MissingKeyFile, std::string(what) + " not found: " + p.string());
    }
}

}  // namespace

std::string_view to_string(ConfigErrorKind k) {
    switch (k) {
        case ConfigErrorKind::Syntax: return "config syntax error";
        case ConfigErrorKind::UnknownField: return "unknown config field";
        case ConfigErrorKind::MissingKeyFile: return "missing key file";
        case ConfigErrorKind::InvalidPolicy: return "invalid policy";
        case ConfigErrorKind::InvalidValue: return "invalid config value";
    }
    return "config error";
}

Config parse_config(std::string_view json_text, const std::string& key_files_relative_to) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(ConfigErrorKind::Syntax, e.what());
    }
    if (!j.is_object()) throw ConfigError(ConfigErrorKind::Syntax, "top level must be an object");
    for (const auto& [key, _] : j.items()) {
        if (!kFields.contains(key)) throw ConfigError(ConfigErrorKind::UnknownField, key);
    }

    Config c;
    c.role = field<std::string>(j, "role", c.role);
    if (c.role != "curator" && c.role != "enforcer" && c.role != "client" && c.role != "auditor") {
        throw ConfigError(ConfigErrorKind::InvalidValue, "role must be curator, enforcer, client or auditor");
    }
    c.state_dir = field<std::string>(j, "state_dir", c.state_dir);
    c.key_file = field<std::string>(j, "key_file", c.key_file);
    c.enforcer_key = field<std::string>(j, "enforcer_key", c.enforcer_key);
    c.keyrings = field<std::vector<std::string>>(j, "keyrings", c.keyrings);
    c.witnesses = field<std::map<std::string, std::string>>(j, "witnesses", c.witnesses);

    auto m = unsigned_field(j, "policy_m", c.policy_m);
    if (m < 1 || m > 0xffff) throw ConfigError(ConfigErrorKind::InvalidPolicy, "policy_m must be in [1, 65535]");
    c.policy_m = static_cast<unsigned>(m);
    auto k = unsigned_field(j, "prefix_bits", c.prefix_bits);
    if (k < 1 || k > 24) throw ConfigError(ConfigErrorKind::InvalidValue, "prefix_bits must be in [1, 24]");
    c.prefix_bits = static_cast<unsigned>(k);
    c.update_interval = unsigned_field(j, "update_interval", c.update_interval);
    if (c.update_interval == 0) throw ConfigError(ConfigErrorKind::InvalidValue, "update_interval must be positive");
    c.clock_skew = unsigned_field(j, "clock_skew", c.clock_skew);
    c.max_checkpoint_age = unsigned_field(j, "max_checkpoint_age", c.max_checkpoint_age);
    if (c.max_checkpoint_age == 0) {
        throw ConfigError(ConfigErrorKind::InvalidValue, "max_checkpoint_age must be positive");
    }
    c.witness_quorum = unsigned_field(j, "witness_quorum", c.witness_quorum);
    c.backend = field<std::string>(j, "backend", c.backend);
    c.plaintext_slot_bytes = unsigned_field(j, "plaintext_slot_bytes", c.plaintext_slot_bytes);
    if (c.plaintext_slot_bytes == 0) {
        throw ConfigError(ConfigErrorKind::InvalidValue, "plaintext_slot_bytes must be positive");
    }
    try {
        (void)pir::make_backend(c.backend, c.plaintext_slot_bytes);
    } catch (const Error& e) {
        throw ConfigError(ConfigErrorKind::InvalidValue, e.what());
    }
    c.listen = field<std::string>(j, "listen", c.listen);
    c.enforcer = field<std::string>(j, "enforcer", c.enforcer);
    c.workers = unsigned_field(j, "workers", c.workers);
    if (c.workers == 0) throw ConfigError(ConfigErrorKind::InvalidValue, "workers must be positive");

    if (c.witness_quorum > c.witnesses.size()) {
        throw ConfigError(ConfigErrorKind::InvalidPolicy, "witness_quorum exceeds the number of configured witnesses");
    }
    for (const auto& [id, hex] : c.witnesses) {
        try {
            (void)crypto::PublicKey::from(from_hex(hex));
        } catch (const Error&) {
            throw ConfigError(ConfigErrorKind::InvalidValue, "witness '" + id + "' key is not 32 hex bytes");
        }
    }
    require_file(c.key_file, key_files_relative_to, "key_file");
    require_file(c.enforcer_key, key_files_relative_to, "enforcer_key");
    for (const auto& ring : c.keyrings) require_file(ring, key_files_relative_to, "keyring");
    return c;
}

Config load_config(const std::string& path) {
    Bytes raw;
    try {
        raw = read_file(path);
    } catch (const Error& e) {
        throw ConfigError(ConfigErrorKind::Syntax, e.what());
    }
    auto base = fs::path(path).parent_path().string();
    return parse_config(std::string_view(reinterpret_cast<const char*>(raw.data()), raw.size()),
                        base.empty() ? "." : base);
}

std::string serialize_config(const Config& c) {
    json j;
    j["role"] = c.role;
    j["state_dir"] = c.state_dir;
    j["key_file"] = c.key_file;
    j["enforcer_key"] = c.enforcer_key;
    j["keyrings"] = c.keyrings;
    j["witnesses"] = c.witnesses;
    j["policy_m"] = c.policy_m;
    j["prefix_bits"] = c.prefix_bits;
    j["update_interval"] = c.update_interval;
    j["clock_skew"] = c.clock_skew;
    j["max_checkpoint_age"] = c.max_checkpoint_age;
    j["witness_quorum"] = c.witness_quorum;
    j["backend"] = c.backend;
    j["plaintext_slot_bytes"] = c.plaintext_slot_bytes;
    j["listen"] = c.listen;
    j["enforcer"] = c.enforcer;
    j["workers"] = c.workers;
    return j.dump(2);
}

std::string config_path_from_env() {
    const char* p = std::getenv(kConfigEnv);
    return p == nullptr ? std::string() : std::string(p);
}

}  // namespace veilblock::config
