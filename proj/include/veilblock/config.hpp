#ifndef VEILBLOCK_CONFIG_HPP
#define VEILBLOCK_CONFIG_HPP

#include <map>
#include <string>
#include <vector>

#include "veilblock/bytes.hpp"

namespace veilblock::config {

inline constexpr const char* kConfigEnv = "VEILBLOCK_CONFIG";

enum class ConfigErrorKind { Syntax, UnknownField, MissingKeyFile, InvalidPolicy, InvalidValue };

std::string_view to_string(ConfigErrorKind k);

class ConfigError : public Error {
public:
    ConfigError(ConfigErrorKind kind, const std::string& what)
        : Error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}
    ConfigErrorKind kind() const { return kind_; }

private:
    ConfigErrorKind kind_;
};

struct Config {
    std::string role = "client";  // curator | enforcer | client | auditor
    std::string state_dir = ".";
    // Paths; each must exist when set.
    std::string key_file;
    std::string enforcer_key;
    std::vector<std::string> keyrings;
    // witness id -> hex Ed25519 public key
    std::map<std::string, std::string> witnesses;

    unsigned policy_m = 1;
    unsigned prefix_bits = 8;
    UnixSeconds update_interval = 3600;
    UnixSeconds clock_skew = 300;
    UnixSeconds max_checkpoint_age = 7 * 24 * 3600;
    std::size_t witness_quorum = 0;
    std::string backend = "reference";
    std::size_t plaintext_slot_bytes = 10240;
    std::string listen = "127.0.0.1:7450";
    std::string enforcer = "127.0.0.1:7450";
    std::size_t workers = 8;

    friend bool operator==(const Config&, const Config&) = default;
};

// key_files_relative_to: directory against which relative file paths are
// resolved for the existence check (normally the config file's directory).
Config parse_config(std::string_view json_text, const std::string& key_files_relative_to = ".");
Config load_config(const std::string& path);
// All fields, defaults included, with stable key order.
std::string serialize_config(const Config& c);

// VEILBLOCK_CONFIG if set, else empty.
std::string config_path_from_env();

}  // namespace veilblock::config

#endif  // VEILBLOCK_CONFIG_HPP
