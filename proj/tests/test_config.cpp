#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "fixtures.hpp"
#include "veilblock/config.hpp"

using namespace veilblock;
using namespace veilblock::config;

namespace {

ConfigErrorKind error_kind(std::string_view text, const std::string& base = ".") {
    try {
        (void)parse_config(text, base);
    } catch (const ConfigError& e) {
        return e.kind();
    }
    FAIL("config accepted: " << text);
    return ConfigErrorKind::Syntax;
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("minimal config gets defaults") {
    auto c = parse_config(R"({"role": "client"})");
    CHECK(c.witness_quorum == 0);
    CHECK(c.prefix_bits == 8);
    CHECK(c.update_interval == 3600);
    CHECK(c.policy_m == 1);
    CHECK(c.backend == "reference");
    CHECK(c == Config{});
}

TEST_CASE("errors are named distinctly") {
    CHECK(error_kind(R"({"role": "client", "colour": 1})") == ConfigErrorKind::UnknownField);
    CHECK(error_kind(R"({"policy_m": 0})") == ConfigErrorKind::InvalidPolicy);
    CHECK(error_kind(R"({"policy_m": -3})") == ConfigErrorKind::InvalidPolicy);
    CHECK(error_kind(R"({"key_file": "no/such/file.key"})") == ConfigErrorKind::MissingKeyFile);
    CHECK(error_kind(R"({"keyrings": ["missing.json"]})") == ConfigErrorKind::MissingKeyFile);
    CHECK(error_kind(R"({"prefix_bits": 25})") == ConfigErrorKind::InvalidValue);
    CHECK(error_kind(R"({"role": "janitor"})") == ConfigErrorKind::InvalidValue);
    CHECK(error_kind(R"({"backend": "seal"})") == ConfigErrorKind::InvalidValue);
    CHECK(error_kind(R"({"policy_m": "two"})") == ConfigErrorKind::InvalidValue);
    CHECK(error_kind(R"({"witness_quorum": 1})") == ConfigErrorKind::InvalidPolicy);
    CHECK(error_kind(R"({"witnesses": {"w": "abcd"}})") == ConfigErrorKind::InvalidValue);
    CHECK(error_kind(R"({"role": )") == ConfigErrorKind::Syntax);
    CHECK(error_kind(R"([1, 2])") == ConfigErrorKind::Syntax);
}

TEST_CASE("serialize(parse(x)) is the normalized form") {
    auto dir = std::filesystem::temp_directory_path() / ("vb-cfg-" + to_hex(crypto::sha256(vbt::random_object())));
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "enf.pk") << "00\n";
    auto pk = to_hex(crypto::keygen().public_key);
    std::string text = R"({"role": "auditor", "enforcer_key": "enf.pk", "policy_m": 2,
                           "witnesses": {"w1": ")" + pk + R"("}, "witness_quorum": 1, "prefix_bits": 12})";
    auto c = parse_config(text, dir.string());
    CHECK(c.policy_m == 2);
    CHECK(c.witnesses.size() == 1);
    auto normalized = serialize_config(c);
    auto again = parse_config(normalized, dir.string());
    CHECK(again == c);
    CHECK(serialize_config(again) == normalized);

    std::ofstream(dir / "veilblock.json") << text;
    CHECK(load_config((dir / "veilblock.json").string()) == c);
    std::filesystem::remove_all(dir);
}

TEST_CASE("config path from the environment") {
    ::setenv(kConfigEnv, "/tmp/x.json", 1);
    CHECK(config_path_from_env() == "/tmp/x.json");
    ::unsetenv(kConfigEnv);
    CHECK(config_path_from_env().empty());
}

}  // TEST_SUITE
