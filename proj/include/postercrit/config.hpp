#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "postercrit/gateway.hpp"

namespace postercrit {

// INI file, all keys optional:
//
//   [backend]
//   kind = live | fallback | scripted:<fixture dir>
//   assets = <dir>            ; asset store, default <data_dir>/assets
//
//   [engine]
//   parallelism = 4
//   max_retries = 2
//   heuristics = false        ; offline conflict/mapping/overlap checks
//   discussion_rounds = 5
//   theme_rounds = 3
//   top_k = 12
//
//   [service]
//   data_dir = ./data
//   host = 127.0.0.1
//   port = 8080
//   template_index = <file>
//   template_corpus = <dir>
//
// Credentials come only from the environment (see HttpBackendConfig).
struct Config {
    std::string backend = "fallback";
    std::optional<std::filesystem::path> assets_dir;
    int parallelism = 4;
    int max_retries = 2;
    bool heuristics = false;
    int discussion_rounds = 5;
    int theme_rounds = 3;
    int top_k = 12;
    std::filesystem::path data_dir = "data";
    std::string host = "127.0.0.1";
    int port = 8080;
    std::optional<std::filesystem::path> template_index;
    std::optional<std::filesystem::path> template_corpus;

    static Config load(const std::filesystem::path& path);
    // Applies one "section.key" setting; used for command-line overrides.
    void set(const std::string& key, const std::string& value);
    std::filesystem::path asset_dir() const { return assets_dir.value_or(data_dir / "assets"); }
};

// "fallback" is the live backend with heuristics switched on.
std::shared_ptr<gateway::Backend> make_backend(const std::string& spec);
std::shared_ptr<gateway::Gateway> make_gateway(const Config& config);

} // namespace postercrit
