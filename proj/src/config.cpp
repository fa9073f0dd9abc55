#include "postercrit/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace postercrit {

namespace {

int to_int(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const int v = std::stoi(value, &used);
        if (used == value.size()) return v;
    } catch (const std::exception&) {
    }
    throw Error(ErrorCode::Validation, "setting " + key + " expects an integer, got '" + value + "'", key);
}

bool to_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw Error(ErrorCode::Validation, "setting " + key + " expects true or false, got '" + value + "'", key);
}

} // namespace

void Config::set(const std::string& key, const std::string& value) {
    if (key == "backend.kind") backend = value;
    else if (key == "backend.assets") assets_dir = value;
    else if (key == "engine.parallelism") parallelism = to_int(key, value);
    else if (key == "engine.max_retries") max_retries = to_int(key, value);
    else if (key == "engine.heuristics") heuristics = to_bool(key, value);
    else if (key == "engine.discussion_rounds") discussion_rounds = to_int(key, value);
    else if (key == "engine.theme_rounds") theme_rounds = to_int(key, value);
    else if (key == "engine.top_k") top_k = to_int(key, value);
    else if (key == "service.data_dir") data_dir = value;
    else if (key == "service.host") host = value;
    else if (key == "service.port") port = to_int(key, value);
    else if (key == "service.template_index") template_index = value;
    else if (key == "service.template_corpus") template_corpus = value;
    else throw Error(ErrorCode::Validation, "unknown setting '" + key + "'", key);
    if (parallelism < 1 || max_retries < 0 || discussion_rounds < 1 || theme_rounds < 1 || top_k < 1)
        throw Error(ErrorCode::Validation, "setting " + key + " is out of range", key);
}

Config Config::load(const std::filesystem::path& path) {
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::read_ini(path.string(), tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw Error(ErrorCode::Parse, std::string("config: ") + e.what(), path.string());
    }
    Config config;
    const auto base = path.parent_path();
    for (const auto& [section, keys] : tree) {
        for (const auto& [key, node] : keys) {
            std::string value = node.data();
            const std::string name = section + "." + key;
            // Relative paths in the file are relative to the file.
            const bool is_path = name == "backend.assets" || name == "service.data_dir" ||
                                 name == "service.template_index" || name == "service.template_corpus";
            if (is_path && std::filesystem::path(value).is_relative()) value = (base / value).string();
            if (name == "backend.kind" && value.rfind("scripted:", 0) == 0) {
                std::filesystem::path dir = value.substr(9);
                if (dir.is_relative()) value = "scripted:" + (base / dir).string();
            }
            config.set(name, value);
        }
    }
    return config;
}

std::shared_ptr<gateway::Backend> make_backend(const std::string& spec) {
    if (spec == "live" || spec == "fallback")
        return std::make_shared<gateway::HttpBackend>(gateway::HttpBackendConfig::from_environment());
    if (spec.rfind("scripted:", 0) == 0) return std::make_shared<gateway::ScriptedBackend>(spec.substr(9));
    throw Error(ErrorCode::Validation, "backend must be live, fallback or scripted:<dir>, got '" + spec + "'", spec);
}

std::shared_ptr<gateway::Gateway> make_gateway(const Config& config) {
    gateway::GatewayOptions options;
    options.parallelism = config.parallelism;
    options.max_retries = config.max_retries;
    options.fallback = config.heuristics || config.backend == "fallback";
    std::filesystem::create_directories(config.asset_dir());
    return std::make_shared<gateway::Gateway>(make_backend(config.backend),
                                              std::make_shared<gateway::AssetStore>(config.asset_dir()), options);
}

} // namespace postercrit
