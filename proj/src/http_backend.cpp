#include <cstdlib>

#include <httplib.h>

#include "postercrit/gateway.hpp"

namespace postercrit::gateway {

HttpBackendConfig HttpBackendConfig::from_environment() {
    HttpBackendConfig config;
    const auto env = [](const char* name) -> std::string {
        const char* v = std::getenv(name);
        return v ? v : "";
    };
    config.base_url = env("MODEL_BASE_URL");
    config.api_key = env("MODEL_API_KEY");
    if (auto v = env("MODEL_CHAT"); !v.empty()) config.chat_model = v;
    if (auto v = env("MODEL_IMAGE"); !v.empty()) config.image_model = v;
    if (auto v = env("MODEL_EMBED"); !v.empty()) config.embed_model = v;
    return config;
}

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
    const auto& url = config_.base_url;
    const auto scheme = url.find("://");
    if (url.empty() || scheme == std::string::npos)
        throw Error(ErrorCode::Validation, "MODEL_BASE_URL must be an absolute http(s) URL", "MODEL_BASE_URL");
    const auto path = url.find('/', scheme + 3);
    origin_ = url.substr(0, path);
    prefix_ = path == std::string::npos ? "" : url.substr(path);
    while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
}

Json HttpBackend::post(const std::string& path, const Json& body) const {
    httplib::Client client(origin_);
    client.set_connection_timeout(config_.timeout_seconds);
    client.set_read_timeout(config_.timeout_seconds);
    client.set_write_timeout(config_.timeout_seconds);
    httplib::Headers headers;
    if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);
    auto res = client.Post(prefix_ + path, headers, body.dump(), "application/json");
    if (!res) throw Error(ErrorCode::Backend, "request to " + path + " failed: " + httplib::to_string(res.error()), path);
    if (res->status < 200 || res->status >= 300)
        throw Error(ErrorCode::Backend, path + " returned HTTP " + std::to_string(res->status) + ": " + res->body, path);
    try {
        return Json::parse(res->body);
    } catch (const Json::parse_error&) {
        throw Error(ErrorCode::Backend, path + " returned a non-JSON body", path);
    }
}

namespace {

std::string data_url(const Image& image) { return "data:image/png;base64," + base64_encode(encode_png(image)); }

} // namespace

std::string HttpBackend::chat(const ModelRequest& request, const std::vector<Correction>& corrections) {
    Json content = Json::array();
    for (const auto& part : request.user_parts) {
        if (auto* text = std::get_if<std::string>(&part)) {
            content.push_back({{"type", "text"}, {"text", *text}});
        } else {
            content.push_back({{"type", "image_url"}, {"image_url", {{"url", data_url(std::get<Image>(part))}}}});
        }
    }
    Json messages = Json::array({{{"role", "system"}, {"content", request.system_text}},
                                 {{"role", "user"}, {"content", content}}});
    for (const auto& c : corrections) {
        messages.push_back({{"role", "assistant"}, {"content", c.raw_text}});
        messages.push_back({{"role", "user"},
                            {"content", "That response was rejected: " + c.error +
                                            ". Reply again with only the corrected JSON object."}});
    }
    Json body{{"model", config_.chat_model},
              {"temperature", request.temperature_hint},
              {"response_format", {{"type", "json_object"}}},
              {"messages", messages}};
    const Json reply = post("/chat/completions", body);
    try {
        return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const Json::exception&) {
        throw Error(ErrorCode::Backend, "chat completion reply has no message content", request.tag);
    }
}

Image HttpBackend::generate_image(std::string_view tag, const std::string& prompt) {
    Json body{{"model", config_.image_model},
              {"prompt", prompt},
              {"n", 1},
              {"size", config_.image_size},
              {"response_format", "b64_json"}};
    const Json reply = post("/images/generations", body);
    std::string b64;
    try {
        b64 = reply.at("data").at(0).at("b64_json").get<std::string>();
    } catch (const Json::exception&) {
        throw Error(ErrorCode::Backend, "image generation reply has no b64_json data", std::string(tag));
    }
    return decode_png(base64_decode(b64));
}

std::vector<double> HttpBackend::embed(const Image& image) {
    Json body{{"model", config_.embed_model}, {"input", Json::array({{{"image", data_url(image)}}})}};
    const Json reply = post("/embeddings", body);
    try {
        return reply.at("data").at(0).at("embedding").get<std::vector<double>>();
    } catch (const Json::exception&) {
        throw Error(ErrorCode::Backend, "embedding reply has no data[0].embedding");
    }
}

} // namespace postercrit::gateway
