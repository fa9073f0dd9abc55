#pragma once

#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "postercrit/error.hpp"
#include "postercrit/image.hpp"

namespace postercrit::gateway {

using Json = nlohmann::json;

// Structured completion gave up; carries the last raw model output.
class GenerationError : public Error {
public:
    GenerationError(const std::string& message, std::string tag, std::string raw_text)
        : Error(ErrorCode::Generation, message, std::move(tag)), raw_text_(std::move(raw_text)) {}
    const std::string& raw_text() const noexcept { return raw_text_; }

private:
    std::string raw_text_;
};

using UserPart = std::variant<std::string, Image>;

struct ModelRequest {
    // Stable name of the pipeline step, e.g. "persona.dimensions".
    std::string tag;
    std::string system_text;
    std::vector<UserPart> user_parts;
    std::string schema_id;
    double temperature_hint = 0.7;

    // System text followed by every text part, newline separated.
    std::string text() const;
};

struct StructuredResponse {
    Json payload;
    std::string raw_text;
    int attempts = 1;
};

struct EmbeddingVector {
    std::vector<double> values;

    // Scales to unit length; a zero vector becomes the first basis vector.
    static EmbeddingVector normalized(std::vector<double> raw);
    std::size_t dimension() const noexcept { return values.size(); }
    double norm() const noexcept;

    bool operator==(const EmbeddingVector&) const = default;
};

// Returns an error message when `payload` does not have the expected shape.
using Validator = std::function<std::optional<std::string>(const Json& payload)>;

class SchemaRegistry {
public:
    void add(std::string schema_id, Validator validator);
    bool contains(std::string_view schema_id) const;
    std::optional<std::string> check(std::string_view schema_id, const Json& payload) const;

    // Every response structure used by the pipeline.
    static const SchemaRegistry& builtin();

private:
    std::map<std::string, Validator, std::less<>> validators_;
};

// One failed attempt, fed back to the backend on the next try.
struct Correction {
    std::string raw_text;
    std::string error;
};

class Backend {
public:
    virtual ~Backend() = default;

    virtual std::string name() const = 0;
    virtual std::string chat(const ModelRequest& request, const std::vector<Correction>& corrections) = 0;
    virtual Image generate_image(std::string_view tag, const std::string& prompt) = 0;
    virtual std::vector<double> embed(const Image& image) = 0;
    virtual std::string embedder_id() const = 0;
    // True when responses depend on call order, so fan-out must run in order.
    virtual bool sequenced() const { return false; }
};

// Content-addressed PNG files. Ids look like "asset:<sha256 of size+pixels>".
class AssetStore {
public:
    explicit AssetStore(std::filesystem::path dir);

    std::string put(const Image& image);
    std::optional<Image> get(std::string_view asset_id) const;
    std::filesystem::path path_for(std::string_view asset_id) const;
    const std::filesystem::path& dir() const noexcept { return dir_; }

    static std::string id_for(const Image& image);

private:
    std::filesystem::path dir_;
    mutable std::mutex mutex_;
};

struct GatewayOptions {
    int max_retries = 2;
    int parallelism = 4;
    // Offline mode: conflict detection, component mapping and overlap
    // checks use deterministic heuristics instead of model calls.
    bool fallback = false;
};

class Gateway {
public:
    Gateway(std::shared_ptr<Backend> backend, std::shared_ptr<AssetStore> assets, GatewayOptions options = {},
            const SchemaRegistry* schemas = &SchemaRegistry::builtin());

    StructuredResponse complete_structured(const ModelRequest& request) const;
    // Returns the asset id of the generated image.
    std::string generate_image(std::string_view tag, const std::string& prompt) const;
    EmbeddingVector embed_image(const Image& image) const;

    // Runs task(0..n-1) with at most `parallelism` in flight (in order when the
    // backend is sequenced). Slot i holds the exception thrown by task(i), if any.
    std::vector<std::exception_ptr> fan_out(std::size_t n, const std::function<void(std::size_t)>& task) const;

    const GatewayOptions& options() const noexcept { return options_; }
    Backend& backend() const noexcept { return *backend_; }
    AssetStore& assets() const noexcept { return *assets_; }
    std::optional<Image> resolve_asset(std::string_view source) const;

private:
    std::shared_ptr<Backend> backend_;
    std::shared_ptr<AssetStore> assets_;
    GatewayOptions options_;
    const SchemaRegistry* schemas_;
};

struct LoggedRequest {
    std::string tag;
    std::string schema_id;
    std::string text;
    std::size_t image_parts = 0;
};

// Deterministic stand-in. Chat responses come from fixtures named
// `<tag>.<n>.json` (n counts from 1 per tag, one per attempt); images from
// `<tag>.<n>.png` when present, else a placeholder whose pixels hash the
// prompt; embeddings are a fixed random projection of an 8x8 downsample.
class ScriptedBackend : public Backend {
public:
    static constexpr std::size_t kDefaultDimension = 64;

    ScriptedBackend();
    explicit ScriptedBackend(const std::filesystem::path& fixture_dir, std::size_t dimension = kDefaultDimension);

    // Appends a response to the tag's sequence.
    void script(const std::string& tag, std::string raw_text);
    void script(const std::string& tag, const Json& payload) { script(tag, payload.dump(2)); }
    // Makes the next chat call for `tag` fail with a backend error.
    void fail_next(const std::string& tag);
    void fail_images(bool fail);

    std::vector<LoggedRequest> requests() const;
    std::size_t calls(std::string_view tag) const;

    std::string name() const override { return "scripted"; }
    std::string chat(const ModelRequest& request, const std::vector<Correction>& corrections) override;
    Image generate_image(std::string_view tag, const std::string& prompt) override;
    std::vector<double> embed(const Image& image) override;
    std::string embedder_id() const override;
    bool sequenced() const override { return true; }

    static Image placeholder_image(const std::string& prompt);

private:
    mutable std::mutex mutex_;
    std::size_t dimension_;
    std::vector<double> projection_;
    std::map<std::string, std::vector<std::string>, std::less<>> chat_fixtures_;
    std::map<std::string, std::vector<std::filesystem::path>, std::less<>> image_fixtures_;
    std::map<std::string, std::size_t, std::less<>> chat_cursor_;
    std::map<std::string, std::size_t, std::less<>> image_cursor_;
    std::map<std::string, int, std::less<>> pending_failures_;
    bool fail_images_ = false;
    std::vector<LoggedRequest> log_;
};

struct HttpBackendConfig {
    std::string base_url;  // e.g. https://api.example.com/v1
    std::string api_key;
    std::string chat_model;
    std::string image_model;
    std::string embed_model;
    std::string image_size = "1024x1024";
    int timeout_seconds = 120;

    // Reads MODEL_BASE_URL, MODEL_API_KEY and the optional MODEL_CHAT,
    // MODEL_IMAGE, MODEL_EMBED model names.
    static HttpBackendConfig from_environment();
};

// OpenAI-compatible chat and image endpoints plus an image-embedding endpoint.
class HttpBackend : public Backend {
public:
    explicit HttpBackend(HttpBackendConfig config);

    std::string name() const override { return "live"; }
    std::string chat(const ModelRequest& request, const std::vector<Correction>& corrections) override;
    Image generate_image(std::string_view tag, const std::string& prompt) override;
    std::vector<double> embed(const Image& image) override;
    std::string embedder_id() const override { return config_.embed_model; }

private:
    Json post(const std::string& path, const Json& body) const;

    HttpBackendConfig config_;
    std::string origin_;
    std::string prefix_;
};

} // namespace postercrit::gateway
