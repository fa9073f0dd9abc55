#include "postercrit/gateway.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

namespace postercrit::gateway {

std::string ModelRequest::text() const {
    std::string out = system_text;
    for (const auto& part : user_parts) {
        if (auto* s = std::get_if<std::string>(&part)) {
            if (!out.empty()) out += '\n';
            out += *s;
        }
    }
    return out;
}

EmbeddingVector EmbeddingVector::normalized(std::vector<double> raw) {
    if (raw.empty()) throw Error(ErrorCode::Backend, "embedding with zero dimensions");
    double sum = 0;
    for (double v : raw) {
        if (!std::isfinite(v)) throw Error(ErrorCode::Backend, "embedding contains a non-finite value");
        sum += v * v;
    }
    const double n = std::sqrt(sum);
    if (n == 0) {
        std::fill(raw.begin(), raw.end(), 0.0);
        raw[0] = 1.0;
        return {std::move(raw)};
    }
    for (double& v : raw) v /= n;
    return {std::move(raw)};
}

double EmbeddingVector::norm() const noexcept {
    double sum = 0;
    for (double v : values) sum += v * v;
    return std::sqrt(sum);
}

void SchemaRegistry::add(std::string schema_id, Validator validator) {
    validators_[std::move(schema_id)] = std::move(validator);
}

bool SchemaRegistry::contains(std::string_view schema_id) const { return validators_.contains(schema_id); }

std::optional<std::string> SchemaRegistry::check(std::string_view schema_id, const Json& payload) const {
    auto it = validators_.find(schema_id);
    if (it == validators_.end()) return "unknown schema '" + std::string(schema_id) + "'";
    return it->second(payload);
}

AssetStore::AssetStore(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
}

std::string AssetStore::id_for(const Image& image) {
    std::vector<std::uint8_t> bytes;
    bytes.reserve(image.pixels.size() + 8);
    for (int v : {image.width, image.height})
        for (int shift = 24; shift >= 0; shift -= 8) bytes.push_back(static_cast<std::uint8_t>((v >> shift) & 0xFF));
    bytes.insert(bytes.end(), image.pixels.begin(), image.pixels.end());
    return "asset:" + sha256_hex(bytes);
}

std::filesystem::path AssetStore::path_for(std::string_view asset_id) const {
    constexpr std::string_view prefix = "asset:";
    if (!asset_id.starts_with(prefix) || asset_id.size() != prefix.size() + 64)
        throw Error(ErrorCode::Validation, "not an asset id: " + std::string(asset_id), std::string(asset_id));
    return dir_ / (std::string(asset_id.substr(prefix.size())) + ".png");
}

std::string AssetStore::put(const Image& image) {
    const std::string id = id_for(image);
    const auto path = path_for(id);
    std::lock_guard lock(mutex_);
    if (!std::filesystem::exists(path)) {
        auto tmp = path;
        tmp += ".tmp";
        write_png(tmp, image);
        std::filesystem::rename(tmp, path);
    }
    return id;
}

std::optional<Image> AssetStore::get(std::string_view asset_id) const {
    if (!asset_id.starts_with("asset:")) return std::nullopt;
    std::filesystem::path path;
    try {
        path = path_for(asset_id);
    } catch (const Error&) {
        return std::nullopt;
    }
    std::lock_guard lock(mutex_);
    if (!std::filesystem::exists(path)) return std::nullopt;
    return read_png(path);
}

Gateway::Gateway(std::shared_ptr<Backend> backend, std::shared_ptr<AssetStore> assets, GatewayOptions options,
                 const SchemaRegistry* schemas)
    : backend_(std::move(backend)), assets_(std::move(assets)), options_(options), schemas_(schemas) {
    if (!backend_) throw Error(ErrorCode::Validation, "gateway needs a backend");
    if (!assets_) throw Error(ErrorCode::Validation, "gateway needs an asset store");
    if (options_.max_retries < 0) throw Error(ErrorCode::Validation, "max_retries must be >= 0");
    options_.parallelism = std::max(1, options_.parallelism);
}

StructuredResponse Gateway::complete_structured(const ModelRequest& request) const {
    if (request.tag.empty()) throw Error(ErrorCode::Validation, "model request without a tag");
    if (!schemas_->contains(request.schema_id))
        throw Error(ErrorCode::Validation, "schema '" + request.schema_id + "' is not registered", request.schema_id);

    std::vector<Correction> corrections;
    const int attempts = 1 + options_.max_retries;
    for (int attempt = 1; attempt <= attempts; ++attempt) {
        std::string raw = backend_->chat(request, corrections);
        std::optional<std::string> problem;
        Json payload;
        try {
            payload = Json::parse(raw);
            problem = schemas_->check(request.schema_id, payload);
        } catch (const Json::parse_error& e) {
            problem = std::string("response is not valid JSON: ") + e.what();
        }
        if (!problem) return {std::move(payload), std::move(raw), attempt};
        if (attempt == attempts)
            throw GenerationError("'" + request.tag + "' gave no valid response after " + std::to_string(attempts) +
                                      " attempts: " + *problem,
                                  request.tag, std::move(raw));
        corrections.push_back({std::move(raw), std::move(*problem)});
    }
    throw Error(ErrorCode::Generation, "unreachable", request.tag);
}

std::string Gateway::generate_image(std::string_view tag, const std::string& prompt) const {
    if (prompt.empty()) throw Error(ErrorCode::Validation, "image prompt is empty");
    if (tag.empty()) throw Error(ErrorCode::Validation, "image request without a tag");
    return assets_->put(backend_->generate_image(tag, prompt));
}

EmbeddingVector Gateway::embed_image(const Image& image) const {
    if (image.empty()) throw Error(ErrorCode::Validation, "cannot embed an empty image");
    return EmbeddingVector::normalized(backend_->embed(image));
}

std::optional<Image> Gateway::resolve_asset(std::string_view source) const { return assets_->get(source); }

std::vector<std::exception_ptr> Gateway::fan_out(std::size_t n, const std::function<void(std::size_t)>& task) const {
    std::vector<std::exception_ptr> errors(n);
    const auto run = [&](std::size_t i) {
        try {
            task(i);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };
    const auto workers = std::min<std::size_t>(n, static_cast<std::size_t>(options_.parallelism));
    if (backend_->sequenced() || workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) run(i);
        return errors;
    }
    std::atomic<std::size_t> next{0};
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++) run(i);
            });
    }
    return errors;
}

} // namespace postercrit::gateway
