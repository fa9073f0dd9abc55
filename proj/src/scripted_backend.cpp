#include <algorithm>
#include <charconv>
#include <fstream>
#include <random>

#include "postercrit/gateway.hpp"

namespace postercrit::gateway {

namespace {

constexpr int kGrid = 8;
constexpr std::size_t kFeatures = kGrid * kGrid * 3;
constexpr std::uint64_t kProjectionSeed = 0x5eed'cafe'f00dULL;

// Splits "<tag>.<n>.<ext>" into tag and n; false when the name does not fit.
bool split_fixture_name(const std::string& stem, std::string& tag, std::size_t& n) {
    const auto dot = stem.rfind('.');
    if (dot == std::string::npos || dot == 0) return false;
    const auto digits = std::string_view(stem).substr(dot + 1);
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), n);
    if (ec != std::errc() || ptr != digits.data() + digits.size() || n == 0) return false;
    tag = stem.substr(0, dot);
    return true;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string(), path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace

ScriptedBackend::ScriptedBackend() : ScriptedBackend(std::filesystem::path{}, kDefaultDimension) {}

ScriptedBackend::ScriptedBackend(const std::filesystem::path& fixture_dir, std::size_t dimension)
    : dimension_(dimension) {
    if (dimension_ == 0) throw Error(ErrorCode::Validation, "embedding dimension must be positive");
    // Entries uniform in [-1,1), built from raw engine output so the matrix is
    // identical on every standard library.
    std::mt19937_64 rng(kProjectionSeed);
    projection_.resize(dimension_ * kFeatures);
    for (double& w : projection_) w = static_cast<double>(rng() >> 11) * 0x1.0p-52 - 1.0;

    if (fixture_dir.empty()) return;
    if (!std::filesystem::is_directory(fixture_dir))
        throw Error(ErrorCode::Io, "fixture directory not found: " + fixture_dir.string(), fixture_dir.string());

    std::map<std::string, std::map<std::size_t, std::filesystem::path>> chats, images;
    for (const auto& entry : std::filesystem::directory_iterator(fixture_dir)) {
        if (!entry.is_regular_file()) continue;
        const auto ext = entry.path().extension().string();
        std::string tag;
        std::size_t n = 0;
        if (!split_fixture_name(entry.path().stem().string(), tag, n)) continue;
        if (ext == ".json") chats[tag][n] = entry.path();
        if (ext == ".png") images[tag][n] = entry.path();
    }
    for (auto& [tag, files] : chats) {
        std::size_t expected = 1;
        for (auto& [n, path] : files) {
            if (n != expected++)
                throw Error(ErrorCode::Validation, "fixture sequence for '" + tag + "' has a gap before " + path.string(),
                            tag);
            chat_fixtures_[tag].push_back(read_file(path));
        }
    }
    for (auto& [tag, files] : images)
        for (auto& [n, path] : files) image_fixtures_[tag].push_back(path);
}

void ScriptedBackend::script(const std::string& tag, std::string raw_text) {
    std::lock_guard lock(mutex_);
    chat_fixtures_[tag].push_back(std::move(raw_text));
}

void ScriptedBackend::fail_next(const std::string& tag) {
    std::lock_guard lock(mutex_);
    ++pending_failures_[tag];
}

void ScriptedBackend::fail_images(bool fail) {
    std::lock_guard lock(mutex_);
    fail_images_ = fail;
}

std::vector<LoggedRequest> ScriptedBackend::requests() const {
    std::lock_guard lock(mutex_);
    return log_;
}

std::size_t ScriptedBackend::calls(std::string_view tag) const {
    std::lock_guard lock(mutex_);
    return static_cast<std::size_t>(
        std::count_if(log_.begin(), log_.end(), [&](const LoggedRequest& r) { return r.tag == tag; }));
}

std::string ScriptedBackend::chat(const ModelRequest& request, const std::vector<Correction>& corrections) {
    if (request.tag.empty()) throw Error(ErrorCode::Generation, "scripted backend refuses untagged requests");
    std::lock_guard lock(mutex_);
    LoggedRequest entry{request.tag, request.schema_id, request.text(), 0};
    for (const auto& part : request.user_parts) entry.image_parts += std::holds_alternative<Image>(part) ? 1 : 0;
    for (const auto& c : corrections) entry.text += "\nPrevious response rejected: " + c.error;
    log_.push_back(std::move(entry));

    if (auto it = pending_failures_.find(request.tag); it != pending_failures_.end() && it->second > 0) {
        --it->second;
        throw Error(ErrorCode::Backend, "scripted failure for '" + request.tag + "'", request.tag);
    }
    auto fixtures = chat_fixtures_.find(request.tag);
    if (fixtures == chat_fixtures_.end() || fixtures->second.empty())
        throw Error(ErrorCode::Generation, "no scripted fixture for tag '" + request.tag + "'", request.tag);
    auto& cursor = chat_cursor_[request.tag];
    if (cursor >= fixtures->second.size())
        throw Error(ErrorCode::Generation,
                    "scripted fixtures for tag '" + request.tag + "' exhausted after " +
                        std::to_string(fixtures->second.size()),
                    request.tag);
    return fixtures->second[cursor++];
}

Image ScriptedBackend::placeholder_image(const std::string& prompt) {
    constexpr int kSize = 64;
    constexpr int kBlocks = 4;
    const std::string a = sha256_hex(prompt);
    const std::string b = sha256_hex("#" + prompt);
    const std::string hex = a + b;  // 64 bytes of hash material
    const auto byte_at = [&](std::size_t i) {
        return static_cast<std::uint8_t>(std::stoi(hex.substr(2 * i, 2), nullptr, 16));
    };
    Image img(kSize, kSize);
    const int block = kSize / kBlocks;
    for (int by = 0; by < kBlocks; ++by) {
        for (int bx = 0; bx < kBlocks; ++bx) {
            const auto base = static_cast<std::size_t>((by * kBlocks + bx) * 3);
            img.fill_rect(bx * block, by * block, (bx + 1) * block, (by + 1) * block,
                          {byte_at(base), byte_at(base + 1), byte_at(base + 2)});
        }
    }
    return img;
}

Image ScriptedBackend::generate_image(std::string_view tag, const std::string& prompt) {
    std::filesystem::path fixture;
    {
        std::lock_guard lock(mutex_);
        if (fail_images_) throw Error(ErrorCode::Backend, "scripted image generation failure", std::string(tag));
        if (auto it = image_fixtures_.find(tag); it != image_fixtures_.end()) {
            auto& cursor = image_cursor_[std::string(tag)];
            if (cursor < it->second.size()) fixture = it->second[cursor++];
        }
    }
    if (!fixture.empty()) return read_png(fixture);
    return placeholder_image(prompt);
}

std::vector<double> ScriptedBackend::embed(const Image& image) {
    if (image.empty()) throw Error(ErrorCode::Validation, "cannot embed an empty image");
    // Mean color per cell of an 8x8 grid, centered on zero.
    std::vector<double> features(kFeatures, 0.0);
    std::vector<int> counts(kGrid * kGrid, 0);
    for (int y = 0; y < image.height; ++y) {
        const int gy = y * kGrid / image.height;
        for (int x = 0; x < image.width; ++x) {
            const int cell = gy * kGrid + x * kGrid / image.width;
            const Rgb c = image.at(x, y);
            features[cell * 3] += c.r;
            features[cell * 3 + 1] += c.g;
            features[cell * 3 + 2] += c.b;
            ++counts[cell];
        }
    }
    for (std::size_t i = 0; i < kFeatures; ++i) {
        const int count = counts[i / 3];
        features[i] = count ? features[i] / (255.0 * count) - 0.5 : 0.0;
    }
    std::vector<double> out(dimension_, 0.0);
    for (std::size_t d = 0; d < dimension_; ++d) {
        const double* row = projection_.data() + d * kFeatures;
        double sum = 0;
        for (std::size_t i = 0; i < kFeatures; ++i) sum += row[i] * features[i];
        out[d] = sum;
    }
    return out;
}

std::string ScriptedBackend::embedder_id() const { return "scripted-grid8-proj" + std::to_string(dimension_); }

} // namespace postercrit::gateway
