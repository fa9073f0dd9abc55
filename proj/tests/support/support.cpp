#include "support.hpp"

#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <cstdlib>
#include <fstream>

namespace pctest {

using pc::canvas::CanvasDocument;
using pc::canvas::Element;

fs::path fixtures_dir() { return PC_FIXTURES_DIR; }
fs::path cli_path() { return PC_CLI_PATH; }

TempDir::TempDir() {
    std::string tmpl = (fs::temp_directory_path() / "pctest-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

int uniform(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
double uniform_real(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
bool chance(Rng& rng, double p) { return std::bernoulli_distribution(p)(rng); }

std::string random_text(Rng& rng, int max_len) {
    static const std::vector<std::string> pieces = {
        "a", "B", "z", "0", "9", " ", "-", "&", "'", "\"", "\\", "/", "\n", "\t", "é", "ß", "日本", "☕", "🌸", "<b>", "%",
        "{", "}", "[", "]", ",", ":"};
    std::string out;
    const int n = uniform(rng, 0, max_len);
    for (int i = 0; i < n; ++i) out += pick(rng, pieces);
    return out;
}

std::string random_words(Rng& rng, int words) {
    static const std::vector<std::string> vocab = {
        "fresh", "coffee", "spring", "offer", "bold", "calm", "morning", "voucher", "draw", "community",
        "run", "train", "local", "family", "bright", "quiet", "weekend", "sale", "new", "members"};
    std::string out;
    for (int i = 0; i < words; ++i) {
        if (i) out += ' ';
        out += pick(rng, vocab);
    }
    return out;
}

namespace {

double coord(Rng& rng, const DocShape& shape, double lo, double hi) {
    if (shape.integer_geometry) return uniform(rng, static_cast<int>(lo), static_cast<int>(hi));
    switch (uniform(rng, 0, 3)) {
    case 0: return uniform(rng, static_cast<int>(lo), static_cast<int>(hi));
    case 1: return uniform(rng, static_cast<int>(lo) * 4, static_cast<int>(hi) * 4) / 4.0;
    default: return uniform_real(rng, lo, hi);
    }
}

Json random_extra(Rng& rng) {
    Json j = Json::object();
    const int n = uniform(rng, 0, 2);
    for (int i = 0; i < n; ++i) {
        const std::string key = "x-" + std::to_string(uniform(rng, 0, 99));
        switch (uniform(rng, 0, 4)) {
        case 0: j[key] = random_text(rng, 6); break;
        case 1: j[key] = uniform(rng, -1000, 1000); break;
        case 2: j[key] = chance(rng, 0.5); break;
        case 3: j[key] = Json::array({1, "two", nullptr, 3.5}); break;
        default: j[key] = {{"nested", {{"k", uniform(rng, 0, 9)}}}, {"alpha", "b"}}; break;
        }
    }
    return j;
}

} // namespace

CanvasDocument random_document(Rng& rng, const DocShape& shape) {
    CanvasDocument doc;
    doc.width = shape.page_w ? shape.page_w : uniform(rng, 120, 900);
    doc.height = shape.page_h ? shape.page_h : uniform(rng, 120, 1200);
    doc.schema_version = 1;
    if (shape.extras && chance(rng, 0.3)) doc.extra = random_extra(rng);
    const int n = uniform(rng, 0, shape.max_elements);
    for (int i = 0; i < n; ++i) {
        Element e;
        e.id = "e" + std::to_string(i) + (chance(rng, 0.2) ? "-" + std::to_string(uniform(rng, 0, 999)) : "");
        e.width = coord(rng, shape, 0, doc.width * 0.7);
        e.height = coord(rng, shape, 0, doc.height * 0.7);
        e.x = coord(rng, shape, -doc.width * 0.1, doc.width * 0.9);
        e.y = coord(rng, shape, -doc.height * 0.1, doc.height * 0.9);
        if (shape.rotations && chance(rng, 0.3)) {
            if (shape.integer_geometry) {
                e.rotation = pick(rng, std::vector<double>{90, 180, 270, -90});
                // Keep the rotated box on whole pixels.
                if ((static_cast<long>(e.width) - static_cast<long>(e.height)) % 2 != 0) e.width += 1;
            } else {
                e.rotation = pick(rng, std::vector<double>{90, 180, 270, 45, -30, 12.5, 359});
            }
        }
        const int kind = uniform(rng, 0, shape.vectors ? 2 : 1);
        if (kind == 0) {
            pc::canvas::TextPayload t;
            t.content = random_text(rng);
            t.font_size = shape.integer_geometry ? uniform(rng, 8, 64) : coord(rng, shape, 6, 72);
            t.font_family = pick(rng, std::vector<std::string>{"Inter", "Playfair Display", "", "Noto Sans JP"});
            t.fill = pick(rng, std::vector<std::string>{"#222222", "#fff", "white", "", "#3B2A1A"});
            e.payload = t;
        } else if (kind == 1) {
            e.payload = pc::canvas::ImagePayload{pick(rng, std::vector<std::string>{
                                                     "assets/photo.png", "asset:abc", "", "https://x.test/i.png?q=1&r=2"}) +
                                                 std::to_string(uniform(rng, 0, 5))};
        } else {
            e.payload = pc::canvas::VectorPayload{"<svg><rect width=\"" + std::to_string(uniform(rng, 1, 50)) + "\"/></svg>",
                                                  uniform(rng, 0, 12)};
        }
        if (shape.extras && chance(rng, 0.2)) e.extra = random_extra(rng);
        doc.elements.push_back(std::move(e));
    }
    return doc;
}

namespace {

std::string escape_pointer(const std::string& key) {
    std::string out;
    for (char c : key) {
        if (c == '~') out += "~0";
        else if (c == '/') out += "~1";
        else out += c;
    }
    return out;
}

void diff_into(const Json& a, const Json& b, const std::string& at, std::set<std::string>& out) {
    if (a.type() != b.type()) {
        // 3 and 3.0 are the same number.
        if (a.is_number() && b.is_number() && a.get<double>() == b.get<double>()) return;
        out.insert(at);
        return;
    }
    if (a.is_object()) {
        std::set<std::string> keys;
        for (auto it = a.begin(); it != a.end(); ++it) keys.insert(it.key());
        for (auto it = b.begin(); it != b.end(); ++it) keys.insert(it.key());
        for (const auto& k : keys) {
            const std::string path = at + "/" + escape_pointer(k);
            if (!a.contains(k) || !b.contains(k)) out.insert(path);
            else diff_into(a[k], b[k], path, out);
        }
    } else if (a.is_array()) {
        if (a.size() != b.size()) {
            out.insert(at);
            return;
        }
        for (std::size_t i = 0; i < a.size(); ++i) diff_into(a[i], b[i], at + "/" + std::to_string(i), out);
    } else if (a != b) {
        out.insert(at);
    }
}

} // namespace

std::set<std::string> diff_paths(const Json& a, const Json& b) {
    std::set<std::string> out;
    diff_into(a, b, "", out);
    return out;
}

std::set<std::string> canonical_diff(const CanvasDocument& a, const CanvasDocument& b) {
    return diff_paths(Json::parse(pc::canvas::serialize_document(a)), Json::parse(pc::canvas::serialize_document(b)));
}

std::vector<std::string> sorted_texts(const CanvasDocument& doc) {
    std::vector<std::string> out;
    for (const auto& e : doc.elements)
        if (auto* t = e.text()) out.push_back(t->content);
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::string> sorted_sources(const CanvasDocument& doc) {
    std::vector<std::string> out;
    for (const auto& e : doc.elements)
        if (auto* i = e.image()) out.push_back(i->source);
    std::sort(out.begin(), out.end());
    return out;
}

Json extract_payload(const std::string& goal, const std::string& audience) {
    return {{"goal", goal}, {"audience_summary", audience}, {"constraints", {"Keep it legible", "A3 portrait"}}};
}

Json dimensions_payload(Rng& rng) {
    static const std::vector<std::array<std::string, 3>> dims = {
        {"frequency of visits", "occasional visitor", "frequent visitor"},
        {"engagement level", "passive browser", "active shopper"},
        {"price sensitivity", "price indifferent", "deal seeker"},
        {"fitness experience", "beginner", "seasoned athlete"},
        {"fashion sensitivity", "trend skeptic", "trend setter"}};
    std::vector<int> idx{0, 1, 2, 3, 4};
    std::shuffle(idx.begin(), idx.end(), rng);
    Json out = Json::array();
    for (int k = 0; k < 2; ++k) {
        const auto& d = dims[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])];
        out.push_back({{"name", d[0]}, {"low_label", d[1]}, {"high_label", d[2]}, {"from_brief", chance(rng, 0.5)}});
    }
    return {{"dimensions", out}};
}

Json personas_payload(Rng& rng, const std::vector<int>& order) {
    static const std::vector<std::string> first = {"Casual", "Busy", "Loyal", "Curious", "Thrifty", "Keen", "Quiet"};
    static const std::vector<std::string> second = {"Browser", "Regular", "Runner", "Parent", "Hunter", "Skeptic"};
    Json out = Json::array();
    for (int slot : order) {
        const std::string d1 = slot / 2 ? "high" : "low";
        const std::string d2 = slot % 2 ? "high" : "low";
        out.push_back({{"name", pick(rng, first) + " " + pick(rng, second)},
                       {"summary", random_words(rng, 5)},
                       {"background", random_words(rng, 6)},
                       {"motivation", random_words(rng, 4)},
                       {"pain_point", random_words(rng, 4)},
                       {"need", random_words(rng, 3)},
                       {"quote", random_words(rng, 5)},
                       {"rationale", "Covers the " + d1 + "/" + d2 + " corner."},
                       {"dim1", d1},
                       {"dim2", d2}});
    }
    return {{"personas", out}};
}

Json feedback_payload(Rng& rng, const CanvasDocument& doc, double density) {
    Json text = Json::array();
    Json image = Json::array();
    for (const auto& e : doc.elements) {
        if (!chance(rng, density)) continue;
        if (e.text()) {
            text.push_back({{"target", e.id},
                            {"opinion", "Rework: " + random_words(rng, 3)},
                            {"preview", random_words(rng, uniform(rng, 2, 8))},
                            {"rationale", random_words(rng, 4)}});
        } else if (e.image()) {
            image.push_back({{"target", e.id},
                             {"opinion", "Picture " + random_words(rng, 2)},
                             {"preview", "a photo of " + random_words(rng, 3)},
                             {"rationale", random_words(rng, 4)}});
        }
    }
    return {{"text", text},
            {"image", image},
            {"theme",
             {{"opinion", random_words(rng, 3)},
              {"tone", pick(rng, std::vector<std::string>{"calm", "energetic", "festive", "minimal"})},
              {"color", pick(rng, std::vector<std::string>{"sage green", "orange and black", "pastel pink"})},
              {"rationale", random_words(rng, 4)}}}};
}

Json conclusion_payload(Rng& rng, const pc::feedback::FeedbackUnit& unit, bool theme_object) {
    Json preview;
    if (unit.kind == pc::feedback::FeedbackKind::Theme && theme_object)
        preview = {{"tone", "balanced"}, {"color", "warm neutrals"}};
    else if (unit.kind == pc::feedback::FeedbackKind::Image)
        preview = "a photo of " + random_words(rng, 3);
    else
        preview = random_words(rng, 6);
    return {{"target", unit.target},
            {"statement", "Settled: " + random_words(rng, 5)},
            {"summary", random_words(rng, 6)},
            {"preview", preview},
            {"omitted_personas", Json::array()}};
}

pc::persona::MarketingBrief text_brief(const std::string& text) {
    pc::persona::MarketingBrief b;
    b.pages.push_back({text});
    b.source_name = "brief.txt";
    return b;
}

std::string random_brief_text(Rng& rng, std::string* goal_out) {
    const std::string goal = "Promote the " + random_words(rng, 2) + " campaign #" + std::to_string(uniform(rng, 1, 9999));
    if (goal_out) *goal_out = goal;
    return "Campaign brief\nGoal: " + goal + "\nAudience: " + random_words(rng, 6) + "\nConstraints: " +
           random_words(rng, 4) + "\n";
}

void script_pipeline(pc::gateway::ScriptedBackend& backend, Rng& rng, const CanvasDocument& doc,
                     const std::string& goal, double density) {
    backend.script("brief.extract", extract_payload(goal, random_words(rng, 5)));
    backend.script("persona.dimensions", dimensions_payload(rng));
    std::vector<int> order{0, 1, 2, 3};
    std::shuffle(order.begin(), order.end(), rng);
    backend.script("persona.build", personas_payload(rng, order));
    for (int i = 0; i < 4; ++i) backend.script("feedback.persona", feedback_payload(rng, doc, density));
}

void script_round(pc::gateway::ScriptedBackend& backend, Rng& rng, const pc::feedback::FeedbackUnit& unit,
                  std::size_t conflicting) {
    for (std::size_t i = 0; i < conflicting; ++i)
        backend.script("discuss.question", Json{{"question", "Why " + random_words(rng, 4) + "?"}});
    for (std::size_t i = 0; i < conflicting; ++i)
        backend.script("discuss.answer", Json{{"answer", random_words(rng, 7)}});
    backend.script("discuss.conclude", conclusion_payload(rng, unit));
}

std::shared_ptr<pc::gateway::Gateway> make_gateway(std::shared_ptr<pc::gateway::ScriptedBackend> backend,
                                                   const fs::path& assets, bool fallback) {
    pc::gateway::GatewayOptions opts;
    opts.fallback = fallback;
    return std::make_shared<pc::gateway::Gateway>(std::move(backend), std::make_shared<pc::gateway::AssetStore>(assets),
                                                  opts);
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int run_command(const std::string& command, std::string* output) {
    FILE* p = popen((command + " 2>&1").c_str(), "r");
    if (!p) return -1;
    std::string out;
    std::array<char, 4096> buf{};
    while (std::size_t n = fread(buf.data(), 1, buf.size(), p)) out.append(buf.data(), n);
    const int status = pclose(p);
    if (output) *output = out;
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

} // namespace pctest
