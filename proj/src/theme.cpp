#include "postercrit/theme.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>

namespace postercrit::theme {

using canvas::Element;
using canvas::ElementKind;
using gateway::Json;

const ThemeTemplate& TemplateIndex::find(std::string_view template_id) const {
    for (const auto& entry : entries)
        if (entry.template_id == template_id) return entry;
    throw Error(ErrorCode::NotFound, "no template '" + std::string(template_id) + "' in the index",
                std::string(template_id));
}

void TemplateIndex::validate() const {
    std::set<std::string_view> ids;
    for (const auto& entry : entries) {
        if (entry.embedding.dimension() != dimension)
            throw Error(ErrorCode::Validation,
                        "template '" + entry.template_id + "' has dimension " +
                            std::to_string(entry.embedding.dimension()) + ", index has " + std::to_string(dimension),
                        entry.template_id);
        if (!ids.insert(entry.template_id).second)
            throw Error(ErrorCode::Validation, "duplicate template id '" + entry.template_id + "'", entry.template_id);
    }
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dimension() != b.dimension())
        throw Error(ErrorCode::Validation, "embedding dimensions differ: " + std::to_string(a.dimension()) + " vs " +
                                               std::to_string(b.dimension()));
    double dot = 0;
    for (std::size_t i = 0; i < a.values.size(); ++i) dot += a.values[i] * b.values[i];
    return std::clamp(dot, -1.0, 1.0);
}

ThemeTemplate make_template(const gateway::Gateway& gw, std::string template_id, CanvasDocument document) {
    canvas::validate(document);
    const Image rendered = canvas::rasterize(document, [&](std::string_view src) { return gw.resolve_asset(src); });
    ThemeTemplate t;
    t.template_id = std::move(template_id);
    t.embedding = gw.embed_image(rendered);
    t.preview_image = gw.assets().put(rendered);
    t.document = std::move(document);
    return t;
}

namespace {

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string(), path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::filesystem::path> corpus_files(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir))
        throw Error(ErrorCode::Io, "template corpus " + dir.string() + " is not a directory", dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    return files;
}

} // namespace

IngestResult ingest_templates(const gateway::Gateway& gw, const std::filesystem::path& corpus_dir) {
    const auto files = corpus_files(corpus_dir);
    std::vector<std::optional<CanvasDocument>> docs(files.size());
    IngestResult result;
    for (std::size_t i = 0; i < files.size(); ++i) {
        try {
            docs[i] = canvas::parse_document(read_text(files[i]));
            canvas::validate(*docs[i]);
        } catch (const Error& e) {
            docs[i].reset();
            result.warnings.push_back(files[i].filename().string() + ": " + e.what());
        }
    }
    std::vector<std::optional<ThemeTemplate>> built(files.size());
    const auto errors = gw.fan_out(files.size(), [&](std::size_t i) {
        if (docs[i]) built[i] = make_template(gw, files[i].stem().string(), *docs[i]);
    });
    for (std::size_t i = 0; i < files.size(); ++i) {
        if (errors[i]) std::rethrow_exception(errors[i]);
        if (built[i]) result.index.entries.push_back(std::move(*built[i]));
    }
    if (result.index.entries.empty())
        throw Error(ErrorCode::Validation, "template corpus " + corpus_dir.string() + " has no usable templates",
                    corpus_dir.string());
    result.index.embedder_id = gw.backend().embedder_id();
    result.index.dimension = result.index.entries.front().embedding.dimension();
    result.index.validate();
    return result;
}

namespace {

constexpr char kMagic[8] = {'P', 'C', 'T', 'I', 'D', 'X', '1', '\0'};
constexpr std::uint32_t kIndexVersion = 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double d) {
    const auto v = std::bit_cast<std::uint64_t>(d);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_string(std::vector<std::uint8_t>& out, const std::string& s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.insert(out.end(), s.begin(), s.end());
}

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::span<const std::uint8_t> take(std::size_t n) {
        if (bytes_.size() - pos_ < n) throw ParseError("truncated template index", pos_);
        auto s = bytes_.subspan(pos_, n);
        pos_ += n;
        return s;
    }
    std::uint32_t u32() {
        auto s = take(4);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) v = (v << 8) | s[static_cast<std::size_t>(i)];
        return v;
    }
    double f64() {
        auto s = take(8);
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i) v = (v << 8) | s[static_cast<std::size_t>(i)];
        return std::bit_cast<double>(v);
    }
    std::string string() {
        const auto n = u32();
        auto s = take(n);
        return {s.begin(), s.end()};
    }
    std::size_t pos() const noexcept { return pos_; }
    bool done() const noexcept { return pos_ == bytes_.size(); }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

} // namespace

std::vector<std::uint8_t> encode_index(const TemplateIndex& index) {
    index.validate();
    std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
    put_u32(out, kIndexVersion);
    put_string(out, index.embedder_id);
    put_u32(out, static_cast<std::uint32_t>(index.dimension));
    put_u32(out, static_cast<std::uint32_t>(index.entries.size()));
    for (const auto& entry : index.entries) {
        put_string(out, entry.template_id);
        for (double v : entry.embedding.values) put_f64(out, v);
    }
    return out;
}

TemplateIndex decode_index(std::span<const std::uint8_t> bytes, const std::optional<std::filesystem::path>& corpus_dir) {
    Reader r(bytes);
    const auto magic = r.take(sizeof kMagic);
    if (!std::equal(magic.begin(), magic.end(), std::begin(kMagic))) throw ParseError("not a template index", 0);
    if (const auto version = r.u32(); version != kIndexVersion)
        throw ParseError("unsupported template index version " + std::to_string(version), 8);
    TemplateIndex index;
    index.embedder_id = r.string();
    index.dimension = r.u32();
    const auto count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
        ThemeTemplate entry;
        entry.template_id = r.string();
        entry.embedding.values.resize(index.dimension);
        for (auto& v : entry.embedding.values) v = r.f64();
        if (corpus_dir) entry.document = canvas::parse_document(read_text(*corpus_dir / (entry.template_id + ".json")));
        index.entries.push_back(std::move(entry));
    }
    if (!r.done()) throw ParseError("trailing bytes after template index", r.pos());
    index.validate();
    return index;
}

void save_index(const TemplateIndex& index, const std::filesystem::path& path) {
    const auto bytes = encode_index(index);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string(), path.string());
}

TemplateIndex load_index(const std::filesystem::path& path, const std::optional<std::filesystem::path>& corpus_dir) {
    const std::string raw = read_text(path);
    return decode_index(std::span(reinterpret_cast<const std::uint8_t*>(raw.data()), raw.size()), corpus_dir);
}

std::string probe_prompt(const ThemeDescriptor& descriptor) {
    return "poster design, tone: " + descriptor.tone + ", colors: " + descriptor.color;
}

std::vector<RankedTemplate> rank(const TemplateIndex& index, const EmbeddingVector& probe, std::size_t k) {
    std::vector<RankedTemplate> ranked;
    ranked.reserve(index.entries.size());
    for (const auto& entry : index.entries)
        ranked.push_back({entry.template_id, cosine_similarity(probe, entry.embedding)});
    const auto before = [](const RankedTemplate& a, const RankedTemplate& b) {
        if (a.similarity != b.similarity) return a.similarity > b.similarity;
        return a.template_id < b.template_id;
    };
    k = std::min(k, ranked.size());
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(k), ranked.end(), before);
    ranked.resize(k);
    return ranked;
}

RankedTemplates query_templates(const gateway::Gateway& gw, const TemplateIndex& index,
                                const ThemeDescriptor& descriptor, int k) {
    if (k < 1) throw Error(ErrorCode::Validation, "k must be at least 1", "k");
    if (index.entries.empty()) throw Error(ErrorCode::Validation, "template index is empty");
    const std::string asset = gw.generate_image("theme.probe", probe_prompt(descriptor));
    const auto probe_image = gw.resolve_asset(asset);
    if (!probe_image) throw Error(ErrorCode::Io, "probe image " + asset + " vanished from the asset store", asset);
    const auto probe = gw.embed_image(*probe_image);
    if (probe.dimension() != index.dimension)
        throw Error(ErrorCode::Validation, "embedder dimension " + std::to_string(probe.dimension()) +
                                               " does not match index dimension " + std::to_string(index.dimension));
    return {descriptor, rank(index, probe, static_cast<std::size_t>(k))};
}

Extracted extract_embellishments(const CanvasDocument& templ) {
    Extracted out{templ, {}};
    out.stripped.elements.clear();
    for (std::size_t i = 0; i < templ.elements.size(); ++i) {
        const auto& e = templ.elements[i];
        if (e.kind() == ElementKind::Vector)
            out.embellishments.push_back({e, static_cast<int>(i)});
        else
            out.stripped.elements.push_back(e);
    }
    return out;
}

CanvasDocument reinsert_embellishments(const CanvasDocument& doc, const std::vector<Embellishment>& embellishments) {
    auto sorted = embellishments;
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const Embellishment& a, const Embellishment& b) { return a.z_hint < b.z_hint; });
    CanvasDocument out = doc;
    for (const auto& emb : sorted) {
        const auto at = std::min<std::size_t>(static_cast<std::size_t>(std::max(emb.z_hint, 0)), out.elements.size());
        out.elements.insert(out.elements.begin() + static_cast<std::ptrdiff_t>(at), emb.element);
    }
    return out;
}

namespace {

bool is_content(const Element& e) { return e.kind() == ElementKind::Text || e.kind() == ElementKind::Image; }

std::vector<std::size_t> reading_order(const CanvasDocument& doc, ElementKind kind) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < doc.elements.size(); ++i)
        if (doc.elements[i].kind() == kind) idx.push_back(i);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        const auto& ea = doc.elements[a];
        const auto& eb = doc.elements[b];
        return std::tie(ea.y, ea.x, a) < std::tie(eb.y, eb.x, b);
    });
    return idx;
}

// template slot index -> original element index
using Assignment = std::map<std::size_t, std::size_t>;

Assignment heuristic_assignment(const CanvasDocument& original, const CanvasDocument& stripped) {
    Assignment a;
    for (auto kind : {ElementKind::Text, ElementKind::Image}) {
        const auto from = reading_order(original, kind);
        const auto to = reading_order(stripped, kind);
        for (std::size_t i = 0; i < std::min(from.size(), to.size()); ++i) a[to[i]] = from[i];
    }
    return a;
}

std::string map_instructions() {
    return "You are restyling an advertisement poster with a theme template. Map each text and image component of "
           "the original poster to the template slot that should hold its content. Only pair components of the same "
           "kind, use each id at most once, and leave out pairs that do not fit. Reply with JSON: {\"assignments\": "
           "[{\"original_id\": str, \"template_id\": str}]}.";
}

Assignment model_assignment(const gateway::Gateway& gw, const CanvasDocument& original,
                            const CanvasDocument& stripped) {
    gateway::ModelRequest req;
    req.tag = "theme.map";
    req.schema_id = "theme.map";
    req.system_text = map_instructions();
    req.user_parts.emplace_back("Original poster (JSON):\n" + canvas::serialize_document(original));
    req.user_parts.emplace_back("Template (JSON):\n" + canvas::serialize_document(stripped));
    const auto response = gw.complete_structured(req);

    Assignment a;
    std::set<std::size_t> used_originals;
    for (const auto& entry : response.payload.at("assignments")) {
        const auto oid = entry.at("original_id").get<std::string>();
        const auto tid = entry.at("template_id").get<std::string>();
        const auto oi = canvas::index_of(original, oid);
        if (!oi || !is_content(original.elements[*oi]))
            throw Error(ErrorCode::Schema, "mapping names unknown original component '" + oid + "'", oid);
        const auto ti = canvas::index_of(stripped, tid);
        if (!ti) throw Error(ErrorCode::Schema, "mapping names unknown template slot '" + tid + "'", tid);
        if (original.elements[*oi].kind() != stripped.elements[*ti].kind())
            throw Error(ErrorCode::Schema, "mapping pairs '" + oid + "' with a slot of another kind", oid);
        if (a.count(*ti) || !used_originals.insert(*oi).second)
            throw Error(ErrorCode::Schema, "mapping reuses '" + (a.count(*ti) ? tid : oid) + "'",
                        a.count(*ti) ? tid : oid);
        a[*ti] = *oi;
    }
    return a;
}

// Style of the median-sized text slot, for content the template has no slot for.
std::optional<canvas::TextPayload> median_text_style(const CanvasDocument& stripped) {
    std::vector<const canvas::TextPayload*> slots;
    for (const auto& e : stripped.elements)
        if (auto* t = e.text()) slots.push_back(t);
    if (slots.empty()) return std::nullopt;
    std::stable_sort(slots.begin(), slots.end(),
                     [](const auto* a, const auto* b) { return a->font_size < b->font_size; });
    return *slots[(slots.size() - 1) / 2];
}

CanvasDocument map_stripped(const gateway::Gateway& gw, const CanvasDocument& original,
                            const CanvasDocument& stripped) {
    const Assignment assignment =
        gw.options().fallback ? heuristic_assignment(original, stripped) : model_assignment(gw, original, stripped);

    CanvasDocument out;
    out.width = stripped.width;
    out.height = stripped.height;
    out.schema_version = original.schema_version;
    out.extra = original.extra;

    std::set<std::size_t> placed;
    for (std::size_t ti = 0; ti < stripped.elements.size(); ++ti) {
        auto it = assignment.find(ti);
        if (it == assignment.end()) continue;
        const auto& slot = stripped.elements[ti];
        const auto& src = original.elements[it->second];
        Element e = slot;
        e.id = src.id;
        e.extra = src.extra;
        if (auto* t = src.text()) {
            std::get<canvas::TextPayload>(e.payload).content = t->content;
        } else {
            e.payload = *src.image();
        }
        out.elements.push_back(std::move(e));
        placed.insert(it->second);
    }

    const double sx = static_cast<double>(stripped.width) / original.width;
    const double sy = static_cast<double>(stripped.height) / original.height;
    const auto style = median_text_style(stripped);
    for (std::size_t oi = 0; oi < original.elements.size(); ++oi) {
        const auto& src = original.elements[oi];
        if (!is_content(src) || placed.count(oi)) continue;
        Element e = src;
        e.x = src.x * sx;
        e.y = src.y * sy;
        e.width = src.width * sx;
        e.height = src.height * sy;
        if (auto* t = src.text()) {
            canvas::TextPayload restyled = style ? *style : *t;
            restyled.content = t->content;
            if (!style) restyled.font_size = t->font_size * std::min(sx, sy);
            e.payload = restyled;
        }
        out.elements.push_back(std::move(e));
    }
    return out;
}

} // namespace

CanvasDocument map_components(const gateway::Gateway& gw, const CanvasDocument& original,
                              const CanvasDocument& templ) {
    canvas::validate(original);
    canvas::validate(templ);
    auto extracted = extract_embellishments(templ);
    CanvasDocument mapped = map_stripped(gw, original, extracted.stripped);
    std::set<std::string> taken;
    for (const auto& e : mapped.elements) taken.insert(e.id);
    for (auto& emb : extracted.embellishments) {
        while (taken.count(emb.element.id)) emb.element.id += "~theme";
        taken.insert(emb.element.id);
    }
    return reinsert_embellishments(mapped, extracted.embellishments);
}

namespace {

std::string overlap_instructions() {
    return "You check an advertisement poster for visual overlap between its text and image components. Decorative "
           "vector elements may overlap freely. For each component that must change, either reposition it (new_x and "
           "new_y) or resize it (new_width, new_height or new_font_size), with a one-line note. Return an empty list "
           "when no further change is needed. Reply with JSON: {\"adjustments\": [{\"element_id\": str, \"kind\": "
           "\"reposition\"|\"resize\", \"new_x\"?: num, \"new_y\"?: num, \"new_width\"?: num, \"new_height\"?: num, "
           "\"new_font_size\"?: num, \"note\": str}]}.";
}

std::vector<canvas::Adjustment> model_round(const gateway::Gateway& gw, const CanvasDocument& doc) {
    gateway::ModelRequest req;
    req.tag = "theme.overlap";
    req.schema_id = "theme.overlap";
    req.system_text = overlap_instructions();
    req.user_parts.emplace_back("Poster (JSON):\n" + canvas::serialize_document(doc));
    Json pairs = Json::array();
    for (const auto& o : canvas::detect_overlaps(doc)) pairs.push_back({o.first, o.second, o.area});
    req.user_parts.emplace_back("Overlapping pairs by bounding box [first, second, area]: " + pairs.dump());
    req.user_parts.emplace_back(canvas::rasterize(doc, [&](std::string_view src) { return gw.resolve_asset(src); }));
    const auto response = gw.complete_structured(req);
    std::vector<canvas::Adjustment> out;
    for (const auto& j : response.payload.at("adjustments")) {
        auto adj = canvas::adjustment_from_json(j);
        if (!canvas::index_of(doc, adj.element_id))
            throw Error(ErrorCode::Schema, "adjustment names unknown element '" + adj.element_id + "'",
                        adj.element_id);
        out.push_back(std::move(adj));
    }
    return out;
}

bool inside_page(const CanvasDocument& doc, const Element& e) {
    const auto box = canvas::bounding_box(e);
    return box.x >= 0 && box.y >= 0 && box.right() <= doc.width && box.bottom() <= doc.height;
}

// Moves the upper element of each overlapping pair below or beside the lower
// one, keeping only moves that shrink the total overlap.
std::vector<canvas::Adjustment> heuristic_round(CanvasDocument& doc) {
    std::vector<canvas::Adjustment> applied;
    for (const auto& pair : canvas::detect_overlaps(doc)) {
        const auto ia = *canvas::index_of(doc, pair.first);
        const auto ib = *canvas::index_of(doc, pair.second);
        const auto& below = doc.elements[std::min(ia, ib)];
        const auto& above = doc.elements[std::max(ia, ib)];
        const auto a = canvas::bounding_box(below);
        const auto b = canvas::bounding_box(above);
        if (canvas::intersection(a, b).area() <= 0) continue;

        const double current = canvas::total_overlap_area(doc);
        canvas::Adjustment down{above.id, canvas::AdjustmentKind::Reposition, above.x, above.y + (a.bottom() - b.y),
                                {}, {}, {}, "moved below " + below.id};
        canvas::Adjustment right{above.id, canvas::AdjustmentKind::Reposition, above.x + (a.right() - b.x), above.y,
                                 {}, {}, {}, "moved right of " + below.id};
        std::optional<std::tuple<bool, double, int>> best_key;
        std::optional<CanvasDocument> best_doc;
        std::optional<canvas::Adjustment> best_adj;
        int order = 0;
        for (const auto& candidate : {down, right}) {
            auto moved = canvas::apply_adjustment(doc, candidate);
            const double total = canvas::total_overlap_area(moved);
            if (total >= current) {
                ++order;
                continue;
            }
            const bool outside = !inside_page(moved, moved.elements[std::max(ia, ib)]);
            const std::tuple<bool, double, int> key{outside, total, order++};
            if (!best_key || key < *best_key) {
                best_key = key;
                best_doc = std::move(moved);
                best_adj = candidate;
            }
        }
        if (best_doc) {
            doc = std::move(*best_doc);
            applied.push_back(std::move(*best_adj));
        }
    }
    return applied;
}

} // namespace

OverlapResolution resolve_overlaps(const gateway::Gateway& gw, const CanvasDocument& doc, int max_rounds) {
    if (max_rounds < 1) throw Error(ErrorCode::Validation, "max_rounds must be at least 1", "max_rounds");
    OverlapResolution out{doc, {}, 0, {canvas::total_overlap_area(doc)}, false};
    while (out.rounds < max_rounds) {
        ++out.rounds;
        std::vector<canvas::Adjustment> round;
        if (gw.options().fallback) {
            round = heuristic_round(out.document);
        } else {
            round = model_round(gw, out.document);
            for (const auto& adj : round) out.document = canvas::apply_adjustment(out.document, adj);
        }
        out.overlap_areas.push_back(canvas::total_overlap_area(out.document));
        if (round.empty()) {
            out.complete = true;
            break;
        }
        out.adjustments.insert(out.adjustments.end(), round.begin(), round.end());
    }
    return out;
}

OverlapResolution apply_theme(const gateway::Gateway& gw, const CanvasDocument& doc, const CanvasDocument& templ,
                              int max_rounds) {
    return resolve_overlaps(gw, map_components(gw, doc, templ), max_rounds);
}

Json to_json(const RankedTemplates& ranked) {
    Json list = Json::array();
    for (const auto& r : ranked.ranked) list.push_back({{"template_id", r.template_id}, {"similarity", r.similarity}});
    return {{"query", feedback::to_json(feedback::Preview(ranked.query))}, {"ranked", list}};
}

} // namespace postercrit::theme
