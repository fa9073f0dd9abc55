#include "postercrit/canvas.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <set>

#include "postercrit/error.hpp"

namespace postercrit::canvas {

const char* to_string(ElementKind kind) noexcept {
    switch (kind) {
    case ElementKind::Text: return "text";
    case ElementKind::Image: return "image";
    case ElementKind::Vector: return "svg";
    }
    return "?";
}

namespace {

const std::set<std::string, std::less<>> kCommonKeys{"id", "type", "x", "y", "width", "height", "rotation"};
const std::set<std::string, std::less<>> kTextKeys{"text", "fontSize", "fontFamily", "fill"};
const std::set<std::string, std::less<>> kImageKeys{"src"};
const std::set<std::string, std::less<>> kVectorKeys{"svgData", "zHint"};
const std::set<std::string, std::less<>> kDocumentKeys{"width", "height", "schemaVersion", "children"};

[[noreturn]] void invalid(const std::string& message, std::string subject = {}) {
    throw Error(ErrorCode::Validation, message, std::move(subject));
}

double number_field(const Json& obj, const char* key, double fallback, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return fallback;
    if (!it->is_number()) invalid(where + ": field '" + key + "' must be a number", key);
    return it->get<double>();
}

std::string string_field(const Json& obj, const char* key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return {};
    if (!it->is_string()) invalid(where + ": field '" + key + "' must be a string", key);
    return it->get<std::string>();
}

int int_field(const Json& obj, const char* key, int fallback, const std::string& where) {
    const double v = number_field(obj, key, fallback, where);
    if (v != std::floor(v) || std::abs(v) > 2147483647.0)
        invalid(where + ": field '" + key + "' must be an integer", key);
    return static_cast<int>(v);
}

Element element_from_json(const Json& obj, std::size_t index) {
    const std::string where = "children[" + std::to_string(index) + "]";
    if (!obj.is_object()) invalid(where + " is not an object");
    Element e;
    auto id = obj.find("id");
    if (id == obj.end() || !id->is_string()) invalid(where + ": missing string 'id'", "id");
    e.id = id->get<std::string>();
    const std::string type = string_field(obj, "type", where);
    e.x = number_field(obj, "x", 0, where);
    e.y = number_field(obj, "y", 0, where);
    e.width = number_field(obj, "width", 0, where);
    e.height = number_field(obj, "height", 0, where);
    e.rotation = number_field(obj, "rotation", 0, where);

    const std::set<std::string, std::less<>>* kind_keys = nullptr;
    if (type == "text") {
        TextPayload t;
        t.content = string_field(obj, "text", where);
        t.font_size = number_field(obj, "fontSize", 16, where);
        t.font_family = string_field(obj, "fontFamily", where);
        t.fill = string_field(obj, "fill", where);
        e.payload = std::move(t);
        kind_keys = &kTextKeys;
    } else if (type == "image") {
        e.payload = ImagePayload{string_field(obj, "src", where)};
        kind_keys = &kImageKeys;
    } else if (type == "svg") {
        e.payload = VectorPayload{string_field(obj, "svgData", where), int_field(obj, "zHint", 0, where)};
        kind_keys = &kVectorKeys;
    } else {
        invalid(where + ": unsupported element type '" + type + "'", e.id);
    }

    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (kCommonKeys.contains(it.key()) || kind_keys->contains(it.key())) continue;
        e.extra[it.key()] = it.value();
    }
    return e;
}

// Canonical emitter. Objects in `extra` come out key-sorted because Json is
// std::map-backed; integral numbers lose their fractional part.
void emit_number(std::string& out, double v) {
    if (std::isfinite(v) && v == std::floor(v) && std::abs(v) < 9.0e15) {
        out += std::to_string(static_cast<long long>(v));
    } else {
        out += Json(v).dump();
    }
}

void emit_indent(std::string& out, int depth) { out.append(static_cast<std::size_t>(depth) * 2, ' '); }

void emit_value(std::string& out, const Json& v, int depth);

void emit_key(std::string& out, const std::string& key, int depth) {
    emit_indent(out, depth);
    out += Json(key).dump();
    out += ": ";
}

void emit_value(std::string& out, const Json& v, int depth) {
    if (v.is_object()) {
        if (v.empty()) {
            out += "{}";
            return;
        }
        out += "{\n";
        bool first = true;
        for (auto it = v.begin(); it != v.end(); ++it) {
            if (!first) out += ",\n";
            first = false;
            emit_key(out, it.key(), depth + 1);
            emit_value(out, it.value(), depth + 1);
        }
        out += "\n";
        emit_indent(out, depth);
        out += "}";
    } else if (v.is_array()) {
        if (v.empty()) {
            out += "[]";
            return;
        }
        out += "[\n";
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (i) out += ",\n";
            emit_indent(out, depth + 1);
            emit_value(out, v[i], depth + 1);
        }
        out += "\n";
        emit_indent(out, depth);
        out += "]";
    } else if (v.is_number_float()) {
        emit_number(out, v.get<double>());
    } else {
        out += v.dump();
    }
}

void emit_element(std::string& out, const Element& e, int depth) {
    std::vector<std::pair<std::string, Json>> fields;
    fields.emplace_back("id", e.id);
    fields.emplace_back("type", to_string(e.kind()));
    fields.emplace_back("x", e.x);
    fields.emplace_back("y", e.y);
    fields.emplace_back("width", e.width);
    fields.emplace_back("height", e.height);
    fields.emplace_back("rotation", e.rotation);
    if (auto* t = e.text()) {
        fields.emplace_back("text", t->content);
        fields.emplace_back("fontSize", t->font_size);
        fields.emplace_back("fontFamily", t->font_family);
        fields.emplace_back("fill", t->fill);
    } else if (auto* i = e.image()) {
        fields.emplace_back("src", i->source);
    } else if (auto* v = e.vector()) {
        fields.emplace_back("svgData", v->data);
        fields.emplace_back("zHint", v->z_hint);
    }
    for (auto it = e.extra.begin(); it != e.extra.end(); ++it) fields.emplace_back(it.key(), it.value());

    out += "{\n";
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out += ",\n";
        emit_key(out, fields[i].first, depth + 1);
        emit_value(out, fields[i].second, depth + 1);
    }
    out += "\n";
    emit_indent(out, depth);
    out += "}";
}

Element& mutable_element(CanvasDocument& doc, std::string_view id) {
    for (auto& e : doc.elements)
        if (e.id == id) return e;
    throw Error(ErrorCode::NotFound, "no element with id '" + std::string(id) + "'", std::string(id));
}

bool finite_all(std::initializer_list<double> values) {
    return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

} // namespace

CanvasDocument document_from_json(const Json& json) {
    if (!json.is_object()) invalid("document must be a JSON object");
    CanvasDocument doc;
    doc.width = int_field(json, "width", 0, "document");
    doc.height = int_field(json, "height", 0, "document");
    doc.schema_version = int_field(json, "schemaVersion", 1, "document");
    if (auto it = json.find("children"); it != json.end()) {
        if (!it->is_array()) invalid("document: 'children' must be an array", "children");
        for (std::size_t i = 0; i < it->size(); ++i) doc.elements.push_back(element_from_json((*it)[i], i));
    }
    for (auto it = json.begin(); it != json.end(); ++it)
        if (!kDocumentKeys.contains(it.key())) doc.extra[it.key()] = it.value();
    validate(doc);
    return doc;
}

CanvasDocument parse_document(std::string_view serialized) {
    Json json;
    try {
        json = Json::parse(serialized.begin(), serialized.end());
    } catch (const Json::parse_error& e) {
        throw ParseError("malformed document JSON", e.byte);
    }
    return document_from_json(json);
}

void validate(const CanvasDocument& doc) {
    if (doc.width <= 0 || doc.height <= 0)
        invalid("page size must be positive, got " + std::to_string(doc.width) + "x" + std::to_string(doc.height));
    std::map<std::string, int> seen;
    for (const auto& e : doc.elements) {
        if (e.id.empty()) invalid("element with empty id");
        if (!finite_all({e.x, e.y, e.width, e.height, e.rotation}))
            invalid("element '" + e.id + "' has a non-finite coordinate", e.id);
        if (e.width < 0 || e.height < 0) invalid("element '" + e.id + "' has negative size", e.id);
        if (auto* t = e.text(); t && !(std::isfinite(t->font_size) && t->font_size >= 0))
            invalid("element '" + e.id + "' has an invalid font size", e.id);
        ++seen[e.id];
    }
    std::string duplicates;
    for (const auto& [id, count] : seen) {
        if (count < 2) continue;
        if (!duplicates.empty()) duplicates += ", ";
        duplicates += id;
    }
    if (!duplicates.empty()) invalid("duplicate element ids: " + duplicates, duplicates);
}

std::string serialize_document(const CanvasDocument& doc) {
    // Top-level keys in sorted order, extras merged in.
    std::map<std::string, std::function<void(std::string&)>> top;
    for (auto it = doc.extra.begin(); it != doc.extra.end(); ++it) {
        const Json& value = it.value();
        top[it.key()] = [&value](std::string& out) { emit_value(out, value, 1); };
    }
    top["width"] = [&](std::string& out) { out += std::to_string(doc.width); };
    top["height"] = [&](std::string& out) { out += std::to_string(doc.height); };
    top["schemaVersion"] = [&](std::string& out) { out += std::to_string(doc.schema_version); };
    top["children"] = [&](std::string& out) {
        if (doc.elements.empty()) {
            out += "[]";
            return;
        }
        out += "[\n";
        for (std::size_t i = 0; i < doc.elements.size(); ++i) {
            if (i) out += ",\n";
            emit_indent(out, 2);
            emit_element(out, doc.elements[i], 2);
        }
        out += "\n  ]";
    };

    std::string out = "{\n";
    bool first = true;
    for (const auto& [key, write] : top) {
        if (!first) out += ",\n";
        first = false;
        emit_key(out, key, 1);
        write(out);
    }
    out += "\n}\n";
    return out;
}

Json document_to_json(const CanvasDocument& doc) { return Json::parse(serialize_document(doc)); }

const Element& find_element(const CanvasDocument& doc, std::string_view id) {
    for (const auto& e : doc.elements)
        if (e.id == id) return e;
    throw Error(ErrorCode::NotFound, "no element with id '" + std::string(id) + "'", std::string(id));
}

std::optional<std::size_t> index_of(const CanvasDocument& doc, std::string_view id) {
    for (std::size_t i = 0; i < doc.elements.size(); ++i)
        if (doc.elements[i].id == id) return i;
    return std::nullopt;
}

CanvasDocument set_text(const CanvasDocument& doc, std::string_view id, std::string content) {
    CanvasDocument out = doc;
    Element& e = mutable_element(out, id);
    auto* t = std::get_if<TextPayload>(&e.payload);
    if (!t)
        throw Error(ErrorCode::KindMismatch,
                    "element '" + e.id + "' is " + to_string(e.kind()) + ", not text", e.id);
    t->content = std::move(content);
    return out;
}

CanvasDocument set_image_source(const CanvasDocument& doc, std::string_view id, std::string source) {
    CanvasDocument out = doc;
    Element& e = mutable_element(out, id);
    auto* i = std::get_if<ImagePayload>(&e.payload);
    if (!i)
        throw Error(ErrorCode::KindMismatch,
                    "element '" + e.id + "' is " + to_string(e.kind()) + ", not image", e.id);
    i->source = std::move(source);
    return out;
}

void validate(const Adjustment& adj) {
    const auto bad = [&](const std::string& why) {
        throw Error(ErrorCode::Validation, "inconsistent adjustment for '" + adj.element_id + "': " + why,
                    adj.element_id);
    };
    if (adj.element_id.empty()) bad("empty element id");
    if (adj.kind == AdjustmentKind::Reposition) {
        if (adj.new_width || adj.new_height || adj.new_font_size) bad("reposition carries size fields");
        if (!adj.new_x && !adj.new_y) bad("reposition carries no coordinates");
    } else {
        if (adj.new_x || adj.new_y) bad("resize carries coordinates");
        if (!adj.new_width && !adj.new_height && !adj.new_font_size) bad("resize carries no size fields");
    }
    for (auto v : {adj.new_x, adj.new_y, adj.new_width, adj.new_height, adj.new_font_size})
        if (v && !std::isfinite(*v)) bad("non-finite value");
    for (auto v : {adj.new_width, adj.new_height, adj.new_font_size})
        if (v && *v < 0) bad("negative size");
}

CanvasDocument apply_adjustment(const CanvasDocument& doc, const Adjustment& adj) {
    validate(adj);
    CanvasDocument out = doc;
    Element& e = mutable_element(out, adj.element_id);
    if (adj.new_font_size && !e.text())
        throw Error(ErrorCode::Validation, "font size adjustment on non-text element '" + e.id + "'", e.id);
    if (adj.new_x) e.x = *adj.new_x;
    if (adj.new_y) e.y = *adj.new_y;
    if (adj.new_width) e.width = *adj.new_width;
    if (adj.new_height) e.height = *adj.new_height;
    if (adj.new_font_size) std::get<TextPayload>(e.payload).font_size = *adj.new_font_size;
    return out;
}

Rect bounding_box(const Element& e) {
    double turns = std::fmod(e.rotation, 360.0);
    if (turns < 0) turns += 360.0;
    if (turns == 0.0 || turns == 180.0) return {e.x, e.y, e.width, e.height};
    const double cx = e.x + e.width / 2;
    const double cy = e.y + e.height / 2;
    if (turns == 90.0 || turns == 270.0)
        return {cx - e.height / 2, cy - e.width / 2, e.height, e.width};

    const double rad = turns * std::numbers::pi / 180.0;
    const double c = std::cos(rad);
    const double s = std::sin(rad);
    double min_x = INFINITY, min_y = INFINITY, max_x = -INFINITY, max_y = -INFINITY;
    for (const auto& [dx, dy] : std::array<std::pair<double, double>, 4>{
             {{-e.width / 2, -e.height / 2}, {e.width / 2, -e.height / 2}, {e.width / 2, e.height / 2},
              {-e.width / 2, e.height / 2}}}) {
        const double px = cx + dx * c - dy * s;
        const double py = cy + dx * s + dy * c;
        min_x = std::min(min_x, px);
        max_x = std::max(max_x, px);
        min_y = std::min(min_y, py);
        max_y = std::max(max_y, py);
    }
    return {min_x, min_y, max_x - min_x, max_y - min_y};
}

Rect intersection(const Rect& a, const Rect& b) {
    const double x0 = std::max(a.x, b.x);
    const double y0 = std::max(a.y, b.y);
    const double x1 = std::min(a.right(), b.right());
    const double y1 = std::min(a.bottom(), b.bottom());
    if (x1 <= x0 || y1 <= y0) return {x0, y0, 0, 0};
    return {x0, y0, x1 - x0, y1 - y0};
}

std::vector<Overlap> detect_overlaps(const CanvasDocument& doc, double min_fraction) {
    if (!(min_fraction >= 0 && min_fraction <= 1))
        throw Error(ErrorCode::Validation, "min_fraction must lie in [0,1]");
    std::vector<std::pair<const Element*, Rect>> boxes;
    for (const auto& e : doc.elements)
        if (e.kind() != ElementKind::Vector) boxes.emplace_back(&e, bounding_box(e));

    std::vector<Overlap> out;
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        for (std::size_t j = i + 1; j < boxes.size(); ++j) {
            const double area = intersection(boxes[i].second, boxes[j].second).area();
            const double smaller = std::min(boxes[i].second.area(), boxes[j].second.area());
            if (area <= 0 || area <= min_fraction * smaller) continue;
            auto a = boxes[i].first->id;
            auto b = boxes[j].first->id;
            if (b < a) std::swap(a, b);
            out.push_back({std::move(a), std::move(b), area});
        }
    }
    std::sort(out.begin(), out.end(), [](const Overlap& l, const Overlap& r) {
        return std::tie(l.first, l.second) < std::tie(r.first, r.second);
    });
    return out;
}

double total_overlap_area(const CanvasDocument& doc) {
    std::vector<Rect> boxes;
    for (const auto& e : doc.elements)
        if (e.kind() != ElementKind::Vector) boxes.push_back(bounding_box(e));
    double total = 0;
    for (std::size_t i = 0; i < boxes.size(); ++i)
        for (std::size_t j = i + 1; j < boxes.size(); ++j) total += intersection(boxes[i], boxes[j]).area();
    return total;
}

namespace {

// A pixel belongs to a box when its center lies inside the half-open box.
struct PixelSpan {
    int x0, y0, x1, y1;
};

PixelSpan pixel_span(const Rect& r) {
    return {static_cast<int>(std::ceil(r.x - 0.5)), static_cast<int>(std::ceil(r.y - 0.5)),
            static_cast<int>(std::ceil(r.right() - 0.5)), static_cast<int>(std::ceil(r.bottom() - 0.5))};
}

int hex_digit(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

Rgb parse_fill(const std::string& fill) {
    if (fill.size() == 7 && fill[0] == '#') {
        int v[6];
        for (int i = 0; i < 6; ++i)
            if ((v[i] = hex_digit(fill[i + 1])) < 0) return {0, 0, 0};
        return {static_cast<std::uint8_t>(v[0] * 16 + v[1]), static_cast<std::uint8_t>(v[2] * 16 + v[3]),
                static_cast<std::uint8_t>(v[4] * 16 + v[5])};
    }
    if (fill.size() == 4 && fill[0] == '#') {
        int v[3];
        for (int i = 0; i < 3; ++i)
            if ((v[i] = hex_digit(fill[i + 1])) < 0) return {0, 0, 0};
        return {static_cast<std::uint8_t>(v[0] * 17), static_cast<std::uint8_t>(v[1] * 17),
                static_cast<std::uint8_t>(v[2] * 17)};
    }
    if (fill == "white") return {255, 255, 255};
    return {0, 0, 0};
}

void draw_text(Image& img, const PixelSpan& box, const TextPayload& t) {
    img.fill_rect(box.x0, box.y0, box.x1, box.y1, kTextBox);
    const double size = std::max(1.0, t.font_size);
    const double line_height = size * 1.2;
    const int bar = std::max(1, static_cast<int>(std::lround(size * 0.6)));
    const double char_width = size * 0.55;
    const int box_w = box.x1 - box.x0;
    if (box_w <= 0 || t.content.empty()) return;
    const auto per_line = std::max<std::size_t>(1, static_cast<std::size_t>(box_w / char_width));
    std::size_t remaining = t.content.size();
    const Rgb ink = parse_fill(t.fill);
    for (int line = 0; remaining > 0; ++line) {
        const int top = box.y0 + static_cast<int>(line * line_height + (line_height - bar) / 2);
        if (top + bar > box.y1) break;
        const std::size_t chars = std::min(remaining, per_line);
        const int width = std::min(box_w, static_cast<int>(std::lround(chars * char_width)));
        img.fill_rect(box.x0, top, box.x0 + width, top + bar, ink);
        remaining -= chars;
    }
}

void draw_image(Image& img, const PixelSpan& box, const std::optional<Image>& src) {
    if (!src || src->empty()) {
        img.fill_rect(box.x0, box.y0, box.x1, box.y1, kPlaceholder);
        return;
    }
    const int w = box.x1 - box.x0;
    const int h = box.y1 - box.y0;
    for (int y = std::max(0, box.y0); y < std::min(img.height, box.y1); ++y) {
        const int sy = static_cast<int>(static_cast<long long>(y - box.y0) * src->height / h);
        for (int x = std::max(0, box.x0); x < std::min(img.width, box.x1); ++x) {
            const int sx = static_cast<int>(static_cast<long long>(x - box.x0) * src->width / w);
            img.set(x, y, src->at(sx, sy));
        }
    }
}

void draw_outline(Image& img, const PixelSpan& box) {
    if (box.x1 <= box.x0 || box.y1 <= box.y0) return;
    img.fill_rect(box.x0, box.y0, box.x1, box.y0 + 1, kVectorOutline);
    img.fill_rect(box.x0, box.y1 - 1, box.x1, box.y1, kVectorOutline);
    img.fill_rect(box.x0, box.y0, box.x0 + 1, box.y1, kVectorOutline);
    img.fill_rect(box.x1 - 1, box.y0, box.x1, box.y1, kVectorOutline);
}

} // namespace

Image rasterize(const CanvasDocument& doc, const AssetResolver& resolve) {
    if (doc.width <= 0 || doc.height <= 0) invalid("cannot rasterize a page with non-positive size");
    Image img(doc.width, doc.height, kBackground);
    for (const auto& e : doc.elements) {
        const PixelSpan box = pixel_span(bounding_box(e));
        if (auto* t = e.text()) {
            draw_text(img, box, *t);
        } else if (auto* i = e.image()) {
            draw_image(img, box, resolve && !i->source.empty() ? resolve(i->source) : std::nullopt);
        } else {
            draw_outline(img, box);
        }
    }
    return img;
}

Json adjustment_to_json(const Adjustment& adj) {
    Json j{{"element_id", adj.element_id},
           {"kind", adj.kind == AdjustmentKind::Reposition ? "reposition" : "resize"},
           {"note", adj.note}};
    if (adj.new_x) j["new_x"] = *adj.new_x;
    if (adj.new_y) j["new_y"] = *adj.new_y;
    if (adj.new_width) j["new_width"] = *adj.new_width;
    if (adj.new_height) j["new_height"] = *adj.new_height;
    if (adj.new_font_size) j["new_font_size"] = *adj.new_font_size;
    return j;
}

Adjustment adjustment_from_json(const Json& j) {
    if (!j.is_object()) invalid("adjustment must be an object");
    Adjustment adj;
    adj.element_id = j.value("element_id", "");
    const std::string kind = j.value("kind", "");
    if (kind == "reposition") {
        adj.kind = AdjustmentKind::Reposition;
    } else if (kind == "resize") {
        adj.kind = AdjustmentKind::Resize;
    } else {
        invalid("adjustment kind must be reposition or resize", "kind");
    }
    const auto opt = [&](const char* key) -> std::optional<double> {
        auto it = j.find(key);
        if (it == j.end() || it->is_null()) return std::nullopt;
        if (!it->is_number()) invalid(std::string("adjustment field '") + key + "' must be a number", key);
        return it->get<double>();
    };
    adj.new_x = opt("new_x");
    adj.new_y = opt("new_y");
    adj.new_width = opt("new_width");
    adj.new_height = opt("new_height");
    adj.new_font_size = opt("new_font_size");
    adj.note = j.value("note", "");
    return adj;
}

} // namespace postercrit::canvas
