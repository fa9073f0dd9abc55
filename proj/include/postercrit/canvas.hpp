#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "postercrit/image.hpp"

namespace postercrit::canvas {

using Json = nlohmann::json;

enum class ElementKind { Text, Image, Vector };

const char* to_string(ElementKind kind) noexcept;

struct TextPayload {
    std::string content;
    double font_size = 16;
    std::string font_family;
    std::string fill;

    bool operator==(const TextPayload&) const = default;
};

struct ImagePayload {
    std::string source;

    bool operator==(const ImagePayload&) const = default;
};

// Decoration drawn from SVG markup. z_hint records the list position the
// element had in the template it came from.
struct VectorPayload {
    std::string data;
    int z_hint = 0;

    bool operator==(const VectorPayload&) const = default;
};

struct Element {
    std::string id;
    double x = 0;
    double y = 0;
    double width = 0;
    double height = 0;
    double rotation = 0;
    std::variant<TextPayload, ImagePayload, VectorPayload> payload;
    // Keys not understood by this model, re-emitted verbatim.
    Json extra = Json::object();

    ElementKind kind() const noexcept { return static_cast<ElementKind>(payload.index()); }
    const TextPayload* text() const noexcept { return std::get_if<TextPayload>(&payload); }
    const ImagePayload* image() const noexcept { return std::get_if<ImagePayload>(&payload); }
    const VectorPayload* vector() const noexcept { return std::get_if<VectorPayload>(&payload); }

    bool operator==(const Element&) const = default;
};

struct CanvasDocument {
    int width = 0;
    int height = 0;
    int schema_version = 1;
    // Render order: later elements draw on top.
    std::vector<Element> elements;
    Json extra = Json::object();

    bool operator==(const CanvasDocument&) const = default;
};

struct Rect {
    double x = 0;
    double y = 0;
    double width = 0;
    double height = 0;

    double right() const noexcept { return x + width; }
    double bottom() const noexcept { return y + height; }
    double area() const noexcept { return width * height; }
    bool operator==(const Rect&) const = default;
};

enum class AdjustmentKind { Reposition, Resize };

struct Adjustment {
    std::string element_id;
    AdjustmentKind kind = AdjustmentKind::Reposition;
    std::optional<double> new_x;
    std::optional<double> new_y;
    std::optional<double> new_width;
    std::optional<double> new_height;
    std::optional<double> new_font_size;
    std::string note;

    bool operator==(const Adjustment&) const = default;
};

struct Overlap {
    std::string first;
    std::string second;
    double area = 0;

    bool operator==(const Overlap&) const = default;
};

inline constexpr double kDefaultOverlapFraction = 0.02;

// Throws ParseError (with byte offset) or Error{Validation}.
CanvasDocument parse_document(std::string_view serialized);
CanvasDocument document_from_json(const Json& json);
// Canonical form: sorted top-level keys, fixed element field order, integral
// numbers written without a fractional part.
std::string serialize_document(const CanvasDocument& doc);
Json document_to_json(const CanvasDocument& doc);

// Invariant check used by parse and by every API that accepts a document.
void validate(const CanvasDocument& doc);

const Element& find_element(const CanvasDocument& doc, std::string_view id);
std::optional<std::size_t> index_of(const CanvasDocument& doc, std::string_view id);

CanvasDocument set_text(const CanvasDocument& doc, std::string_view id, std::string content);
CanvasDocument set_image_source(const CanvasDocument& doc, std::string_view id, std::string source);
CanvasDocument apply_adjustment(const CanvasDocument& doc, const Adjustment& adj);
void validate(const Adjustment& adj);

Rect bounding_box(const Element& e);
Rect intersection(const Rect& a, const Rect& b);

std::vector<Overlap> detect_overlaps(const CanvasDocument& doc,
                                     double min_fraction = kDefaultOverlapFraction);
// Sum of pairwise intersection areas over non-vector elements, no threshold.
double total_overlap_area(const CanvasDocument& doc);

// Returns decoded pixels for an image source, or nullopt when unresolvable.
using AssetResolver = std::function<std::optional<Image>(std::string_view source)>;

Image rasterize(const CanvasDocument& doc, const AssetResolver& resolve = {});

inline constexpr Rgb kBackground{255, 255, 255};
inline constexpr Rgb kPlaceholder{200, 200, 200};
inline constexpr Rgb kTextBox{236, 236, 244};
inline constexpr Rgb kVectorOutline{120, 120, 120};

Json adjustment_to_json(const Adjustment& adj);
Adjustment adjustment_from_json(const Json& json);

} // namespace postercrit::canvas
