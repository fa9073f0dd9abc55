#include <set>
#include <sstream>

#include "postercrit/gateway.hpp"

namespace postercrit::gateway {

namespace {

using Problem = std::optional<std::string>;

Problem need_object(const Json& j, const std::string& where) {
    if (!j.is_object()) return where + " must be an object";
    return std::nullopt;
}

Problem need_string(const Json& obj, const char* key, const std::string& where, bool non_empty) {
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_string()) return where + "." + key + " must be a string";
    if (non_empty && it->get<std::string>().empty()) return where + "." + key + " must not be empty";
    return std::nullopt;
}

Problem need_array(const Json& obj, const char* key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_array()) return where + "." + key + " must be an array";
    return std::nullopt;
}

Problem need_strings(const Json& obj, std::initializer_list<const char*> keys, const std::string& where,
                     bool non_empty) {
    for (const char* key : keys)
        if (auto p = need_string(obj, key, where, non_empty)) return p;
    return std::nullopt;
}

Problem brief_extract(const Json& j) {
    if (auto p = need_object(j, "response")) return p;
    if (auto p = need_string(j, "goal", "response", true)) return p;
    if (auto p = need_string(j, "audience_summary", "response", false)) return p;
    if (auto p = need_array(j, "constraints", "response")) return p;
    for (const auto& c : j["constraints"])
        if (!c.is_string()) return std::string("response.constraints must hold strings");
    if (j.contains("ocr_text") && !j["ocr_text"].is_string()) return std::string("response.ocr_text must be a string");
    return std::nullopt;
}

Problem persona_dimensions(const Json& j) {
    if (auto p = need_object(j, "response")) return p;
    if (auto p = need_array(j, "dimensions", "response")) return p;
    const auto& dims = j["dimensions"];
    if (dims.size() != 2) return "expected exactly 2 dimensions, got " + std::to_string(dims.size());
    std::set<std::string> labels;
    for (std::size_t i = 0; i < dims.size(); ++i) {
        const std::string where = "dimensions[" + std::to_string(i) + "]";
        if (auto p = need_object(dims[i], where)) return p;
        if (auto p = need_strings(dims[i], {"name", "low_label", "high_label"}, where, true)) return p;
        if (!dims[i].contains("from_brief") || !dims[i]["from_brief"].is_boolean())
            return where + ".from_brief must be a boolean";
        for (const char* key : {"low_label", "high_label"})
            if (!labels.insert(dims[i][key].get<std::string>()).second)
                return "duplicate dimension label '" + dims[i][key].get<std::string>() + "'";
    }
    return std::nullopt;
}

Problem persona_build(const Json& j) {
    if (auto p = need_object(j, "response")) return p;
    if (auto p = need_array(j, "personas", "response")) return p;
    const auto& personas = j["personas"];
    if (personas.size() != 4) return "expected exactly 4 personas, got " + std::to_string(personas.size());
    std::set<std::pair<std::string, std::string>> coords;
    for (std::size_t i = 0; i < personas.size(); ++i) {
        const std::string where = "personas[" + std::to_string(i) + "]";
        const auto& p = personas[i];
        if (auto e = need_object(p, where)) return e;
        if (auto e = need_strings(p,
                                  {"name", "summary", "background", "motivation", "pain_point", "need", "quote",
                                   "rationale"},
                                  where, true))
            return e;
        std::istringstream words(p["name"].get<std::string>());
        std::size_t count = 0;
        for (std::string w; words >> w;) ++count;
        if (count != 2) return where + ".name must be exactly two words";
        for (const char* key : {"dim1", "dim2"}) {
            if (auto e = need_string(p, key, where, true)) return e;
            const auto level = p[key].get<std::string>();
            if (level != "low" && level != "high") return where + "." + key + " must be \"low\" or \"high\"";
        }
        if (!coords.emplace(p["dim1"].get<std::string>(), p["dim2"].get<std::string>()).second)
            return "two personas share the coordinates (" + p["dim1"].get<std::string>() + ", " +
                   p["dim2"].get<std::string>() + ")";
    }
    return std::nullopt;
}

Problem component_list(const Json& j, const char* key) {
    if (auto p = need_array(j, key, "response")) return p;
    const auto& list = j[key];
    for (std::size_t i = 0; i < list.size(); ++i) {
        const std::string where = std::string(key) + "[" + std::to_string(i) + "]";
        if (auto p = need_object(list[i], where)) return p;
        if (auto p = need_strings(list[i], {"target", "opinion", "preview", "rationale"}, where, false)) return p;
    }
    return std::nullopt;
}

Problem feedback_persona(const Json& j) {
    if (auto p = need_object(j, "response")) return p;
    if (auto p = component_list(j, "text")) return p;
    if (auto p = component_list(j, "image")) return p;
    if (!j.contains("theme")) return std::string("response.theme is required");
    if (auto p = need_object(j["theme"], "theme")) return p;
    return need_strings(j["theme"], {"opinion", "tone", "color", "rationale"}, "theme", false);
}

Problem discuss_detect(const Json& j) {
    if (auto p = need_object(j, "response")) return p;
    if (!j.contains("conflict") || !j["conflict"].is_boolean()) return std::string("response.conflict must be a boolean");
    if (!j["conflict"].get<bool>()) return std::nullopt;
    if (auto p = need_string(j, "summary", "response", true)) return p;
    if (auto p = need_array(j, "item_ids", "response")) return p;
    if (j["item_ids"].size() < 2) return std::string("a conflict needs at least 2 item_ids");
    for (const auto& id : j["item_ids"])
        if (!id.is_string()) return std::string("response.item_ids must hold strings");
    return std::nullopt;
}

Problem single_text(const Json& j, const char* key) {
    if (auto p = need_object(j, "response")) return p;
    return need_string(j, key, "response", true);
}

Problem discuss_conclude(const Json& j) {
    if (auto p = need_object(j, "response")) return p;
    if (auto p = need_strings(j, {"target", "statement", "summary"}, "response", true)) return p;
    if (!j.contains("preview")) return std::string("response.preview is required");
    const auto& preview = j["preview"];
    if (preview.is_object()) {
        if (auto p = need_strings(preview, {"tone", "color"}, "preview", false)) return p;
    } else if (!preview.is_string()) {
        return std::string("response.preview must be a string or a {tone, color} object");
    }
    if (auto p = need_array(j, "omitted_personas", "response")) return p;
    for (const auto& id : j["omitted_personas"])
        if (!id.is_string()) return std::string("response.omitted_personas must hold strings");
    return std::nullopt;
}

Problem theme_map(const Json& j) {
    if (auto p = need_object(j, "response")) return p;
    if (auto p = need_array(j, "assignments", "response")) return p;
    for (std::size_t i = 0; i < j["assignments"].size(); ++i) {
        const std::string where = "assignments[" + std::to_string(i) + "]";
        if (auto p = need_object(j["assignments"][i], where)) return p;
        if (auto p = need_strings(j["assignments"][i], {"original_id", "template_id"}, where, true)) return p;
    }
    return std::nullopt;
}

Problem theme_overlap(const Json& j) {
    if (auto p = need_object(j, "response")) return p;
    if (auto p = need_array(j, "adjustments", "response")) return p;
    for (std::size_t i = 0; i < j["adjustments"].size(); ++i) {
        const std::string where = "adjustments[" + std::to_string(i) + "]";
        const auto& a = j["adjustments"][i];
        if (auto p = need_object(a, where)) return p;
        if (auto p = need_strings(a, {"element_id", "kind", "note"}, where, true)) return p;
        const auto kind = a["kind"].get<std::string>();
        if (kind != "reposition" && kind != "resize") return where + ".kind must be reposition or resize";
        for (const char* key : {"new_x", "new_y", "new_width", "new_height", "new_font_size"})
            if (a.contains(key) && !a[key].is_null() && !a[key].is_number()) return where + "." + key + " must be a number";
    }
    return std::nullopt;
}

SchemaRegistry make_builtin() {
    SchemaRegistry r;
    r.add("brief.extract", brief_extract);
    r.add("persona.dimensions", persona_dimensions);
    r.add("persona.build", persona_build);
    r.add("feedback.persona", feedback_persona);
    r.add("discuss.detect", discuss_detect);
    r.add("discuss.question", [](const Json& j) { return single_text(j, "question"); });
    r.add("discuss.answer", [](const Json& j) { return single_text(j, "answer"); });
    r.add("discuss.conclude", discuss_conclude);
    r.add("theme.map", theme_map);
    r.add("theme.overlap", theme_overlap);
    return r;
}

} // namespace

const SchemaRegistry& SchemaRegistry::builtin() {
    static const SchemaRegistry registry = make_builtin();
    return registry;
}

} // namespace postercrit::gateway
