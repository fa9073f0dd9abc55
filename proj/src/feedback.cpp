#include "postercrit/feedback.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace postercrit::feedback {

using canvas::CanvasDocument;
using canvas::ElementKind;

const char* to_string(FeedbackKind kind) noexcept {
    switch (kind) {
    case FeedbackKind::Text: return "text";
    case FeedbackKind::Image: return "image";
    case FeedbackKind::Theme: return "theme";
    }
    return "?";
}

FeedbackKind kind_from_string(std::string_view s) {
    if (s == "text") return FeedbackKind::Text;
    if (s == "image") return FeedbackKind::Image;
    if (s == "theme") return FeedbackKind::Theme;
    throw Error(ErrorCode::Validation, "unknown feedback kind '" + std::string(s) + "'", std::string(s));
}

const char* to_string(UnitStatus status) noexcept {
    switch (status) {
    case UnitStatus::Pending: return "pending";
    case UnitStatus::Conflict: return "conflict";
    case UnitStatus::Resolved: return "resolved";
    }
    return "?";
}

std::string unit_id_for(FeedbackKind kind, std::string_view target) {
    if (kind == FeedbackKind::Theme) return "theme";
    return std::string(to_string(kind)) + "-" + std::string(target);
}

std::string FeedbackItem::unit_id() const { return unit_id_for(kind, target); }

std::string FeedbackItem::id() const { return persona_id + "-" + unit_id(); }

const FeedbackItem* FeedbackUnit::find_item(std::string_view item_id) const noexcept {
    for (const auto& item : items)
        if (item.id() == item_id) return &item;
    return nullptr;
}

namespace {

bool blank(const std::string& s) { return s.find_first_not_of(" \t\r\n") == std::string::npos; }

GuardrailResult violation(std::string rule, std::string detail) { return {std::move(rule), std::move(detail)}; }

GuardrailResult check_preview(FeedbackKind kind, const Preview& preview) {
    if (kind == FeedbackKind::Theme) {
        auto* theme = std::get_if<ThemeDescriptor>(&preview);
        if (!theme) return violation("preview-shape", "theme preview must carry tone and color");
        if (blank(theme->tone) || blank(theme->color))
            return violation("empty-preview-field", blank(theme->tone) ? "tone" : "color");
        return GuardrailResult::pass();
    }
    auto* text = std::get_if<std::string>(&preview);
    if (!text) return violation("preview-shape", "text and image previews are strings");
    if (blank(*text)) return violation("empty-preview-field", "preview");
    return GuardrailResult::pass();
}

GuardrailResult check_target(FeedbackKind kind, const std::string& target, const CanvasDocument& doc) {
    if (kind == FeedbackKind::Theme) {
        if (target != kThemeTarget) return violation("theme-target", "theme feedback must target THEME");
        return GuardrailResult::pass();
    }
    const auto index = canvas::index_of(doc, target);
    if (!index) return violation("unknown-target", target);
    const auto element_kind = doc.elements[*index].kind();
    const bool matches = (kind == FeedbackKind::Text && element_kind == ElementKind::Text) ||
                         (kind == FeedbackKind::Image && element_kind == ElementKind::Image);
    if (!matches) return violation("kind-mismatch", target);
    return GuardrailResult::pass();
}

std::string feedback_instructions() {
    return "You are the persona described below, an audience member for this advertisement poster. Critique the "
           "poster from your own perspective while serving the marketing goal and staying consistent with the "
           "marketing brief. For each text component you want changed give the target id, your opinion on how it "
           "could change, the full replacement text as preview, and the rationale grounded in your persona, the "
           "goal and the brief. For each image component you want changed give the target id, your opinion, a "
           "one-line description of the replacement image as preview, and the rationale. Comment at most once per "
           "component and skip components you are satisfied with. Always give one theme opinion describing the mood "
           "you want, with a tone and a color descriptor. Reply with JSON: {\"text\": [{\"target\": str, "
           "\"opinion\": str, \"preview\": str, \"rationale\": str}], \"image\": [same fields], \"theme\": "
           "{\"opinion\": str, \"tone\": str, \"color\": str, \"rationale\": str}}.";
}

// Items from one persona's payload; rejected items are reported, not thrown.
void collect_items(const gateway::Json& payload, const std::string& persona_id, const CanvasDocument& doc,
                   FeedbackBatch& batch) {
    std::set<std::string> seen;
    const auto admit = [&](FeedbackItem item) {
        const auto check = guardrail_check(item, doc);
        if (!check.ok()) {
            batch.failures.push_back(
                {persona_id, "rejected " + std::string(to_string(item.kind)) + " feedback on '" + item.target +
                                 "': " + check.rule + " (" + check.detail + ")"});
            return;
        }
        if (!seen.insert(item.unit_id()).second) {
            batch.failures.push_back({persona_id, "rejected duplicate feedback on '" + item.target + "'"});
            return;
        }
        batch.items.push_back(std::move(item));
    };
    for (auto [key, kind] : {std::pair{"text", FeedbackKind::Text}, std::pair{"image", FeedbackKind::Image}}) {
        for (const auto& entry : payload.at(key)) {
            admit({persona_id, entry.at("target").get<std::string>(), kind, entry.at("opinion").get<std::string>(),
                   entry.at("preview").get<std::string>(), entry.at("rationale").get<std::string>()});
        }
    }
    const auto& theme = payload.at("theme");
    admit({persona_id, std::string(kThemeTarget), FeedbackKind::Theme, theme.at("opinion").get<std::string>(),
           ThemeDescriptor{theme.at("tone").get<std::string>(), theme.at("color").get<std::string>()},
           theme.at("rationale").get<std::string>()});
}

} // namespace

GuardrailResult guardrail_check(const FeedbackItem& item, const CanvasDocument& doc) {
    if (auto r = check_target(item.kind, item.target, doc); !r.ok()) return r;
    if (auto r = check_preview(item.kind, item.preview); !r.ok()) return r;
    if (blank(item.opinion)) return violation("empty-opinion", item.id());
    if (blank(item.rationale)) return violation("missing-rationale", item.id());
    return GuardrailResult::pass();
}

GuardrailResult guardrail_check(const Conclusion& conclusion, FeedbackKind kind, const CanvasDocument& doc) {
    if (auto r = check_target(kind, conclusion.target, doc); !r.ok()) return r;
    if (auto r = check_preview(kind, conclusion.preview); !r.ok()) return r;
    if (blank(conclusion.summary)) return violation("empty-opinion", "summary");
    return GuardrailResult::pass();
}

FeedbackBatch generate_feedback(const gateway::Gateway& gw, const CanvasDocument& doc, const persona::PersonaSet& set,
                                const persona::BriefExtract& extract) {
    const bool has_content = std::any_of(doc.elements.begin(), doc.elements.end(), [](const canvas::Element& e) {
        return e.kind() == ElementKind::Text || e.kind() == ElementKind::Image;
    });
    if (!has_content) throw Error(ErrorCode::Validation, "document has no text or image component to critique");

    const std::string serialized = canvas::serialize_document(doc);
    const Image rendered = canvas::rasterize(doc, [&](std::string_view src) { return gw.resolve_asset(src); });
    const std::size_t n = set.personas.size();
    std::vector<gateway::Json> payloads(n);
    const auto errors = gw.fan_out(n, [&](std::size_t i) {
        gateway::ModelRequest req;
        req.tag = "feedback.persona";
        req.schema_id = "feedback.persona";
        req.system_text = feedback_instructions();
        req.user_parts.emplace_back(persona::brief_context(extract));
        req.user_parts.emplace_back(persona::describe(set.personas[i]));
        req.user_parts.emplace_back("Poster document (JSON):\n" + serialized);
        req.user_parts.emplace_back(rendered);
        payloads[i] = gw.complete_structured(req).payload;
    });

    FeedbackBatch batch;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& persona_id = set.personas[i].id;
        if (errors[i]) {
            try {
                std::rethrow_exception(errors[i]);
            } catch (const std::exception& e) {
                batch.failures.push_back({persona_id, e.what()});
            }
            continue;
        }
        collect_items(payloads[i], persona_id, doc, batch);
    }
    return batch;
}

std::vector<FeedbackUnit> group_units(const std::vector<FeedbackItem>& items, const CanvasDocument& doc) {
    std::map<std::string, FeedbackUnit> by_id;
    std::vector<std::string> first_seen;
    for (const auto& item : items) {
        auto [it, inserted] = by_id.try_emplace(item.unit_id());
        if (inserted) {
            it->second.unit_id = item.unit_id();
            it->second.target = item.target;
            it->second.kind = item.kind;
            first_seen.push_back(item.unit_id());
        }
        it->second.items.push_back(item);
    }
    // Document order; units whose target is gone keep arrival order before THEME.
    const auto rank = [&](const FeedbackUnit& u) -> std::size_t {
        if (u.kind == FeedbackKind::Theme) return doc.elements.size() + first_seen.size();
        if (auto i = canvas::index_of(doc, u.target)) return *i;
        return doc.elements.size() +
               static_cast<std::size_t>(std::find(first_seen.begin(), first_seen.end(), u.unit_id) - first_seen.begin());
    };
    std::vector<FeedbackUnit> units;
    for (auto& [id, unit] : by_id) {
        if (unit.items.size() >= 2) {
            unit.status = UnitStatus::Conflict;
            unit.conflict_summary = std::to_string(unit.items.size()) + " personas commented; conflict check pending";
        } else {
            unit.status = UnitStatus::Pending;
        }
        units.push_back(std::move(unit));
    }
    std::stable_sort(units.begin(), units.end(),
                     [&](const FeedbackUnit& a, const FeedbackUnit& b) { return rank(a) < rank(b); });
    return units;
}

CanvasDocument apply_text_feedback(const CanvasDocument& doc, const FeedbackItem& item) {
    if (item.kind != FeedbackKind::Text)
        throw Error(ErrorCode::KindMismatch, "item '" + item.id() + "' is not text feedback", item.target);
    return canvas::set_text(doc, item.target, std::get<std::string>(item.preview));
}

std::string image_prompt(const std::string& description) {
    return "Advertisement poster illustration: " + description;
}

CanvasDocument apply_image_feedback(const gateway::Gateway& gw, const CanvasDocument& doc, const FeedbackItem& item) {
    if (item.kind != FeedbackKind::Image)
        throw Error(ErrorCode::KindMismatch, "item '" + item.id() + "' is not image feedback", item.target);
    // Fail before spending a generation call on a bad target.
    const auto& element = canvas::find_element(doc, item.target);
    if (element.kind() != ElementKind::Image)
        throw Error(ErrorCode::KindMismatch, "element '" + item.target + "' is not an image", item.target);
    const std::string asset = gw.generate_image("feedback.image", image_prompt(std::get<std::string>(item.preview)));
    return canvas::set_image_source(doc, item.target, asset);
}

CanvasDocument apply_conclusion(const gateway::Gateway& gw, const CanvasDocument& doc, const FeedbackUnit& unit) {
    if (!unit.conclusion) throw Error(ErrorCode::State, "unit '" + unit.unit_id + "' has no conclusion", unit.unit_id);
    FeedbackItem as_item{"moderator", unit.conclusion->target, unit.kind, unit.conclusion->summary,
                         unit.conclusion->preview, unit.conclusion->summary};
    switch (unit.kind) {
    case FeedbackKind::Text: return apply_text_feedback(doc, as_item);
    case FeedbackKind::Image: return apply_image_feedback(gw, doc, as_item);
    case FeedbackKind::Theme: break;
    }
    throw Error(ErrorCode::KindMismatch, "theme conclusions are applied through a template choice", unit.unit_id);
}

Json to_json(const Preview& preview) {
    if (auto* text = std::get_if<std::string>(&preview)) return *text;
    const auto& theme = std::get<ThemeDescriptor>(preview);
    return {{"tone", theme.tone}, {"color", theme.color}};
}

Preview preview_from_json(const Json& j) {
    if (j.is_string()) return j.get<std::string>();
    if (j.is_object()) return ThemeDescriptor{j.value("tone", ""), j.value("color", "")};
    throw Error(ErrorCode::Validation, "preview must be a string or a {tone, color} object", "preview");
}

Json to_json(const FeedbackItem& item) {
    return {{"id", item.id()},
            {"persona_id", item.persona_id},
            {"target", item.target},
            {"kind", to_string(item.kind)},
            {"opinion", item.opinion},
            {"preview", to_json(item.preview)},
            {"rationale", item.rationale}};
}

FeedbackItem item_from_json(const Json& j) {
    return {j.at("persona_id").get<std::string>(), j.at("target").get<std::string>(),
            kind_from_string(j.at("kind").get<std::string>()), j.at("opinion").get<std::string>(),
            preview_from_json(j.at("preview")), j.at("rationale").get<std::string>()};
}

Json to_json(const std::vector<FeedbackItem>& items) {
    Json out = Json::array();
    for (const auto& item : items) out.push_back(to_json(item));
    return out;
}

Json to_json(const Conclusion& c) {
    return {{"target", c.target},
            {"summary", c.summary},
            {"preview", to_json(c.preview)},
            {"omitted_personas", c.omitted_personas}};
}

Conclusion conclusion_from_json(const Json& j) {
    return {j.at("target").get<std::string>(), j.at("summary").get<std::string>(), preview_from_json(j.at("preview")),
            j.at("omitted_personas").get<std::vector<std::string>>()};
}

Json to_json(const FeedbackUnit& u) {
    Json j{{"unit_id", u.unit_id},
           {"target", u.target},
           {"kind", to_string(u.kind)},
           {"items", to_json(u.items)},
           {"status", to_string(u.status)},
           {"conflict_summary", u.conflict_summary ? Json(*u.conflict_summary) : Json(nullptr)},
           {"conclusion", u.conclusion ? to_json(*u.conclusion) : Json(nullptr)},
           {"accepted_ref", u.accepted_ref ? Json(*u.accepted_ref) : Json(nullptr)}};
    return j;
}

FeedbackUnit unit_from_json(const Json& j) {
    FeedbackUnit u;
    u.unit_id = j.at("unit_id").get<std::string>();
    u.target = j.at("target").get<std::string>();
    u.kind = kind_from_string(j.at("kind").get<std::string>());
    for (const auto& item : j.at("items")) u.items.push_back(item_from_json(item));
    const auto status = j.at("status").get<std::string>();
    u.status = status == "conflict"   ? UnitStatus::Conflict
               : status == "resolved" ? UnitStatus::Resolved
                                      : UnitStatus::Pending;
    if (const auto& s = j.at("conflict_summary"); !s.is_null()) u.conflict_summary = s.get<std::string>();
    if (const auto& c = j.at("conclusion"); !c.is_null()) u.conclusion = conclusion_from_json(c);
    if (const auto& a = j.at("accepted_ref"); !a.is_null()) u.accepted_ref = a.get<std::string>();
    return u;
}

} // namespace postercrit::feedback
