#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "postercrit/canvas.hpp"
#include "postercrit/gateway.hpp"
#include "postercrit/persona.hpp"

namespace postercrit::feedback {

using Json = nlohmann::json;

// Target of poster-level theme feedback.
inline constexpr std::string_view kThemeTarget = "THEME";

enum class FeedbackKind { Text, Image, Theme };

const char* to_string(FeedbackKind kind) noexcept;
FeedbackKind kind_from_string(std::string_view s);

struct ThemeDescriptor {
    std::string tone;
    std::string color;

    bool operator==(const ThemeDescriptor&) const = default;
};

// Replacement text, one-line image description, or theme descriptor.
using Preview = std::variant<std::string, ThemeDescriptor>;

struct FeedbackItem {
    std::string persona_id;
    std::string target;
    FeedbackKind kind = FeedbackKind::Text;
    std::string opinion;
    Preview preview;
    std::string rationale;

    // "<persona_id>-<unit_id>"; unique because a persona comments at most once per component.
    std::string id() const;
    std::string unit_id() const;
    bool operator==(const FeedbackItem&) const = default;
};

std::string unit_id_for(FeedbackKind kind, std::string_view target);

struct Conclusion {
    std::string target;
    std::string summary;
    Preview preview;
    std::vector<std::string> omitted_personas;

    bool operator==(const Conclusion&) const = default;
};

// Pending: several items or one, no conflict found yet or none exists;
// awaiting the designer. Conflict: disagreement detected, unresolved.
// Resolved: a conclusion was reached or an item was accepted.
enum class UnitStatus { Pending, Conflict, Resolved };

const char* to_string(UnitStatus status) noexcept;

struct FeedbackUnit {
    std::string unit_id;
    std::string target;
    FeedbackKind kind = FeedbackKind::Text;
    std::vector<FeedbackItem> items;
    UnitStatus status = UnitStatus::Pending;
    std::optional<std::string> conflict_summary;
    std::optional<Conclusion> conclusion;
    // Item id or conclusion ref the designer applied.
    std::optional<std::string> accepted_ref;

    const FeedbackItem* find_item(std::string_view item_id) const noexcept;
    bool operator==(const FeedbackUnit&) const = default;
};

struct GuardrailResult {
    // Empty when the item passed; otherwise the failed rule name.
    std::string rule;
    std::string detail;

    bool ok() const noexcept { return rule.empty(); }
    static GuardrailResult pass() { return {}; }
};

struct PersonaFailure {
    std::string persona_id;
    std::string message;

    bool operator==(const PersonaFailure&) const = default;
};

struct FeedbackBatch {
    std::vector<FeedbackItem> items;
    // Personas whose generation failed, and rejected items.
    std::vector<PersonaFailure> failures;
};

FeedbackBatch generate_feedback(const gateway::Gateway& gw, const canvas::CanvasDocument& doc,
                                const persona::PersonaSet& set, const persona::BriefExtract& extract);

GuardrailResult guardrail_check(const FeedbackItem& item, const canvas::CanvasDocument& doc);
GuardrailResult guardrail_check(const Conclusion& conclusion, FeedbackKind kind, const canvas::CanvasDocument& doc);

// One unit per (target, kind): document element order first, THEME last.
std::vector<FeedbackUnit> group_units(const std::vector<FeedbackItem>& items, const canvas::CanvasDocument& doc);

canvas::CanvasDocument apply_text_feedback(const canvas::CanvasDocument& doc, const FeedbackItem& item);
// Generates the image only now, from the preview description.
canvas::CanvasDocument apply_image_feedback(const gateway::Gateway& gw, const canvas::CanvasDocument& doc,
                                            const FeedbackItem& item);
// Text and image conclusions; theme conclusions go through theme application.
canvas::CanvasDocument apply_conclusion(const gateway::Gateway& gw, const canvas::CanvasDocument& doc,
                                        const FeedbackUnit& unit);

std::string image_prompt(const std::string& description);

Json to_json(const Preview& preview);
Preview preview_from_json(const Json& json);
Json to_json(const FeedbackItem& item);
FeedbackItem item_from_json(const Json& json);
Json to_json(const Conclusion& conclusion);
Conclusion conclusion_from_json(const Json& json);
Json to_json(const FeedbackUnit& unit);
FeedbackUnit unit_from_json(const Json& json);
Json to_json(const std::vector<FeedbackItem>& items);

} // namespace postercrit::feedback
