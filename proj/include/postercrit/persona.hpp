#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "postercrit/gateway.hpp"
#include "postercrit/image.hpp"

namespace postercrit::persona {

using Json = nlohmann::json;

struct BriefPage {
    std::variant<std::string, Image> content;
};

struct MarketingBrief {
    std::vector<BriefPage> pages;
    std::string source_name;

    // Each path is a plain-text page or a PNG page image.
    static MarketingBrief from_files(const std::vector<std::filesystem::path>& paths);
    void validate() const;
};

struct BriefExtract {
    std::string goal;
    std::string audience_summary;
    std::vector<std::string> constraints;
    // All textual brief content; carried into every downstream prompt.
    std::string raw_text;

    bool operator==(const BriefExtract&) const = default;
};

enum class DimensionSource { FromBrief, Generated };

struct SteerableDimension {
    std::string name;
    std::string low_label;
    std::string high_label;
    DimensionSource source = DimensionSource::Generated;

    bool operator==(const SteerableDimension&) const = default;
};

using DimensionPair = std::array<SteerableDimension, 2>;

// Unset marks personas added by hand, which sit outside the grid.
enum class Level { Low, High, Unset };

enum class Origin { Generated, Manual };

struct PersonaDetails {
    std::string name;
    std::string summary;
    std::string background;
    std::string motivation;
    std::string pain_point;
    std::string need;
    std::string quote;
    std::string rationale;

    bool operator==(const PersonaDetails&) const = default;
};

struct Persona {
    std::string id;
    PersonaDetails details;
    Level dim1 = Level::Unset;
    Level dim2 = Level::Unset;
    std::string avatar;
    Origin origin = Origin::Generated;

    bool operator==(const Persona&) const = default;
};

struct PersonaSet {
    std::vector<Persona> personas;
    DimensionPair dimensions;

    const Persona& find(std::string_view id) const;
    const Persona* find_if(std::string_view id) const noexcept;
    bool operator==(const PersonaSet&) const = default;
};

BriefExtract extract_brief(const gateway::Gateway& gw, const MarketingBrief& brief);
DimensionPair derive_dimensions(const gateway::Gateway& gw, const BriefExtract& extract);
// Four generated personas in grid order (low,low), (low,high), (high,low),
// (high,high) with ids p1..p4.
PersonaSet build_personas(const gateway::Gateway& gw, const BriefExtract& extract, const DimensionPair& dims);
PersonaSet add_manual_persona(const gateway::Gateway& gw, const PersonaSet& set, const PersonaDetails& details);
std::string generate_avatar(const gateway::Gateway& gw, const Persona& persona);
std::string avatar_prompt(const std::string& name);

// Throws Error{Validation} naming the first empty field.
void validate_details(const PersonaDetails& details);

Json to_json(const BriefExtract& extract);
BriefExtract extract_from_json(const Json& json);
Json to_json(const SteerableDimension& dim);
Json to_json(const Persona& persona);
Json to_json(const PersonaSet& set);
PersonaSet persona_set_from_json(const Json& json);
PersonaDetails details_from_json(const Json& json);
// Pages encoded as {"text": ...} or {"png_base64": ...}.
Json to_json(const MarketingBrief& brief);
MarketingBrief brief_from_json(const Json& json);

// Brief context block shared by every prompt downstream of extraction.
std::string brief_context(const BriefExtract& extract);
std::string describe(const Persona& persona);

} // namespace postercrit::persona
