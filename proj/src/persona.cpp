#include "postercrit/persona.hpp"

#include <algorithm>
#include <fstream>

namespace postercrit::persona {

namespace {

using gateway::ModelRequest;

const char* level_name(Level level) { return level == Level::High ? "high" : "low"; }

Level level_from(const std::string& s) {
    if (s == "low") return Level::Low;
    if (s == "high") return Level::High;
    throw Error(ErrorCode::Schema, "unknown dimension level '" + s + "'", s);
}

int grid_index(Level a, Level b) { return (a == Level::High ? 2 : 0) + (b == Level::High ? 1 : 0); }

PersonaDetails details_from_payload(const Json& p) {
    return {p.at("name").get<std::string>(),       p.at("summary").get<std::string>(),
            p.at("background").get<std::string>(), p.at("motivation").get<std::string>(),
            p.at("pain_point").get<std::string>(), p.at("need").get<std::string>(),
            p.at("quote").get<std::string>(),      p.at("rationale").get<std::string>()};
}

Json details_json(const PersonaDetails& d) {
    return {{"name", d.name},
            {"summary", d.summary},
            {"background", d.background},
            {"motivation", d.motivation},
            {"pain_point", d.pain_point},
            {"need", d.need},
            {"quote", d.quote},
            {"rationale", d.rationale}};
}

std::string dimension_line(const SteerableDimension& d) {
    return d.name + " (low: " + d.low_label + "; high: " + d.high_label + ")";
}

} // namespace

MarketingBrief MarketingBrief::from_files(const std::vector<std::filesystem::path>& paths) {
    MarketingBrief brief;
    for (const auto& path : paths) {
        if (brief.source_name.empty()) brief.source_name = path.filename().string();
        if (path.extension() == ".png") {
            brief.pages.push_back({read_png(path)});
            continue;
        }
        std::ifstream in(path, std::ios::binary);
        if (!in) throw Error(ErrorCode::Io, "cannot read brief page " + path.string(), path.string());
        brief.pages.push_back({std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>())});
    }
    brief.validate();
    return brief;
}

void MarketingBrief::validate() const {
    if (pages.empty()) throw Error(ErrorCode::Validation, "marketing brief has no pages");
    for (std::size_t i = 0; i < pages.size(); ++i) {
        const bool empty = std::visit(
            [](const auto& c) {
                if constexpr (std::is_same_v<std::decay_t<decltype(c)>, std::string>)
                    return c.find_first_not_of(" \t\r\n") == std::string::npos;
                else
                    return c.empty();
            },
            pages[i].content);
        if (empty) throw Error(ErrorCode::Validation, "brief page " + std::to_string(i + 1) + " is empty");
    }
}

const Persona* PersonaSet::find_if(std::string_view id) const noexcept {
    for (const auto& p : personas)
        if (p.id == id) return &p;
    return nullptr;
}

const Persona& PersonaSet::find(std::string_view id) const {
    if (auto* p = find_if(id)) return *p;
    throw Error(ErrorCode::NotFound, "no persona with id '" + std::string(id) + "'", std::string(id));
}

std::string brief_context(const BriefExtract& extract) {
    std::string out = "Marketing goal: " + extract.goal + "\n";
    if (!extract.audience_summary.empty()) out += "Target audience: " + extract.audience_summary + "\n";
    for (const auto& c : extract.constraints) out += "Constraint: " + c + "\n";
    out += "Marketing brief (verbatim):\n" + extract.raw_text;
    return out;
}

std::string describe(const Persona& p) {
    const auto& d = p.details;
    return "Persona " + p.id + " \"" + d.name + "\"\nSummary: " + d.summary + "\nBackground: " + d.background +
           "\nGoal/motivation: " + d.motivation + "\nChallenge/pain point: " + d.pain_point + "\nNeed: " + d.need +
           "\nQuote: " + d.quote + "\nRationale: " + d.rationale;
}

BriefExtract extract_brief(const gateway::Gateway& gw, const MarketingBrief& brief) {
    brief.validate();
    ModelRequest req;
    req.tag = "brief.extract";
    req.schema_id = "brief.extract";
    req.temperature_hint = 0.2;
    req.system_text =
        "You read marketing briefs for advertisement posters. Extract the high-level marketing goal as one line, "
        "a summary of the target audience, and any explicit constraints. If a page is an image, transcribe its "
        "text into ocr_text. Reply with JSON: {\"goal\": str, \"audience_summary\": str, \"constraints\": [str], "
        "\"ocr_text\": str}.";

    BriefExtract out;
    bool has_images = false;
    for (std::size_t i = 0; i < brief.pages.size(); ++i) {
        if (auto* text = std::get_if<std::string>(&brief.pages[i].content)) {
            req.user_parts.emplace_back("Brief page " + std::to_string(i + 1) + ":\n" + *text);
            if (!out.raw_text.empty()) out.raw_text += "\n\n";
            out.raw_text += *text;
        } else {
            req.user_parts.emplace_back(std::get<Image>(brief.pages[i].content));
            has_images = true;
        }
    }
    const auto res = gw.complete_structured(req);
    out.goal = res.payload.at("goal").get<std::string>();
    out.audience_summary = res.payload.at("audience_summary").get<std::string>();
    out.constraints = res.payload.at("constraints").get<std::vector<std::string>>();
    if (has_images) {
        const std::string ocr = res.payload.value("ocr_text", "");
        if (!ocr.empty()) {
            if (!out.raw_text.empty()) out.raw_text += "\n\n";
            out.raw_text += ocr;
        }
    }
    if (out.raw_text.empty())
        throw Error(ErrorCode::Schema, "brief has no text content and the model returned no ocr_text", "ocr_text");
    return out;
}

DimensionPair derive_dimensions(const gateway::Gateway& gw, const BriefExtract& extract) {
    ModelRequest req;
    req.tag = "persona.dimensions";
    req.schema_id = "persona.dimensions";
    req.system_text =
        "Return two audience dimensions that could be varied given the marketing brief. Each dimension must be "
        "steerable (it can be set to a lower or higher value) and both of its extremes must stay compatible with "
        "every audience description in the brief, so they never contradict the marketing goal. If the brief "
        "already names such dimensions, prioritize those and set from_brief to true; otherwise generate two "
        "contextually relevant ones and set from_brief to false. Reply with JSON: {\"dimensions\": [{\"name\": "
        "str, \"low_label\": str, \"high_label\": str, \"from_brief\": bool}, {...}]}.";
    req.user_parts.emplace_back(brief_context(extract));
    const auto res = gw.complete_structured(req);
    DimensionPair dims;
    for (std::size_t i = 0; i < 2; ++i) {
        const auto& d = res.payload["dimensions"][i];
        dims[i] = {d["name"].get<std::string>(), d["low_label"].get<std::string>(), d["high_label"].get<std::string>(),
                   d["from_brief"].get<bool>() ? DimensionSource::FromBrief : DimensionSource::Generated};
    }
    return dims;
}

std::string avatar_prompt(const std::string& name) {
    return "Cartoon-style avatar portrait of a person described as \"" + name +
           "\", friendly expression, flat colors, plain background";
}

std::string generate_avatar(const gateway::Gateway& gw, const Persona& persona) {
    if (persona.details.name.empty()) throw Error(ErrorCode::Validation, "persona has no name", "name");
    return gw.generate_image("persona.avatar", avatar_prompt(persona.details.name));
}

PersonaSet build_personas(const gateway::Gateway& gw, const BriefExtract& extract, const DimensionPair& dims) {
    ModelRequest req;
    req.tag = "persona.build";
    req.schema_id = "persona.build";
    req.system_text =
        "Create four audience personas, one for each combination of the extremes of the two dimensions, grounded "
        "in the marketing brief. Each persona has: name (a two-word description of the persona), a one-line "
        "summary, background that exemplifies the persona traits, goal/motivation, challenge/pain point, need, a "
        "one-line quote, and a one-line rationale explaining how this perspective can contribute to the poster "
        "design. Reply with JSON: {\"personas\": [{\"dim1\": \"low\"|\"high\", \"dim2\": \"low\"|\"high\", "
        "\"name\": str, \"summary\": str, \"background\": str, \"motivation\": str, \"pain_point\": str, \"need\": "
        "str, \"quote\": str, \"rationale\": str}] } with exactly four entries.";
    req.user_parts.emplace_back(brief_context(extract));
    req.user_parts.emplace_back("Dimension 1: " + dimension_line(dims[0]) + "\nDimension 2: " + dimension_line(dims[1]));
    const auto res = gw.complete_structured(req);

    PersonaSet set;
    set.dimensions = dims;
    set.personas.resize(4);
    for (const auto& p : res.payload["personas"]) {
        Persona persona;
        persona.details = details_from_payload(p);
        persona.dim1 = level_from(p["dim1"].get<std::string>());
        persona.dim2 = level_from(p["dim2"].get<std::string>());
        persona.origin = Origin::Generated;
        const int slot = grid_index(persona.dim1, persona.dim2);
        persona.id = "p" + std::to_string(slot + 1);
        set.personas[static_cast<std::size_t>(slot)] = std::move(persona);
    }

    std::vector<std::string> avatars(4);
    const auto errors = gw.fan_out(4, [&](std::size_t i) { avatars[i] = generate_avatar(gw, set.personas[i]); });
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    for (std::size_t i = 0; i < 4; ++i) set.personas[i].avatar = std::move(avatars[i]);
    return set;
}

void validate_details(const PersonaDetails& d) {
    const std::pair<const char*, const std::string*> fields[] = {
        {"name", &d.name},     {"summary", &d.summary}, {"background", &d.background}, {"motivation", &d.motivation},
        {"pain_point", &d.pain_point}, {"need", &d.need}, {"quote", &d.quote}, {"rationale", &d.rationale}};
    for (const auto& [name, value] : fields)
        if (value->find_first_not_of(" \t\r\n") == std::string::npos)
            throw Error(ErrorCode::Validation, std::string("persona field '") + name + "' is empty", name);
}

PersonaSet add_manual_persona(const gateway::Gateway& gw, const PersonaSet& set, const PersonaDetails& details) {
    validate_details(details);
    int next = 1;
    for (const auto& p : set.personas)
        if (p.origin == Origin::Manual && p.id.size() > 1 && p.id[0] == 'm')
            next = std::max(next, std::stoi(p.id.substr(1)) + 1);
    Persona persona;
    persona.id = "m" + std::to_string(next);
    persona.details = details;
    persona.origin = Origin::Manual;
    persona.avatar = generate_avatar(gw, persona);
    PersonaSet out = set;
    out.personas.push_back(std::move(persona));
    return out;
}

Json to_json(const BriefExtract& e) {
    return {{"goal", e.goal}, {"audience_summary", e.audience_summary}, {"constraints", e.constraints},
            {"raw_text", e.raw_text}};
}

BriefExtract extract_from_json(const Json& j) {
    return {j.at("goal").get<std::string>(), j.at("audience_summary").get<std::string>(),
            j.at("constraints").get<std::vector<std::string>>(), j.at("raw_text").get<std::string>()};
}

Json to_json(const SteerableDimension& d) {
    return {{"name", d.name},
            {"low_label", d.low_label},
            {"high_label", d.high_label},
            {"source", d.source == DimensionSource::FromBrief ? "from_brief" : "generated"}};
}

Json to_json(const Persona& p) {
    Json j{{"id", p.id}};
    j.update(details_json(p.details));
    j["coords"] = p.dim1 == Level::Unset ? Json(nullptr)
                                         : Json{{"dim1", level_name(p.dim1)}, {"dim2", level_name(p.dim2)}};
    j["avatar"] = p.avatar;
    j["origin"] = p.origin == Origin::Manual ? "manual" : "generated";
    return j;
}

Json to_json(const PersonaSet& set) {
    Json personas = Json::array();
    for (const auto& p : set.personas) personas.push_back(to_json(p));
    return {{"dimensions", {to_json(set.dimensions[0]), to_json(set.dimensions[1])}}, {"personas", personas}};
}

PersonaDetails details_from_json(const Json& j) {
    if (!j.is_object()) throw Error(ErrorCode::Validation, "persona details must be an object");
    PersonaDetails d;
    const std::pair<const char*, std::string*> fields[] = {
        {"name", &d.name},     {"summary", &d.summary}, {"background", &d.background}, {"motivation", &d.motivation},
        {"pain_point", &d.pain_point}, {"need", &d.need}, {"quote", &d.quote}, {"rationale", &d.rationale}};
    for (const auto& [name, value] : fields) {
        auto it = j.find(name);
        if (it != j.end() && !it->is_string())
            throw Error(ErrorCode::Validation, std::string("persona field '") + name + "' must be a string", name);
        if (it != j.end()) *value = it->get<std::string>();
    }
    return d;
}

PersonaSet persona_set_from_json(const Json& j) {
    PersonaSet set;
    for (std::size_t i = 0; i < 2; ++i) {
        const auto& d = j.at("dimensions").at(i);
        set.dimensions[i] = {d.at("name").get<std::string>(), d.at("low_label").get<std::string>(),
                             d.at("high_label").get<std::string>(),
                             d.at("source").get<std::string>() == "from_brief" ? DimensionSource::FromBrief
                                                                                : DimensionSource::Generated};
    }
    for (const auto& pj : j.at("personas")) {
        Persona p;
        p.id = pj.at("id").get<std::string>();
        p.details = details_from_json(pj);
        if (const auto& c = pj.at("coords"); !c.is_null()) {
            p.dim1 = level_from(c.at("dim1").get<std::string>());
            p.dim2 = level_from(c.at("dim2").get<std::string>());
        }
        p.avatar = pj.at("avatar").get<std::string>();
        p.origin = pj.at("origin").get<std::string>() == "manual" ? Origin::Manual : Origin::Generated;
        set.personas.push_back(std::move(p));
    }
    return set;
}

Json to_json(const MarketingBrief& brief) {
    Json pages = Json::array();
    for (const auto& page : brief.pages) {
        if (auto* text = std::get_if<std::string>(&page.content))
            pages.push_back({{"text", *text}});
        else
            pages.push_back({{"png_base64", base64_encode(encode_png(std::get<Image>(page.content)))}});
    }
    return {{"source_name", brief.source_name}, {"pages", pages}};
}

MarketingBrief brief_from_json(const Json& j) {
    if (!j.is_object() || !j.contains("pages") || !j["pages"].is_array())
        throw Error(ErrorCode::Validation, "brief must be an object with a 'pages' array", "pages");
    MarketingBrief brief;
    brief.source_name = j.value("source_name", "");
    for (const auto& page : j["pages"]) {
        if (page.contains("text") && page["text"].is_string()) {
            brief.pages.push_back({page["text"].get<std::string>()});
        } else if (page.contains("png_base64") && page["png_base64"].is_string()) {
            brief.pages.push_back({decode_png(base64_decode(page["png_base64"].get<std::string>()))});
        } else {
            throw Error(ErrorCode::Validation, "brief page needs 'text' or 'png_base64'", "pages");
        }
    }
    brief.validate();
    return brief;
}

} // namespace postercrit::persona
