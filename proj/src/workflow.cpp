#include "postercrit/workflow.hpp"

#include <fstream>

namespace postercrit::workflow {

using feedback::FeedbackKind;
using feedback::UnitStatus;

Analysis analyse_units(const gateway::Gateway& gw, std::vector<feedback::FeedbackUnit> units,
                       const persona::BriefExtract& extract) {
    Analysis out;
    for (auto& unit : units) {
        if (unit.items.size() < 2) continue;
        if (auto report = discussion::detect_conflict(gw, unit, extract)) {
            unit.status = UnitStatus::Conflict;
            unit.conflict_summary = report->summary;
            out.reports.emplace(unit.unit_id, std::move(*report));
        } else {
            unit.status = UnitStatus::Pending;
            unit.conflict_summary.reset();
        }
    }
    out.units = std::move(units);
    return out;
}

ResolvedRef resolve_ref(const std::vector<feedback::FeedbackUnit>& units, std::string_view ref) {
    if (ref.substr(0, kConclusionPrefix.size()) == kConclusionPrefix) {
        const auto unit_id = ref.substr(kConclusionPrefix.size());
        for (std::size_t i = 0; i < units.size(); ++i) {
            if (units[i].unit_id != unit_id) continue;
            if (!units[i].conclusion)
                throw Error(ErrorCode::State, "unit " + units[i].unit_id + " has no conclusion yet", std::string(ref));
            return {i, std::nullopt, units[i].kind, units[i].conclusion->preview};
        }
    } else {
        for (std::size_t i = 0; i < units.size(); ++i)
            if (const auto* item = units[i].find_item(ref)) return {i, *item, item->kind, item->preview};
    }
    throw Error(ErrorCode::NotFound, "no feedback item or conclusion '" + std::string(ref) + "'", std::string(ref));
}

namespace {

feedback::FeedbackItem as_item(const feedback::FeedbackUnit& unit, const ResolvedRef& r) {
    if (r.item) return *r.item;
    return {"moderator", unit.conclusion->target, unit.kind, unit.conclusion->summary, unit.conclusion->preview,
            unit.conclusion->summary};
}

void check_guardrail(const feedback::FeedbackItem& item, const canvas::CanvasDocument& doc, std::string_view ref) {
    const auto check = feedback::guardrail_check(item, doc);
    if (!check.ok())
        throw Error(ErrorCode::Validation,
                    "'" + std::string(ref) + "' no longer fits the document: " + check.rule + " (" + check.detail + ")",
                    std::string(ref));
}

} // namespace

Applied apply_ref(const gateway::Gateway& gw, const canvas::CanvasDocument& doc,
                  const std::vector<feedback::FeedbackUnit>& units, std::string_view ref) {
    const auto r = resolve_ref(units, ref);
    const auto item = as_item(units[r.unit_index], r);
    check_guardrail(item, doc, ref);
    switch (r.kind) {
    case FeedbackKind::Text: return {feedback::apply_text_feedback(doc, item), {}};
    case FeedbackKind::Image: return {feedback::apply_image_feedback(gw, doc, item), {}};
    case FeedbackKind::Theme: break;
    }
    throw Error(ErrorCode::Validation, "theme feedback needs a template choice", std::string(ref));
}

Applied apply_theme_ref(const gateway::Gateway& gw, const canvas::CanvasDocument& doc,
                        const std::vector<feedback::FeedbackUnit>& units, std::string_view ref,
                        const canvas::CanvasDocument& templ, int max_rounds) {
    const auto r = resolve_ref(units, ref);
    if (r.kind != FeedbackKind::Theme)
        throw Error(ErrorCode::KindMismatch, "'" + std::string(ref) + "' is not theme feedback", std::string(ref));
    check_guardrail(as_item(units[r.unit_index], r), doc, ref);
    auto result = theme::apply_theme(gw, doc, templ, max_rounds);
    return {std::move(result.document), std::move(result.adjustments)};
}

RunResult run_pipeline(const gateway::Gateway& gw, const persona::MarketingBrief& brief,
                       const canvas::CanvasDocument& draft, const RunOptions& options) {
    canvas::validate(draft);
    RunResult r;
    r.extract = persona::extract_brief(gw, brief);
    const auto dims = persona::derive_dimensions(gw, r.extract);
    r.personas = persona::build_personas(gw, r.extract, dims);
    r.feedback = feedback::generate_feedback(gw, draft, r.personas, r.extract);
    r.analysis = analyse_units(gw, feedback::group_units(r.feedback.items, draft), r.extract);

    const discussion::Context ctx{gw, r.personas, r.extract, draft};
    for (auto& unit : r.analysis.units) {
        auto report = r.analysis.reports.find(unit.unit_id);
        if (report == r.analysis.reports.end()) continue;
        auto d = discussion::open_discussion(unit, report->second, unit.unit_id + ".1", options.discussion_rounds);
        d = discussion::submit_comment(d, std::nullopt);
        auto done = discussion::advance(ctx, d, unit);
        unit = std::move(done.unit);
        r.discussions.emplace(unit.unit_id, std::move(done.discussion));
    }
    return r;
}

std::string pretty(const Json& json) { return json.dump(2) + "\n"; }

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string(), path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << content;
        if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp.string(), path.string());
    }
    std::filesystem::rename(tmp, path);
}

void write_run(const RunResult& r, const canvas::CanvasDocument& draft, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir / "discussions");
    write_file(out_dir / "extract.json", pretty(persona::to_json(r.extract)));
    write_file(out_dir / "personas.json", pretty(persona::to_json(r.personas)));

    Json failures = Json::array();
    for (const auto& f : r.feedback.failures) failures.push_back({{"persona_id", f.persona_id}, {"message", f.message}});
    write_file(out_dir / "feedback.json",
               pretty({{"items", feedback::to_json(r.feedback.items)}, {"failures", failures}}));

    Json units = Json::array();
    for (const auto& u : r.analysis.units) units.push_back(feedback::to_json(u));
    write_file(out_dir / "units.json", pretty(units));
    write_file(out_dir / "document.json", canvas::serialize_document(draft));
    for (const auto& [unit_id, d] : r.discussions)
        write_file(out_dir / "discussions" / (unit_id + ".json"), pretty(discussion::to_json(d)));
}

RunDir read_run(const std::filesystem::path& dir) {
    RunDir out;
    out.document = canvas::parse_document(read_file(dir / "document.json"));
    Json units;
    try {
        units = Json::parse(read_file(dir / "units.json"));
    } catch (const Json::parse_error& e) {
        throw ParseError("units.json: " + std::string(e.what()), e.byte);
    }
    for (const auto& u : units) out.units.push_back(feedback::unit_from_json(u));
    return out;
}

} // namespace postercrit::workflow
