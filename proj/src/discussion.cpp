#include "postercrit/discussion.hpp"

#include <algorithm>
#include <atomic>
#include <set>

namespace postercrit::discussion {

using feedback::FeedbackItem;
using feedback::FeedbackKind;

const char* to_string(RoleTag tag) noexcept {
    switch (tag) {
    case RoleTag::CommentRequest: return "comment_request";
    case RoleTag::UserComment: return "user_comment";
    case RoleTag::Question: return "question";
    case RoleTag::Answer: return "answer";
    case RoleTag::ConclusionStatement: return "conclusion_statement";
    }
    return "?";
}

RoleTag role_from_string(std::string_view s) {
    for (auto tag : {RoleTag::CommentRequest, RoleTag::UserComment, RoleTag::Question, RoleTag::Answer,
                     RoleTag::ConclusionStatement})
        if (s == to_string(tag)) return tag;
    throw Error(ErrorCode::Validation, "unknown turn role '" + std::string(s) + "'", std::string(s));
}

const char* to_string(State state) noexcept {
    switch (state) {
    case State::AwaitingComment: return "awaiting_comment";
    case State::Questioning: return "questioning";
    case State::Answering: return "answering";
    case State::Concluding: return "concluding";
    case State::Concluded: return "concluded";
    }
    return "?";
}

State state_from_string(std::string_view s) {
    for (auto state : kAllStates)
        if (s == to_string(state)) return state;
    throw Error(ErrorCode::Validation, "unknown discussion state '" + std::string(s) + "'", std::string(s));
}

const char* to_string(Operation op) noexcept {
    switch (op) {
    case Operation::SubmitComment: return "submit_comment";
    case Operation::AskQuestions: return "ask_questions";
    case Operation::CollectAnswers: return "collect_answers";
    case Operation::Conclude: return "conclude";
    }
    return "?";
}

std::optional<State> transition(State from, Operation op) noexcept {
    switch (op) {
    case Operation::SubmitComment:
        if (from == State::AwaitingComment || from == State::Concluded) return State::Questioning;
        break;
    case Operation::AskQuestions:
        if (from == State::Questioning) return State::Answering;
        break;
    case Operation::CollectAnswers:
        if (from == State::Answering) return State::Concluding;
        break;
    case Operation::Conclude:
        if (from == State::Concluding) return State::Concluded;
        break;
    }
    return std::nullopt;
}

namespace {

State require(const Discussion& d, Operation op) {
    auto next = transition(d.state, op);
    if (!next)
        throw Error(ErrorCode::State,
                    std::string(to_string(op)) + " is not allowed while the discussion is " + to_string(d.state),
                    d.discussion_id);
    return *next;
}

void check_unit(const Discussion& d, const FeedbackUnit& unit) {
    if (d.unit_id != unit.unit_id)
        throw Error(ErrorCode::Validation, "discussion " + d.discussion_id + " belongs to unit " + d.unit_id,
                    unit.unit_id);
}

std::string preview_text(const feedback::Preview& preview) {
    if (auto* s = std::get_if<std::string>(&preview)) return *s;
    const auto& t = std::get<feedback::ThemeDescriptor>(preview);
    return "tone: " + t.tone + "; color: " + t.color;
}

std::string describe_item(const FeedbackItem& item) {
    return "[" + item.id() + "] from " + item.persona_id + "\n  opinion: " + item.opinion +
           "\n  preview: " + preview_text(item.preview) + "\n  rationale: " + item.rationale;
}

std::string describe_unit(const FeedbackUnit& unit) {
    std::string out = "Component: " + unit.target + " (" + feedback::to_string(unit.kind) + ")\nFeedback:";
    for (const auto& item : unit.items) out += "\n" + describe_item(item);
    return out;
}

std::string describe_transcript(const Discussion& d) {
    std::string out = "Conflict: " + d.report.summary + "\nDiscussion so far:";
    for (const auto& t : d.transcript)
        out += "\n(" + std::to_string(t.round) + ") " + t.speaker + " [" + to_string(t.role) + "]: " + t.text;
    return out;
}

std::vector<const FeedbackItem*> conflicting_items(const Discussion& d, const FeedbackUnit& unit) {
    std::vector<const FeedbackItem*> out;
    for (const auto& item : unit.items)
        if (std::find(d.report.conflicting_item_ids.begin(), d.report.conflicting_item_ids.end(), item.id()) !=
            d.report.conflicting_item_ids.end())
            out.push_back(&item);
    return out;
}

const FeedbackItem& item_of(const FeedbackUnit& unit, std::string_view persona_id) {
    for (const auto& item : unit.items)
        if (item.persona_id == persona_id) return item;
    throw Error(ErrorCode::NotFound, "persona " + std::string(persona_id) + " has no feedback in " + unit.unit_id,
                std::string(persona_id));
}

gateway::ModelRequest request(std::string tag, std::string system_text, const persona::BriefExtract& extract) {
    gateway::ModelRequest req;
    req.schema_id = tag;
    req.tag = std::move(tag);
    req.system_text = std::move(system_text);
    req.user_parts.emplace_back(persona::brief_context(extract));
    return req;
}

} // namespace

std::optional<ConflictReport> heuristic_conflict(const FeedbackUnit& unit) {
    if (unit.items.size() < 2) return std::nullopt;
    std::set<std::string> previews;
    for (const auto& item : unit.items) previews.insert(feedback::to_json(item.preview).dump());
    if (previews.size() < 2) return std::nullopt;
    ConflictReport report{unit.unit_id,
                          std::to_string(previews.size()) + " differing proposals for the " +
                              feedback::to_string(unit.kind) + " of " + unit.target,
                          {}};
    for (const auto& item : unit.items) report.conflicting_item_ids.push_back(item.id());
    return report;
}

std::optional<ConflictReport> detect_conflict(const gateway::Gateway& gw, const FeedbackUnit& unit,
                                              const persona::BriefExtract& extract) {
    if (unit.items.size() < 2) return std::nullopt;
    if (gw.options().fallback) return heuristic_conflict(unit);
    auto req = request("discuss.detect",
                       "You moderate a panel of audience personas reviewing an advertisement poster. Decide whether "
                       "the feedback below on one component pulls in different directions. If it does, give a "
                       "one-line summary of the conflict and the ids of the conflicting feedback. Reply with JSON: "
                       "{\"conflict\": bool, \"summary\"?: str, \"item_ids\"?: [str]}.",
                       extract);
    req.user_parts.emplace_back(describe_unit(unit));
    const auto payload = gw.complete_structured(req).payload;
    if (!payload.at("conflict").get<bool>()) return std::nullopt;
    ConflictReport report{unit.unit_id, payload.at("summary").get<std::string>(), {}};
    for (const auto& id : payload.at("item_ids")) {
        const auto item_id = id.get<std::string>();
        if (!unit.find_item(item_id))
            throw Error(ErrorCode::Schema, "conflict names item '" + item_id + "' outside unit " + unit.unit_id,
                        item_id);
        if (std::find(report.conflicting_item_ids.begin(), report.conflicting_item_ids.end(), item_id) ==
            report.conflicting_item_ids.end())
            report.conflicting_item_ids.push_back(item_id);
    }
    if (report.conflicting_item_ids.size() < 2)
        throw Error(ErrorCode::Schema, "conflict needs two distinct items", unit.unit_id);
    return report;
}

Discussion open_discussion(const FeedbackUnit& unit, const ConflictReport& report, std::string discussion_id,
                           int max_rounds) {
    if (report.unit_id != unit.unit_id)
        throw Error(ErrorCode::Validation, "conflict report for " + report.unit_id + " used on " + unit.unit_id,
                    report.unit_id);
    if (report.summary.empty()) throw Error(ErrorCode::Validation, "conflict report has no summary", unit.unit_id);
    if (report.conflicting_item_ids.size() < 2)
        throw Error(ErrorCode::Validation, "a conflict needs at least two items", unit.unit_id);
    for (const auto& id : report.conflicting_item_ids)
        if (!unit.find_item(id))
            throw Error(ErrorCode::Validation, "item " + id + " is not part of unit " + unit.unit_id, id);
    if (max_rounds < 1) throw Error(ErrorCode::Validation, "max_rounds must be at least 1", "max_rounds");

    Discussion d;
    d.discussion_id = std::move(discussion_id);
    d.unit_id = unit.unit_id;
    d.report = report;
    d.max_rounds = max_rounds;
    d.transcript.push_back({std::string(kModerator),
                            "The panel disagrees: " + report.summary +
                                ". Do you have an opinion to share before the discussion starts?",
                            1, RoleTag::CommentRequest, {}});
    return d;
}

Discussion open_discussion(const FeedbackUnit& unit, const ConflictReport& report) {
    static std::atomic<unsigned long> counter{0};
    return open_discussion(unit, report, "d" + std::to_string(++counter));
}

Discussion submit_comment(const Discussion& d, const std::optional<std::string>& comment) {
    Discussion next = d;
    next.state = require(d, Operation::SubmitComment);
    if (d.state == State::Concluded) {
        if (d.rounds_used >= d.max_rounds)
            throw Error(ErrorCode::State,
                        "discussion " + d.discussion_id + " already used all " + std::to_string(d.max_rounds) +
                            " rounds",
                        d.discussion_id);
        ++next.rounds_used;
        next.omitted.clear();
    }
    if (comment && comment->find_first_not_of(" \t\r\n") != std::string::npos)
        next.transcript.push_back({std::string(kUser), *comment, next.rounds_used, RoleTag::UserComment, {}});
    return next;
}

Discussion ask_questions(const Context& ctx, const Discussion& d, const FeedbackUnit& unit) {
    check_unit(d, unit);
    Discussion next = d;
    next.state = require(d, Operation::AskQuestions);
    const auto items = conflicting_items(d, unit);
    for (const auto* item : items) {
        const auto& persona = ctx.personas.find(item->persona_id);
        auto req = request("discuss.question",
                           "You moderate a panel of audience personas reviewing an advertisement poster. Write one "
                           "thought-provoking question for the persona below that helps them weigh the other views "
                           "against the marketing goal, the brief and any comment from the designer. Reply with "
                           "JSON: {\"question\": str}.",
                           ctx.extract);
        req.user_parts.emplace_back(describe_unit(unit));
        req.user_parts.emplace_back(describe_transcript(next));
        req.user_parts.emplace_back("Ask this persona:\n" + persona::describe(persona) + "\nTheir feedback:\n" +
                                    describe_item(*item));
        const auto payload = ctx.gw.complete_structured(req).payload;
        next.transcript.push_back({std::string(kModerator), payload.at("question").get<std::string>(),
                                   next.rounds_used, RoleTag::Question, item->persona_id});
    }
    return next;
}

Discussion collect_answers(const Context& ctx, const Discussion& d, const FeedbackUnit& unit) {
    check_unit(d, unit);
    Discussion next = d;
    next.state = require(d, Operation::CollectAnswers);
    std::vector<const Turn*> questions;
    for (const auto& t : d.transcript)
        if (t.role == RoleTag::Question && t.round == d.rounds_used) questions.push_back(&t);

    std::vector<std::string> answers(questions.size());
    const auto errors = ctx.gw.fan_out(questions.size(), [&](std::size_t i) {
        const auto& persona = ctx.personas.find(questions[i]->addressee);
        auto req = request("discuss.answer",
                           "You are the persona described below, taking part in a moderated panel about an "
                           "advertisement poster. Answer the moderator's question in character. Stay open to the "
                           "other views and look for common ground that serves the marketing goal. Reply with JSON: "
                           "{\"answer\": str}.",
                           ctx.extract);
        req.user_parts.emplace_back(persona::describe(persona));
        req.user_parts.emplace_back(describe_unit(unit));
        req.user_parts.emplace_back(describe_transcript(d));
        req.user_parts.emplace_back("Your feedback:\n" + describe_item(item_of(unit, persona.id)) +
                                    "\nModerator's question to you: " + questions[i]->text);
        answers[i] = ctx.gw.complete_structured(req).payload.at("answer").get<std::string>();
    });

    std::size_t ok = 0;
    for (std::size_t i = 0; i < questions.size(); ++i) {
        if (errors[i]) {
            next.omitted.push_back(questions[i]->addressee);
            continue;
        }
        ++ok;
        next.transcript.push_back({questions[i]->addressee, answers[i], d.rounds_used, RoleTag::Answer, {}});
    }
    if (ok == 0 && !questions.empty()) std::rethrow_exception(errors.front());
    return next;
}

Concluded conclude(const Context& ctx, const Discussion& d, const FeedbackUnit& unit) {
    check_unit(d, unit);
    Discussion next = d;
    next.state = require(d, Operation::Conclude);
    const std::string shape = unit.kind == FeedbackKind::Theme ? "{\"tone\": str, \"color\": str}"
                              : unit.kind == FeedbackKind::Text ? "str (the full replacement text)"
                                                                : "str (a one-line image description)";
    auto req = request("discuss.conclude",
                       "You moderate a panel of audience personas reviewing an advertisement poster. Synthesize the "
                       "discussion into one conclusion for the component that respects each persona's answer and the "
                       "designer's comments. You may leave out views that cannot be reconciled; list those personas "
                       "in omitted_personas. Reply with JSON: {\"target\": str, \"statement\": str, \"summary\": str, "
                       "\"preview\": " +
                           shape + ", \"omitted_personas\": [str]}.",
                       ctx.extract);
    req.user_parts.emplace_back(describe_unit(unit));
    req.user_parts.emplace_back(describe_transcript(d));
    const auto payload = ctx.gw.complete_structured(req).payload;

    Conclusion c;
    c.target = payload.at("target").get<std::string>();
    if (c.target != unit.target)
        throw Error(ErrorCode::Schema, "conclusion targets '" + c.target + "', unit targets '" + unit.target + "'",
                    c.target);
    c.summary = payload.at("summary").get<std::string>();
    c.preview = feedback::preview_from_json(payload.at("preview"));
    const auto check = feedback::guardrail_check(c, unit.kind, ctx.document);
    if (!check.ok())
        throw Error(ErrorCode::Schema, "conclusion fails guardrail " + check.rule + " (" + check.detail + ")",
                    check.rule);
    c.omitted_personas = d.omitted;
    for (const auto& id : payload.at("omitted_personas")) {
        const auto pid = id.get<std::string>();
        if (std::find(c.omitted_personas.begin(), c.omitted_personas.end(), pid) == c.omitted_personas.end())
            c.omitted_personas.push_back(pid);
    }

    next.transcript.push_back({std::string(kModerator), payload.at("statement").get<std::string>(), d.rounds_used,
                               RoleTag::ConclusionStatement, {}});
    next.conclusion = c;
    FeedbackUnit resolved = unit;
    resolved.status = feedback::UnitStatus::Resolved;
    resolved.conclusion = std::move(c);
    return {std::move(next), std::move(resolved)};
}

Concluded advance(const Context& ctx, const Discussion& d, const FeedbackUnit& unit) {
    if (d.state == State::AwaitingComment || d.state == State::Concluded)
        throw Error(ErrorCode::State, std::string("discussion is ") + to_string(d.state) + "; submit a comment first",
                    d.discussion_id);
    Discussion cur = d;
    if (cur.state == State::Questioning) cur = ask_questions(ctx, cur, unit);
    if (cur.state == State::Answering) cur = collect_answers(ctx, cur, unit);
    return conclude(ctx, cur, unit);
}

Json to_json(const ConflictReport& r) {
    return {{"unit_id", r.unit_id}, {"summary", r.summary}, {"conflicting_item_ids", r.conflicting_item_ids}};
}

ConflictReport report_from_json(const Json& j) {
    return {j.at("unit_id").get<std::string>(), j.at("summary").get<std::string>(),
            j.at("conflicting_item_ids").get<std::vector<std::string>>()};
}

Json to_json(const Turn& t) {
    Json j{{"speaker", t.speaker}, {"role_tag", to_string(t.role)}, {"round", t.round}, {"text", t.text}};
    if (!t.addressee.empty()) j["addressee"] = t.addressee;
    return j;
}

Turn turn_from_json(const Json& j) {
    return {j.at("speaker").get<std::string>(), j.at("text").get<std::string>(), j.at("round").get<int>(),
            role_from_string(j.at("role_tag").get<std::string>()), j.value("addressee", "")};
}

Json to_json(const Discussion& d) {
    Json transcript = Json::array();
    for (const auto& t : d.transcript) transcript.push_back(to_json(t));
    return {{"discussion_id", d.discussion_id},
            {"unit_id", d.unit_id},
            {"report", to_json(d.report)},
            {"transcript", transcript},
            {"state", to_string(d.state)},
            {"rounds_used", d.rounds_used},
            {"max_rounds", d.max_rounds},
            {"conclusion", d.conclusion ? feedback::to_json(*d.conclusion) : Json(nullptr)},
            {"omitted", d.omitted}};
}

Discussion discussion_from_json(const Json& j) {
    Discussion d;
    d.discussion_id = j.at("discussion_id").get<std::string>();
    d.unit_id = j.at("unit_id").get<std::string>();
    d.report = report_from_json(j.at("report"));
    for (const auto& t : j.at("transcript")) d.transcript.push_back(turn_from_json(t));
    d.state = state_from_string(j.at("state").get<std::string>());
    d.rounds_used = j.at("rounds_used").get<int>();
    d.max_rounds = j.at("max_rounds").get<int>();
    if (const auto& c = j.at("conclusion"); !c.is_null()) d.conclusion = feedback::conclusion_from_json(c);
    d.omitted = j.at("omitted").get<std::vector<std::string>>();
    return d;
}

} // namespace postercrit::discussion
