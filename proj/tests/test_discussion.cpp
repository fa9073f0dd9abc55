#include <doctest.h>

#include "postercrit/discussion.hpp"
#include "postercrit/workflow.hpp"
#include "support/support.hpp"

using namespace postercrit;
using pctest::Json;
namespace fs = std::filesystem;
using namespace postercrit::discussion;
using feedback::FeedbackItem;
using feedback::FeedbackKind;

namespace {

const std::vector<std::pair<State, Operation>> kLegal = {
    {State::AwaitingComment, Operation::SubmitComment}, {State::Concluded, Operation::SubmitComment},
    {State::Questioning, Operation::AskQuestions},      {State::Answering, Operation::CollectAnswers},
    {State::Concluding, Operation::Conclude}};

struct Panel {
    pctest::TempDir tmp;
    pctest::Rng rng{7};
    std::shared_ptr<gateway::ScriptedBackend> backend = std::make_shared<gateway::ScriptedBackend>();
    std::shared_ptr<gateway::Gateway> gw = pctest::make_gateway(backend, tmp / "assets", false);
    canvas::CanvasDocument doc = canvas::parse_document(pctest::slurp(pctest::fixtures_dir() / "cafe" / "draft.json"));
    persona::BriefExtract extract{"Win the voucher draw", "locals", {}, "BRIEF RAW TEXT: voucher draw closes 12 May"};
    persona::PersonaSet personas;
    feedback::FeedbackUnit unit;
    ConflictReport report;

    Panel() {
        const auto payload = pctest::personas_payload(rng, {0, 1, 2, 3});
        for (int i = 0; i < 4; ++i) {
            persona::Persona p;
            p.id = "p" + std::to_string(i + 1);
            p.details = persona::details_from_json(payload["personas"][static_cast<std::size_t>(i)]);
            p.dim1 = i < 2 ? persona::Level::Low : persona::Level::High;
            p.dim2 = i % 2 ? persona::Level::High : persona::Level::Low;
            personas.personas.push_back(p);
        }
        std::vector<FeedbackItem> items;
        for (const char* p : {"p1", "p2", "p3"})
            items.push_back({p, "t2", FeedbackKind::Text, "opinion of " + std::string(p),
                             std::string("text from ") + p, "rationale"});
        unit = feedback::group_units(items, doc).at(0);
        report = {unit.unit_id, "p1 and p2 disagree", {"p1-text-t2", "p2-text-t2"}};
    }

    Context ctx() const { return {*gw, personas, extract, doc}; }
    void script() { pctest::script_round(*backend, rng, unit, 2); }
};

Discussion reach(Panel& panel, State target) {
    auto d = open_discussion(panel.unit, panel.report, "text-t2.1");
    if (target == State::AwaitingComment) return d;
    d = submit_comment(d, std::string("keep it short"));
    if (target == State::Questioning) return d;
    panel.script();
    d = ask_questions(panel.ctx(), d, panel.unit);
    if (target == State::Answering) return d;
    d = collect_answers(panel.ctx(), d, panel.unit);
    if (target == State::Concluding) return d;
    return conclude(panel.ctx(), d, panel.unit).discussion;
}

std::optional<State> perform(Panel& panel, const Discussion& d, Operation op) {
    switch (op) {
    case Operation::SubmitComment: return submit_comment(d, std::nullopt).state;
    case Operation::AskQuestions: return ask_questions(panel.ctx(), d, panel.unit).state;
    case Operation::CollectAnswers: return collect_answers(panel.ctx(), d, panel.unit).state;
    case Operation::Conclude: return conclude(panel.ctx(), d, panel.unit).discussion.state;
    }
    return std::nullopt;
}

} // namespace

TEST_CASE("transition table matches the legal set") {
    for (auto s : kAllStates)
        for (auto op : kAllOperations) {
            const bool legal = std::find(kLegal.begin(), kLegal.end(), std::pair{s, op}) != kLegal.end();
            CHECK(transition(s, op).has_value() == legal);
        }
    CHECK(transition(State::Concluded, Operation::SubmitComment) == State::Questioning);
    CHECK(transition(State::Concluding, Operation::Conclude) == State::Concluded);
}

TEST_CASE("every state and operation pair behaves as the table says") {
    for (auto s : kAllStates) {
        for (auto op : kAllOperations) {
            CAPTURE(to_string(s));
            CAPTURE(to_string(op));
            Panel panel;
            const auto d = reach(panel, s);
            REQUIRE(d.state == s);
            panel.script();
            const auto expected = transition(s, op);
            if (expected) {
                CHECK(perform(panel, d, op) == expected);
            } else {
                const auto calls = panel.backend->requests().size();
                try {
                    perform(panel, d, op);
                    FAIL("illegal operation went through");
                } catch (const Error& e) {
                    CHECK(e.code() == ErrorCode::State);
                }
                CHECK(panel.backend->requests().size() == calls);
            }
        }
    }
}

TEST_CASE("questions go only to the conflicting personas") {
    Panel panel;
    auto d = submit_comment(open_discussion(panel.unit, panel.report, "x"), std::nullopt);
    panel.script();
    d = ask_questions(panel.ctx(), d, panel.unit);
    std::vector<std::string> addressees;
    for (const auto& t : d.transcript)
        if (t.role == RoleTag::Question) addressees.push_back(t.addressee);
    CHECK(addressees == std::vector<std::string>{"p1", "p2"});
    for (const auto& r : panel.backend->requests()) {
        CHECK(r.text.find(panel.extract.raw_text) != std::string::npos);
        CHECK(r.text.find(panel.extract.goal) != std::string::npos);
    }
}

TEST_CASE("a failed answer is omitted; all failing is an error") {
    Panel panel;
    auto d = submit_comment(open_discussion(panel.unit, panel.report, "x"), std::nullopt);
    panel.script();
    d = ask_questions(panel.ctx(), d, panel.unit);
    panel.backend->fail_next("discuss.answer");
    const auto answered = collect_answers(panel.ctx(), d, panel.unit);
    CHECK(answered.omitted == std::vector<std::string>{"p1"});
    const auto done = conclude(panel.ctx(), answered, panel.unit);
    const auto& omitted = done.unit.conclusion->omitted_personas;
    CHECK(std::find(omitted.begin(), omitted.end(), "p1") != omitted.end());

    Panel other;
    auto d2 = submit_comment(open_discussion(other.unit, other.report, "y"), std::nullopt);
    other.script();
    d2 = ask_questions(other.ctx(), d2, other.unit);
    other.backend->fail_next("discuss.answer");
    other.backend->fail_next("discuss.answer");
    CHECK_THROWS_AS(collect_answers(other.ctx(), d2, other.unit), Error);
}

TEST_CASE("conclusions that miss the target are rejected") {
    Panel panel;
    auto d = reach(panel, State::Concluding);
    conclude(panel.ctx(), d, panel.unit);  // drains the scripted conclusion
    auto payload = pctest::conclusion_payload(panel.rng, panel.unit);
    payload["target"] = "t1";
    panel.backend->script("discuss.conclude", payload);
    CHECK_THROWS_AS(conclude(panel.ctx(), d, panel.unit), Error);
    payload["target"] = "t2";
    payload["preview"] = Json{{"tone", "x"}, {"color", "y"}};
    panel.backend->script("discuss.conclude", payload);
    try {
        conclude(panel.ctx(), d, panel.unit);
        FAIL("expected schema error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Schema);
        CHECK(e.subject() == "preview-shape");
    }
}

TEST_CASE("opening needs a matching report") {
    Panel panel;
    auto bad = panel.report;
    bad.conflicting_item_ids = {"p1-text-t2"};
    CHECK_THROWS_AS(open_discussion(panel.unit, bad, "x"), Error);
    bad = panel.report;
    bad.conflicting_item_ids = {"p1-text-t2", "p9-text-t2"};
    CHECK_THROWS_AS(open_discussion(panel.unit, bad, "x"), Error);
    const auto d = open_discussion(panel.unit, panel.report, "x");
    REQUIRE(d.transcript.size() == 1);
    CHECK(d.transcript[0].role == RoleTag::CommentRequest);
    CHECK(d.transcript[0].speaker == kModerator);
    CHECK(open_discussion(panel.unit, panel.report).discussion_id != open_discussion(panel.unit, panel.report).discussion_id);
}

TEST_CASE("cafe flow yields six turns and a guarded conclusion") {
    pctest::TempDir tmp;
    auto backend = std::make_shared<gateway::ScriptedBackend>(pctest::fixtures_dir() / "cafe" / "script");
    auto gw = pctest::make_gateway(backend, tmp / "assets", false);
    const auto draft = canvas::parse_document(pctest::slurp(pctest::fixtures_dir() / "cafe" / "draft.json"));
    const auto run = workflow::run_pipeline(*gw, persona::MarketingBrief::from_files({pctest::fixtures_dir() / "cafe" / "brief.txt"}),
                                            draft);
    REQUIRE(run.discussions.count("text-t2"));
    const auto& d = run.discussions.at("text-t2");
    std::vector<RoleTag> roles;
    for (const auto& t : d.transcript) roles.push_back(t.role);
    CHECK(roles == std::vector<RoleTag>{RoleTag::CommentRequest, RoleTag::Question, RoleTag::Question, RoleTag::Answer,
                                        RoleTag::Answer, RoleTag::ConclusionStatement});
    CHECK(d.state == State::Concluded);
    CHECK(d.report.summary.find("Conflicting views on the level of emphasis") == 0);
    CHECK(d.transcript[1].text.find("a more subtle mention") != std::string::npos);
    REQUIRE(d.conclusion.has_value());
    CHECK(d.conclusion->summary.find("emphasize Mother's Day, while ensuring") != std::string::npos);
    CHECK(std::get<std::string>(d.conclusion->preview).rfind("Celebrate Mother's Day with", 0) == 0);
    CHECK(feedback::guardrail_check(*d.conclusion, FeedbackKind::Text, draft).ok());
    CHECK(run.discussions.size() == 1);
}

TEST_CASE("sports flow leaves agreeing personas out of the panel") {
    pctest::TempDir tmp;
    auto backend = std::make_shared<gateway::ScriptedBackend>(pctest::fixtures_dir() / "sports" / "script");
    auto gw = pctest::make_gateway(backend, tmp / "assets", false);
    const auto draft = canvas::parse_document(pctest::slurp(pctest::fixtures_dir() / "sports" / "draft.json"));
    const auto run = workflow::run_pipeline(
        *gw, persona::MarketingBrief::from_files({pctest::fixtures_dir() / "sports" / "brief.txt"}), draft);
    CHECK(run.discussions.count("text-t1") == 1);
    CHECK(run.discussions.count("theme") == 1);
    CHECK(run.discussions.count("image-img1") == 0);
    const auto& theme = run.discussions.at("theme");
    for (const auto& t : theme.transcript)
        if (t.role == RoleTag::Question) CHECK((t.addressee == "p1" || t.addressee == "p4"));
    REQUIRE(theme.conclusion.has_value());
    CHECK(std::holds_alternative<feedback::ThemeDescriptor>(theme.conclusion->preview));
}

TEST_CASE("iteration stops at max_rounds") {
    Panel panel;
    auto d = open_discussion(panel.unit, panel.report, "x", kDefaultMaxRounds);
    for (int round = 1; round <= kDefaultMaxRounds; ++round) {
        d = submit_comment(d, round == 1 ? std::nullopt : std::optional<std::string>("make it shorter"));
        CHECK(d.rounds_used == round);
        panel.script();
        d = advance(panel.ctx(), d, panel.unit).discussion;
        CHECK(d.state == State::Concluded);
    }
    try {
        submit_comment(d, std::string("once more"));
        FAIL("expected the round limit");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::State);
    }
    int statements = 0;
    for (const auto& t : d.transcript) statements += t.role == RoleTag::ConclusionStatement;
    CHECK(statements == kDefaultMaxRounds);
    CHECK(discussion_from_json(to_json(d)) == d);
}

TEST_CASE("a comment after the conclusion opens another round") {
    Panel panel;
    auto d = reach(panel, State::Concluded);
    const auto before = d.transcript.size();
    d = submit_comment(d, std::string("can you make a shorter version?"));
    CHECK(d.state == State::Questioning);
    CHECK(d.rounds_used == 2);
    CHECK(d.transcript.size() == before + 1);
    CHECK(d.transcript.back().role == RoleTag::UserComment);
    CHECK(d.transcript.back().round == 2);
}

TEST_CASE("heuristic conflict detection compares previews") {
    Panel panel;
    const auto r = heuristic_conflict(panel.unit);
    REQUIRE(r.has_value());
    CHECK(r->conflicting_item_ids.size() == 3);
    auto same = panel.unit;
    for (auto& item : same.items) item.preview = std::string("identical");
    CHECK_FALSE(heuristic_conflict(same).has_value());
}
