#pragma once

#include <optional>
#include <string>
#include <vector>

#include "postercrit/canvas.hpp"
#include "postercrit/feedback.hpp"
#include "postercrit/gateway.hpp"
#include "postercrit/persona.hpp"

namespace postercrit::discussion {

using feedback::Conclusion;
using feedback::FeedbackUnit;
using Json = nlohmann::json;

inline constexpr int kDefaultMaxRounds = 5;
inline constexpr std::string_view kModerator = "moderator";
inline constexpr std::string_view kUser = "user";

struct ConflictReport {
    std::string unit_id;
    std::string summary;
    std::vector<std::string> conflicting_item_ids;

    bool operator==(const ConflictReport&) const = default;
};

enum class RoleTag { CommentRequest, UserComment, Question, Answer, ConclusionStatement };

const char* to_string(RoleTag tag) noexcept;
RoleTag role_from_string(std::string_view s);

struct Turn {
    // "moderator", "user", or a persona id.
    std::string speaker;
    std::string text;
    int round = 1;
    RoleTag role = RoleTag::CommentRequest;
    // Persona a question is put to; empty otherwise.
    std::string addressee;

    bool operator==(const Turn&) const = default;
};

enum class State { AwaitingComment, Questioning, Answering, Concluding, Concluded };

const char* to_string(State state) noexcept;
State state_from_string(std::string_view s);

enum class Operation { SubmitComment, AskQuestions, CollectAnswers, Conclude };

inline constexpr State kAllStates[] = {State::AwaitingComment, State::Questioning, State::Answering,
                                       State::Concluding, State::Concluded};
inline constexpr Operation kAllOperations[] = {Operation::SubmitComment, Operation::AskQuestions,
                                               Operation::CollectAnswers, Operation::Conclude};

const char* to_string(Operation op) noexcept;
// State the operation moves to, or nullopt when it is illegal in `from`.
std::optional<State> transition(State from, Operation op) noexcept;

struct Discussion {
    std::string discussion_id;
    std::string unit_id;
    ConflictReport report;
    std::vector<Turn> transcript;
    State state = State::AwaitingComment;
    int rounds_used = 1;
    int max_rounds = kDefaultMaxRounds;
    std::optional<Conclusion> conclusion;
    // Personas whose answer failed in the current round.
    std::vector<std::string> omitted;

    bool operator==(const Discussion&) const = default;
};

struct Context {
    const gateway::Gateway& gw;
    const persona::PersonaSet& personas;
    const persona::BriefExtract& extract;
    const canvas::CanvasDocument& document;
};

// Model call over the unit's items, or the preview-difference heuristic in fallback mode.
std::optional<ConflictReport> detect_conflict(const gateway::Gateway& gw, const FeedbackUnit& unit,
                                              const persona::BriefExtract& extract);
std::optional<ConflictReport> heuristic_conflict(const FeedbackUnit& unit);

Discussion open_discussion(const FeedbackUnit& unit, const ConflictReport& report, std::string discussion_id,
                           int max_rounds = kDefaultMaxRounds);
// Process-unique id "d<n>".
Discussion open_discussion(const FeedbackUnit& unit, const ConflictReport& report);

Discussion submit_comment(const Discussion& d, const std::optional<std::string>& comment);
Discussion ask_questions(const Context& ctx, const Discussion& d, const FeedbackUnit& unit);
Discussion collect_answers(const Context& ctx, const Discussion& d, const FeedbackUnit& unit);

struct Concluded {
    Discussion discussion;
    FeedbackUnit unit;
};

Concluded conclude(const Context& ctx, const Discussion& d, const FeedbackUnit& unit);

// questioning -> answering -> concluding -> concluded.
Concluded advance(const Context& ctx, const Discussion& d, const FeedbackUnit& unit);

Json to_json(const ConflictReport& report);
ConflictReport report_from_json(const Json& json);
Json to_json(const Turn& turn);
Turn turn_from_json(const Json& json);
Json to_json(const Discussion& d);
Discussion discussion_from_json(const Json& json);

} // namespace postercrit::discussion
