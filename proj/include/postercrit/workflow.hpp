#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "postercrit/canvas.hpp"
#include "postercrit/discussion.hpp"
#include "postercrit/feedback.hpp"
#include "postercrit/persona.hpp"
#include "postercrit/theme.hpp"

namespace postercrit::workflow {

using Json = nlohmann::json;

inline constexpr std::string_view kConclusionPrefix = "conclusion:";

struct Analysis {
    std::vector<feedback::FeedbackUnit> units;
    std::map<std::string, discussion::ConflictReport> reports;
};

// Runs conflict detection on every multi-item unit and settles its status.
Analysis analyse_units(const gateway::Gateway& gw, std::vector<feedback::FeedbackUnit> units,
                       const persona::BriefExtract& extract);

// An item id, or "conclusion:<unit_id>".
struct ResolvedRef {
    std::size_t unit_index = 0;
    std::optional<feedback::FeedbackItem> item;
    feedback::FeedbackKind kind = feedback::FeedbackKind::Text;
    feedback::Preview preview;
};

ResolvedRef resolve_ref(const std::vector<feedback::FeedbackUnit>& units, std::string_view ref);

struct Applied {
    canvas::CanvasDocument document;
    std::vector<canvas::Adjustment> adjustments;
};

// Text and image refs only; theme refs go through apply_theme_ref.
Applied apply_ref(const gateway::Gateway& gw, const canvas::CanvasDocument& doc,
                  const std::vector<feedback::FeedbackUnit>& units, std::string_view ref);
Applied apply_theme_ref(const gateway::Gateway& gw, const canvas::CanvasDocument& doc,
                        const std::vector<feedback::FeedbackUnit>& units, std::string_view ref,
                        const canvas::CanvasDocument& templ, int max_rounds);

struct RunOptions {
    int discussion_rounds = discussion::kDefaultMaxRounds;
};

struct RunResult {
    persona::BriefExtract extract;
    persona::PersonaSet personas;
    feedback::FeedbackBatch feedback;
    Analysis analysis;
    std::map<std::string, discussion::Discussion> discussions;
};

// Whole pipeline with auto-discussions that carry no user comment.
RunResult run_pipeline(const gateway::Gateway& gw, const persona::MarketingBrief& brief,
                       const canvas::CanvasDocument& draft, const RunOptions& options = {});

// Files: extract.json, personas.json, feedback.json, units.json, document.json,
// discussions/<unit_id>.json. Assets live wherever the gateway's store points.
void write_run(const RunResult& result, const canvas::CanvasDocument& draft, const std::filesystem::path& out_dir);

struct RunDir {
    canvas::CanvasDocument document;
    std::vector<feedback::FeedbackUnit> units;
};

RunDir read_run(const std::filesystem::path& dir);

std::string read_file(const std::filesystem::path& path);
// Writes via a temporary file and rename.
void write_file(const std::filesystem::path& path, const std::string& content);
std::string pretty(const Json& json);

} // namespace postercrit::workflow
