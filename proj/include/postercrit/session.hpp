#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "postercrit/canvas.hpp"
#include "postercrit/config.hpp"
#include "postercrit/discussion.hpp"
#include "postercrit/feedback.hpp"
#include "postercrit/persona.hpp"
#include "postercrit/theme.hpp"

namespace postercrit::session {

using Json = nlohmann::json;

// created -> personas_ready -> feedback_ready, or failed at any stage.
inline constexpr std::string_view kStatusCreated = "created";
inline constexpr std::string_view kStatusPersonasReady = "personas_ready";
inline constexpr std::string_view kStatusFeedbackReady = "feedback_ready";
inline constexpr std::string_view kStatusFailed = "failed";

struct Snapshot {
    canvas::CanvasDocument document;
    // draft | accepted | manual_edit | theme
    std::string provenance;
    std::string ref;

    bool operator==(const Snapshot&) const = default;
};

struct SessionState {
    std::string session_id;
    std::string status{kStatusCreated};
    std::string error;
    persona::MarketingBrief brief;
    std::optional<persona::BriefExtract> extract;
    std::optional<persona::PersonaSet> personas;
    std::vector<Snapshot> history;
    std::vector<feedback::FeedbackUnit> units;
    std::vector<feedback::PersonaFailure> failures;
    std::map<std::string, discussion::ConflictReport> reports;
    // Latest discussion per unit, and how many were opened on it.
    std::map<std::string, discussion::Discussion> discussions;
    std::map<std::string, int> discussion_counts;
    // Accepted ref -> index into history.
    std::map<std::string, std::size_t> accepted;
    std::uint64_t last_seq = 0;

    const canvas::CanvasDocument& document() const { return history.back().document; }
    const feedback::FeedbackUnit& unit(std::string_view unit_id) const;
};

Json to_json(const SessionState& state);
SessionState state_from_json(const Json& json);

struct EventRecord {
    std::uint64_t seq = 0;
    std::string session_id;
    std::string kind;
    Json payload;
};

Json to_json(const EventRecord& event);
EventRecord event_from_json(const Json& json);

// Folds one event into the state. Events carry results, not commands, so
// replay never calls a model.
void apply_event(SessionState& state, const EventRecord& event);
SessionState replay(const std::vector<EventRecord>& events);

// Append-only JSON-lines file, fsynced per record.
class EventLog {
public:
    explicit EventLog(const std::filesystem::path& path);
    ~EventLog();
    EventLog(const EventLog&) = delete;
    EventLog& operator=(const EventLog&) = delete;

    void append(const EventRecord& event);
    // A torn final line from an interrupted write is dropped and truncated away.
    static std::vector<EventRecord> read(const std::filesystem::path& path);

private:
    int fd_ = -1;
};

struct AcceptResult {
    // Set when a theme ref came without a template choice.
    std::optional<theme::RankedTemplates> choices;
    std::size_t snapshot = 0;
    bool repeated = false;
};

struct Settings {
    int discussion_rounds = discussion::kDefaultMaxRounds;
    int theme_rounds = theme::kDefaultMaxRounds;
    int top_k = theme::kDefaultTopK;
    // Snapshot file cadence, in events.
    int snapshot_every = 16;
};

class Session;

// Owns all sessions under <data_dir>/sessions/<id>/. Each session mutates on
// its own worker thread; readers get immutable snapshots.
class Service {
public:
    Service(std::shared_ptr<gateway::Gateway> gw, std::filesystem::path data_dir, Settings settings = {},
            std::shared_ptr<const theme::TemplateIndex> templates = nullptr);
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    // Persists the session and queues the pipeline; returns the id at once.
    std::string create_session(const persona::MarketingBrief& brief, const canvas::CanvasDocument& draft);
    // Blocks until the pipeline leaves the created/personas_ready states.
    std::shared_ptr<const SessionState> wait_ready(const std::string& id,
                                                   std::chrono::milliseconds timeout = std::chrono::seconds(30));

    std::shared_ptr<const SessionState> state(const std::string& id) const;
    std::vector<std::string> session_ids() const;

    AcceptResult accept(const std::string& id, const std::string& ref,
                        const std::optional<std::string>& template_id = std::nullopt);
    std::size_t manual_edit(const std::string& id, const canvas::CanvasDocument& doc);
    persona::Persona add_persona(const std::string& id, const persona::PersonaDetails& details);

    discussion::Discussion open_discussion(const std::string& id, const std::string& unit_id);
    discussion::Discussion comment(const std::string& id, const std::string& unit_id,
                                   const std::optional<std::string>& text);
    discussion::Discussion advance(const std::string& id, const std::string& unit_id);

    // Events with seq > after, waiting up to `timeout` for at least one.
    std::vector<EventRecord> events(const std::string& id, std::uint64_t after,
                                    std::chrono::milliseconds timeout = std::chrono::milliseconds(0)) const;

    Json export_session(const std::string& id) const;
    std::string import_session(const Json& archive);

    const gateway::Gateway& gateway() const noexcept { return *gw_; }
    const Settings& settings() const noexcept { return settings_; }
    const std::filesystem::path& data_dir() const noexcept { return data_dir_; }

private:
    std::shared_ptr<Session> find(const std::string& id) const;
    std::shared_ptr<Session> open(const std::string& id, std::vector<EventRecord> events);
    void run_pipeline(Session& s);

    std::shared_ptr<gateway::Gateway> gw_;
    std::filesystem::path data_dir_;
    Settings settings_;
    std::shared_ptr<const theme::TemplateIndex> templates_;
    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
};

// HTTP+JSON and server-sent events over a Service.
class HttpServer {
public:
    explicit HttpServer(Service& service);
    ~HttpServer();

    // Binds and serves on a background thread; returns the bound port.
    int start(const std::string& host, int port);
    // Serves on the calling thread until stop().
    void listen(const std::string& host, int port);
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

int http_status(ErrorCode code) noexcept;

} // namespace postercrit::session
