#include "postercrit/session.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <random>
#include <sstream>

#include "postercrit/workflow.hpp"

namespace postercrit::session {

using feedback::FeedbackUnit;
using workflow::pretty;

const FeedbackUnit& SessionState::unit(std::string_view unit_id) const {
    for (const auto& u : units)
        if (u.unit_id == unit_id) return u;
    throw Error(ErrorCode::NotFound, "no feedback unit '" + std::string(unit_id) + "'", std::string(unit_id));
}

namespace {

Json snapshot_json(const Snapshot& s) {
    return {{"document", canvas::document_to_json(s.document)}, {"provenance", s.provenance}, {"ref", s.ref}};
}

Snapshot snapshot_from(const Json& j) {
    return {canvas::document_from_json(j.at("document")), j.at("provenance").get<std::string>(),
            j.at("ref").get<std::string>()};
}

Json failures_json(const std::vector<feedback::PersonaFailure>& failures) {
    Json out = Json::array();
    for (const auto& f : failures) out.push_back({{"persona_id", f.persona_id}, {"message", f.message}});
    return out;
}

std::vector<feedback::PersonaFailure> failures_from(const Json& j) {
    std::vector<feedback::PersonaFailure> out;
    for (const auto& f : j) out.push_back({f.at("persona_id").get<std::string>(), f.at("message").get<std::string>()});
    return out;
}

Json units_json(const std::vector<FeedbackUnit>& units) {
    Json out = Json::array();
    for (const auto& u : units) out.push_back(feedback::to_json(u));
    return out;
}

std::vector<FeedbackUnit> units_from(const Json& j) {
    std::vector<FeedbackUnit> out;
    for (const auto& u : j) out.push_back(feedback::unit_from_json(u));
    return out;
}

Json reports_json(const std::map<std::string, discussion::ConflictReport>& reports) {
    Json out = Json::object();
    for (const auto& [id, r] : reports) out[id] = discussion::to_json(r);
    return out;
}

std::map<std::string, discussion::ConflictReport> reports_from(const Json& j) {
    std::map<std::string, discussion::ConflictReport> out;
    for (const auto& [id, r] : j.items()) out.emplace(id, discussion::report_from_json(r));
    return out;
}

FeedbackUnit& unit_mut(SessionState& s, std::string_view unit_id) {
    return const_cast<FeedbackUnit&>(s.unit(unit_id));
}

} // namespace

Json to_json(const SessionState& s) {
    Json history = Json::array();
    for (const auto& snap : s.history) history.push_back(snapshot_json(snap));
    Json discussions = Json::object();
    for (const auto& [id, d] : s.discussions) discussions[id] = discussion::to_json(d);
    return {{"session_id", s.session_id},
            {"status", s.status},
            {"error", s.error},
            {"brief", persona::to_json(s.brief)},
            {"extract", s.extract ? persona::to_json(*s.extract) : Json(nullptr)},
            {"personas", s.personas ? persona::to_json(*s.personas) : Json(nullptr)},
            {"history", history},
            {"units", units_json(s.units)},
            {"failures", failures_json(s.failures)},
            {"reports", reports_json(s.reports)},
            {"discussions", discussions},
            {"discussion_counts", s.discussion_counts},
            {"accepted", s.accepted},
            {"last_seq", s.last_seq}};
}

SessionState state_from_json(const Json& j) {
    SessionState s;
    s.session_id = j.at("session_id").get<std::string>();
    s.status = j.at("status").get<std::string>();
    s.error = j.at("error").get<std::string>();
    s.brief = persona::brief_from_json(j.at("brief"));
    if (const auto& e = j.at("extract"); !e.is_null()) s.extract = persona::extract_from_json(e);
    if (const auto& p = j.at("personas"); !p.is_null()) s.personas = persona::persona_set_from_json(p);
    for (const auto& h : j.at("history")) s.history.push_back(snapshot_from(h));
    s.units = units_from(j.at("units"));
    s.failures = failures_from(j.at("failures"));
    s.reports = reports_from(j.at("reports"));
    for (const auto& [id, d] : j.at("discussions").items()) s.discussions.emplace(id, discussion::discussion_from_json(d));
    s.discussion_counts = j.at("discussion_counts").get<std::map<std::string, int>>();
    s.accepted = j.at("accepted").get<std::map<std::string, std::size_t>>();
    s.last_seq = j.at("last_seq").get<std::uint64_t>();
    return s;
}

Json to_json(const EventRecord& e) {
    return {{"seq", e.seq}, {"session_id", e.session_id}, {"kind", e.kind}, {"payload", e.payload}};
}

EventRecord event_from_json(const Json& j) {
    return {j.at("seq").get<std::uint64_t>(), j.at("session_id").get<std::string>(), j.at("kind").get<std::string>(),
            j.at("payload")};
}

void apply_event(SessionState& s, const EventRecord& e) {
    if (e.seq != s.last_seq + 1)
        throw Error(ErrorCode::Validation,
                    "event " + std::to_string(e.seq) + " does not follow " + std::to_string(s.last_seq), e.session_id);
    const auto& p = e.payload;
    if (e.kind == "created") {
        s.session_id = e.session_id;
        s.brief = persona::brief_from_json(p.at("brief"));
        s.history = {{canvas::document_from_json(p.at("document")), "draft", ""}};
        s.status = kStatusCreated;
    } else if (e.kind == "personas_ready") {
        s.extract = persona::extract_from_json(p.at("extract"));
        s.personas = persona::persona_set_from_json(p.at("personas"));
        s.status = kStatusPersonasReady;
    } else if (e.kind == "feedback_ready") {
        s.units = units_from(p.at("units"));
        s.failures = failures_from(p.at("failures"));
        s.reports = reports_from(p.at("reports"));
        s.status = kStatusFeedbackReady;
    } else if (e.kind == "failed") {
        s.status = kStatusFailed;
        s.error = p.at("stage").get<std::string>() + ": " + p.at("message").get<std::string>();
    } else if (e.kind == "persona_added") {
        auto set = persona::to_json(*s.personas);
        set["personas"].push_back(p.at("persona"));
        s.personas = persona::persona_set_from_json(set);
    } else if (e.kind == "accepted" || e.kind == "theme_applied") {
        const auto ref = p.at("ref").get<std::string>();
        s.history.push_back({canvas::document_from_json(p.at("document")),
                             e.kind == "accepted" ? "accepted" : "theme", ref});
        s.accepted[ref] = s.history.size() - 1;
        auto& unit = unit_mut(s, p.at("unit_id").get<std::string>());
        unit.status = feedback::UnitStatus::Resolved;
        unit.accepted_ref = ref;
    } else if (e.kind == "manual_edit") {
        s.history.push_back({canvas::document_from_json(p.at("document")), "manual_edit", ""});
    } else if (e.kind == "turn") {
        auto& d = s.discussions.at(p.at("unit_id").get<std::string>());
        const auto index = p.at("index").get<std::size_t>();
        if (index == d.transcript.size()) d.transcript.push_back(discussion::turn_from_json(p.at("turn")));
    } else if (e.kind == "discussion") {
        auto d = discussion::discussion_from_json(p.at("discussion"));
        const auto unit_id = d.unit_id;
        s.discussions.insert_or_assign(unit_id, std::move(d));
        if (p.contains("count")) s.discussion_counts[unit_id] = p.at("count").get<int>();
        if (p.contains("unit")) unit_mut(s, unit_id) = feedback::unit_from_json(p.at("unit"));
    } else {
        throw Error(ErrorCode::Validation, "unknown event kind '" + e.kind + "'", e.kind);
    }
    s.last_seq = e.seq;
}

SessionState replay(const std::vector<EventRecord>& events) {
    SessionState s;
    for (const auto& e : events) apply_event(s, e);
    return s;
}

EventLog::EventLog(const std::filesystem::path& path) {
    fd_ = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd_ < 0) throw Error(ErrorCode::Io, "cannot open event log " + path.string(), path.string());
}

EventLog::~EventLog() {
    if (fd_ >= 0) ::close(fd_);
}

void EventLog::append(const EventRecord& event) {
    const std::string line = to_json(event).dump() + "\n";
    std::size_t done = 0;
    while (done < line.size()) {
        const auto n = ::write(fd_, line.data() + done, line.size() - done);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw Error(ErrorCode::Io, "event log write failed");
        }
        done += static_cast<std::size_t>(n);
    }
    if (::fsync(fd_) != 0) throw Error(ErrorCode::Io, "event log fsync failed");
}

std::vector<EventRecord> EventLog::read(const std::filesystem::path& path) {
    std::vector<EventRecord> out;
    if (!std::filesystem::exists(path)) return out;
    const std::string raw = workflow::read_file(path);
    std::size_t pos = 0;
    std::size_t good_end = 0;
    while (pos < raw.size()) {
        const auto nl = raw.find('\n', pos);
        if (nl == std::string::npos) break;  // torn tail
        const auto line = std::string_view(raw).substr(pos, nl - pos);
        Json j = Json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            if (raw.find('\n', nl + 1) == std::string::npos) break;  // torn tail ending in a newline
            throw ParseError("corrupt event log " + path.string(), pos);
        }
        out.push_back(event_from_json(j));
        pos = nl + 1;
        good_end = pos;
    }
    if (good_end < raw.size()) std::filesystem::resize_file(path, good_end);
    return out;
}

class Session {
public:
    Session(std::string id, std::filesystem::path dir, const Settings& settings)
        : id_(std::move(id)), dir_(std::move(dir)), settings_(settings), log_(dir_ / "events.jsonl"),
          state_(std::make_shared<const SessionState>()) {}

    ~Session() { stop(); }

    void start() {
        worker_ = std::thread([this] { loop(); });
    }

    void stop() {
        {
            std::lock_guard lock(queue_mutex_);
            stopping_ = true;
        }
        queue_cv_.notify_all();
        if (worker_.joinable()) worker_.join();
    }

    // Loads history without going through the worker; only before start().
    void restore(SessionState state, std::vector<EventRecord> events) {
        state_ = std::make_shared<const SessionState>(std::move(state));
        events_ = std::move(events);
    }

    void post(std::function<void()> job) {
        {
            std::lock_guard lock(queue_mutex_);
            queue_.push_back(std::move(job));
        }
        queue_cv_.notify_one();
    }

    template <class F>
    auto run(F f) -> std::invoke_result_t<F> {
        using R = std::invoke_result_t<F>;
        auto task = std::make_shared<std::packaged_task<R()>>(std::move(f));
        auto result = task->get_future();
        post([task] { (*task)(); });
        return result.get();
    }

    std::shared_ptr<const SessionState> state() const {
        std::lock_guard lock(mutex_);
        return state_;
    }

    // Worker thread only.
    void commit(const std::string& kind, Json payload) {
        const auto current = state();
        EventRecord event{current->last_seq + 1, id_, kind, std::move(payload)};
        SessionState next = *current;
        apply_event(next, event);
        log_.append(event);
        auto published = std::make_shared<const SessionState>(std::move(next));
        {
            std::lock_guard lock(mutex_);
            state_ = published;
            events_.push_back(std::move(event));
        }
        changed_.notify_all();
        if (settings_.snapshot_every > 0 && published->last_seq % static_cast<std::uint64_t>(settings_.snapshot_every) == 0)
            write_snapshot(*published);
    }

    std::vector<EventRecord> events_after(std::uint64_t after, std::chrono::milliseconds timeout) const {
        std::unique_lock lock(mutex_);
        changed_.wait_for(lock, timeout, [&] { return state_->last_seq > after; });
        std::vector<EventRecord> out;
        for (const auto& e : events_)
            if (e.seq > after) out.push_back(e);
        return out;
    }

    std::shared_ptr<const SessionState> wait_until(const std::function<bool(const SessionState&)>& pred,
                                                   std::chrono::milliseconds timeout) const {
        std::unique_lock lock(mutex_);
        changed_.wait_for(lock, timeout, [&] { return pred(*state_); });
        return state_;
    }

    const std::string& id() const noexcept { return id_; }
    const std::filesystem::path& dir() const noexcept { return dir_; }

private:
    void write_snapshot(const SessionState& s) const {
        try {
            workflow::write_file(dir_ / "snapshot.json", pretty({{"seq", s.last_seq}, {"state", to_json(s)}}));
        } catch (const std::exception&) {
            // The log alone is enough to recover.
        }
    }

    void loop() {
        for (;;) {
            std::function<void()> job;
            {
                std::unique_lock lock(queue_mutex_);
                queue_cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
                if (queue_.empty()) return;
                job = std::move(queue_.front());
                queue_.pop_front();
            }
            job();
        }
    }

    std::string id_;
    std::filesystem::path dir_;
    Settings settings_;
    EventLog log_;

    mutable std::mutex mutex_;
    mutable std::condition_variable changed_;
    std::shared_ptr<const SessionState> state_;
    std::vector<EventRecord> events_;

    std::mutex queue_mutex_;
    std::condition_variable queue_cv_;
    std::deque<std::function<void()>> queue_;
    bool stopping_ = false;
    std::thread worker_;
};

namespace {

std::string fresh_id() {
    static std::mutex m;
    static std::mt19937_64 rng{std::random_device{}()};
    std::lock_guard lock(m);
    std::ostringstream out;
    out << std::hex << rng();
    return out.str();
}

bool valid_id(const std::string& id) {
    return !id.empty() && id.size() <= 64 &&
           id.find_first_not_of("0123456789abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ-_") == std::string::npos;
}

void require_status(const SessionState& s, std::string_view status) {
    if (s.status != status)
        throw Error(ErrorCode::State, "session " + s.session_id + " is " + s.status + ", needs " + std::string(status),
                    s.session_id);
}

// Turn events for transcript entries beyond `from`, then the discussion itself.
void commit_discussion(Session& session, const discussion::Discussion& d, std::size_t from,
                       const std::optional<FeedbackUnit>& unit, std::optional<int> count) {
    Json payload{{"discussion", discussion::to_json(d)}};
    if (unit) payload["unit"] = feedback::to_json(*unit);
    if (count) payload["count"] = *count;
    if (count) session.commit("discussion", payload);
    for (std::size_t i = from; i < d.transcript.size(); ++i)
        session.commit("turn", {{"unit_id", d.unit_id}, {"index", i}, {"turn", discussion::to_json(d.transcript[i])}});
    if (!count) session.commit("discussion", payload);
}

} // namespace

Service::Service(std::shared_ptr<gateway::Gateway> gw, std::filesystem::path data_dir, Settings settings,
                 std::shared_ptr<const theme::TemplateIndex> templates)
    : gw_(std::move(gw)), data_dir_(std::move(data_dir)), settings_(settings), templates_(std::move(templates)) {
    const auto root = data_dir_ / "sessions";
    std::filesystem::create_directories(root);
    std::vector<std::string> ids;
    for (const auto& entry : std::filesystem::directory_iterator(root))
        if (entry.is_directory() && std::filesystem::exists(entry.path() / "events.jsonl"))
            ids.push_back(entry.path().filename().string());
    std::sort(ids.begin(), ids.end());
    for (const auto& id : ids) {
        auto events = EventLog::read(root / id / "events.jsonl");
        if (events.empty()) continue;
        auto s = open(id, std::move(events));
        const auto st = s->state();
        if (st->status == kStatusCreated || st->status == kStatusPersonasReady)
            s->post([this, s] { run_pipeline(*s); });
    }
}

Service::~Service() {
    std::map<std::string, std::shared_ptr<Session>> sessions;
    {
        std::lock_guard lock(mutex_);
        sessions.swap(sessions_);
    }
    for (auto& [id, s] : sessions) s->stop();
}

std::shared_ptr<Session> Service::open(const std::string& id, std::vector<EventRecord> events) {
    auto s = std::make_shared<Session>(id, data_dir_ / "sessions" / id, settings_);
    SessionState state;
    std::size_t start = 0;
    const auto snap_path = s->dir() / "snapshot.json";
    if (std::filesystem::exists(snap_path)) {
        try {
            const auto snap = Json::parse(workflow::read_file(snap_path));
            const auto seq = snap.at("seq").get<std::uint64_t>();
            if (seq <= events.size() && seq > 0) {
                state = state_from_json(snap.at("state"));
                start = seq;
            }
        } catch (const std::exception&) {
            state = SessionState{};
            start = 0;
        }
    }
    for (std::size_t i = start; i < events.size(); ++i) apply_event(state, events[i]);
    s->restore(std::move(state), std::move(events));
    s->start();
    std::lock_guard lock(mutex_);
    sessions_[id] = s;
    return s;
}

std::shared_ptr<Session> Service::find(const std::string& id) const {
    std::lock_guard lock(mutex_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw Error(ErrorCode::NotFound, "no session '" + id + "'", id);
    return it->second;
}

std::vector<std::string> Service::session_ids() const {
    std::lock_guard lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [id, s] : sessions_) out.push_back(id);
    return out;
}

std::shared_ptr<const SessionState> Service::state(const std::string& id) const { return find(id)->state(); }

std::string Service::create_session(const persona::MarketingBrief& brief, const canvas::CanvasDocument& draft) {
    brief.validate();
    canvas::validate(draft);
    std::string id;
    do {
        id = fresh_id();
    } while (std::filesystem::exists(data_dir_ / "sessions" / id));
    std::filesystem::create_directories(data_dir_ / "sessions" / id);
    auto s = open(id, {});
    s->run([&] {
        s->commit("created", {{"brief", persona::to_json(brief)}, {"document", canvas::document_to_json(draft)}});
    });
    s->post([this, s] { run_pipeline(*s); });
    return id;
}

void Service::run_pipeline(Session& s) {
    std::string stage = "personas";
    try {
        auto st = s.state();
        if (st->status == kStatusCreated) {
            const auto extract = persona::extract_brief(*gw_, st->brief);
            const auto dims = persona::derive_dimensions(*gw_, extract);
            const auto personas = persona::build_personas(*gw_, extract, dims);
            s.commit("personas_ready", {{"extract", persona::to_json(extract)}, {"personas", persona::to_json(personas)}});
            st = s.state();
        }
        if (st->status == kStatusPersonasReady) {
            stage = "feedback";
            const auto batch = feedback::generate_feedback(*gw_, st->document(), *st->personas, *st->extract);
            auto analysis =
                workflow::analyse_units(*gw_, feedback::group_units(batch.items, st->document()), *st->extract);
            s.commit("feedback_ready", {{"units", units_json(analysis.units)},
                                        {"failures", failures_json(batch.failures)},
                                        {"reports", reports_json(analysis.reports)}});
        }
    } catch (const std::exception& e) {
        s.commit("failed", {{"stage", stage}, {"message", e.what()}});
    }
}

std::shared_ptr<const SessionState> Service::wait_ready(const std::string& id, std::chrono::milliseconds timeout) {
    return find(id)->wait_until(
        [](const SessionState& s) { return s.status == kStatusFeedbackReady || s.status == kStatusFailed; }, timeout);
}

AcceptResult Service::accept(const std::string& id, const std::string& ref,
                             const std::optional<std::string>& template_id) {
    auto s = find(id);
    return s->run([&]() -> AcceptResult {
        const auto st = s->state();
        require_status(*st, kStatusFeedbackReady);
        if (auto it = st->accepted.find(ref); it != st->accepted.end()) return {std::nullopt, it->second, true};
        const auto r = workflow::resolve_ref(st->units, ref);
        const auto& unit = st->units[r.unit_index];
        if (r.kind == feedback::FeedbackKind::Theme) {
            if (!templates_) throw Error(ErrorCode::State, "no template index is configured", ref);
            if (!template_id) {
                return {theme::query_templates(*gw_, *templates_, std::get<feedback::ThemeDescriptor>(r.preview),
                                               settings_.top_k),
                        st->history.size() - 1, false};
            }
            const auto& templ = templates_->find(*template_id);
            auto applied = workflow::apply_theme_ref(*gw_, st->document(), st->units, ref, templ.document,
                                                     settings_.theme_rounds);
            Json adjustments = Json::array();
            for (const auto& a : applied.adjustments) adjustments.push_back(canvas::adjustment_to_json(a));
            s->commit("theme_applied", {{"ref", ref},
                                        {"unit_id", unit.unit_id},
                                        {"template_id", *template_id},
                                        {"document", canvas::document_to_json(applied.document)},
                                        {"adjustments", adjustments}});
        } else {
            auto applied = workflow::apply_ref(*gw_, st->document(), st->units, ref);
            s->commit("accepted", {{"ref", ref},
                                   {"unit_id", unit.unit_id},
                                   {"document", canvas::document_to_json(applied.document)}});
        }
        return {std::nullopt, s->state()->history.size() - 1, false};
    });
}

std::size_t Service::manual_edit(const std::string& id, const canvas::CanvasDocument& doc) {
    canvas::validate(doc);
    auto s = find(id);
    return s->run([&] {
        s->commit("manual_edit", {{"document", canvas::document_to_json(doc)}});
        return s->state()->history.size() - 1;
    });
}

persona::Persona Service::add_persona(const std::string& id, const persona::PersonaDetails& details) {
    persona::validate_details(details);
    auto s = find(id);
    return s->run([&] {
        const auto st = s->state();
        if (!st->personas) throw Error(ErrorCode::State, "personas are not ready yet", id);
        const auto set = persona::add_manual_persona(*gw_, *st->personas, details);
        const auto& added = set.personas.back();
        s->commit("persona_added", {{"persona", persona::to_json(added)}});
        return added;
    });
}

discussion::Discussion Service::open_discussion(const std::string& id, const std::string& unit_id) {
    auto s = find(id);
    return s->run([&] {
        const auto st = s->state();
        require_status(*st, kStatusFeedbackReady);
        const auto& unit = st->unit(unit_id);
        auto report = st->reports.find(unit_id);
        if (report == st->reports.end())
            throw Error(ErrorCode::State, "unit " + unit_id + " has no conflict to discuss", "no-conflict");
        if (auto it = st->discussions.find(unit_id);
            it != st->discussions.end() && it->second.state != discussion::State::Concluded)
            throw Error(ErrorCode::State, "unit " + unit_id + " already has an open discussion", unit_id);
        const int count = (st->discussion_counts.count(unit_id) ? st->discussion_counts.at(unit_id) : 0) + 1;
        auto d = discussion::open_discussion(unit, report->second, unit_id + "." + std::to_string(count),
                                             settings_.discussion_rounds);
        commit_discussion(*s, d, 0, std::nullopt, count);
        return d;
    });
}

discussion::Discussion Service::comment(const std::string& id, const std::string& unit_id,
                                        const std::optional<std::string>& text) {
    auto s = find(id);
    return s->run([&] {
        const auto st = s->state();
        auto it = st->discussions.find(unit_id);
        if (it == st->discussions.end())
            throw Error(ErrorCode::NotFound, "no discussion on unit '" + unit_id + "'", unit_id);
        auto d = discussion::submit_comment(it->second, text);
        commit_discussion(*s, d, it->second.transcript.size(), std::nullopt, std::nullopt);
        return d;
    });
}

discussion::Discussion Service::advance(const std::string& id, const std::string& unit_id) {
    auto s = find(id);
    return s->run([&] {
        const auto st = s->state();
        auto it = st->discussions.find(unit_id);
        if (it == st->discussions.end())
            throw Error(ErrorCode::NotFound, "no discussion on unit '" + unit_id + "'", unit_id);
        const discussion::Context ctx{*gw_, *st->personas, *st->extract, st->document()};
        auto done = discussion::advance(ctx, it->second, st->unit(unit_id));
        commit_discussion(*s, done.discussion, it->second.transcript.size(), done.unit, std::nullopt);
        return done.discussion;
    });
}

std::vector<EventRecord> Service::events(const std::string& id, std::uint64_t after,
                                         std::chrono::milliseconds timeout) const {
    return find(id)->events_after(after, timeout);
}

Json Service::export_session(const std::string& id) const {
    auto s = find(id);
    const auto events = s->events_after(0, std::chrono::milliseconds(0));
    Json log = Json::array();
    for (const auto& e : events) log.push_back(to_json(e));
    const auto st = replay(events);
    return {{"format", "postercrit-session"},
            {"version", 1},
            {"session_id", id},
            {"document", canvas::document_to_json(st.document())},
            {"state", to_json(st)},
            {"events", log}};
}

std::string Service::import_session(const Json& archive) {
    if (!archive.is_object() || archive.value("format", "") != "postercrit-session" || archive.value("version", 0) != 1)
        throw Error(ErrorCode::Validation, "not a session archive");
    const auto id = archive.at("session_id").get<std::string>();
    if (!valid_id(id)) throw Error(ErrorCode::Validation, "bad session id in archive", id);
    std::vector<EventRecord> events;
    for (const auto& e : archive.at("events")) events.push_back(event_from_json(e));
    const auto st = replay(events);
    if (events.empty() || st.session_id != id) throw Error(ErrorCode::Validation, "archive events do not match its id", id);
    if (archive.contains("state") && to_json(st) != archive.at("state"))
        throw Error(ErrorCode::Validation, "archive state does not match its event log", id);
    {
        std::lock_guard lock(mutex_);
        if (sessions_.count(id)) throw Error(ErrorCode::State, "session " + id + " already exists", id);
    }
    const auto dir = data_dir_ / "sessions" / id;
    std::filesystem::create_directories(dir);
    {
        EventLog log(dir / "events.jsonl");
        for (const auto& e : events) log.append(e);
    }
    open(id, std::move(events));
    return id;
}

int http_status(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::Parse:
    case ErrorCode::Validation:
    case ErrorCode::KindMismatch: return 400;
    case ErrorCode::NotFound: return 404;
    case ErrorCode::State: return 409;
    case ErrorCode::Generation:
    case ErrorCode::Schema:
    case ErrorCode::Backend: return 502;
    case ErrorCode::Io: return 500;
    }
    return 500;
}

} // namespace postercrit::session
