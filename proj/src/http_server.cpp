#include <httplib.h>

#include <atomic>
#include <set>
#include <sstream>

#include "postercrit/session.hpp"

namespace postercrit::session {

namespace {

void reply(httplib::Response& res, int status, const Json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, const Error& e) {
    reply(res, http_status(e.code()),
          {{"error", {{"code", to_string(e.code())}, {"message", e.what()}, {"subject", e.subject()}}}});
}

Json body_of(const httplib::Request& req) {
    if (req.body.empty()) return Json::object();
    try {
        return Json::parse(req.body);
    } catch (const Json::parse_error& e) {
        throw ParseError("request body is not JSON: " + std::string(e.what()), e.byte);
    }
}

// Wraps a handler so core errors become JSON error responses.
template <class F>
httplib::Server::Handler guarded(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
        try {
            f(req, res);
        } catch (const Error& e) {
            reply_error(res, e);
        } catch (const Json::exception& e) {
            reply_error(res, Error(ErrorCode::Validation, e.what()));
        } catch (const std::exception& e) {
            reply(res, 500, {{"error", {{"code", "internal"}, {"message", e.what()}, {"subject", ""}}}});
        }
    };
}

canvas::CanvasDocument document_field(const Json& body, const char* key) {
    if (!body.contains(key)) throw Error(ErrorCode::Validation, std::string("missing '") + key + "'", key);
    const auto& d = body.at(key);
    if (d.is_string()) return canvas::parse_document(d.get<std::string>());
    return canvas::document_from_json(d);
}

std::string sse_frame(const EventRecord& e) {
    std::ostringstream out;
    out << "id: " << e.seq << "\nevent: " << e.kind << "\ndata: " << to_json(e).dump() << "\n\n";
    return out.str();
}

} // namespace

struct HttpServer::Impl {
    Service& service;
    httplib::Server server;
    std::thread thread;
    std::atomic<bool> stopping{false};

    explicit Impl(Service& s) : service(s) { routes(); }

    void routes() {
        server.Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const auto body = body_of(req);
            if (!body.contains("brief")) throw Error(ErrorCode::Validation, "missing 'brief'", "brief");
            const auto brief = persona::brief_from_json(body.at("brief"));
            const auto draft = document_field(body, "document");
            reply(res, 201, {{"session_id", service.create_session(brief, draft)}});
        }));
        server.Post("/sessions/import", guarded([this](const httplib::Request& req, httplib::Response& res) {
            reply(res, 201, {{"session_id", service.import_session(body_of(req))}});
        }));
        server.Get("/sessions/:id/status", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const auto st = service.state(req.path_params.at("id"));
            reply(res, 200,
                  {{"session_id", st->session_id},
                   {"status", st->status},
                   {"error", st->error},
                   {"last_seq", st->last_seq},
                   {"snapshots", st->history.size()}});
        }));
        server.Get("/sessions/:id/personas", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const auto st = service.state(req.path_params.at("id"));
            if (!st->personas) throw Error(ErrorCode::State, "personas are not ready yet", st->session_id);
            reply(res, 200, persona::to_json(*st->personas));
        }));
        server.Post("/sessions/:id/personas", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const auto p = service.add_persona(req.path_params.at("id"), persona::details_from_json(body_of(req)));
            reply(res, 201, persona::to_json(p));
        }));
        server.Get("/sessions/:id/units", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const auto st = service.state(req.path_params.at("id"));
            Json units = Json::array();
            for (const auto& u : st->units) units.push_back(feedback::to_json(u));
            Json discussions = Json::object();
            for (const auto& [uid, d] : st->discussions) discussions[uid] = discussion::to_json(d);
            reply(res, 200, {{"status", st->status}, {"units", units}, {"discussions", discussions}});
        }));
        server.Get("/sessions/:id/document", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const auto st = service.state(req.path_params.at("id"));
            res.set_header("X-Snapshot", std::to_string(st->history.size() - 1));
            res.set_content(canvas::serialize_document(st->document()), "application/json");
        }));
        server.Post("/sessions/:id/accept", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const auto body = body_of(req);
            const auto id = req.path_params.at("id");
            std::optional<std::string> tid;
            if (body.contains("template_id") && !body["template_id"].is_null())
                tid = body["template_id"].get<std::string>();
            const auto result = service.accept(id, body.at("ref").get<std::string>(), tid);
            if (result.choices) {
                reply(res, 200, {{"needs_template", true}, {"choices", theme::to_json(*result.choices)}});
                return;
            }
            const auto st = service.state(id);
            reply(res, 200,
                  {{"snapshot", result.snapshot},
                   {"repeated", result.repeated},
                   {"document", canvas::document_to_json(st->history.at(result.snapshot).document)}});
        }));
        server.Post("/sessions/:id/manual-edit", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const auto snapshot = service.manual_edit(req.path_params.at("id"), document_field(body_of(req), "document"));
            reply(res, 200, {{"snapshot", snapshot}});
        }));
        server.Post("/sessions/:id/units/:uid/discussion",
                    guarded([this](const httplib::Request& req, httplib::Response& res) {
                        const auto d = service.open_discussion(req.path_params.at("id"), req.path_params.at("uid"));
                        reply(res, 201, discussion::to_json(d));
                    }));
        server.Post("/sessions/:id/units/:uid/comment",
                    guarded([this](const httplib::Request& req, httplib::Response& res) {
                        const auto body = body_of(req);
                        std::optional<std::string> text;
                        if (body.contains("comment") && !body["comment"].is_null())
                            text = body["comment"].get<std::string>();
                        const auto d = service.comment(req.path_params.at("id"), req.path_params.at("uid"), text);
                        reply(res, 200, discussion::to_json(d));
                    }));
        server.Post("/sessions/:id/units/:uid/advance",
                    guarded([this](const httplib::Request& req, httplib::Response& res) {
                        const auto d = service.advance(req.path_params.at("id"), req.path_params.at("uid"));
                        reply(res, 200, discussion::to_json(d));
                    }));
        server.Get("/sessions/:id/export", guarded([this](const httplib::Request& req, httplib::Response& res) {
            reply(res, 200, service.export_session(req.path_params.at("id")));
        }));
        server.Get("/assets/:asset", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const auto image = service.gateway().resolve_asset(req.path_params.at("asset"));
            if (!image) throw Error(ErrorCode::NotFound, "no asset " + req.path_params.at("asset"));
            const auto png = encode_png(*image);
            res.set_content(std::string(png.begin(), png.end()), "image/png");
        }));
        server.Get("/sessions/:id/events", guarded([this](const httplib::Request& req, httplib::Response& res) {
            events(req, res);
        }));
    }

    // Server-sent events from the session log. ?after=<seq> or Last-Event-ID
    // resumes; ?kinds=a,b filters; ?follow=0 closes after the backlog.
    void events(const httplib::Request& req, httplib::Response& res) {
        const auto id = req.path_params.at("id");
        service.state(id);  // 404 before streaming starts
        std::uint64_t after = 0;
        if (req.has_param("after")) after = std::stoull(req.get_param_value("after"));
        else if (req.has_header("Last-Event-ID")) after = std::stoull(req.get_header_value("Last-Event-ID"));
        std::set<std::string> kinds;
        if (req.has_param("kinds")) {
            std::istringstream in(req.get_param_value("kinds"));
            for (std::string k; std::getline(in, k, ',');)
                if (!k.empty()) kinds.insert(k);
        }
        const bool follow = !req.has_param("follow") || req.get_param_value("follow") != "0";
        auto cursor = std::make_shared<std::uint64_t>(after);
        res.set_header("Cache-Control", "no-cache");
        res.set_chunked_content_provider(
            "text/event-stream", [this, id, kinds, follow, cursor](std::size_t, httplib::DataSink& sink) {
                if (stopping) return false;
                const auto batch = service.events(id, *cursor, std::chrono::milliseconds(follow ? 250 : 0));
                for (const auto& e : batch) {
                    *cursor = e.seq;
                    if (!kinds.empty() && !kinds.count(e.kind)) continue;
                    const auto frame = sse_frame(e);
                    if (!sink.write(frame.data(), frame.size())) return false;
                }
                if (!follow) sink.done();
                return true;
            });
    }
};

HttpServer::HttpServer(Service& service) : impl_(std::make_unique<Impl>(service)) {}

HttpServer::~HttpServer() { stop(); }

int HttpServer::start(const std::string& host, int port) {
    int bound = port;
    if (port == 0) {
        bound = impl_->server.bind_to_any_port(host);
    } else if (!impl_->server.bind_to_port(host, port)) {
        bound = -1;
    }
    if (bound < 0) throw Error(ErrorCode::Io, "cannot bind " + host + ":" + std::to_string(port));
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return bound;
}

void HttpServer::listen(const std::string& host, int port) {
    if (!impl_->server.listen(host, port)) {
        if (impl_->stopping) return;
        throw Error(ErrorCode::Io, "cannot listen on " + host + ":" + std::to_string(port));
    }
}

void HttpServer::stop() {
    if (!impl_) return;
    impl_->stopping = true;
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

} // namespace postercrit::session
