#include "postercrit/postercrit.h"

#include <csignal>
#include <cstring>
#include <memory>

#include "postercrit/config.hpp"
#include "postercrit/session.hpp"
#include "postercrit/workflow.hpp"

using namespace postercrit;

struct pc_engine {
    Config config;
};

struct pc_document {
    canvas::CanvasDocument doc;
};

namespace {

thread_local std::string last_error;

pc_status status_of(ErrorCode code) {
    switch (code) {
    case ErrorCode::Parse: return PC_ERR_PARSE;
    case ErrorCode::Validation: return PC_ERR_VALIDATION;
    case ErrorCode::NotFound: return PC_ERR_NOT_FOUND;
    case ErrorCode::KindMismatch: return PC_ERR_KIND_MISMATCH;
    case ErrorCode::Generation: return PC_ERR_GENERATION;
    case ErrorCode::Schema: return PC_ERR_SCHEMA;
    case ErrorCode::State: return PC_ERR_STATE;
    case ErrorCode::Backend: return PC_ERR_BACKEND;
    case ErrorCode::Io: return PC_ERR_IO;
    }
    return PC_ERR_INTERNAL;
}

template <class F>
pc_status guard(F f) {
    try {
        last_error.clear();
        f();
        return PC_OK;
    } catch (const Error& e) {
        last_error = e.what();
        return status_of(e.code());
    } catch (const std::filesystem::filesystem_error& e) {
        last_error = e.what();
        return PC_ERR_IO;
    } catch (const std::exception& e) {
        last_error = e.what();
        return PC_ERR_INTERNAL;
    }
}

char* dup(const std::string& s) {
    auto* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

void need(const void* p, const char* name) {
    if (!p) throw Error(ErrorCode::Validation, std::string(name) + " is NULL", name);
}

Config with_assets(const Config& base, const std::filesystem::path& fallback_dir) {
    Config c = base;
    if (!c.assets_dir) c.assets_dir = fallback_dir;
    return c;
}

} // namespace

extern "C" {

const char* pc_last_error(void) { return last_error.c_str(); }

const char* pc_status_name(pc_status status) {
    switch (status) {
    case PC_OK: return "ok";
    case PC_ERR_PARSE: return "parse";
    case PC_ERR_VALIDATION: return "validation";
    case PC_ERR_NOT_FOUND: return "not-found";
    case PC_ERR_KIND_MISMATCH: return "kind-mismatch";
    case PC_ERR_GENERATION: return "generation";
    case PC_ERR_SCHEMA: return "schema";
    case PC_ERR_STATE: return "state";
    case PC_ERR_BACKEND: return "backend";
    case PC_ERR_IO: return "io";
    case PC_ERR_ARGUMENT: return "argument";
    case PC_ERR_INTERNAL: return "internal";
    }
    return "unknown";
}

void pc_free(char* s) { std::free(s); }

pc_status pc_engine_new(const char* config_path, pc_engine** out) {
    return guard([&] {
        need(out, "out");
        auto engine = std::make_unique<pc_engine>();
        if (config_path) engine->config = Config::load(config_path);
        *out = engine.release();
    });
}

pc_status pc_engine_set(pc_engine* engine, const char* key, const char* value) {
    return guard([&] {
        need(engine, "engine");
        need(key, "key");
        need(value, "value");
        engine->config.set(key, value);
    });
}

void pc_engine_free(pc_engine* engine) { delete engine; }

pc_status pc_document_parse(const char* text, pc_document** out) {
    return guard([&] {
        need(text, "text");
        need(out, "out");
        *out = new pc_document{canvas::parse_document(text)};
    });
}

pc_status pc_document_serialize(const pc_document* doc, char** out) {
    return guard([&] {
        need(doc, "doc");
        need(out, "out");
        *out = dup(canvas::serialize_document(doc->doc));
    });
}

pc_status pc_document_overlaps(const pc_document* doc, double min_fraction, char** out_json) {
    return guard([&] {
        need(doc, "doc");
        need(out_json, "out_json");
        if (!(min_fraction >= 0 && min_fraction <= 1))
            throw Error(ErrorCode::Validation, "min_fraction must be within [0, 1]", "min_fraction");
        nlohmann::json list = nlohmann::json::array();
        for (const auto& o : canvas::detect_overlaps(doc->doc, min_fraction))
            list.push_back({{"first", o.first}, {"second", o.second}, {"area", o.area}});
        *out_json = dup(list.dump());
    });
}

void pc_document_free(pc_document* doc) { delete doc; }

pc_status pc_run(pc_engine* engine, const char* const* brief_paths, size_t brief_count, const char* draft_path,
                 const char* out_dir) {
    return guard([&] {
        need(engine, "engine");
        need(draft_path, "draft_path");
        need(out_dir, "out_dir");
        if (brief_count == 0) throw Error(ErrorCode::Validation, "no brief pages given", "brief");
        need(brief_paths, "brief_paths");
        std::vector<std::filesystem::path> pages(brief_paths, brief_paths + brief_count);
        const auto brief = persona::MarketingBrief::from_files(pages);
        const auto draft = canvas::parse_document(workflow::read_file(draft_path));
        const auto gw = make_gateway(with_assets(engine->config, std::filesystem::path(out_dir) / "assets"));
        workflow::RunOptions options;
        options.discussion_rounds = engine->config.discussion_rounds;
        const auto result = workflow::run_pipeline(*gw, brief, draft, options);
        workflow::write_run(result, draft, out_dir);
    });
}

pc_status pc_ingest_templates(pc_engine* engine, const char* corpus_dir, const char* index_path, size_t* out_count,
                              char** out_warnings_json) {
    return guard([&] {
        need(engine, "engine");
        need(corpus_dir, "corpus_dir");
        need(index_path, "index_path");
        const std::filesystem::path index_file(index_path);
        const auto gw = make_gateway(
            with_assets(engine->config, index_file.parent_path().empty() ? "assets" : index_file.parent_path() / "assets"));
        const auto result = theme::ingest_templates(*gw, corpus_dir);
        theme::save_index(result.index, index_file);
        if (out_count) *out_count = result.index.entries.size();
        if (out_warnings_json) *out_warnings_json = dup(nlohmann::json(result.warnings).dump());
    });
}

pc_status pc_query_themes(pc_engine* engine, const char* index_path, const char* tone, const char* color, int k,
                          char** out_json) {
    return guard([&] {
        need(engine, "engine");
        need(index_path, "index_path");
        need(tone, "tone");
        need(color, "color");
        need(out_json, "out_json");
        const std::filesystem::path index_file(index_path);
        const auto gw = make_gateway(
            with_assets(engine->config, index_file.parent_path().empty() ? "assets" : index_file.parent_path() / "assets"));
        const auto index = theme::load_index(index_file);
        *out_json = dup(theme::to_json(theme::query_templates(*gw, index, {tone, color}, k)).dump(2));
    });
}

pc_status pc_apply(pc_engine* engine, const char* run_dir, const char* ref, const char* template_id,
                   const char* index_path, const char* corpus_dir, char** out_json, int* out_is_choices) {
    return guard([&] {
        need(engine, "engine");
        need(run_dir, "run_dir");
        need(ref, "ref");
        need(out_json, "out_json");
        if (out_is_choices) *out_is_choices = 0;
        const auto run = workflow::read_run(run_dir);
        const auto gw = make_gateway(with_assets(engine->config, std::filesystem::path(run_dir) / "assets"));
        const auto resolved = workflow::resolve_ref(run.units, ref);
        if (resolved.kind != feedback::FeedbackKind::Theme) {
            *out_json = dup(canvas::serialize_document(workflow::apply_ref(*gw, run.document, run.units, ref).document));
            return;
        }
        need(index_path, "index_path");
        if (!template_id) {
            const auto index = theme::load_index(index_path);
            const auto ranked = theme::query_templates(*gw, index, std::get<feedback::ThemeDescriptor>(resolved.preview),
                                                       engine->config.top_k);
            *out_json = dup(theme::to_json(ranked).dump(2));
            if (out_is_choices) *out_is_choices = 1;
            return;
        }
        need(corpus_dir, "corpus_dir");
        const auto index = theme::load_index(index_path, std::filesystem::path(corpus_dir));
        const auto applied = workflow::apply_theme_ref(*gw, run.document, run.units, ref,
                                                       index.find(template_id).document, engine->config.theme_rounds);
        *out_json = dup(canvas::serialize_document(applied.document));
    });
}

pc_status pc_serve(pc_engine* engine, void (*on_ready)(int port, void* user), void* user) {
    return guard([&] {
        need(engine, "engine");
        const auto& c = engine->config;
        const auto gw = make_gateway(c);
        std::shared_ptr<const theme::TemplateIndex> templates;
        if (c.template_index) {
            if (!c.template_corpus)
                throw Error(ErrorCode::Validation, "service.template_index needs service.template_corpus",
                            "service.template_corpus");
            templates = std::make_shared<theme::TemplateIndex>(theme::load_index(*c.template_index, *c.template_corpus));
        }
        session::Settings settings;
        settings.discussion_rounds = c.discussion_rounds;
        settings.theme_rounds = c.theme_rounds;
        settings.top_k = c.top_k;

        // Block the signals before any thread starts so only sigwait sees them.
        sigset_t signals;
        sigemptyset(&signals);
        sigaddset(&signals, SIGINT);
        sigaddset(&signals, SIGTERM);
        sigset_t previous;
        pthread_sigmask(SIG_BLOCK, &signals, &previous);
        {
            session::Service service(gw, c.data_dir, settings, templates);
            session::HttpServer server(service);
            const int port = server.start(c.host, c.port);
            if (on_ready) on_ready(port, user);
            int received = 0;
            sigwait(&signals, &received);
            server.stop();
        }
        pthread_sigmask(SIG_SETMASK, &previous, nullptr);
    });
}

} // extern "C"
