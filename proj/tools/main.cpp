#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "postercrit/postercrit.h"

namespace {

constexpr int kOk = 0;
constexpr int kRuntime = 1;
constexpr int kUsage = 2;

struct Common {
    std::string backend;
    std::string config;
    std::optional<int> k;
    std::optional<int> max_rounds;
    bool heuristics = false;
};

int fail(pc_status status) {
    std::cerr << "error (" << pc_status_name(status) << "): " << pc_last_error() << "\n";
    return kRuntime;
}

class Engine {
public:
    ~Engine() { pc_engine_free(engine_); }

    // Returns an exit code; settings that do not apply are usage errors.
    int open(const Common& c, const char* rounds_key) {
        if (pc_status s = pc_engine_new(c.config.empty() ? nullptr : c.config.c_str(), &engine_); s != PC_OK)
            return usage(s);
        if (!c.backend.empty() && !set("backend.kind", c.backend)) return kUsage;
        if (c.heuristics && !set("engine.heuristics", "true")) return kUsage;
        if (c.k && !set("engine.top_k", std::to_string(*c.k))) return kUsage;
        if (c.max_rounds && !set(rounds_key, std::to_string(*c.max_rounds))) return kUsage;
        return kOk;
    }

    bool set(const char* key, const std::string& value) {
        if (pc_status s = pc_engine_set(engine_, key, value.c_str()); s != PC_OK) {
            usage(s);
            return false;
        }
        return true;
    }

    pc_engine* get() const noexcept { return engine_; }

private:
    static int usage(pc_status s) {
        std::cerr << "error (" << pc_status_name(s) << "): " << pc_last_error() << "\n";
        return kUsage;
    }

    pc_engine* engine_ = nullptr;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--backend", c.backend, "live | fallback | scripted:<fixture dir>");
    cmd->add_option("--config", c.config, "INI config file")->check(CLI::ExistingFile);
    cmd->add_flag("--heuristics", c.heuristics, "offline conflict, mapping and overlap checks");
}

std::string take(char* s) {
    std::string out = s ? s : "";
    pc_free(s);
    return out;
}

int write_out(const std::string& text, const std::string& path) {
    if (path.empty() || path == "-") {
        std::cout << text;
        if (!text.empty() && text.back() != '\n') std::cout << "\n";
        return kOk;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) {
        std::cerr << "error (io): cannot write " << path << "\n";
        return kRuntime;
    }
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Persona-panel feedback for poster designs"};
    app.require_subcommand(1);
    Common common;

    std::vector<std::string> briefs;
    std::string draft, out_dir;
    auto* run = app.add_subcommand("run", "Run the whole pipeline over a brief and a draft");
    add_common(run, common);
    run->add_option("--brief", briefs, "brief page, text or PNG (repeatable)")->required()->check(CLI::ExistingFile);
    run->add_option("--draft", draft, "draft poster document")->required()->check(CLI::ExistingFile);
    run->add_option("--out", out_dir, "output directory")->required();
    run->add_option("--max-rounds", common.max_rounds, "discussion round limit");

    std::string corpus, index_path;
    auto* ingest = app.add_subcommand("ingest-templates", "Embed a template corpus into an index file");
    add_common(ingest, common);
    ingest->add_option("corpus", corpus, "directory of template documents")->required()->check(CLI::ExistingDirectory);
    ingest->add_option("--out", index_path, "index file")->required();

    std::string tone, color;
    auto* query = app.add_subcommand("query-themes", "Rank templates against a tone and color");
    add_common(query, common);
    query->add_option("--index", index_path, "index file")->required()->check(CLI::ExistingFile);
    query->add_option("--tone", tone)->required();
    query->add_option("--color", color)->required();
    query->add_option("-k", common.k, "number of templates")->check(CLI::PositiveNumber);

    auto* serve = app.add_subcommand("serve", "Serve the session API over HTTP");
    add_common(serve, common);
    std::optional<int> port;
    std::string data_dir;
    serve->add_option("--port", port);
    serve->add_option("--data", data_dir, "data directory");
    serve->add_option("-k", common.k, "templates offered for theme feedback")->check(CLI::PositiveNumber);
    serve->add_option("--max-rounds", common.max_rounds, "discussion round limit");

    std::string run_dir, ref, template_id, apply_out;
    auto* apply = app.add_subcommand("apply", "Apply a feedback item or conclusion from a run directory");
    add_common(apply, common);
    apply->add_option("run_dir", run_dir)->required()->check(CLI::ExistingDirectory);
    apply->add_option("ref", ref, "item id or conclusion:<unit_id>")->required();
    apply->add_option("--template", template_id);
    apply->add_option("--index", index_path)->check(CLI::ExistingFile);
    apply->add_option("--corpus", corpus)->check(CLI::ExistingDirectory);
    apply->add_option("--out", apply_out, "output document (default stdout)");
    apply->add_option("-k", common.k, "templates to list for theme refs")->check(CLI::PositiveNumber);
    apply->add_option("--max-rounds", common.max_rounds, "overlap resolution round limit");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    Engine engine;
    const char* rounds_key = apply->parsed() ? "engine.theme_rounds" : "engine.discussion_rounds";
    if (int rc = engine.open(common, rounds_key); rc != kOk) return rc;

    if (run->parsed()) {
        std::vector<const char*> pages;
        for (const auto& b : briefs) pages.push_back(b.c_str());
        if (pc_status s = pc_run(engine.get(), pages.data(), pages.size(), draft.c_str(), out_dir.c_str()); s != PC_OK)
            return fail(s);
        return kOk;
    }
    if (ingest->parsed()) {
        std::size_t count = 0;
        char* warnings = nullptr;
        if (pc_status s = pc_ingest_templates(engine.get(), corpus.c_str(), index_path.c_str(), &count, &warnings);
            s != PC_OK)
            return fail(s);
        const auto w = take(warnings);
        if (w != "[]") std::cerr << "skipped: " << w << "\n";
        std::cout << count << " templates indexed\n";
        return kOk;
    }
    if (query->parsed()) {
        char* result = nullptr;
        if (pc_status s = pc_query_themes(engine.get(), index_path.c_str(), tone.c_str(), color.c_str(),
                                          common.k.value_or(12), &result);
            s != PC_OK)
            return fail(s);
        return write_out(take(result), "");
    }
    if (serve->parsed()) {
        if (port && !engine.set("service.port", std::to_string(*port))) return kUsage;
        if (!data_dir.empty() && !engine.set("service.data_dir", data_dir)) return kUsage;
        const auto ready = [](int bound, void*) { std::fprintf(stderr, "listening on port %d\n", bound); };
        if (pc_status s = pc_serve(engine.get(), ready, nullptr); s != PC_OK) return fail(s);
        return kOk;
    }
    if (apply->parsed()) {
        char* result = nullptr;
        int is_choices = 0;
        if (pc_status s = pc_apply(engine.get(), run_dir.c_str(), ref.c_str(),
                                   template_id.empty() ? nullptr : template_id.c_str(),
                                   index_path.empty() ? nullptr : index_path.c_str(),
                                   corpus.empty() ? nullptr : corpus.c_str(), &result, &is_choices);
            s != PC_OK)
            return fail(s);
        const auto text = take(result);
        if (is_choices) {
            std::cerr << "theme feedback: choose a template with --template\n";
            return write_out(text, "");
        }
        return write_out(text, apply_out);
    }
    return kUsage;
}
