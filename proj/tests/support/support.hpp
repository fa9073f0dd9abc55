#pragma once

#include <filesystem>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "postercrit/canvas.hpp"
#include "postercrit/feedback.hpp"
#include "postercrit/gateway.hpp"
#include "postercrit/persona.hpp"

namespace pctest {

using Json = nlohmann::json;
using Rng = std::mt19937_64;
namespace pc = postercrit;
namespace fs = std::filesystem;

fs::path fixtures_dir();
fs::path cli_path();

class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const fs::path& path() const noexcept { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

int uniform(Rng& rng, int lo, int hi);
double uniform_real(Rng& rng, double lo, double hi);
bool chance(Rng& rng, double p);
template <class T>
const T& pick(Rng& rng, const std::vector<T>& v) {
    return v[static_cast<std::size_t>(uniform(rng, 0, static_cast<int>(v.size()) - 1))];
}

// Mix of ascii, escapes and multibyte text.
std::string random_text(Rng& rng, int max_len = 24);
std::string random_words(Rng& rng, int words);

struct DocShape {
    int max_elements = 20;
    // Integer geometry keeps pixel counts equal to areas.
    bool integer_geometry = false;
    bool rotations = true;
    bool vectors = true;
    bool extras = true;
    int page_w = 0;  // 0 picks one
    int page_h = 0;
};

pc::canvas::CanvasDocument random_document(Rng& rng, const DocShape& shape = {});

// JSON pointer paths at which two values differ. Arrays of unequal length
// report the array itself.
std::set<std::string> diff_paths(const Json& a, const Json& b);
std::set<std::string> canonical_diff(const pc::canvas::CanvasDocument& a, const pc::canvas::CanvasDocument& b);

std::vector<std::string> sorted_texts(const pc::canvas::CanvasDocument& doc);
std::vector<std::string> sorted_sources(const pc::canvas::CanvasDocument& doc);

// Payload builders for the scripted backend.
Json extract_payload(const std::string& goal, const std::string& audience);
Json dimensions_payload(Rng& rng);
// Personas in the given coordinate order; `order` is a permutation of 0..3
// indexing (low,low),(low,high),(high,low),(high,high).
Json personas_payload(Rng& rng, const std::vector<int>& order);
// Comments on a random subset of the document's text and image elements.
Json feedback_payload(Rng& rng, const pc::canvas::CanvasDocument& doc, double density = 0.5);
Json conclusion_payload(Rng& rng, const pc::feedback::FeedbackUnit& unit, bool theme_object = true);

pc::persona::MarketingBrief text_brief(const std::string& text);
std::string random_brief_text(Rng& rng, std::string* goal_out = nullptr);

// Scripts extraction, dimensions, personas and four feedback responses.
void script_pipeline(pc::gateway::ScriptedBackend& backend, Rng& rng, const pc::canvas::CanvasDocument& doc,
                     const std::string& goal, double density = 0.5);
// Scripts one question and one answer per conflicting item plus a conclusion.
void script_round(pc::gateway::ScriptedBackend& backend, Rng& rng, const pc::feedback::FeedbackUnit& unit,
                  std::size_t conflicting);

std::shared_ptr<pc::gateway::Gateway> make_gateway(std::shared_ptr<pc::gateway::ScriptedBackend> backend,
                                                   const fs::path& assets, bool fallback);

std::string slurp(const fs::path& path);

// Runs a command through the shell; returns the exit status.
int run_command(const std::string& command, std::string* output = nullptr);

} // namespace pctest
