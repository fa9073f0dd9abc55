#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "postercrit/canvas.hpp"
#include "postercrit/feedback.hpp"
#include "postercrit/gateway.hpp"

namespace postercrit::theme {

using canvas::CanvasDocument;
using feedback::ThemeDescriptor;
using gateway::EmbeddingVector;

inline constexpr int kDefaultTopK = 12;
inline constexpr int kDefaultMaxRounds = 3;

struct ThemeTemplate {
    std::string template_id;
    CanvasDocument document;
    EmbeddingVector embedding;
    // Asset id of the rasterized template; empty when loaded without its corpus.
    std::string preview_image;
};

struct TemplateIndex {
    std::vector<ThemeTemplate> entries;
    std::string embedder_id;
    std::size_t dimension = 0;

    const ThemeTemplate& find(std::string_view template_id) const;
    // Throws Validation on mixed dimensions or duplicate ids.
    void validate() const;
};

struct RankedTemplate {
    std::string template_id;
    double similarity = 0;

    bool operator==(const RankedTemplate&) const = default;
};

struct RankedTemplates {
    ThemeDescriptor query;
    std::vector<RankedTemplate> ranked;
};

struct IngestResult {
    TemplateIndex index;
    // One line per skipped file.
    std::vector<std::string> warnings;
};

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

// Every *.json file in the directory, in file-name order; template_id is the stem.
IngestResult ingest_templates(const gateway::Gateway& gw, const std::filesystem::path& corpus_dir);
// Builds an entry the way ingestion does, for documents already in memory.
ThemeTemplate make_template(const gateway::Gateway& gw, std::string template_id, CanvasDocument document);

// Index file, little-endian:
//   "PCTIDX1\0", u32 version (1), u32 len + embedder_id bytes, u32 dimension, u32 count,
//   then per row: u32 len + template_id bytes, dimension x f64.
std::vector<std::uint8_t> encode_index(const TemplateIndex& index);
// Documents are restored from `corpus_dir/<template_id>.json` when a corpus is given.
TemplateIndex decode_index(std::span<const std::uint8_t> bytes,
                           const std::optional<std::filesystem::path>& corpus_dir = std::nullopt);
void save_index(const TemplateIndex& index, const std::filesystem::path& path);
TemplateIndex load_index(const std::filesystem::path& path,
                         const std::optional<std::filesystem::path>& corpus_dir = std::nullopt);

std::string probe_prompt(const ThemeDescriptor& descriptor);
// Pure ranking: similarity descending, ties by template_id ascending, first k.
std::vector<RankedTemplate> rank(const TemplateIndex& index, const EmbeddingVector& probe, std::size_t k);
RankedTemplates query_templates(const gateway::Gateway& gw, const TemplateIndex& index,
                                const ThemeDescriptor& descriptor, int k = kDefaultTopK);

struct Embellishment {
    canvas::Element element;
    // List position in the template.
    int z_hint = 0;

    bool operator==(const Embellishment&) const = default;
};

struct Extracted {
    CanvasDocument stripped;
    std::vector<Embellishment> embellishments;
};

Extracted extract_embellishments(const CanvasDocument& templ);
// Inserts in ascending z_hint at min(z_hint, size).
CanvasDocument reinsert_embellishments(const CanvasDocument& doc, const std::vector<Embellishment>& embellishments);

CanvasDocument map_components(const gateway::Gateway& gw, const CanvasDocument& original,
                              const CanvasDocument& templ);

struct OverlapResolution {
    CanvasDocument document;
    std::vector<canvas::Adjustment> adjustments;
    int rounds = 0;
    // Total pairwise overlap area before round 1, then after each round.
    std::vector<double> overlap_areas;
    // False when max_rounds ran out with adjustments still coming.
    bool complete = true;
};

OverlapResolution resolve_overlaps(const gateway::Gateway& gw, const CanvasDocument& doc,
                                   int max_rounds = kDefaultMaxRounds);

OverlapResolution apply_theme(const gateway::Gateway& gw, const CanvasDocument& doc, const CanvasDocument& templ,
                              int max_rounds = kDefaultMaxRounds);

nlohmann::json to_json(const RankedTemplates& ranked);

} // namespace postercrit::theme
