// Acceptance checks, one line each. Run with no arguments.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <csignal>
#include <cstring>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <unistd.h>

#include "postercrit/discussion.hpp"
#include "postercrit/session.hpp"
#include "postercrit/theme.hpp"
#include "postercrit/workflow.hpp"
#include "support/support.hpp"

using namespace postercrit;
using canvas::CanvasDocument;
using canvas::Element;
using pctest::Json;
using pctest::Rng;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int digits = 2) {
    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(digits);
    out << v;
    return out.str();
}

bool has_content(const CanvasDocument& doc, std::size_t at_least = 1) {
    return static_cast<std::size_t>(std::count_if(doc.elements.begin(), doc.elements.end(), [](const Element& e) {
               return e.text() || e.image();
           })) >= at_least;
}

CanvasDocument content_document(Rng& rng, pctest::DocShape shape, std::size_t at_least = 1) {
    for (;;) {
        auto doc = pctest::random_document(rng, shape);
        if (has_content(doc, at_least)) return doc;
    }
}

// ---------------------------------------------------------------- round trip

Outcome round_trip() {
    const auto t0 = Clock::now();
    Rng rng(101);
    int failures = 0;
    for (int i = 0; i < 100; ++i) {
        const auto doc = pctest::random_document(rng);
        const auto text = canvas::serialize_document(doc);
        const auto back = canvas::parse_document(text);
        if (!(back == doc) || canvas::serialize_document(back) != text) ++failures;
    }
    const auto golden_in = pctest::slurp(pctest::fixtures_dir() / "golden" / "poster10.input.json");
    const auto golden = pctest::slurp(pctest::fixtures_dir() / "golden" / "poster10.canonical.json");
    const bool golden_ok = canvas::serialize_document(canvas::parse_document(golden_in)) == golden &&
                           canvas::serialize_document(canvas::parse_document(golden)) == golden;
    const double secs = seconds_since(t0);
    return {failures == 0 && golden_ok && secs < 5.0,
            std::to_string(100 - failures) + "/100 random identical, golden " + (golden_ok ? "byte-equal" : "DIFFERS") +
                ", " + fmt(secs) + " s"};
}

// ---------------------------------------------------------- mutation locality

Outcome locality() {
    Rng rng(202);
    int good = 0;
    std::string first_bad;
    for (int i = 0; i < 200; ++i) {
        pctest::DocShape shape;
        shape.max_elements = 12;
        const auto doc = content_document(rng, shape);
        std::vector<std::size_t> candidates;
        for (std::size_t k = 0; k < doc.elements.size(); ++k)
            if (doc.elements[k].text() || doc.elements[k].image()) candidates.push_back(k);
        const auto idx = pctest::pick(rng, candidates);
        const auto& e = doc.elements[idx];
        const std::string at = "/children/" + std::to_string(idx) + "/";
        std::set<std::string> expected;
        CanvasDocument out;
        const int op = pctest::uniform(rng, 0, 2);
        if (op == 0 && e.text()) {
            out = canvas::set_text(doc, e.id, e.text()->content + "+" + pctest::random_text(rng, 8));
            expected = {at + "text"};
        } else if (op == 0 || op == 1) {
            if (e.image()) {
                out = canvas::set_image_source(doc, e.id, e.image()->source + "-v2");
                expected = {at + "src"};
            } else {
                out = canvas::set_text(doc, e.id, "");
                expected = e.text()->content.empty() ? std::set<std::string>{} : std::set<std::string>{at + "text"};
            }
        } else {
            canvas::Adjustment adj;
            adj.element_id = e.id;
            const auto bump = [&](double v) { return std::floor(v) + pctest::uniform(rng, 1, 40); };
            if (pctest::chance(rng, 0.5)) {
                adj.kind = canvas::AdjustmentKind::Reposition;
                if (pctest::chance(rng, 0.7)) { adj.new_x = bump(e.x); expected.insert(at + "x"); }
                if (!adj.new_x || pctest::chance(rng, 0.5)) { adj.new_y = bump(e.y); expected.insert(at + "y"); }
            } else {
                adj.kind = canvas::AdjustmentKind::Resize;
                if (pctest::chance(rng, 0.6)) { adj.new_width = bump(e.width); expected.insert(at + "width"); }
                if (pctest::chance(rng, 0.6)) { adj.new_height = bump(e.height); expected.insert(at + "height"); }
                if (e.text() && (expected.empty() || pctest::chance(rng, 0.4))) {
                    adj.new_font_size = bump(e.text()->font_size);
                    expected.insert(at + "fontSize");
                }
                if (expected.empty()) { adj.new_width = bump(e.width); expected.insert(at + "width"); }
            }
            out = canvas::apply_adjustment(doc, adj);
        }
        const auto got = pctest::canonical_diff(doc, out);
        if (got == expected) {
            ++good;
        } else if (first_bad.empty()) {
            first_bad = " (case " + std::to_string(i) + " touched " + std::to_string(got.size()) + " paths)";
        }
    }
    return {good == 200, std::to_string(good) + "/200 diffs confined to the edited fields" + first_bad};
}

// ------------------------------------------------------------ overlap oracle

// Pixels whose centre falls inside the rotated rectangle, on an unclipped grid.
struct Mask {
    long x0 = 0, y0 = 0, w = 0, h = 0;
    std::vector<std::uint8_t> bits;
    long count = 0;

    bool at(long x, long y) const {
        if (x < x0 || y < y0 || x >= x0 + w || y >= y0 + h) return false;
        return bits[static_cast<std::size_t>((y - y0) * w + (x - x0))] != 0;
    }
};

Mask mask_of(const Element& e) {
    const long double cx = e.x + e.width / 2.0L, cy = e.y + e.height / 2.0L;
    const long double theta = e.rotation * 3.14159265358979323846264338327950288L / 180.0L;
    const long double c = std::cos(theta), s = std::sin(theta);
    const long double r = std::hypot(static_cast<long double>(e.width), static_cast<long double>(e.height)) / 2 + 2;
    Mask m;
    m.x0 = static_cast<long>(std::floor(cx - r));
    m.y0 = static_cast<long>(std::floor(cy - r));
    m.w = static_cast<long>(std::ceil(cx + r)) - m.x0;
    m.h = static_cast<long>(std::ceil(cy + r)) - m.y0;
    m.bits.assign(static_cast<std::size_t>(m.w * m.h), 0);
    for (long py = 0; py < m.h; ++py) {
        for (long px = 0; px < m.w; ++px) {
            const long double dx = m.x0 + px + 0.5L - cx, dy = m.y0 + py + 0.5L - cy;
            // Undo the rotation, then test against the unrotated box.
            const long double u = dx * c + dy * s, v = -dx * s + dy * c;
            if (u >= -e.width / 2.0L && u < e.width / 2.0L && v >= -e.height / 2.0L && v < e.height / 2.0L) {
                m.bits[static_cast<std::size_t>(py * m.w + px)] = 1;
                ++m.count;
            }
        }
    }
    return m;
}

long shared_pixels(const Mask& a, const Mask& b) {
    long n = 0;
    const long x_lo = std::max(a.x0, b.x0), x_hi = std::min(a.x0 + a.w, b.x0 + b.w);
    const long y_lo = std::max(a.y0, b.y0), y_hi = std::min(a.y0 + a.h, b.y0 + b.h);
    for (long y = y_lo; y < y_hi; ++y)
        for (long x = x_lo; x < x_hi; ++x)
            if (a.at(x, y) && b.at(x, y)) ++n;
    return n;
}

Outcome overlap_oracle() {
    Rng rng(303);
    int mismatched_docs = 0;
    long pairs_reported = 0;
    std::string first_bad;
    for (int i = 0; i < 200; ++i) {
        pctest::DocShape shape;
        shape.max_elements = 10;
        shape.integer_geometry = true;
        shape.page_w = 200;
        shape.page_h = 240;
        const auto doc = pctest::random_document(rng, shape);
        std::vector<Mask> masks;
        for (const auto& e : doc.elements) masks.push_back(mask_of(e));
        std::set<std::tuple<std::string, std::string, long>> expected;
        for (std::size_t a = 0; a < doc.elements.size(); ++a) {
            for (std::size_t b = a + 1; b < doc.elements.size(); ++b) {
                if (doc.elements[a].vector() || doc.elements[b].vector()) continue;
                const long inter = shared_pixels(masks[a], masks[b]);
                const long smaller = std::min(masks[a].count, masks[b].count);
                if (inter * 50 > smaller) expected.insert({doc.elements[a].id, doc.elements[b].id, inter});
            }
        }
        std::set<std::tuple<std::string, std::string, long>> got;
        for (const auto& o : canvas::detect_overlaps(doc, 0.02)) {
            const long area = std::lround(o.area);
            if (std::fabs(o.area - static_cast<double>(area)) > 1e-9) ++mismatched_docs;
            got.insert({o.first, o.second, area});
        }
        pairs_reported += static_cast<long>(expected.size());
        if (got != expected) {
            ++mismatched_docs;
            if (first_bad.empty())
                first_bad = ", first mismatch in document " + std::to_string(i) + " (" + std::to_string(got.size()) +
                            " reported vs " + std::to_string(expected.size()) + " by pixels)";
        }
    }
    return {mismatched_docs == 0, std::to_string(200 - mismatched_docs) + "/200 documents agree with the pixel count, " +
                                      std::to_string(pairs_reported) + " overlapping pairs" + first_bad};
}

// ------------------------------------------------------------ ranking oracle

long double reference_cosine(const std::vector<double>& a, const std::vector<double>& b) {
    long double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += static_cast<long double>(a[i]) * b[i];
        na += static_cast<long double>(a[i]) * a[i];
        nb += static_cast<long double>(b[i]) * b[i];
    }
    if (na == 0 || nb == 0) return 0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

struct Expected {
    std::string id;
    long double sim;
};

std::vector<Expected> exhaustive(const theme::TemplateIndex& index, const std::vector<double>& probe) {
    std::vector<Expected> out;
    for (const auto& t : index.entries) out.push_back({t.template_id, reference_cosine(t.embedding.values, probe)});
    std::sort(out.begin(), out.end(), [](const Expected& a, const Expected& b) {
        if (a.sim != b.sim) return a.sim > b.sim;
        return a.id < b.id;
    });
    return out;
}

// Compares a ranking against the exhaustive order; returns the worst cosine error or -1 on an order mismatch.
long double compare_ranking(const std::vector<theme::RankedTemplate>& got, const std::vector<Expected>& want) {
    long double worst = 0;
    for (std::size_t i = 0; i < got.size(); ++i) {
        if (i >= want.size() || got[i].template_id != want[i].id) return -1;
        worst = std::max(worst, std::fabs(static_cast<long double>(got[i].similarity) - want[i].sim));
    }
    return worst;
}

Outcome ranking_oracle() {
    Rng rng(404);
    pctest::TempDir tmp;
    auto backend = std::make_shared<gateway::ScriptedBackend>();
    auto gw = pctest::make_gateway(backend, tmp / "assets", true);
    bool ok = true;
    long double worst = 0;
    std::size_t ties = 0;
    std::string detail;
    const std::vector<std::pair<std::string, std::string>> queries{
        {"calm", "sage green"}, {"bold", "red and black"}, {"festive", "pastel pink"}, {"minimal", "white"}, {"warm", "amber"}};
    for (const std::size_t size : {10u, 100u, 1000u}) {
        theme::TemplateIndex index;
        std::vector<CanvasDocument> docs;
        std::vector<int> id_numbers(size);
        std::iota(id_numbers.begin(), id_numbers.end(), 0);
        std::shuffle(id_numbers.begin(), id_numbers.end(), rng);
        for (std::size_t i = 0; i < size; ++i) {
            CanvasDocument doc;
            // Every fifth template repeats an earlier one, so ties occur.
            if (i > 0 && i % 5 == 0) {
                doc = docs[static_cast<std::size_t>(pctest::uniform(rng, 0, static_cast<int>(i) - 1))];
            } else {
                pctest::DocShape shape;
                shape.max_elements = 6;
                shape.page_w = 48;
                shape.page_h = 64;
                shape.extras = false;
                doc = pctest::random_document(rng, shape);
            }
            docs.push_back(doc);
            char id[16];
            std::snprintf(id, sizeof id, "tpl-%04d", id_numbers[i]);
            index.entries.push_back(theme::make_template(*gw, id, doc));
        }
        index.embedder_id = backend->embedder_id();
        index.dimension = index.entries.front().embedding.dimension();

        std::vector<std::vector<double>> probes;
        for (const auto& [tone, color] : queries)
            probes.push_back(backend->embed(gateway::ScriptedBackend::placeholder_image(theme::probe_prompt({tone, color}))));
        // Probes equal to an entry put a tie group at the top.
        for (int j = 0; j < 3; ++j)
            probes.push_back(pctest::pick(rng, index.entries).embedding.values);

        for (std::size_t p = 0; p < probes.size(); ++p) {
            const auto want = exhaustive(index, probes[p]);
            for (std::size_t i = 1; i < want.size(); ++i)
                if (want[i].sim == want[i - 1].sim) ++ties;
            std::vector<theme::RankedTemplate> got;
            if (p < queries.size()) {
                got = theme::query_templates(*gw, index, {queries[p].first, queries[p].second}, static_cast<int>(size))
                          .ranked;
                const auto top = theme::query_templates(*gw, index, {queries[p].first, queries[p].second}).ranked;
                if (compare_ranking(top, want) < 0 || top.size() != std::min<std::size_t>(size, theme::kDefaultTopK))
                    ok = false;
            } else {
                got = theme::rank(index, gateway::EmbeddingVector{probes[p]}, size);
            }
            const auto err = compare_ranking(got, want);
            if (err < 0 || got.size() != size) {
                ok = false;
                if (detail.empty()) detail = ", order differs at size " + std::to_string(size);
            } else {
                worst = std::max(worst, err);
            }
        }
        // Pairwise cosine against the reference sum.
        for (int j = 0; j < 200; ++j) {
            const auto& a = pctest::pick(rng, index.entries).embedding.values;
            const auto& b = pctest::pick(rng, index.entries).embedding.values;
            worst = std::max(worst, std::fabs(static_cast<long double>(theme::cosine_similarity({a}, {b})) -
                                              reference_cosine(a, b)));
        }
    }
    ok = ok && worst <= 1e-9L;
    std::ostringstream msg;
    msg << "sizes 10/100/1000 exact order (" << ties << " ties), max cosine error " << static_cast<double>(worst) << detail;
    return {ok, msg.str()};
}

// --------------------------------------------------------------- persona grid

Outcome persona_grid() {
    Rng rng(505);
    int good = 0;
    for (int i = 0; i < 20; ++i) {
        pctest::TempDir tmp;
        auto backend = std::make_shared<gateway::ScriptedBackend>();
        auto gw = pctest::make_gateway(backend, tmp / "assets", false);
        std::string goal;
        const auto text = pctest::random_brief_text(rng, &goal);
        backend->script("brief.extract", pctest::extract_payload(goal, pctest::random_words(rng, 5)));
        backend->script("persona.dimensions", pctest::dimensions_payload(rng));
        std::vector<int> order{0, 1, 2, 3};
        std::shuffle(order.begin(), order.end(), rng);
        // Every fourth brief first answers with a repeated coordinate, which must be retried.
        if (i % 4 == 3) {
            auto bad = pctest::personas_payload(rng, order);
            bad["personas"][3]["dim1"] = bad["personas"][0]["dim1"];
            bad["personas"][3]["dim2"] = bad["personas"][0]["dim2"];
            backend->script("persona.build", bad);
        }
        backend->script("persona.build", pctest::personas_payload(rng, order));
        const auto extract = persona::extract_brief(*gw, pctest::text_brief(text));
        const auto set = persona::build_personas(*gw, extract, persona::derive_dimensions(*gw, extract));
        std::set<std::pair<persona::Level, persona::Level>> grid;
        std::set<std::string> ids;
        for (const auto& p : set.personas) {
            grid.insert({p.dim1, p.dim2});
            ids.insert(p.id);
        }
        const bool covers = set.personas.size() == 4 && grid.size() == 4 && !grid.count({persona::Level::Unset, persona::Level::Unset}) &&
                            std::all_of(grid.begin(), grid.end(), [](const auto& g) {
                                return g.first != persona::Level::Unset && g.second != persona::Level::Unset;
                            });
        if (covers && ids == std::set<std::string>{"p1", "p2", "p3", "p4"}) ++good;
    }
    return {good == 20, std::to_string(good) + "/20 briefs give 4 personas covering the 2x2 grid"};
}

// ---------------------------------------------------------- guardrail contract

struct RequestAudit {
    std::map<std::string, std::size_t> checked;
    std::size_t missing = 0;

    void audit(const gateway::ScriptedBackend& backend, const std::string& raw, const std::string& goal) {
        static const std::set<std::string> kTags{"feedback.persona", "discuss.question", "discuss.answer",
                                                 "discuss.conclude"};
        for (const auto& r : backend.requests()) {
            if (!kTags.count(r.tag)) continue;
            ++checked[r.tag];
            if (r.text.find(raw) == std::string::npos || r.text.find(goal) == std::string::npos) ++missing;
        }
    }
};

void fixture_run(const std::string& name, RequestAudit& audit) {
    pctest::TempDir tmp;
    const auto dir = pctest::fixtures_dir() / name;
    auto backend = std::make_shared<gateway::ScriptedBackend>(dir / "script");
    auto gw = pctest::make_gateway(backend, tmp / "assets", false);
    workflow::run_pipeline(*gw, persona::MarketingBrief::from_files({dir / "brief.txt"}),
                           canvas::parse_document(pctest::slurp(dir / "draft.json")));
    const auto goal = Json::parse(pctest::slurp(dir / "script" / "brief.extract.1.json"))["goal"].get<std::string>();
    audit.audit(*backend, pctest::slurp(dir / "brief.txt"), goal);
}

void random_run(Rng& rng, RequestAudit& audit) {
    pctest::TempDir tmp;
    auto backend = std::make_shared<gateway::ScriptedBackend>();
    auto gw = pctest::make_gateway(backend, tmp / "assets", true);
    pctest::DocShape shape;
    shape.max_elements = 8;
    const auto doc = content_document(rng, shape);
    std::string goal;
    const auto text = pctest::random_brief_text(rng, &goal);
    pctest::script_pipeline(*backend, rng, doc, goal, 0.7);
    const auto extract = persona::extract_brief(*gw, pctest::text_brief(text));
    const auto personas = persona::build_personas(*gw, extract, persona::derive_dimensions(*gw, extract));
    const auto batch = feedback::generate_feedback(*gw, doc, personas, extract);
    const discussion::Context ctx{*gw, personas, extract, doc};
    for (const auto& unit : feedback::group_units(batch.items, doc)) {
        if (unit.items.size() < 2) continue;
        discussion::ConflictReport report{unit.unit_id, "personas disagree", {}};
        for (const auto& item : unit.items) report.conflicting_item_ids.push_back(item.id());
        auto d = discussion::submit_comment(discussion::open_discussion(unit, report, unit.unit_id + ".1"),
                                            pctest::chance(rng, 0.5) ? std::nullopt
                                                                     : std::optional<std::string>("more contrast"));
        pctest::script_round(*backend, rng, unit, unit.items.size());
        discussion::advance(ctx, d, unit);
    }
    audit.audit(*backend, text, goal);
}

Outcome guardrail_contract() {
    RequestAudit audit;
    fixture_run("cafe", audit);
    fixture_run("sports", audit);
    Rng rng(606);
    for (int i = 0; i < 10; ++i) random_run(rng, audit);
    std::size_t total = 0;
    std::ostringstream per_tag;
    for (const auto& [tag, n] : audit.checked) {
        total += n;
        per_tag << (per_tag.tellp() ? ", " : "") << tag << " " << n;
    }
    const bool all_kinds = audit.checked.size() == 4;
    return {audit.missing == 0 && all_kinds && total > 0,
            std::to_string(total - audit.missing) + "/" + std::to_string(total) +
                " requests carry brief text and goal (" + per_tag.str() + ")"};
}

// ------------------------------------------------------- discussion machine

struct Panel {
    pctest::TempDir tmp;
    Rng rng{707};
    std::shared_ptr<gateway::ScriptedBackend> backend = std::make_shared<gateway::ScriptedBackend>();
    std::shared_ptr<gateway::Gateway> gw = pctest::make_gateway(backend, tmp / "assets", false);
    CanvasDocument doc = canvas::parse_document(pctest::slurp(pctest::fixtures_dir() / "cafe" / "draft.json"));
    persona::BriefExtract extract{"goal text", "audience", {}, "brief raw text"};
    persona::PersonaSet personas;
    feedback::FeedbackUnit unit;
    discussion::ConflictReport report;

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
        std::vector<feedback::FeedbackItem> items;
        for (const char* p : {"p1", "p2", "p3"})
            items.push_back({p, "t2", feedback::FeedbackKind::Text, "opinion", std::string("preview ") + p, "why"});
        unit = feedback::group_units(items, doc).at(0);
        report = {unit.unit_id, "p1 and p2 disagree", {"p1-text-t2", "p2-text-t2"}};
    }
    discussion::Context ctx() const { return {*gw, personas, extract, doc}; }
};

discussion::Discussion reach(Panel& panel, discussion::State target) {
    using discussion::State;
    auto d = discussion::open_discussion(panel.unit, panel.report, "m.1");
    if (target == State::AwaitingComment) return d;
    d = discussion::submit_comment(d, std::nullopt);
    if (target == State::Questioning) return d;
    pctest::script_round(*panel.backend, panel.rng, panel.unit, 2);
    d = discussion::ask_questions(panel.ctx(), d, panel.unit);
    if (target == State::Answering) return d;
    d = discussion::collect_answers(panel.ctx(), d, panel.unit);
    if (target == State::Concluding) return d;
    return discussion::conclude(panel.ctx(), d, panel.unit).discussion;
}

Outcome state_machine() {
    using discussion::Operation;
    using discussion::State;
    const std::set<std::pair<State, Operation>> legal{{State::AwaitingComment, Operation::SubmitComment},
                                                      {State::Concluded, Operation::SubmitComment},
                                                      {State::Questioning, Operation::AskQuestions},
                                                      {State::Answering, Operation::CollectAnswers},
                                                      {State::Concluding, Operation::Conclude}};
    int agree = 0, pairs = 0;
    for (auto s : discussion::kAllStates) {
        for (auto op : discussion::kAllOperations) {
            ++pairs;
            Panel panel;
            const auto d = reach(panel, s);
            pctest::script_round(*panel.backend, panel.rng, panel.unit, 2);
            const auto calls = panel.backend->requests().size();
            std::optional<State> result;
            bool state_error = false;
            try {
                switch (op) {
                case Operation::SubmitComment: result = discussion::submit_comment(d, std::nullopt).state; break;
                case Operation::AskQuestions: result = discussion::ask_questions(panel.ctx(), d, panel.unit).state; break;
                case Operation::CollectAnswers:
                    result = discussion::collect_answers(panel.ctx(), d, panel.unit).state;
                    break;
                case Operation::Conclude: result = discussion::conclude(panel.ctx(), d, panel.unit).discussion.state; break;
                }
            } catch (const Error& e) {
                state_error = e.code() == ErrorCode::State;
            }
            const bool is_legal = legal.count({s, op}) > 0;
            const bool table = discussion::transition(s, op).has_value() == is_legal;
            const bool behaved = is_legal ? result.has_value() && result == discussion::transition(s, op)
                                          : state_error && panel.backend->requests().size() == calls;
            if (table && behaved && d.state == s) ++agree;
        }
    }

    // Scripted study flow: six turns, conclusion passes the guardrail.
    pctest::TempDir tmp;
    auto backend = std::make_shared<gateway::ScriptedBackend>(pctest::fixtures_dir() / "cafe" / "script");
    auto gw = pctest::make_gateway(backend, tmp / "assets", false);
    const auto draft = canvas::parse_document(pctest::slurp(pctest::fixtures_dir() / "cafe" / "draft.json"));
    const auto run = workflow::run_pipeline(
        *gw, persona::MarketingBrief::from_files({pctest::fixtures_dir() / "cafe" / "brief.txt"}), draft);
    bool flow = false;
    if (run.discussions.count("text-t2")) {
        const auto& d = run.discussions.at("text-t2");
        using discussion::RoleTag;
        std::vector<RoleTag> roles;
        for (const auto& t : d.transcript) roles.push_back(t.role);
        flow = roles == std::vector<RoleTag>{RoleTag::CommentRequest, RoleTag::Question, RoleTag::Question,
                                             RoleTag::Answer, RoleTag::Answer, RoleTag::ConclusionStatement} &&
               d.state == State::Concluded && d.conclusion &&
               feedback::guardrail_check(*d.conclusion, feedback::FeedbackKind::Text, draft).ok();
    }

    // Round bound.
    Panel panel;
    auto d = discussion::open_discussion(panel.unit, panel.report, "r.1", discussion::kDefaultMaxRounds);
    int rounds = 0;
    bool bounded = false;
    for (int i = 0; i < discussion::kDefaultMaxRounds + 3; ++i) {
        try {
            d = discussion::submit_comment(d, i ? std::optional<std::string>("again") : std::nullopt);
        } catch (const Error& e) {
            bounded = e.code() == ErrorCode::State && rounds == discussion::kDefaultMaxRounds;
            break;
        }
        pctest::script_round(*panel.backend, panel.rng, panel.unit, 2);
        d = discussion::advance(panel.ctx(), d, panel.unit).discussion;
        ++rounds;
    }
    return {agree == pairs && flow && bounded,
            std::to_string(agree) + "/" + std::to_string(pairs) + " (state, operation) pairs match, 6-turn flow " +
                (flow ? "ok" : "BROKEN") + ", stopped after " + std::to_string(rounds) + " rounds"};
}

// ------------------------------------------------------- theme conservation

std::multiset<std::string> texts_of(const CanvasDocument& d) {
    const auto v = pctest::sorted_texts(d);
    return {v.begin(), v.end()};
}

std::multiset<std::string> sources_of(const CanvasDocument& d) {
    const auto v = pctest::sorted_sources(d);
    return {v.begin(), v.end()};
}

Outcome theme_conservation() {
    Rng rng(808);
    pctest::TempDir tmp;
    auto gw = pctest::make_gateway(std::make_shared<gateway::ScriptedBackend>(), tmp / "assets", true);
    int conserved = 0, round_trips = 0, bounded = 0, max_rounds_seen = 0;
    for (int i = 0; i < 50; ++i) {
        pctest::DocShape shape;
        shape.max_elements = 10;
        shape.rotations = false;
        const auto original = content_document(rng, shape, 2);
        shape.max_elements = 12;
        const auto templ = pctest::random_document(rng, shape);

        const auto ex = theme::extract_embellishments(templ);
        if (theme::reinsert_embellishments(ex.stripped, ex.embellishments) == templ) ++round_trips;

        const auto res = theme::apply_theme(*gw, original, templ, theme::kDefaultMaxRounds);
        if (texts_of(res.document) == texts_of(original) && sources_of(res.document) == sources_of(original)) ++conserved;
        bool monotone = !res.overlap_areas.empty() &&
                        res.overlap_areas.size() == static_cast<std::size_t>(res.rounds) + 1 &&
                        std::fabs(res.overlap_areas.back() - canvas::total_overlap_area(res.document)) <= 1e-6;
        for (std::size_t k = 1; k < res.overlap_areas.size(); ++k)
            if (res.overlap_areas[k] > res.overlap_areas[k - 1]) monotone = false;
        if (res.rounds <= 3 && monotone) ++bounded;
        max_rounds_seen = std::max(max_rounds_seen, res.rounds);
    }
    return {conserved == 50 && round_trips == 50 && bounded == 50,
            std::to_string(conserved) + "/50 content preserved, " + std::to_string(round_trips) +
                "/50 embellishment round trips, " + std::to_string(bounded) +
                "/50 resolutions bounded and non-increasing (max " + std::to_string(max_rounds_seen) + " rounds)"};
}

// ------------------------------------------------------------ e2e determinism

std::map<std::string, std::string> tree(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        const auto rel = fs::relative(entry.path(), root).string();
        out[rel] = entry.is_regular_file() ? pctest::slurp(entry.path()) : std::string("<dir>");
    }
    return out;
}

Outcome e2e_determinism() {
    const auto t0 = Clock::now();
    pctest::TempDir tmp;
    bool ok = true;
    std::string detail;
    for (const std::string name : {"cafe", "sports"}) {
        const auto dir = pctest::fixtures_dir() / name;
        std::vector<std::map<std::string, std::string>> trees;
        for (int i = 0; i < 3; ++i) {
            const auto out = tmp / (name + "-" + std::to_string(i));
            std::string log;
            const int rc = pctest::run_command(pctest::cli_path().string() + " run --backend 'scripted:" +
                                                   (dir / "script").string() + "' --brief '" + (dir / "brief.txt").string() +
                                                   "' --draft '" + (dir / "draft.json").string() + "' --out '" +
                                                   out.string() + "'",
                                               &log);
            if (rc != 0) {
                ok = false;
                detail += " " + name + " run failed: " + log.substr(0, 200);
                break;
            }
            trees.push_back(tree(out));
        }
        if (trees.size() == 3 && (trees[0] != trees[1] || trees[0] != trees[2])) {
            ok = false;
            detail += " " + name + " outputs differ";
        }
        if (!trees.empty()) detail += " " + name + " " + std::to_string(trees[0].size()) + " entries;";
    }
    const double secs = seconds_since(t0);
    return {ok && secs < 30.0, "3 runs per fixture byte-identical:" + detail + " " + fmt(secs) + " s"};
}

// ---------------------------------------------------------------- crash safety

// Child process: builds one session, performs random operations, records the
// state it reached, then dies without any shutdown.
[[noreturn]] void crash_child(const fs::path& dir, unsigned seed) {
    Rng rng(seed);
    auto backend = std::make_shared<gateway::ScriptedBackend>();
    auto gw = pctest::make_gateway(backend, dir / "assets", true);
    session::Settings settings;
    settings.snapshot_every = pctest::uniform(rng, 3, 9);
    session::Service service(gw, dir / "data", settings);

    pctest::DocShape shape;
    shape.max_elements = 8;
    shape.rotations = false;
    const auto doc = content_document(rng, shape, 2);
    std::string goal;
    const auto text = pctest::random_brief_text(rng, &goal);
    pctest::script_pipeline(*backend, rng, doc, goal, 0.8);
    const auto id = service.create_session(pctest::text_brief(text), doc);
    const auto ready = service.wait_ready(id);
    if (ready->status != session::kStatusFeedbackReady) std::_Exit(3);

    const int ops = pctest::uniform(rng, 3, 12);
    for (int i = 0; i < ops; ++i) {
        const auto st = service.state(id);
        try {
            switch (pctest::uniform(rng, 0, 3)) {
            case 0: {
                std::vector<std::string> refs;
                for (const auto& u : st->units)
                    if (u.kind != feedback::FeedbackKind::Theme)
                        for (const auto& item : u.items) refs.push_back(item.id());
                if (!refs.empty()) service.accept(id, pctest::pick(rng, refs));
                break;
            }
            case 1: {
                auto edited = st->document();
                for (const auto& e : edited.elements)
                    if (e.text()) {
                        edited = canvas::set_text(edited, e.id, pctest::random_text(rng, 12));
                        break;
                    }
                service.manual_edit(id, edited);
                break;
            }
            case 2: {
                for (const auto& [unit_id, report] : st->reports) {
                    const auto& unit = st->unit(unit_id);
                    if (!st->discussions.count(unit_id)) service.open_discussion(id, unit_id);
                    service.comment(id, unit_id, pctest::chance(rng, 0.5) ? std::nullopt
                                                                           : std::optional<std::string>("tone it down"));
                    pctest::script_round(*backend, rng, unit, report.conflicting_item_ids.size());
                    service.advance(id, unit_id);
                    break;
                }
                break;
            }
            default:
                service.add_persona(id, {"Extra Voice", "s", "b", "m", "p", "n", "q", "r"});
                break;
            }
        } catch (const Error&) {
            // Rejected operations leave no trace; keep going.
        }
    }
    const auto final_state = session::to_json(*service.state(id));
    {
        std::ofstream out(dir / "expected.json", std::ios::trunc);
        out << Json{{"session_id", id}, {"state", final_state}}.dump();
    }
    ::raise(SIGKILL);
    std::_Exit(4);
}

std::string self_path() {
    char buf[4096];
    const auto n = ::readlink("/proc/self/exe", buf, sizeof buf - 1);
    if (n <= 0) return "acceptance";
    return std::string(buf, static_cast<std::size_t>(n));
}

Outcome crash_safety() {
    pctest::TempDir tmp;
    int equal = 0, killed = 0;
    std::size_t events = 0;
    std::string detail;
    for (unsigned seed = 1; seed <= 10; ++seed) {
        const auto dir = tmp / ("s" + std::to_string(seed));
        fs::create_directories(dir);
        std::string log;
        const int rc = pctest::run_command("'" + self_path() + "' --crash-child '" + dir.string() + "' " +
                                               std::to_string(seed),
                                           &log);
        if (rc == 128 + SIGKILL || rc == -SIGKILL || rc == SIGKILL) ++killed;
        if (!fs::exists(dir / "expected.json")) {
            if (detail.empty()) detail = ", child " + std::to_string(seed) + " exited " + std::to_string(rc);
            continue;
        }
        const auto expected = Json::parse(pctest::slurp(dir / "expected.json"));
        const auto id = expected["session_id"].get<std::string>();
        const auto log_path = dir / "data" / "sessions" / id / "events.jsonl";
        // Half the sessions also get a record torn mid-write.
        if (seed % 2 == 0) std::ofstream(log_path, std::ios::app) << R"({"seq":99999,"kind":"accepted","payl)";
        auto gw = pctest::make_gateway(std::make_shared<gateway::ScriptedBackend>(), dir / "assets", true);
        session::Service reloaded(gw, dir / "data");
        const auto st = reloaded.state(id);
        events += st->last_seq;
        if (session::to_json(*st) == expected["state"]) ++equal;
        else if (detail.empty()) detail = ", session " + std::to_string(seed) + " differs after replay";
    }
    return {equal == 10 && killed == 10, std::to_string(equal) + "/10 killed sessions replay to the pre-kill state (" +
                                             std::to_string(killed) + " killed, " + std::to_string(events) +
                                             " events)" + detail};
}

} // namespace

int main(int argc, char** argv) {
    if (argc == 4 && std::strcmp(argv[1], "--crash-child") == 0)
        crash_child(argv[2], static_cast<unsigned>(std::stoul(argv[3])));

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"canvas round-trip", round_trip},
        {"mutation locality", locality},
        {"overlap oracle", overlap_oracle},
        {"ranking oracle", ranking_oracle},
        {"persona grid", persona_grid},
        {"guardrail contract", guardrail_contract},
        {"discussion state machine", state_machine},
        {"theme application conservation", theme_conservation},
        {"end-to-end batch determinism", e2e_determinism},
        {"crash safety", crash_safety},
    };
    int failed = 0;
    for (const auto& [name, check] : criteria) {
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        if (!o.pass) ++failed;
        std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    }
    std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size() << " criteria passed"
              << std::endl;
    return failed ? 1 : 0;
}
