#include "hypermem/gateway.hpp"

#include "hypermem/error.hpp"
#include "hypermem/grammar.hpp"
#include "hypermem/text.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>

namespace hypermem {

json to_json(const Concern& c) {
    return {{"text", c.text}, {"target", c.target ? json(*c.target) : json(nullptr)}};
}

std::string to_string(ScoreDimension d) {
    return d == ScoreDimension::comprehensiveness ? "comprehensiveness" : "diversity";
}

json memory_context(const MemoryHypergraph& m) {
    json points = json::array();
    std::vector<const MemoryPoint*> live;
    for (const auto& [id, p] : m.points()) {
        live.push_back(&p);
    }
    std::sort(live.begin(), live.end(), [](const auto* a, const auto* b) { return point_id_less(a->id, b->id); });
    for (const auto* p : live) {
        json names = json::array();
        for (const auto& v : p->vertex_ids) {
            names.push_back(m.vertex(v).name);
        }
        points.push_back(
            {{"id", p->id}, {"description", p->description}, {"entity_ids", p->vertex_ids}, {"entities", names}});
    }
    return points;
}

namespace {

constexpr const char* kSufficiencyFormat = "SUFFICIENT: YES\nor\nSUFFICIENT: NO";
constexpr const char* kConcernFormat = "[[CONCERN]]\nTARGET: <memory point id or NONE>\nTEXT: <the concern>";
constexpr const char* kSubqueryFormat = "[[SUBQUERY]]\nCONCERN: <concern number>\nTEXT: <the subquery>";
constexpr const char* kEvolveFormat =
    "[[UPDATE]]\nPOINT: <point id>\nDESCRIPTION: <revised description>\n\n"
    "[[INSERT]]\nENTITIES: <entity>; <entity>; ...\nDESCRIPTION: <description>\n\nor NONE";
constexpr const char* kInsertOnlyFormat = "[[INSERT]]\nENTITIES: <entity>; <entity>; ...\nDESCRIPTION: <description>\n\nor NONE";
constexpr const char* kMergeFormat = "[[MERGE]]\nPOINTS: <id>; <id>\nDESCRIPTION: <merged description>\n\nor NONE";
constexpr const char* kJudgeFormat = "VERDICT: TRUE\nor\nVERDICT: FALSE";
constexpr const char* kScoreFormat = "LEVEL: <level number>\nSCORE: <integer score>";

std::string upper_word(std::string s) {
    s = trim(s);
    while (!s.empty() && (s.back() == '.' || s.back() == '!' || s.back() == '*')) {
        s.pop_back();
    }
    while (!s.empty() && s.front() == '*') {
        s.erase(s.begin());
    }
    for (char& c : s) {
        c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    }
    return s;
}

/// Value of `key`, or the whole reply when it is a bare word.
std::optional<std::string> keyed_word(const std::string& reply, const char* key) {
    if (auto v = find_field(reply, key)) {
        return upper_word(*v);
    }
    const auto t = upper_word(reply);
    if (t.find_first_of(" \n\t") == std::string::npos && !t.empty()) {
        return t;
    }
    return std::nullopt;
}

std::optional<int> parse_int(const std::optional<std::string>& v) {
    if (!v) {
        return std::nullopt;
    }
    auto s = trim(*v);
    std::size_t end = 0;
    while (end < s.size() && std::isdigit(static_cast<unsigned char>(s[end])) != 0) {
        ++end;
    }
    if (end == 0 || end > 6) {
        return std::nullopt;
    }
    return std::stoi(s.substr(0, end));
}

std::string normalize_point_ref(std::string s) {
    s = trim(s);
    while (!s.empty() && (s.front() == '[' || s.front() == '*')) {
        s.erase(s.begin());
    }
    while (!s.empty() && (s.back() == ']' || s.back() == '*' || s.back() == '.')) {
        s.pop_back();
    }
    if (!s.empty() && s.front() == 'p') {
        s.front() = 'P';
    }
    return s;
}

std::string render_concerns(const std::vector<Concern>& concerns) {
    std::string out;
    for (std::size_t i = 0; i < concerns.size(); ++i) {
        out += std::to_string(i + 1) + ". ";
        out += concerns[i].target ? "[targets " + *concerns[i].target + "] " : "[outside memory] ";
        out += concerns[i].text + "\n";
    }
    return trim(out);
}

}  // namespace

LlmGateway::LlmGateway(ChatProvider& provider, const PromptLibrary& prompts, ExchangeLog* log, double temperature,
                       int max_output_tokens)
    : provider_(provider), prompts_(prompts), log_(log), temperature_(temperature),
      max_output_tokens_(max_output_tokens) {}

std::string LlmGateway::send(const std::string& tag, std::vector<ChatMessage> messages, const json& context) {
    ChatRequest req;
    req.messages = std::move(messages);
    req.temperature = temperature_;
    req.max_output_tokens = max_output_tokens_;
    req.tag = tag;
    req.step = step_;
    req.context = context;
    return chat(req, provider_, log_);
}

template <typename T, typename Parse>
std::optional<T> LlmGateway::ask(const std::string& tag, const std::string& templ,
                                 const std::map<std::string, std::string>& vars, const json& context,
                                 const std::string& format, Parse&& parse) {
    auto messages = prompts_.render(templ, vars);
    const auto first = send(tag, messages, context);
    if (auto parsed = parse(first)) {
        return parsed;
    }
    messages.push_back({"assistant", first});
    for (auto& m : prompts_.render("format_reminder", {{"format", format}})) {
        messages.push_back(std::move(m));
    }
    json ctx = context;
    ctx["reprompt"] = true;
    const auto second = send(tag, messages, ctx);
    if (auto parsed = parse(second)) {
        return parsed;
    }
    warnings_.push_back("step " + std::to_string(step_) + ": unparseable '" + tag + "' reply after a reprompt");
    spdlog::warn("{}", warnings_.back());
    return std::nullopt;
}

bool LlmGateway::judge_sufficiency(const MemoryHypergraph& m, const std::string& query) {
    auto verdict = ask<bool>(
        "sufficiency", "sufficiency", {{"query", query}, {"memory", render_memory(m)}},
        {{"query", query}, {"points", memory_context(m)}}, kSufficiencyFormat,
        [](const std::string& reply) -> std::optional<bool> {
            const auto w = keyed_word(reply, "SUFFICIENT");
            if (w == "YES") {
                return true;
            }
            if (w == "NO") {
                return false;
            }
            return std::nullopt;
        });
    return verdict.value_or(false);
}

std::vector<Concern> LlmGateway::raise_concerns(const MemoryHypergraph& m, const std::string& query,
                                                std::size_t max_concerns) {
    std::vector<std::string> dropped_targets;
    auto parsed = ask<std::vector<Concern>>(
        "concerns", "concerns",
        {{"query", query}, {"memory", render_memory(m)}, {"max_concerns", std::to_string(max_concerns)}},
        {{"query", query}, {"points", memory_context(m)}, {"max_concerns", max_concerns}}, kConcernFormat,
        [&](const std::string& reply) -> std::optional<std::vector<Concern>> {
            std::vector<Concern> out;
            for (const auto& b : parse_blocks(reply).blocks) {
                const auto text = b.field("TEXT");
                if (b.type != "CONCERN" || !text || trim(*text).empty()) {
                    continue;
                }
                Concern c{trim(*text), std::nullopt};
                if (auto target = b.field("TARGET")) {
                    const auto ref = normalize_point_ref(*target);
                    if (!ref.empty() && upper_word(ref) != "NONE") {
                        if (m.is_live(ref)) {
                            c.target = ref;
                        } else {
                            dropped_targets.push_back(ref);
                        }
                    }
                }
                out.push_back(std::move(c));
            }
            if (out.empty()) {
                return std::nullopt;
            }
            return out;
        });
    for (const auto& ref : dropped_targets) {
        warnings_.push_back("step " + std::to_string(step_) + ": concern target '" + ref +
                            "' is not a live memory point; concern kept untargeted");
    }
    return parsed.value_or(std::vector<Concern>{});
}

std::vector<Subquery> LlmGateway::generate_subqueries(const std::vector<Concern>& concerns, const MemoryHypergraph& m,
                                                      const std::string& query, std::size_t max_subqueries) {
    auto make = [&](const std::string& text, const Concern* source) {
        Subquery q;
        q.text = text;
        q.origin_step = step_;
        if (source != nullptr && source->target) {
            q.mode = SubqueryMode::local;
            q.anchor = source->target;
        }
        return q;
    };
    if (concerns.empty()) {
        return {make(query, nullptr)};
    }
    json ctx_concerns = json::array();
    for (const auto& c : concerns) {
        ctx_concerns.push_back(to_json(c));
    }
    auto parsed = ask<std::vector<Subquery>>(
        "subqueries", "subqueries",
        {{"query", query},
         {"memory", render_memory(m)},
         {"concerns", render_concerns(concerns)},
         {"max_subqueries", std::to_string(max_subqueries)}},
        {{"query", query}, {"points", memory_context(m)}, {"concerns", ctx_concerns}, {"max_subqueries", max_subqueries}},
        kSubqueryFormat, [&](const std::string& reply) -> std::optional<std::vector<Subquery>> {
            std::vector<Subquery> out;
            for (const auto& b : parse_blocks(reply).blocks) {
                const auto text = b.field("TEXT");
                if (b.type != "SUBQUERY" || !text || trim(*text).empty()) {
                    continue;
                }
                const Concern* source = nullptr;
                if (auto n = parse_int(b.field("CONCERN")); n && *n >= 1 && static_cast<std::size_t>(*n) <= concerns.size()) {
                    source = &concerns[static_cast<std::size_t>(*n - 1)];
                }
                out.push_back(make(trim(*text), source));
            }
            if (out.empty()) {
                return std::nullopt;
            }
            return out;
        });
    std::vector<Subquery> out;
    if (parsed) {
        out = std::move(*parsed);
    } else {
        for (const auto& c : concerns) {
            out.push_back(make(c.text, &c));
        }
    }
    if (out.size() > max_subqueries) {
        out.resize(max_subqueries);
    }
    return out;
}

namespace {

struct EvolveItems {
    std::vector<UpdateProposal> updates;
    std::vector<std::pair<std::vector<std::string>, std::string>> inserts;
    std::vector<std::string> dropped;
};

json evidence_context(const std::vector<Evidence>& evidence, const KnowledgeGraph& g) {
    std::set<EntityId> seen;
    json entities = json::array();
    json relations = json::array();
    json chunks = json::array();
    std::set<EdgeId> seen_edges;
    std::set<ChunkId> seen_chunks;
    for (const auto& ev : evidence) {
        for (const auto& n : ev.entities) {
            if (seen.insert(n.id).second) {
                entities.push_back({{"id", n.id}, {"name", n.name}});
            }
        }
        for (const auto& e : ev.relations) {
            if (seen_edges.insert(e.id).second) {
                relations.push_back({{"id", e.id},
                                     {"source", g.node(e.source).name},
                                     {"target", g.node(e.target).name},
                                     {"description", e.description}});
            }
        }
        for (const auto& c : ev.chunks) {
            if (seen_chunks.insert(c.id).second) {
                chunks.push_back(c.id);
            }
        }
    }
    return {{"entities", entities}, {"relations", relations}, {"chunks", chunks}};
}

bool contains_ci(const std::string& haystack, const std::string& needle) {
    return to_lower_ascii(haystack).find(to_lower_ascii(needle)) != std::string::npos;
}

}  // namespace

DeltaProposal LlmGateway::propose_memory_delta(const MemoryHypergraph& m, const KnowledgeGraph& g,
                                               const std::vector<Evidence>& evidence, const std::string& query,
                                               const EvolutionSwitches& switches) {
    DeltaProposal out;
    const bool any_evidence = std::any_of(evidence.begin(), evidence.end(), [](const Evidence& e) {
        return !e.entities.empty() || !e.relations.empty() || !e.chunks.empty();
    });
    json ctx = {{"query", query},
                {"points", memory_context(m)},
                {"evidence", evidence_context(evidence, g)},
                {"insert_only", !switches.enable_update}};

    if (any_evidence || !m.points().empty()) {
        auto turn1 = ask<EvolveItems>(
            "evolve", switches.enable_update ? "evolve" : "evolve_insert_only",
            {{"query", query}, {"memory", render_memory(m)}, {"evidence", render_evidence(evidence, g)}}, ctx,
            switches.enable_update ? kEvolveFormat : kInsertOnlyFormat,
            [&](const std::string& reply) -> std::optional<EvolveItems> {
                EvolveItems items;
                if (is_none_reply(reply)) {
                    return items;
                }
                const auto parse = parse_blocks(reply);
                for (const auto& b : parse.blocks) {
                    const auto desc = b.field("DESCRIPTION");
                    if (b.type == "UPDATE") {
                        const auto point = b.field("POINT");
                        if (!switches.enable_update) {
                            items.dropped.push_back("update ignored: updates are disabled");
                        } else if (!point || !desc || trim(*desc).empty()) {
                            items.dropped.push_back("update dropped: missing POINT or DESCRIPTION");
                        } else if (!m.is_live(normalize_point_ref(*point))) {
                            items.dropped.push_back("update dropped: '" + trim(*point) + "' is not a live point");
                        } else {
                            items.updates.push_back({normalize_point_ref(*point), trim(*desc)});
                        }
                    } else if (b.type == "INSERT") {
                        const auto ents = b.field("ENTITIES");
                        if (!ents || !desc || trim(*desc).empty()) {
                            items.dropped.push_back("insert dropped: missing ENTITIES or DESCRIPTION");
                            continue;
                        }
                        auto names = split_list(*ents);
                        std::set<EntityId> ids;
                        std::vector<std::string> unique;
                        for (auto& n : names) {
                            const auto id = normalize_entity_name(n);
                            if (!id.empty() && ids.insert(id).second) {
                                unique.push_back(n);
                            }
                        }
                        if (unique.size() < 2) {
                            items.dropped.push_back("insert dropped: a memory point needs at least two entities ('" +
                                                    trim(*ents) + "')");
                            continue;
                        }
                        items.inserts.emplace_back(std::move(unique), trim(*desc));
                    } else {
                        items.dropped.push_back("unexpected block [[" + b.type + "]]");
                    }
                }
                if (parse.blocks.empty()) {
                    return std::nullopt;
                }
                return items;
            });
        if (turn1) {
            out.delta.updates = std::move(turn1->updates);
            out.dropped = std::move(turn1->dropped);
            std::vector<const Chunk*> ev_chunks;
            for (const auto& ev : evidence) {
                for (const auto& c : ev.chunks) {
                    ev_chunks.push_back(&c);
                }
            }
            for (auto& [names, desc] : turn1->inserts) {
                InsertProposal p;
                p.description = desc;
                p.vertex_names = names;
                for (const auto& name : names) {
                    const auto id = normalize_entity_name(name);
                    auto& prov = p.provenance[name];
                    for (const auto* c : ev_chunks) {
                        const bool linked =
                            g.has_node(id) ? g.node(id).chunk_ids.count(c->id) != 0 : contains_ci(c->text, name);
                        if (linked) {
                            prov.insert(c->id);
                        }
                    }
                }
                out.delta.insertions.push_back(std::move(p));
            }
        }
    }

    if (!switches.enable_merge) {
        return out;
    }
    MemoryHypergraph preview = m;
    preview.apply_delta(nullptr, out.delta);
    if (preview.points().size() < 2) {
        return out;
    }
    auto turn2 = ask<std::pair<std::vector<MergeProposal>, std::vector<std::string>>>(
        "merge", "merge", {{"query", query}, {"memory", render_memory(preview)}},
        {{"query", query}, {"points", memory_context(preview)}}, kMergeFormat,
        [&](const std::string& reply) -> std::optional<std::pair<std::vector<MergeProposal>, std::vector<std::string>>> {
            std::vector<MergeProposal> merges;
            std::vector<std::string> dropped;
            if (is_none_reply(reply)) {
                return std::make_pair(merges, dropped);
            }
            const auto parse = parse_blocks(reply);
            std::set<PointId> used;
            for (const auto& b : parse.blocks) {
                if (b.type != "MERGE") {
                    dropped.push_back("unexpected block [[" + b.type + "]]");
                    continue;
                }
                const auto pts = b.field("POINTS");
                const auto desc = b.field("DESCRIPTION");
                if (!pts || !desc || trim(*desc).empty()) {
                    dropped.push_back("merge dropped: missing POINTS or DESCRIPTION");
                    continue;
                }
                std::string list = *pts;
                std::replace(list.begin(), list.end(), ',', ';');
                auto refs = split_list(list);
                for (auto& r : refs) {
                    r = normalize_point_ref(r);
                }
                if (refs.size() != 2 || refs[0] == refs[1]) {
                    dropped.push_back("merge dropped: needs exactly two distinct points ('" + trim(*pts) + "')");
                } else if (!preview.is_live(refs[0]) || !preview.is_live(refs[1])) {
                    dropped.push_back("merge dropped: '" + trim(*pts) + "' names a point that is not live");
                } else if (used.count(refs[0]) != 0 || used.count(refs[1]) != 0) {
                    dropped.push_back("merge dropped: a point may take part in one merge per step ('" + trim(*pts) +
                                      "')");
                } else {
                    used.insert(refs.begin(), refs.end());
                    merges.push_back({refs[0], refs[1], trim(*desc)});
                }
            }
            if (parse.blocks.empty()) {
                return std::nullopt;
            }
            return std::make_pair(merges, dropped);
        });
    if (turn2) {
        out.delta.merges = std::move(turn2->first);
        out.dropped.insert(out.dropped.end(), turn2->second.begin(), turn2->second.end());
    }
    return out;
}

std::string render_chunks(const std::vector<Chunk>& chunks) {
    if (chunks.empty()) {
        return kNoChunksText;
    }
    std::string out;
    for (const auto& c : chunks) {
        out += "[" + c.id + "] " + c.text + "\n";
    }
    out.pop_back();
    return out;
}

std::string LlmGateway::generate_response(const MemoryHypergraph& m, const std::string& query,
                                          const std::vector<Chunk>& chunks) {
    json ids = json::array();
    for (const auto& c : chunks) {
        ids.push_back(c.id);
    }
    return send("answer",
                prompts_.render("answer", {{"query", query}, {"memory", render_memory(m)}, {"chunks", render_chunks(chunks)}}),
                {{"query", query}, {"points", memory_context(m)}, {"chunks", ids}});
}

Judgement LlmGateway::judge_accuracy(const std::string& prediction, const std::string& reference) {
    if (trim(prediction).empty() || trim(reference).empty()) {
        throw InvalidArgument("accuracy judging needs a non-empty prediction and reference");
    }
    auto verdict = ask<bool>("judge", "judge", {{"reference", reference}, {"prediction", prediction}},
                             {{"reference", reference}, {"prediction", prediction}}, kJudgeFormat,
                             [](const std::string& reply) -> std::optional<bool> {
                                 const auto w = keyed_word(reply, "VERDICT");
                                 if (w == "TRUE") {
                                     return true;
                                 }
                                 if (w == "FALSE") {
                                     return false;
                                 }
                                 return std::nullopt;
                             });
    return {verdict.value_or(false), !verdict.has_value()};
}

Score LlmGateway::score_generative(const std::string& prediction, const std::string& query,
                                   const std::string& source_passage, ScoreDimension dimension) {
    const std::string templ = "score_" + to_string(dimension);
    const auto levels = parse_score_levels(prompts_.raw(templ));
    json level_ctx = json::array();
    for (const auto& l : levels) {
        level_ctx.push_back({{"level", l.level}, {"low", l.low}, {"high", l.high}});
    }
    auto parsed = ask<std::pair<int, int>>(
        "score-" + to_string(dimension), templ,
        {{"query", query}, {"source", source_passage}, {"response", prediction}},
        {{"query", query}, {"response", prediction}, {"dimension", to_string(dimension)}, {"levels", level_ctx}},
        kScoreFormat, [&](const std::string& reply) -> std::optional<std::pair<int, int>> {
            const auto level = parse_int(find_field(reply, "LEVEL"));
            const auto score = parse_int(find_field(reply, "SCORE"));
            if (!level || !score) {
                return std::nullopt;
            }
            for (const auto& l : levels) {
                if (l.level == *level && *score >= l.low && *score <= l.high) {
                    return std::make_pair(*level, *score);
                }
            }
            return std::nullopt;
        });
    if (!parsed) {
        return {};
    }
    return {parsed->first, parsed->second};
}

std::vector<Chunk> select_answer_chunks(const MemoryHypergraph& m, const Vector& query, std::size_t budget,
                                        const VectorIndex& chunk_index, const ChunkStore& chunks) {
    std::vector<std::string> pool;
    for (const auto& id : m.chunk_ids()) {
        if (chunks.contains(id)) {
            pool.push_back(id);
        }
    }
    std::vector<Chunk> out;
    for (const auto& id : top_k(query, pool, chunk_index, budget)) {
        out.push_back(chunks.at(id));
    }
    return out;
}

}  // namespace hypermem
