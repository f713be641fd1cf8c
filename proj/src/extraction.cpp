#include "hypermem/extraction.hpp"

#include "hypermem/error.hpp"
#include "hypermem/text.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <map>

namespace hypermem {

namespace {

constexpr std::string_view kComplete = "<|COMPLETE|>";
constexpr std::string_view kFieldSep = "<|>";

std::vector<std::string> split_on(std::string_view s, std::string_view sep) {
    std::vector<std::string> parts;
    std::size_t pos = 0;
    while (true) {
        const auto next = s.find(sep, pos);
        if (next == std::string_view::npos) {
            parts.emplace_back(s.substr(pos));
            break;
        }
        parts.emplace_back(s.substr(pos, next - pos));
        pos = next + sep.size();
    }
    return parts;
}

std::string unquote(std::string s) {
    s = trim(s);
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
        s = s.substr(1, s.size() - 2);
    }
    return trim(s);
}

}  // namespace

ParsedExtraction parse_extraction(std::string_view reply) {
    ParsedExtraction out;
    std::string text(reply);
    if (const auto pos = text.find(kComplete); pos != std::string::npos) {
        out.complete = true;
        text.erase(pos);
    }
    std::vector<std::string> records;
    for (auto& piece : split_on(text, "##")) {
        // Models often also put records on separate lines.
        std::size_t start = 0;
        while (start <= piece.size()) {
            auto nl = piece.find('\n', start);
            if (nl == std::string::npos) {
                nl = piece.size();
            }
            auto r = trim(std::string_view(piece).substr(start, nl - start));
            if (!r.empty() && r.rfind("```", 0) != 0) {
                records.push_back(std::move(r));
            }
            start = nl + 1;
        }
    }
    for (const auto& r : records) {
        if (r.size() < 2 || r.front() != '(' || r.back() != ')') {
            out.errors.push_back("not a tuple: " + r.substr(0, 80));
            continue;
        }
        auto fields = split_on(std::string_view(r).substr(1, r.size() - 2), kFieldSep);
        for (auto& f : fields) {
            f = unquote(f);
        }
        const std::string kind = to_lower_ascii(fields[0]);
        if (kind == "entity" && fields.size() >= 4 && !fields[1].empty()) {
            out.entities.push_back({fields[1], fields[2], fields[3]});
        } else if (kind == "relationship" && fields.size() >= 4 && !fields[1].empty() && !fields[2].empty()) {
            out.relations.push_back({fields[1], fields[2], fields[3], fields.size() > 4 ? fields[4] : ""});
        } else {
            out.errors.push_back("malformed " + kind + " record: " + r.substr(0, 80));
        }
    }
    return out;
}

namespace {

struct EntityAccumulator {
    std::string name;
    std::vector<std::string> fragments;
    std::set<ChunkId> chunks;
};

struct RelationAccumulator {
    EntityId source;
    EntityId target;
    std::string description;
    std::set<ChunkId> chunks;
};

void add_fragment(EntityAccumulator& acc, const std::string& fragment) {
    const auto f = trim(fragment);
    if (!f.empty() && std::find(acc.fragments.begin(), acc.fragments.end(), f) == acc.fragments.end()) {
        acc.fragments.push_back(f);
    }
}

}  // namespace

ExtractionResult extract_graph(const std::vector<Chunk>& chunks, ChatProvider& llm, EmbeddingProvider& embedder,
                               const PromptLibrary& prompts, const ExtractionParams& params, ExchangeLog* log) {
    ExtractionResult result;
    result.report.chunks_total = chunks.size();
    std::map<EntityId, EntityAccumulator> entities;
    std::map<EdgeId, RelationAccumulator> relations;

    auto ensure_entity = [&](const std::string& name, const ChunkId& chunk) -> EntityId {
        const EntityId id = normalize_entity_name(name);
        auto& acc = entities[id];
        if (acc.name.empty()) {
            acc.name = trim(nfc_normalize(name));
        }
        acc.chunks.insert(chunk);
        return id;
    };

    for (std::size_t i = 0; i < chunks.size(); ++i) {
        const Chunk& chunk = chunks[i];
        ChatRequest req;
        req.tag = "extract";
        req.step = static_cast<int>(i);
        req.temperature = params.temperature;
        req.max_output_tokens = params.max_output_tokens;
        req.messages = prompts.render("extract", {{"chunk_text", chunk.text}});
        req.context = {{"chunk_id", chunk.id}, {"chunk_text", chunk.text}};

        std::optional<ParsedExtraction> parsed;
        for (int attempt = 0; attempt <= params.max_retries; ++attempt) {
            auto candidate = parse_extraction(chat(req, llm, log));
            if (candidate.ok()) {
                parsed = std::move(candidate);
                break;
            }
            spdlog::debug("extraction reply for chunk {} unparseable (attempt {})", chunk.id, attempt + 1);
        }
        if (!parsed) {
            result.report.skipped_chunks.push_back(chunk.id);
            result.report.warnings.push_back("chunk " + chunk.id + ": extraction output unparseable after " +
                                             std::to_string(params.max_retries + 1) + " attempts; skipped");
            spdlog::warn("{}", result.report.warnings.back());
            continue;
        }
        ++result.report.chunks_succeeded;
        for (const auto& e : parsed->entities) {
            const auto id = ensure_entity(e.name, chunk.id);
            if (id.empty()) {
                continue;
            }
            add_fragment(entities[id], e.description);
        }
        for (const auto& r : parsed->relations) {
            const auto src = ensure_entity(r.source, chunk.id);
            const auto tgt = ensure_entity(r.target, chunk.id);
            if (src.empty() || tgt.empty() || src == tgt) {
                result.report.warnings.push_back("chunk " + chunk.id + ": dropped relation '" + r.source + "' -> '" +
                                                 r.target + "'");
                continue;
            }
            const auto desc = trim(r.description);
            auto& acc = relations[make_edge_id(src, tgt, desc)];
            acc.source = src;
            acc.target = tgt;
            acc.description = desc;
            acc.chunks.insert(chunk.id);
        }
    }
    entities.erase(EntityId{});

    KnowledgeGraph& g = result.graph;
    int summarized = 0;
    for (auto& [id, acc] : entities) {
        EntityNode node;
        node.id = id;
        node.name = acc.name;
        node.chunk_ids = acc.chunks;
        if (acc.fragments.size() > params.summarize_threshold) {
            std::string listing;
            for (std::size_t k = 0; k < acc.fragments.size(); ++k) {
                listing += std::to_string(k + 1) + ". " + acc.fragments[k] + "\n";
            }
            ChatRequest req;
            req.tag = "summarize";
            req.step = summarized++;
            req.temperature = params.temperature;
            req.max_output_tokens = params.max_output_tokens;
            req.messages = prompts.render("summarize", {{"name", acc.name}, {"fragments", listing}});
            req.context = {{"name", acc.name}, {"fragments", acc.fragments}};
            node.description = trim(chat(req, llm, log));
        } else {
            for (const auto& f : acc.fragments) {
                node.description += (node.description.empty() ? "" : "\n") + f;
            }
        }
        g.put_node(std::move(node));
    }
    for (auto& [id, acc] : relations) {
        g.put_edge({id, acc.source, acc.target, acc.description, acc.chunks, std::nullopt});
    }

    std::vector<std::string> texts;
    for (const auto& [id, n] : g.nodes()) {
        texts.push_back(entity_embedding_text(n));
    }
    for (const auto& [id, e] : g.edges()) {
        texts.push_back(relation_embedding_text(e, g.node(e.source).name, g.node(e.target).name));
    }
    auto vectors = embed(texts, embedder);
    std::size_t k = 0;
    std::vector<EntityId> node_ids;
    for (const auto& [id, n] : g.nodes()) {
        node_ids.push_back(id);
    }
    std::vector<EdgeId> edge_ids;
    for (const auto& [id, e] : g.edges()) {
        edge_ids.push_back(id);
    }
    for (const auto& id : node_ids) {
        g.set_node_embedding(id, std::move(vectors[k++]));
    }
    for (const auto& id : edge_ids) {
        g.set_edge_embedding(id, std::move(vectors[k++]));
    }
    return result;
}

}  // namespace hypermem
