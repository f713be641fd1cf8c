#include "hypermem/retrieval.hpp"

#include "hypermem/error.hpp"

#include <sstream>

namespace hypermem {

std::string to_string(SubqueryMode mode) {
    return mode == SubqueryMode::local ? "local" : "global";
}

SubqueryMode subquery_mode_from_string(const std::string& s) {
    if (s == "local") {
        return SubqueryMode::local;
    }
    if (s == "global") {
        return SubqueryMode::global;
    }
    throw FormatError("unknown subquery mode '" + s + "'");
}

json to_json(const Subquery& q) {
    json j = {{"text", q.text}, {"mode", to_string(q.mode)}, {"origin_step", q.origin_step}, {"seed", q.seed}};
    j["anchor"] = q.anchor ? json(*q.anchor) : json(nullptr);
    return j;
}

Subquery subquery_from_json(const json& j) {
    Subquery q;
    q.text = require_string(j, "text");
    q.mode = subquery_mode_from_string(require_string(j, "mode"));
    q.origin_step = static_cast<int>(require_int(j, "origin_step"));
    q.seed = j.value("seed", false);
    if (j.contains("anchor") && !j["anchor"].is_null()) {
        q.anchor = j["anchor"].get<std::string>();
    }
    return q;
}

GraphIndexes build_indexes(const KnowledgeGraph& g, const ChunkStore& chunks) {
    GraphIndexes out;
    for (const auto& [id, n] : g.nodes()) {
        if (n.embedding) {
            out.entities.upsert(id, *n.embedding);
        }
    }
    for (const auto& [id, e] : g.edges()) {
        if (e.embedding) {
            out.relations.upsert(id, *e.embedding);
        }
    }
    for (const auto& c : chunks.chunks()) {
        if (c.embedding) {
            out.chunks.upsert(c.id, *c.embedding);
        }
    }
    return out;
}

std::set<EntityId> retrieve_entities(std::span<const Vector> queries, const std::set<EntityId>& candidates,
                                     std::size_t n_v, const VectorIndex& index) {
    std::set<EntityId> out;
    if (candidates.empty()) {
        return out;
    }
    const std::vector<std::string> pool(candidates.begin(), candidates.end());
    for (const auto& q : queries) {
        for (auto& id : top_k(q, pool, index, n_v)) {
            out.insert(std::move(id));
        }
    }
    return out;
}

std::set<EntityId> local_candidates(const MemoryHypergraph& m, const KnowledgeGraph& g, const PointId& anchor) {
    if (!m.is_live(anchor)) {
        throw StaleAnchor(anchor);
    }
    const auto& own = m.points().at(anchor).vertex_ids;
    std::set<EntityId> out;
    for (const auto& v : own) {
        const auto mem = memory_neighbors(m, v);
        out.insert(mem.begin(), mem.end());
        if (g.has_node(v)) {
            const auto gn = neighbors(g, v);
            out.insert(gn.begin(), gn.end());
        }
    }
    return out;
}

std::set<EntityId> global_candidates(const MemoryHypergraph& m, const KnowledgeGraph& g) {
    std::set<EntityId> out;
    for (const auto& [id, n] : g.nodes()) {
        if (!m.has_vertex(id)) {
            out.insert(id);
        }
    }
    return out;
}

PointId resolve_anchor(const MemoryHypergraph& m, const PointId& anchor) {
    if (auto live = m.live_successor(anchor)) {
        return *live;
    }
    throw StaleAnchor(anchor);
}

std::set<EntityId> local_investigation(const Vector& query, const PointId& anchor, const MemoryHypergraph& m,
                                       const KnowledgeGraph& g, std::size_t n_v, const VectorIndex& index) {
    return retrieve_entities(std::span(&query, 1), local_candidates(m, g, anchor), n_v, index);
}

std::set<EntityId> global_exploration(const Vector& query, const MemoryHypergraph& m, const KnowledgeGraph& g,
                                      std::size_t n_v, const VectorIndex& index) {
    return retrieve_entities(std::span(&query, 1), global_candidates(m, g), n_v, index);
}

Evidence gather_evidence(const std::set<EntityId>& entity_ids, const KnowledgeGraph& g, const Vector& query,
                         std::size_t n_e, std::size_t n_d, const GraphIndexes& indexes, const ChunkStore& chunks) {
    Evidence ev;
    std::set<EdgeId> edge_pool;
    std::set<ChunkId> chunk_pool;
    for (const auto& id : entity_ids) {
        const auto& node = g.node(id);
        ev.entities.push_back(node);
        const auto& inc = g.incident_edges(id);
        edge_pool.insert(inc.begin(), inc.end());
        chunk_pool.insert(node.chunk_ids.begin(), node.chunk_ids.end());
    }
    const std::vector<std::string> edges(edge_pool.begin(), edge_pool.end());
    for (const auto& id : top_k(query, edges, indexes.relations, n_e)) {
        ev.relations.push_back(g.edge(id));
    }
    const std::vector<std::string> chunk_ids(chunk_pool.begin(), chunk_pool.end());
    for (const auto& id : top_k(query, chunk_ids, indexes.chunks, n_d)) {
        ev.chunks.push_back(chunks.at(id));
    }
    return ev;
}

std::string render_evidence(const std::vector<Evidence>& batch, const KnowledgeGraph& g) {
    std::set<EntityId> seen_entities;
    std::set<EdgeId> seen_edges;
    std::set<ChunkId> seen_chunks;
    std::ostringstream ents;
    std::ostringstream rels;
    std::ostringstream docs;
    for (const auto& ev : batch) {
        for (const auto& n : ev.entities) {
            if (seen_entities.insert(n.id).second) {
                ents << "- " << n.name;
                if (!n.description.empty()) {
                    std::string d = n.description;
                    for (char& c : d) {
                        c = c == '\n' ? ' ' : c;
                    }
                    ents << ": " << d;
                }
                ents << "\n";
            }
        }
        for (const auto& e : ev.relations) {
            if (seen_edges.insert(e.id).second) {
                rels << "- " << g.node(e.source).name << " -- " << g.node(e.target).name << ": " << e.description
                     << "\n";
            }
        }
        for (const auto& c : ev.chunks) {
            if (seen_chunks.insert(c.id).second) {
                docs << "[" << c.id << "] " << c.text << "\n";
            }
        }
    }
    if (seen_entities.empty() && seen_edges.empty() && seen_chunks.empty()) {
        return "(nothing retrieved)";
    }
    std::ostringstream out;
    out << "Entities:\n" << (seen_entities.empty() ? "(none)\n" : ents.str());
    out << "\nRelationships:\n" << (seen_edges.empty() ? "(none)\n" : rels.str());
    out << "\nPassages:\n" << (seen_chunks.empty() ? "(none)\n" : docs.str());
    auto s = out.str();
    s.pop_back();
    return s;
}

}  // namespace hypermem
