#pragma once

#include "hypermem/corpus.hpp"
#include "hypermem/embedding.hpp"
#include "hypermem/graph.hpp"
#include "hypermem/memory.hpp"

#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace hypermem {

enum class SubqueryMode { local, global };

std::string to_string(SubqueryMode mode);
SubqueryMode subquery_mode_from_string(const std::string& s);

struct Subquery {
    std::string text;
    SubqueryMode mode = SubqueryMode::global;
    std::optional<PointId> anchor;  // set iff mode == local
    int origin_step = 0;
    /// The step-0 query seed, which is global under every strategy.
    bool seed = false;

    bool operator==(const Subquery&) const = default;
};

json to_json(const Subquery& q);
Subquery subquery_from_json(const json& j);

struct RetrievalParams {
    std::size_t n_v = 5;
    std::size_t n_e = 10;
    std::size_t n_d = 5;

    bool operator==(const RetrievalParams&) const = default;
};

/// Vector indexes over the frozen graph and its chunks.
struct GraphIndexes {
    VectorIndex entities;
    VectorIndex relations;
    VectorIndex chunks;
};

/// Indexes every embedded node, edge and chunk. Items without an embedding
/// are skipped.
GraphIndexes build_indexes(const KnowledgeGraph& g, const ChunkStore& chunks);

/// Union over queries of each query's top-n_v candidates by cosine.
std::set<EntityId> retrieve_entities(std::span<const Vector> queries, const std::set<EntityId>& candidates,
                                     std::size_t n_v, const VectorIndex& index);

/// Union over the anchor's vertices of their memory and graph neighbors.
/// The anchor's own vertices are memory neighbors of one another, so they
/// belong to the union.
std::set<EntityId> local_candidates(const MemoryHypergraph& m, const KnowledgeGraph& g, const PointId& anchor);

/// V_G minus V_M.
std::set<EntityId> global_candidates(const MemoryHypergraph& m, const KnowledgeGraph& g);

/// The live point standing for `anchor`: itself, or the merged point that
/// absorbed it. Throws StaleAnchor when neither exists.
PointId resolve_anchor(const MemoryHypergraph& m, const PointId& anchor);

/// Throws StaleAnchor when `anchor` is not live.
std::set<EntityId> local_investigation(const Vector& query, const PointId& anchor, const MemoryHypergraph& m,
                                       const KnowledgeGraph& g, std::size_t n_v, const VectorIndex& index);

std::set<EntityId> global_exploration(const Vector& query, const MemoryHypergraph& m, const KnowledgeGraph& g,
                                      std::size_t n_v, const VectorIndex& index);

struct Evidence {
    std::vector<EntityNode> entities;
    std::vector<RelationEdge> relations;  // at most n_e, best first
    std::vector<Chunk> chunks;            // at most n_d, best first
    Subquery subquery;
};

/// Collects the edges incident to `entity_ids` and the chunks in their
/// provenance, ranks both pools by cosine to `query` (ties by id) and keeps
/// the best n_e relations and n_d chunks.
Evidence gather_evidence(const std::set<EntityId>& entity_ids, const KnowledgeGraph& g, const Vector& query,
                         std::size_t n_e, std::size_t n_d, const GraphIndexes& indexes, const ChunkStore& chunks);

/// Text block of retrieved entities, relations and passages for prompts.
std::string render_evidence(const std::vector<Evidence>& batch, const KnowledgeGraph& g);

}  // namespace hypermem
