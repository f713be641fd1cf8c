#pragma once

#include "hypermem/corpus.hpp"
#include "hypermem/embedding.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace hypermem {

using EntityId = std::string;
using EdgeId = std::string;

/// Entity identity: NFC, trimmed, Unicode case folded.
EntityId normalize_entity_name(std::string_view name);

struct EntityNode {
    EntityId id;
    std::string name;
    std::string description;
    std::set<ChunkId> chunk_ids;  // empty only for forcibly inserted nodes
    std::optional<Vector> embedding;

    bool operator==(const EntityNode&) const = default;
};

struct RelationEdge {
    EdgeId id;
    EntityId source;
    EntityId target;
    std::string description;
    std::set<ChunkId> chunk_ids;
    std::optional<Vector> embedding;

    bool operator==(const RelationEdge&) const = default;
};

/// Pure function of the endpoints and description, so a relation restated in
/// another chunk unifies while differently described relations stay distinct.
EdgeId make_edge_id(const EntityId& source, const EntityId& target, const std::string& description);

/// Text embedded for an entity / relation.
std::string entity_embedding_text(const EntityNode& node);
std::string relation_embedding_text(const RelationEdge& edge, const std::string& source_name,
                                    const std::string& target_name);

/// Entity/relation graph with undirected adjacency over binary edges.
class KnowledgeGraph {
public:
    bool has_node(const EntityId& id) const { return nodes_.count(id) != 0; }
    bool has_edge(const EdgeId& id) const { return edges_.count(id) != 0; }
    const EntityNode& node(const EntityId& id) const;
    const RelationEdge& edge(const EdgeId& id) const;

    /// Inserts or replaces a node. Adjacency is preserved on replacement.
    void put_node(EntityNode node);

    /// Inserts an edge, or unions provenance into an existing edge with the
    /// same id. Throws InvalidArgument for a self loop and UnknownId for a
    /// missing endpoint.
    void put_edge(RelationEdge edge);

    void set_node_embedding(const EntityId& id, Vector v);
    void set_edge_embedding(const EdgeId& id, Vector v);

    /// Edge ids incident to `id` (empty for an isolated node). Throws UnknownId.
    const std::set<EdgeId>& incident_edges(const EntityId& id) const;

    const std::map<EntityId, EntityNode>& nodes() const noexcept { return nodes_; }
    const std::map<EdgeId, RelationEdge>& edges() const noexcept { return edges_; }
    std::size_t node_count() const noexcept { return nodes_.size(); }
    std::size_t edge_count() const noexcept { return edges_.size(); }

    /// Human-readable referential integrity violations; empty when sound.
    /// With `chunks`, provenance ids are checked against it too.
    std::vector<std::string> integrity_violations(const ChunkStore* chunks = nullptr) const;

    bool operator==(const KnowledgeGraph&) const = default;

private:
    std::map<EntityId, EntityNode> nodes_;
    std::map<EdgeId, RelationEdge> edges_;
    std::map<EntityId, std::set<EdgeId>> adjacency_;
};

/// Entities sharing at least one edge with `v`, excluding `v`. Throws UnknownId.
std::set<EntityId> neighbors(const KnowledgeGraph& g, const EntityId& v);

/// A relationship supplied alongside a forcibly inserted node.
struct RelationSpec {
    std::string other_name;
    std::string description;
    std::set<ChunkId> chunk_ids;
};

/// Insert-or-refresh by normalized name. A new description fragment is
/// appended (an identical one is ignored) and provenance is unioned. Each
/// relation becomes an edge from the node to `other_name`; a missing endpoint
/// is created with empty description and provenance. When `embedder` is
/// non-null every touched node and new edge is (re)embedded.
EntityId upsert_node(KnowledgeGraph& g, const std::string& name, const std::string& description,
                     const std::set<ChunkId>& chunk_ids, const std::vector<RelationSpec>& relations,
                     EmbeddingProvider* embedder);

inline constexpr int kGraphSchemaVersion = 1;

/// Writes manifest.json, nodes.jsonl, edges.jsonl and embeddings.f32 under
/// `dir`. Output is canonical: records sorted by id, sets sorted.
void save_graph(const KnowledgeGraph& g, const std::filesystem::path& dir);

/// Throws FormatError on a schema mismatch or any inconsistency; never
/// returns a partial graph.
KnowledgeGraph load_graph(const std::filesystem::path& dir);

}  // namespace hypermem
