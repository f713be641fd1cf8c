#pragma once

#include "hypermem/graph.hpp"
#include "hypermem/records.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace hypermem {

using PointId = std::string;

/// Mirror of a graph entity admitted into working memory.
struct MemoryVertex {
    EntityId entity_id;
    std::string name;
    std::string description;
    std::set<ChunkId> chunk_ids;

    bool operator==(const MemoryVertex&) const = default;
};

/// A hyperedge: one description over two or more entities.
struct MemoryPoint {
    PointId id;
    std::string description;
    std::set<EntityId> vertex_ids;
    std::optional<std::pair<PointId, PointId>> lineage;  // merge parents
    int created_step = 0;
    int updated_step = 0;

    bool operator==(const MemoryPoint&) const = default;
};

struct InsertProposal {
    std::string description;
    std::vector<std::string> vertex_names;
    /// Chunk provenance per vertex name (as written in vertex_names).
    std::map<std::string, std::set<ChunkId>> provenance;

    bool operator==(const InsertProposal&) const = default;
};

struct UpdateProposal {
    PointId point;
    std::string description;

    bool operator==(const UpdateProposal&) const = default;
};

struct MergeProposal {
    PointId first;
    PointId second;
    std::string description;

    bool operator==(const MergeProposal&) const = default;
};

/// The proposals of one evolution step.
struct MemoryDelta {
    std::vector<UpdateProposal> updates;
    std::vector<InsertProposal> insertions;
    std::vector<MergeProposal> merges;

    bool empty() const { return updates.empty() && insertions.empty() && merges.empty(); }
    bool operator==(const MemoryDelta&) const = default;
};

json to_json(const MemoryDelta& d);
MemoryDelta delta_from_json(const json& j);

struct DeltaItemResult {
    std::string kind;  // "update" | "insert" | "merge"
    std::size_t index = 0;
    bool applied = false;
    std::string reason;        // set when rejected
    std::optional<PointId> point;  // affected or created point

    bool operator==(const DeltaItemResult&) const = default;
};

struct DeltaReport {
    std::vector<DeltaItemResult> items;

    std::size_t applied(const std::string& kind) const;
    std::size_t rejected() const;
    bool empty() const { return items.empty(); }
};

json to_json(const DeltaReport& r);

/// Working memory M = (V_M, E_M) of one session.
///
/// Merge parents are retired (kept for audit, removed from the live set)
/// unless `keep_merge_parents` is set, in which case they stay live next to
/// the merged child.
class MemoryHypergraph {
public:
    explicit MemoryHypergraph(bool keep_merge_parents = false) : keep_merge_parents_(keep_merge_parents) {}

    /// Step stamped on points created or updated from now on.
    void begin_step(int step) { step_ = step; }
    int step() const noexcept { return step_; }
    bool keep_merge_parents() const noexcept { return keep_merge_parents_; }

    /// Replaces a live point's description. Throws UnknownId for an unknown or
    /// retired point and InvalidArgument for an empty description.
    void apply_update(const PointId& point, const std::string& description);

    /// Creates a point over `vertex_names` (normalized and deduplicated).
    /// Entities new to memory are admitted with the graph node's description
    /// and provenance; entities missing from `g` are forcibly upserted into it
    /// together with relations to the point's other entities. With a null
    /// `g` the graph is neither consulted nor modified (dry run).
    /// Throws DegenerateHyperedge for fewer than two distinct entities.
    PointId apply_insert(KnowledgeGraph* g, const InsertProposal& proposal, EmbeddingProvider* embedder = nullptr);

    /// New point over the union of both parents' entities with lineage
    /// (first, second). Throws InvalidArgument when first == second or the
    /// description is empty, UnknownId when a parent is not live.
    PointId apply_merge(const PointId& first, const PointId& second, const std::string& description);

    /// Applies updates, then insertions, then merges. Each rejected item is
    /// reported with its reason and never aborts the rest.
    DeltaReport apply_delta(KnowledgeGraph* g, const MemoryDelta& delta, EmbeddingProvider* embedder = nullptr);

    bool has_vertex(const EntityId& id) const { return vertices_.count(id) != 0; }
    bool is_live(const PointId& id) const { return points_.count(id) != 0; }
    bool is_retired(const PointId& id) const { return retired_.count(id) != 0; }
    const MemoryVertex& vertex(const EntityId& id) const;
    const MemoryPoint& point(const PointId& id) const;  // live or retired

    /// The live point that absorbed `id` through merges, if any.
    std::optional<PointId> live_successor(const PointId& id) const;

    const std::map<EntityId, MemoryVertex>& vertices() const noexcept { return vertices_; }
    const std::map<PointId, MemoryPoint>& points() const noexcept { return points_; }
    const std::map<PointId, MemoryPoint>& retired() const noexcept { return retired_; }
    const std::map<EntityId, std::set<PointId>>& incidence() const noexcept { return incidence_; }
    std::set<EntityId> vertex_ids() const;
    /// Union of chunk provenance over all vertices.
    std::set<ChunkId> chunk_ids() const;
    bool empty() const noexcept { return points_.empty() && vertices_.empty(); }

    /// Structural problems; empty when every invariant holds. With `g`, also
    /// checks that every vertex exists in the graph.
    std::vector<std::string> invariant_violations(const KnowledgeGraph* g = nullptr) const;

    /// Snapshot as line records (meta, vertices, live and retired points).
    std::vector<json> to_records() const;
    static MemoryHypergraph from_records(const std::vector<json>& records);

    bool operator==(const MemoryHypergraph& other) const;

private:
    PointId next_point_id();
    void link(const MemoryPoint& p);
    void unlink(const MemoryPoint& p);
    MemoryVertex& admit(KnowledgeGraph* g, const std::string& name, const std::set<ChunkId>& provenance,
                        const std::vector<std::string>& co_members, const std::string& description,
                        EmbeddingProvider* embedder);

    bool keep_merge_parents_ = false;
    int step_ = 0;
    long next_seq_ = 1;
    std::map<EntityId, MemoryVertex> vertices_;
    std::map<PointId, MemoryPoint> points_;
    std::map<PointId, MemoryPoint> retired_;
    std::map<EntityId, std::set<PointId>> incidence_;
    std::map<PointId, PointId> successor_;  // parent -> merged child
};

/// Mean vertex count over live points; 0 for an empty memory.
double avg_entities_per_hyperedge(const MemoryHypergraph& m);

/// Entities sharing a live point with `v`, excluding `v`. Throws UnknownId
/// when `v` is not a memory vertex.
std::set<EntityId> memory_neighbors(const MemoryHypergraph& m, const EntityId& v);

inline constexpr const char* kEmptyMemoryText = "(memory is empty)";

/// Live points ordered by creation step, then id, followed by the vertices.
std::string render_memory(const MemoryHypergraph& m);

/// Natural order for point ids: shorter first, then lexicographic, so P2 < P10.
bool point_id_less(const PointId& a, const PointId& b);

}  // namespace hypermem
