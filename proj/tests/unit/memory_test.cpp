#include "hypermem/embedding_providers.hpp"
#include "hypermem/error.hpp"
#include "hypermem/memory.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace hypermem;
using hypermem::testing::graph_of;
using hypermem::testing::insert_point;

namespace {

const std::vector<std::string> kNames = {"A", "B", "C", "D", "E", "F", "G", "H", "I", "J", "K", "L"};

std::vector<std::string> random_members(std::mt19937_64& rng, std::size_t max_size = 4) {
    std::vector<std::string> pool = kNames;
    std::shuffle(pool.begin(), pool.end(), rng);
    const auto n = std::uniform_int_distribution<std::size_t>(2, max_size)(rng);
    return {pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n)};
}

std::set<EntityId> ids_of(const std::vector<std::string>& names) {
    std::set<EntityId> out;
    for (const auto& n : names) {
        out.insert(normalize_entity_name(n));
    }
    return out;
}

std::map<EntityId, std::set<PointId>> oracle_incidence(const MemoryHypergraph& m) {
    std::map<EntityId, std::set<PointId>> out;
    for (const auto& [id, p] : m.points()) {
        for (const auto& v : p.vertex_ids) {
            out[v].insert(id);
        }
    }
    return out;
}

std::map<EntityId, std::set<PointId>> nonempty(const std::map<EntityId, std::set<PointId>>& in) {
    std::map<EntityId, std::set<PointId>> out;
    for (const auto& [v, ps] : in) {
        if (!ps.empty()) {
            out.emplace(v, ps);
        }
    }
    return out;
}

MemoryHypergraph ten_point_memory(std::mt19937_64& rng) {
    MemoryHypergraph m;
    for (int i = 0; i < 10; ++i) {
        insert_point(m, random_members(rng), "point " + std::to_string(i));
    }
    return m;
}

}  // namespace

TEST(Insert, SmallestHyperedgeIntoEmptyMemory) {
    MemoryHypergraph m;
    const auto id = insert_point(m, {"A", "B"}, "A works with B");
    EXPECT_EQ(m.vertices().size(), 2U);
    EXPECT_EQ(m.points().size(), 1U);
    EXPECT_EQ(m.point(id).vertex_ids, (std::set<EntityId>{"a", "b"}));
    EXPECT_TRUE(m.invariant_violations().empty());
}

TEST(Insert, EntityAbsentFromGraphIsUpserted) {
    auto g = graph_of({"A"}, {});
    MemoryHypergraph m;
    InsertProposal p{"A meets Z", {"A", "Z"}, {}};
    m.apply_insert(&g, p);
    EXPECT_TRUE(g.has_node("z"));
    EXPECT_TRUE(g.integrity_violations().empty());
    EXPECT_TRUE(m.invariant_violations(&g).empty());
    EXPECT_EQ(neighbors(g, "z"), (std::set<EntityId>{"a"}));
}

TEST(Insert, AdmittedVertexMirrorsGraphNode) {
    auto g = graph_of({"A", "B"}, {{"A", "B", "ab"}});
    MemoryHypergraph m;
    m.apply_insert(&g, InsertProposal{"A and B", {"A", "B"}, {}});
    EXPECT_EQ(m.vertex("a").description, "A description");
    EXPECT_EQ(m.vertex("a").chunk_ids, (std::set<ChunkId>{"c-a"}));
}

TEST(Insert, FewerThanTwoDistinctEntitiesIsDegenerate) {
    MemoryHypergraph m;
    EXPECT_THROW(insert_point(m, {"A"}, "alone"), DegenerateHyperedge);
    EXPECT_THROW(insert_point(m, {"A", " a "}, "same twice"), DegenerateHyperedge);
    EXPECT_TRUE(m.empty());
}

TEST(Insert, FifteenRandomInsertsMatchRecomputedIncidence) {
    std::mt19937_64 rng(15);
    MemoryHypergraph m;
    for (int i = 0; i < 15; ++i) {
        insert_point(m, random_members(rng, 5), "p" + std::to_string(i));
        EXPECT_EQ(nonempty(m.incidence()), oracle_incidence(m));
    }
    EXPECT_EQ(m.points().size(), 15U);
}

TEST(Update, IdenticalTextAdvancesStep) {
    MemoryHypergraph m;
    const auto id = insert_point(m, {"A", "B"}, "same");
    m.begin_step(3);
    m.apply_update(id, "same");
    EXPECT_EQ(m.point(id).description, "same");
    EXPECT_EQ(m.point(id).updated_step, 3);
    EXPECT_EQ(m.point(id).created_step, 0);
}

TEST(Update, MembersUnchanged) {
    MemoryHypergraph m;
    const auto id = insert_point(m, {"A", "B"}, "old");
    m.apply_update(id, "new");
    EXPECT_EQ(m.point(id).vertex_ids, (std::set<EntityId>{"a", "b"}));
}

TEST(Update, UnknownOrRetiredPointThrows) {
    MemoryHypergraph m;
    const auto p1 = insert_point(m, {"A", "B"}, "x");
    const auto p2 = insert_point(m, {"B", "C"}, "y");
    m.apply_merge(p1, p2, "xy");
    EXPECT_THROW(m.apply_update("P99", "z"), UnknownId);
    EXPECT_THROW(m.apply_update(p1, "z"), UnknownId);
}

TEST(Update, TwentyRandomUpdatesMatchReplay) {
    std::mt19937_64 rng(20);
    auto m = ten_point_memory(rng);
    std::vector<PointId> ids;
    for (const auto& [id, p] : m.points()) {
        ids.push_back(id);
    }
    std::map<PointId, std::string> oracle;
    for (const auto& [id, p] : m.points()) {
        oracle[id] = p.description;
    }
    std::uniform_int_distribution<std::size_t> pick(0, ids.size() - 1);
    for (int i = 0; i < 20; ++i) {
        const auto& id = ids[pick(rng)];
        const auto text = "revision " + std::to_string(i);
        m.apply_update(id, text);
        oracle[id] = text;
    }
    for (const auto& [id, desc] : oracle) {
        EXPECT_EQ(m.point(id).description, desc);
    }
}

TEST(Merge, OverlappingUnion) {
    MemoryHypergraph m;
    const auto p1 = insert_point(m, {"A", "B"}, "ab");
    const auto p2 = insert_point(m, {"B", "C"}, "bc");
    const auto k = m.apply_merge(p1, p2, "abc");
    EXPECT_EQ(m.point(k).vertex_ids, (std::set<EntityId>{"a", "b", "c"}));
    EXPECT_EQ(m.point(k).lineage, std::make_pair(p1, p2));
    EXPECT_TRUE(m.is_retired(p1));
    EXPECT_TRUE(m.is_retired(p2));
    EXPECT_EQ(m.points().size(), 1U);
    EXPECT_EQ(m.live_successor(p1), k);
    EXPECT_TRUE(m.invariant_violations().empty());
}

TEST(Merge, DisjointUnion) {
    MemoryHypergraph m;
    const auto p1 = insert_point(m, {"A", "B"}, "ab");
    const auto p2 = insert_point(m, {"C", "D"}, "cd");
    const auto k = m.apply_merge(p1, p2, "abcd");
    EXPECT_EQ(m.point(k).vertex_ids.size(), 4U);
}

TEST(Merge, SamePointOrRetiredParentThrows) {
    MemoryHypergraph m;
    const auto p1 = insert_point(m, {"A", "B"}, "ab");
    const auto p2 = insert_point(m, {"B", "C"}, "bc");
    const auto p3 = insert_point(m, {"C", "D"}, "cd");
    EXPECT_THROW(m.apply_merge(p1, p1, "x"), InvalidArgument);
    m.apply_merge(p1, p2, "abc");
    EXPECT_THROW(m.apply_merge(p1, p3, "x"), UnknownId);
    EXPECT_THROW(m.apply_merge(p3, p3, ""), InvalidArgument);
}

TEST(Merge, KeepParentsModeLeavesParentsLive) {
    MemoryHypergraph m(true);
    const auto p1 = insert_point(m, {"A", "B"}, "ab");
    const auto p2 = insert_point(m, {"B", "C"}, "bc");
    m.apply_merge(p1, p2, "abc");
    EXPECT_EQ(m.points().size(), 3U);
    EXPECT_TRUE(m.is_live(p1));
    EXPECT_TRUE(m.invariant_violations().empty());
}

TEST(Merge, ChainOfFiveMatchesFold) {
    std::mt19937_64 rng(5);
    MemoryHypergraph m;
    std::vector<PointId> live;
    std::map<PointId, std::set<EntityId>> fold;
    for (int i = 0; i < 6; ++i) {
        const auto names = random_members(rng);
        const auto id = insert_point(m, names, "p" + std::to_string(i));
        live.push_back(id);
        fold[id] = ids_of(names);
    }
    for (int i = 0; i < 5; ++i) {
        std::shuffle(live.begin(), live.end(), rng);
        const auto a = live[0];
        const auto b = live[1];
        const auto k = m.apply_merge(a, b, "merge " + std::to_string(i));
        std::set<EntityId> u = fold[a];
        u.insert(fold[b].begin(), fold[b].end());
        live.erase(live.begin(), live.begin() + 2);
        live.push_back(k);
        fold.erase(a);
        fold.erase(b);
        fold[k] = u;
        EXPECT_GE(m.point(k).vertex_ids.size(), std::max(m.point(a).vertex_ids.size(), m.point(b).vertex_ids.size()));
    }
    EXPECT_EQ(m.points().size(), fold.size());
    for (const auto& [id, members] : fold) {
        EXPECT_EQ(m.point(id).vertex_ids, members);
    }
    EXPECT_TRUE(m.invariant_violations().empty());
}

TEST(Delta, EmptyDeltaLeavesMemoryUnchanged) {
    std::mt19937_64 rng(1);
    auto m = ten_point_memory(rng);
    const auto before = m;
    const auto report = m.apply_delta(nullptr, MemoryDelta{});
    EXPECT_TRUE(report.empty());
    EXPECT_EQ(m, before);
}

TEST(Delta, MergeMayReferencePointInsertedInSameDelta) {
    MemoryHypergraph m;
    const auto p1 = insert_point(m, {"A", "B"}, "ab");
    MemoryDelta d;
    d.insertions.push_back({"bc", {"B", "C"}, {}});
    d.merges.push_back({p1, "P2", "abc"});
    const auto report = m.apply_delta(nullptr, d);
    EXPECT_EQ(report.applied("insert"), 1U);
    EXPECT_EQ(report.applied("merge"), 1U);
    EXPECT_EQ(report.rejected(), 0U);
    EXPECT_EQ(m.points().size(), 1U);
    EXPECT_EQ(m.points().begin()->second.vertex_ids, (std::set<EntityId>{"a", "b", "c"}));
}

TEST(Delta, RejectionsAreReportedAndDoNotAbort) {
    MemoryHypergraph m;
    const auto p1 = insert_point(m, {"A", "B"}, "ab");
    MemoryDelta d;
    d.updates.push_back({"P77", "ghost"});
    d.updates.push_back({p1, "ab revised"});
    d.insertions.push_back({"lonely", {"A"}, {}});
    d.insertions.push_back({"cd", {"C", "D"}, {}});
    const auto report = m.apply_delta(nullptr, d);
    EXPECT_EQ(report.rejected(), 2U);
    EXPECT_EQ(report.applied("update"), 1U);
    EXPECT_EQ(report.applied("insert"), 1U);
    EXPECT_FALSE(report.items[0].reason.empty());
    EXPECT_EQ(m.point(p1).description, "ab revised");
}

TEST(Delta, RandomDeltaEqualsDecomposedApplication) {
    std::mt19937_64 rng(10);
    for (int trial = 0; trial < 20; ++trial) {
        auto base = ten_point_memory(rng);
        std::vector<PointId> ids;
        for (const auto& [id, p] : base.points()) {
            ids.push_back(id);
        }
        std::shuffle(ids.begin(), ids.end(), rng);
        MemoryDelta d;
        for (int i = 0; i < 4; ++i) {
            d.updates.push_back({ids[static_cast<std::size_t>(i)], "u" + std::to_string(i)});
        }
        for (int i = 0; i < 3; ++i) {
            d.insertions.push_back({"ins" + std::to_string(i), random_members(rng), {}});
        }
        d.merges.push_back({ids[0], ids[1], "m0"});
        d.merges.push_back({ids[2], ids[3], "m1"});

        auto whole = base;
        whole.begin_step(1);
        whole.apply_delta(nullptr, d);

        auto parts = base;
        parts.begin_step(1);
        for (const auto& u : d.updates) {
            parts.apply_update(u.point, u.description);
        }
        for (const auto& ins : d.insertions) {
            parts.apply_insert(nullptr, ins);
        }
        for (const auto& mg : d.merges) {
            parts.apply_merge(mg.first, mg.second, mg.description);
        }
        EXPECT_EQ(whole, parts);
        EXPECT_TRUE(whole.invariant_violations().empty());
    }
}

TEST(Delta, JsonRoundTrip) {
    MemoryDelta d;
    d.updates.push_back({"P1", "u"});
    d.insertions.push_back({"i", {"A", "B"}, {{"A", {"c1"}}}});
    d.merges.push_back({"P1", "P2", "m"});
    EXPECT_EQ(delta_from_json(to_json(d)), d);
}

TEST(AvgEntities, EmptyIsZero) {
    EXPECT_EQ(avg_entities_per_hyperedge(MemoryHypergraph{}), 0.0);
}

TEST(AvgEntities, SizesThreeAndSeven) {
    MemoryHypergraph m;
    insert_point(m, {"A", "B", "C"}, "three");
    insert_point(m, {"D", "E", "F", "G", "H", "I", "J"}, "seven");
    EXPECT_DOUBLE_EQ(avg_entities_per_hyperedge(m), 5.0);
}

TEST(MemoryNeighbors, SinglePoint) {
    MemoryHypergraph m;
    insert_point(m, {"V", "W"}, "vw");
    EXPECT_EQ(memory_neighbors(m, "v"), (std::set<EntityId>{"w"}));
}

TEST(MemoryNeighbors, UnknownVertexThrows) {
    MemoryHypergraph m;
    EXPECT_THROW(memory_neighbors(m, "v"), UnknownId);
}

TEST(MemoryNeighbors, VertexLeftOnlyInRetiredPointsHasNone) {
    MemoryHypergraph m(false);
    const auto p1 = insert_point(m, {"A", "B"}, "ab");
    const auto p2 = insert_point(m, {"C", "D"}, "cd");
    m.apply_merge(p1, p2, "abcd");
    EXPECT_EQ(memory_neighbors(m, "a"), (std::set<EntityId>{"b", "c", "d"}));
}

TEST(MemoryNeighbors, RandomMemoryMatchesScan) {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 10; ++trial) {
        auto m = ten_point_memory(rng);
        std::vector<PointId> ids;
        for (const auto& [id, p] : m.points()) {
            ids.push_back(id);
        }
        m.apply_merge(ids[0], ids[1], "merged");
        for (const auto& [v, vert] : m.vertices()) {
            std::set<EntityId> oracle;
            for (const auto& [id, p] : m.points()) {
                if (p.vertex_ids.count(v) != 0) {
                    oracle.insert(p.vertex_ids.begin(), p.vertex_ids.end());
                }
            }
            oracle.erase(v);
            EXPECT_EQ(memory_neighbors(m, v), oracle) << v;
        }
    }
}

TEST(Render, EmptySentinel) {
    EXPECT_EQ(render_memory(MemoryHypergraph{}), kEmptyMemoryText);
}

TEST(Render, OnePointBlock) {
    MemoryHypergraph m;
    insert_point(m, {"A", "B"}, "A works with B");
    const auto text = render_memory(m);
    std::size_t blocks = 0;
    for (auto pos = text.find("\n[P"); pos != std::string::npos; pos = text.find("\n[P", pos + 1)) {
        ++blocks;
    }
    EXPECT_EQ(blocks, 1U);
    EXPECT_NE(text.find("[P1] A works with B"), std::string::npos);
}

TEST(Render, DeterministicAndOrderedByCreation) {
    MemoryHypergraph m;
    for (int i = 1; i <= 11; ++i) {
        m.begin_step(i < 6 ? 1 : 0);
        insert_point(m, {"A", "X" + std::to_string(i)}, "d" + std::to_string(i));
    }
    const auto a = render_memory(m);
    EXPECT_EQ(a, render_memory(m));
    EXPECT_LT(a.find("[P6]"), a.find("[P1]"));
    EXPECT_LT(a.find("[P10]"), a.find("[P11]"));
    EXPECT_LT(a.find("[P1]"), a.find("[P2]"));
}

TEST(PointIds, NaturalOrder) {
    EXPECT_TRUE(point_id_less("P2", "P10"));
    EXPECT_FALSE(point_id_less("P10", "P2"));
}

TEST(Snapshot, RecordsRoundTrip) {
    std::mt19937_64 rng(3);
    auto m = ten_point_memory(rng);
    const auto ids = std::vector<PointId>{"P1", "P2"};
    m.begin_step(2);
    m.apply_merge(ids[0], ids[1], "merged");
    const auto back = MemoryHypergraph::from_records(m.to_records());
    EXPECT_EQ(back, m);
    const auto next_a = insert_point(m, {"A", "B"}, "after");
    auto copy = back;
    EXPECT_EQ(insert_point(copy, {"A", "B"}, "after"), next_a);
}

TEST(Invariants, VerticesStayInGraphAcrossOperations) {
    auto g = graph_of({"A", "B", "C"}, {{"A", "B", "ab"}});
    HashingEmbedder e(8);
    MemoryHypergraph m;
    const auto p1 = m.apply_insert(&g, {"ab", {"A", "B"}, {}}, &e);
    const auto p2 = m.apply_insert(&g, {"cq", {"C", "Q"}, {}}, &e);
    m.apply_merge(p1, p2, "all");
    EXPECT_TRUE(m.invariant_violations(&g).empty());
    EXPECT_TRUE(g.node("q").embedding.has_value());
}
