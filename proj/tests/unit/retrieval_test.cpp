#include "hypermem/error.hpp"
#include "hypermem/retrieval.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

using namespace hypermem;
using hypermem::testing::graph_of;
using hypermem::testing::insert_point;
using hypermem::testing::random_vector;

namespace {

std::vector<std::string> sorted_top(const Vector& q, const std::set<std::string>& pool, const VectorIndex& index,
                                    std::size_t k) {
    std::vector<std::pair<double, std::string>> scored;
    for (const auto& id : pool) {
        scored.emplace_back(cosine_similarity(q, index.at(id)), id);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    std::vector<std::string> out;
    for (std::size_t i = 0; i < std::min(k, scored.size()); ++i) {
        out.push_back(scored[i].second);
    }
    return out;
}

struct RandomWorld {
    KnowledgeGraph g;
    MemoryHypergraph m;
    GraphIndexes indexes;
    ChunkStore chunks;
};

RandomWorld random_world(std::uint64_t seed, int nodes, int edges, int points) {
    std::mt19937_64 rng(seed);
    std::vector<std::string> names;
    for (int i = 0; i < nodes; ++i) {
        names.push_back("N" + std::to_string(i));
    }
    std::uniform_int_distribution<int> pick(0, nodes - 1);
    std::vector<std::tuple<std::string, std::string, std::string>> es;
    for (int i = 0; i < edges; ++i) {
        const int a = pick(rng);
        const int b = pick(rng);
        if (a != b) {
            es.emplace_back(names[a], names[b], "r" + std::to_string(i));
        }
    }
    RandomWorld w;
    w.g = graph_of(names, es);
    const auto frozen = w.g;
    for (const auto& [id, n] : frozen.nodes()) {
        w.g.set_node_embedding(id, random_vector(rng, 6));
        Chunk c;
        c.id = "c-" + id;
        c.doc_id = "d";
        c.text = n.name;
        c.token_end = 1;
        c.embedding = random_vector(rng, 6);
        w.chunks.add(c);
    }
    std::vector<EdgeId> edge_ids;
    for (const auto& [id, e] : w.g.edges()) {
        edge_ids.push_back(id);
    }
    for (const auto& id : edge_ids) {
        w.g.set_edge_embedding(id, random_vector(rng, 6));
    }
    for (int p = 0; p < points; ++p) {
        std::vector<std::string> pool = names;
        std::shuffle(pool.begin(), pool.end(), rng);
        const auto n = std::uniform_int_distribution<std::size_t>(2, 4)(rng);
        insert_point(w.m, {pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n)}, "p" + std::to_string(p));
    }
    w.indexes = build_indexes(w.g, w.chunks);
    return w;
}

}  // namespace

TEST(RetrieveEntities, NoQueriesGiveEmptySet) {
    VectorIndex index;
    index.upsert("x", Vector{1.0F});
    EXPECT_TRUE(retrieve_entities({}, {"x"}, 3, index).empty());
}

TEST(RetrieveEntities, SingleCandidateIsExhausted) {
    VectorIndex index;
    index.upsert("x", Vector{1.0F, 0.0F});
    const std::vector<Vector> qs = {Vector{0.0F, 1.0F}};
    EXPECT_EQ(retrieve_entities(qs, {"x"}, 3, index), (std::set<EntityId>{"x"}));
}

TEST(RetrieveEntities, EmptyCandidatesGiveEmptySet) {
    VectorIndex index;
    const std::vector<Vector> qs = {Vector{1.0F}};
    EXPECT_TRUE(retrieve_entities(qs, {}, 3, index).empty());
}

TEST(RetrieveEntities, ThreeQueriesMatchPerQueryUnion) {
    std::mt19937_64 rng(40);
    VectorIndex index;
    std::set<std::string> all;
    for (int i = 0; i < 40; ++i) {
        const auto id = "e" + std::to_string(i);
        index.upsert(id, random_vector(rng, 8));
        all.insert(id);
    }
    std::set<std::string> candidates;
    for (const auto& id : all) {
        if (std::bernoulli_distribution(0.7)(rng)) {
            candidates.insert(id);
        }
    }
    const std::vector<Vector> qs = {random_vector(rng, 8), random_vector(rng, 8), random_vector(rng, 8)};
    std::set<EntityId> oracle;
    for (const auto& q : qs) {
        for (const auto& id : sorted_top(q, candidates, index, 5)) {
            oracle.insert(id);
        }
    }
    const auto got = retrieve_entities(qs, candidates, 5, index);
    EXPECT_EQ(got, oracle);
    EXPECT_LE(got.size(), 15U);
    const auto first = retrieve_entities(std::span(qs).first(1), candidates, 5, index);
    EXPECT_TRUE(std::includes(got.begin(), got.end(), first.begin(), first.end()));
}

TEST(LocalCandidates, GraphPathFromAnchorVertex) {
    auto g = graph_of({"A", "B", "C"}, {{"A", "B", "ab"}});
    MemoryHypergraph m;
    const auto p = insert_point(m, {"A", "C"}, "ac");
    // A's graph neighbor B joins the memory co-members A and C.
    EXPECT_EQ(local_candidates(m, g, p), (std::set<EntityId>{"a", "b", "c"}));
}

TEST(LocalCandidates, IsolatedVerticesGiveOnlyCoMembers) {
    auto g = graph_of({"A", "B", "Z"}, {});
    MemoryHypergraph m;
    const auto p = insert_point(m, {"A", "B"}, "ab");
    EXPECT_EQ(local_candidates(m, g, p), (std::set<EntityId>{"a", "b"}));
}

TEST(LocalCandidates, RandomInstancesMatchDoubleUnion) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto w = random_world(seed, 25, 40, 6);
        for (const auto& [pid, p] : w.m.points()) {
            std::set<EntityId> oracle;
            for (const auto& v : p.vertex_ids) {
                for (const auto& [qid, q] : w.m.points()) {
                    if (q.vertex_ids.count(v) != 0) {
                        for (const auto& u : q.vertex_ids) {
                            if (u != v) {
                                oracle.insert(u);
                            }
                        }
                    }
                }
                for (const auto& [eid, e] : w.g.edges()) {
                    if (e.source == v) {
                        oracle.insert(e.target);
                    }
                    if (e.target == v) {
                        oracle.insert(e.source);
                    }
                }
            }
            EXPECT_EQ(local_candidates(w.m, w.g, pid), oracle) << seed << " " << pid;
        }
    }
}

TEST(LocalInvestigation, ResultsStayInsideNeighborhood) {
    std::mt19937_64 rng(8);
    auto w = random_world(8, 25, 40, 6);
    for (const auto& [pid, p] : w.m.points()) {
        const auto q = random_vector(rng, 6);
        const auto got = local_investigation(q, pid, w.m, w.g, 3, w.indexes.entities);
        const auto cand = local_candidates(w.m, w.g, pid);
        EXPECT_TRUE(std::includes(cand.begin(), cand.end(), got.begin(), got.end()));
        const auto top = sorted_top(q, cand, w.indexes.entities, 3);
        EXPECT_EQ(got, std::set<EntityId>(top.begin(), top.end()));
    }
}

TEST(LocalInvestigation, RetiredAnchorIsStaleAndRemaps) {
    auto g = graph_of({"A", "B", "C"}, {});
    MemoryHypergraph m;
    const auto p1 = insert_point(m, {"A", "B"}, "ab");
    const auto p2 = insert_point(m, {"B", "C"}, "bc");
    const auto k = m.apply_merge(p1, p2, "abc");
    VectorIndex index;
    EXPECT_THROW(local_investigation(Vector{1.0F}, p1, m, g, 3, index), StaleAnchor);
    EXPECT_EQ(resolve_anchor(m, p1), k);
    EXPECT_EQ(resolve_anchor(m, k), k);
    EXPECT_THROW(resolve_anchor(m, "P42"), StaleAnchor);
}

TEST(GlobalCandidates, EmptyMemoryGivesAllNodes) {
    const auto g = graph_of({"A", "B", "C"}, {});
    EXPECT_EQ(global_candidates(MemoryHypergraph{}, g), (std::set<EntityId>{"a", "b", "c"}));
}

TEST(GlobalCandidates, SetDifference) {
    const auto g = graph_of({"A", "B", "C", "D"}, {});
    MemoryHypergraph m;
    insert_point(m, {"A", "D"}, "ad");
    EXPECT_EQ(global_candidates(m, g), (std::set<EntityId>{"b", "c"}));
}

TEST(GlobalExploration, RandomInstancesMatchDifferenceThenTopK) {
    std::mt19937_64 rng(6);
    for (std::uint64_t seed = 20; seed < 30; ++seed) {
        auto w = random_world(seed, 30, 30, 5);
        const auto q = random_vector(rng, 6);
        std::set<EntityId> diff;
        for (const auto& [id, n] : w.g.nodes()) {
            if (w.m.vertices().count(id) == 0) {
                diff.insert(id);
            }
        }
        const auto top = sorted_top(q, diff, w.indexes.entities, 5);
        const auto got = global_exploration(q, w.m, w.g, 5, w.indexes.entities);
        EXPECT_EQ(got, std::set<EntityId>(top.begin(), top.end()));
        for (const auto& id : got) {
            EXPECT_FALSE(w.m.has_vertex(id));
        }
    }
}

TEST(GatherEvidence, NoEdgesNoChunks) {
    KnowledgeGraph g;
    EntityNode n;
    n.id = "a";
    n.name = "A";
    g.put_node(n);
    GraphIndexes indexes;
    ChunkStore chunks;
    const auto ev = gather_evidence({"a"}, g, Vector{1.0F}, 10, 5, indexes, chunks);
    EXPECT_EQ(ev.entities.size(), 1U);
    EXPECT_TRUE(ev.relations.empty());
    EXPECT_TRUE(ev.chunks.empty());
}

TEST(GatherEvidence, SmallPoolsReturnedWholeAndSorted) {
    auto w = random_world(2, 6, 5, 0);
    std::mt19937_64 rng(2);
    const auto q = random_vector(rng, 6);
    const std::set<EntityId> ids = {"n0", "n1"};
    const auto ev = gather_evidence(ids, w.g, q, 100, 100, w.indexes, w.chunks);
    std::set<EdgeId> pool;
    for (const auto& id : ids) {
        const auto& inc = w.g.incident_edges(id);
        pool.insert(inc.begin(), inc.end());
    }
    ASSERT_EQ(ev.relations.size(), pool.size());
    const auto order = sorted_top(q, pool, w.indexes.relations, 100);
    for (std::size_t i = 0; i < order.size(); ++i) {
        EXPECT_EQ(ev.relations[i].id, order[i]);
    }
    EXPECT_EQ(ev.chunks.size(), 2U);
}

TEST(GatherEvidence, LargePoolsMatchSortAndTruncate) {
    std::mt19937_64 rng(30);
    KnowledgeGraph g;
    ChunkStore chunks;
    EntityNode hub;
    hub.id = "hub";
    hub.name = "Hub";
    for (int i = 0; i < 50; ++i) {
        Chunk c;
        c.id = "c" + std::to_string(i);
        c.doc_id = "d";
        c.text = "t";
        c.token_end = 1;
        c.embedding = random_vector(rng, 5);
        chunks.add(c);
        hub.chunk_ids.insert(c.id);
    }
    g.put_node(hub);
    for (int i = 0; i < 30; ++i) {
        EntityNode n;
        n.id = "s" + std::to_string(i);
        n.name = n.id;
        g.put_node(n);
        RelationEdge e;
        e.source = "hub";
        e.target = n.id;
        e.description = "spoke";
        e.id = make_edge_id(e.source, e.target, e.description);
        e.embedding = random_vector(rng, 5);
        g.put_edge(e);
    }
    const auto indexes = build_indexes(g, chunks);
    const auto q = random_vector(rng, 5);
    const auto ev = gather_evidence({"hub"}, g, q, 10, 5, indexes, chunks);
    std::set<std::string> edge_pool;
    for (const auto& [id, e] : g.edges()) {
        edge_pool.insert(id);
    }
    const auto want_edges = sorted_top(q, edge_pool, indexes.relations, 10);
    const auto want_chunks = sorted_top(q, hub.chunk_ids, indexes.chunks, 5);
    ASSERT_EQ(ev.relations.size(), 10U);
    ASSERT_EQ(ev.chunks.size(), 5U);
    for (std::size_t i = 0; i < 10; ++i) {
        EXPECT_EQ(ev.relations[i].id, want_edges[i]);
    }
    for (std::size_t i = 0; i < 5; ++i) {
        EXPECT_EQ(ev.chunks[i].id, want_chunks[i]);
    }
}

TEST(Subquery, JsonRoundTrip) {
    Subquery q{"why?", SubqueryMode::local, "P3", 2, false};
    EXPECT_EQ(subquery_from_json(to_json(q)), q);
    Subquery s{"seed", SubqueryMode::global, std::nullopt, 0, true};
    EXPECT_EQ(subquery_from_json(to_json(s)), s);
}
