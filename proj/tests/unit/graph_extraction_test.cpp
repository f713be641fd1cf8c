#include "hypermem/embedding_providers.hpp"
#include "hypermem/error.hpp"
#include "hypermem/extraction.hpp"
#include "hypermem/graph.hpp"
#include "hypermem/records.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace hypermem;
using hypermem::testing::graph_of;
using hypermem::testing::slurp;
using hypermem::testing::TempDir;

namespace {

std::set<EntityId> oracle_neighbors(const KnowledgeGraph& g, const EntityId& v) {
    std::set<EntityId> out;
    for (const auto& [id, e] : g.edges()) {
        if (e.source == v) {
            out.insert(e.target);
        }
        if (e.target == v) {
            out.insert(e.source);
        }
    }
    return out;
}

std::string extraction(const std::vector<std::string>& records) {
    std::string out;
    for (const auto& r : records) {
        out += r + "\n##\n";
    }
    return out + "<|COMPLETE|>";
}

std::string entity(const std::string& name, const std::string& desc) {
    return "(\"entity\"<|>" + name + "<|>person<|>" + desc + ")";
}

std::string relation(const std::string& a, const std::string& b, const std::string& desc) {
    return "(\"relationship\"<|>" + a + "<|>" + b + "<|>" + desc + "<|>kw<|>5)";
}

Chunk chunk(const std::string& id, const std::string& text) {
    Chunk c;
    c.id = id;
    c.doc_id = "d";
    c.text = text;
    c.token_end = 1;
    return c;
}

KnowledgeGraph random_graph(std::uint64_t seed, int nodes, int edges, bool embedded) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> pick(0, nodes - 1);
    KnowledgeGraph g;
    for (int i = 0; i < nodes; ++i) {
        EntityNode n;
        n.id = "n" + std::to_string(i);
        n.name = "N" + std::to_string(i);
        n.description = "node " + std::to_string(i);
        n.chunk_ids = {"c" + std::to_string(i % 7)};
        if (embedded) {
            n.embedding = hypermem::testing::random_vector(rng, 4);
        }
        g.put_node(n);
    }
    for (int k = 0; k < edges; ++k) {
        const int a = pick(rng);
        const int b = pick(rng);
        if (a == b) {
            continue;
        }
        RelationEdge e;
        e.source = "n" + std::to_string(a);
        e.target = "n" + std::to_string(b);
        e.description = "rel " + std::to_string(k % 3);
        e.chunk_ids = {"c" + std::to_string(k % 5)};
        e.id = make_edge_id(e.source, e.target, e.description);
        if (embedded) {
            e.embedding = hypermem::testing::random_vector(rng, 4);
        }
        g.put_edge(e);
    }
    return g;
}

}  // namespace

TEST(EntityIdentity, NormalizedName) {
    EXPECT_EQ(normalize_entity_name("  John Carter "), "john carter");
    EXPECT_EQ(normalize_entity_name("JOHN CARTER"), normalize_entity_name("john carter"));
}

TEST(Graph, SelfLoopAndDanglingEndpointRejected) {
    auto g = graph_of({"A", "B"}, {});
    RelationEdge loop{"x", "a", "a", "self", {}, std::nullopt};
    EXPECT_THROW(g.put_edge(loop), InvalidArgument);
    RelationEdge dangling{"y", "a", "zzz", "d", {}, std::nullopt};
    EXPECT_THROW(g.put_edge(dangling), UnknownId);
}

TEST(Neighbors, IsolatedNode) {
    const auto g = graph_of({"A"}, {});
    EXPECT_TRUE(neighbors(g, "a").empty());
}

TEST(Neighbors, Path) {
    const auto g = graph_of({"A", "B", "C"}, {{"A", "B", "ab"}, {"B", "C", "bc"}});
    EXPECT_EQ(neighbors(g, "b"), (std::set<EntityId>{"a", "c"}));
}

TEST(Neighbors, RandomGraphMatchesEdgeScan) {
    const auto g = random_graph(30, 30, 60, false);
    for (const auto& [id, n] : g.nodes()) {
        EXPECT_EQ(neighbors(g, id), oracle_neighbors(g, id)) << id;
    }
    EXPECT_THROW(neighbors(g, "ghost"), UnknownId);
}

TEST(Upsert, ExistingNameWithIdenticalContentIsNoOp) {
    auto g = graph_of({"A", "B"}, {{"A", "B", "ab"}});
    const auto before = g;
    upsert_node(g, "a", "A description", {"c-a"}, {}, nullptr);
    EXPECT_EQ(g, before);
}

TEST(Upsert, NewNodeWithRelationToAbsentEndpoint) {
    KnowledgeGraph g;
    HashingEmbedder e(8);
    upsert_node(g, "X", "new", {}, {{"Y", "x knows y", {}}}, &e);
    ASSERT_TRUE(g.has_node("x"));
    ASSERT_TRUE(g.has_node("y"));
    EXPECT_EQ(neighbors(g, "x"), (std::set<EntityId>{"y"}));
    EXPECT_TRUE(g.node("x").embedding.has_value());
    EXPECT_TRUE(g.node("y").embedding.has_value());
    EXPECT_TRUE(g.integrity_violations().empty());
}

TEST(Upsert, RandomUpsertsMatchSetUnion) {
    std::mt19937_64 rng(10);
    const std::vector<std::string> names = {"Alpha", "beta", "BETA", "Gamma ", "delta", "Alpha", "Eps"};
    std::uniform_int_distribution<std::size_t> pick(0, names.size() - 1);
    KnowledgeGraph g;
    std::set<EntityId> expected;
    for (int i = 0; i < 10; ++i) {
        const auto& n = names[pick(rng)];
        const auto& other = names[pick(rng)];
        upsert_node(g, n, "d" + std::to_string(i), {}, {{other, "r" + std::to_string(i), {}}}, nullptr);
        expected.insert(normalize_entity_name(n));
        if (normalize_entity_name(other) != normalize_entity_name(n)) {
            expected.insert(normalize_entity_name(other));
        }
    }
    std::set<EntityId> actual;
    for (const auto& [id, n] : g.nodes()) {
        actual.insert(id);
    }
    EXPECT_EQ(actual, expected);
    EXPECT_TRUE(g.integrity_violations().empty());
}

TEST(Upsert, AppendsNewFragmentAndUnionsProvenance) {
    auto g = graph_of({"A"}, {});
    upsert_node(g, "A", "second fragment", {"c9"}, {}, nullptr);
    EXPECT_EQ(g.node("a").description, "A description\nsecond fragment");
    EXPECT_EQ(g.node("a").chunk_ids, (std::set<ChunkId>{"c-a", "c9"}));
}

TEST(GraphStore, EmptyRoundTrip) {
    TempDir dir;
    save_graph(KnowledgeGraph{}, dir.path());
    EXPECT_EQ(load_graph(dir.path()), KnowledgeGraph{});
}

TEST(GraphStore, SmallFixtureRoundTrip) {
    TempDir dir;
    auto g = graph_of({"A", "B", "C"}, {{"A", "B", "ab"}, {"B", "C", "bc"}});
    for (const auto* id : {"a", "b", "c"}) {
        g.set_node_embedding(id, Vector{1.0F, 0.5F});
    }
    std::vector<EdgeId> edge_ids;
    for (const auto& [id, e] : g.edges()) {
        edge_ids.push_back(id);
    }
    for (const auto& id : edge_ids) {
        g.set_edge_embedding(id, Vector{0.25F, -1.0F});
    }
    save_graph(g, dir.path());
    EXPECT_EQ(load_graph(dir.path()), g);
}

TEST(GraphStore, LargeRandomGraphReserializesByteIdentically) {
    TempDir a;
    TempDir b;
    const auto g = random_graph(1000, 1000, 2500, true);
    save_graph(g, a.path());
    const auto loaded = load_graph(a.path());
    EXPECT_EQ(loaded, g);
    save_graph(loaded, b.path());
    EXPECT_EQ(hypermem::testing::tree_contents(a.path()), hypermem::testing::tree_contents(b.path()));
}

TEST(GraphStore, VersionMismatchAndCorruptionAreFormatErrors) {
    TempDir dir;
    save_graph(graph_of({"A", "B"}, {{"A", "B", "ab"}}), dir.path());
    auto manifest = json::parse(slurp(dir / "manifest.json"));
    manifest["schema_version"] = 99;
    hypermem::testing::spit(dir / "manifest.json", manifest.dump());
    EXPECT_THROW(load_graph(dir.path()), FormatError);

    TempDir dir2;
    save_graph(graph_of({"A", "B"}, {{"A", "B", "ab"}}), dir2.path());
    hypermem::testing::spit(dir2 / "edges.jsonl", R"({"id":"e","source":"a","target":"zzz","description":"x","chunk_ids":[]})"
                                                  "\n");
    EXPECT_THROW(load_graph(dir2.path()), FormatError);
}

TEST(ParseExtraction, RecordsAndMarker) {
    const auto p = parse_extraction(extraction({entity("A", "first"), relation("A", "B", "knows")}));
    EXPECT_TRUE(p.ok());
    ASSERT_EQ(p.entities.size(), 1U);
    EXPECT_EQ(p.entities[0].name, "A");
    ASSERT_EQ(p.relations.size(), 1U);
    EXPECT_EQ(p.relations[0].description, "knows");
    EXPECT_FALSE(parse_extraction(entity("A", "no marker")).ok());
    EXPECT_FALSE(parse_extraction("(\"entity\"<|>A)\n<|COMPLETE|>").ok());
}

TEST(ExtractGraph, NoEntitiesGivesEmptyGraph) {
    ScriptedChatProvider llm({{"extract", std::nullopt, std::nullopt, "<|COMPLETE|>"}});
    HashingEmbedder e(8);
    const auto r = extract_graph({chunk("c1", "x"), chunk("c2", "y")}, llm, e, PromptLibrary::builtin());
    EXPECT_EQ(r.graph.node_count(), 0U);
    EXPECT_EQ(r.graph.edge_count(), 0U);
    EXPECT_EQ(r.report.chunks_succeeded, 2U);
}

TEST(ExtractGraph, HandScriptedProvenance) {
    auto make_llm = [] {
        return ScriptedChatProvider({{"extract", 0, std::nullopt, extraction({relation("A", "B", "knows")})},
                                     {"extract", 1, std::nullopt, extraction({relation("B", "C", "hires")})}});
    };
    HashingEmbedder e(8);
    auto llm = make_llm();
    const auto r = extract_graph({chunk("c1", "A knows B"), chunk("c2", "B hires C")}, llm, e,
                                 PromptLibrary::builtin());
    const auto& g = r.graph;
    EXPECT_EQ(g.node_count(), 3U);
    EXPECT_EQ(g.edge_count(), 2U);
    EXPECT_EQ(g.node("a").chunk_ids, (std::set<ChunkId>{"c1"}));
    EXPECT_EQ(g.node("b").chunk_ids, (std::set<ChunkId>{"c1", "c2"}));
    EXPECT_EQ(g.node("c").chunk_ids, (std::set<ChunkId>{"c2"}));
    for (const auto& [id, n] : g.nodes()) {
        EXPECT_TRUE(n.embedding.has_value()) << id;
    }
    for (const auto& [id, ed] : g.edges()) {
        EXPECT_TRUE(ed.embedding.has_value()) << id;
    }

    auto llm2 = make_llm();
    const auto again = extract_graph({chunk("c1", "A knows B"), chunk("c2", "B hires C")}, llm2, e,
                                     PromptLibrary::builtin());
    EXPECT_EQ(again.graph, g);
}

TEST(ExtractGraph, SameNameAcrossChunksUnifies) {
    ScriptedChatProvider llm({{"extract", 0, std::nullopt, extraction({entity("Xodar", "a Dator")})},
                              {"extract", 1, std::nullopt, extraction({entity("XODAR", "a slave")})}});
    HashingEmbedder e(8);
    const auto r = extract_graph({chunk("c1", "x"), chunk("c2", "y")}, llm, e, PromptLibrary::builtin());
    ASSERT_EQ(r.graph.node_count(), 1U);
    const auto& n = r.graph.node("xodar");
    EXPECT_EQ(n.name, "Xodar");
    EXPECT_EQ(n.description, "a Dator\na slave");
    EXPECT_EQ(n.chunk_ids, (std::set<ChunkId>{"c1", "c2"}));
}

TEST(ExtractGraph, UnparseableChunkIsRetriedThenSkipped) {
    ScriptedChatProvider llm({{"extract", 0, 0, "garbage"},
                              {"extract", 0, 1, extraction({relation("A", "B", "knows")})},
                              {"extract", 1, std::nullopt, "still garbage"}});
    HashingEmbedder e(8);
    ExtractionParams params;
    params.max_retries = 2;
    const auto r = extract_graph({chunk("c1", "x"), chunk("c2", "y")}, llm, e, PromptLibrary::builtin(), params);
    EXPECT_EQ(r.report.chunks_succeeded, 1U);
    EXPECT_EQ(r.report.skipped_chunks, (std::vector<ChunkId>{"c2"}));
    EXPECT_EQ(r.graph.node_count(), 2U);
    EXPECT_FALSE(r.report.warnings.empty());
}

TEST(ExtractGraph, SelfLoopRelationDropped) {
    ScriptedChatProvider llm({{"extract", std::nullopt, std::nullopt, extraction({relation("A", "a", "self")})}});
    HashingEmbedder e(8);
    const auto r = extract_graph({chunk("c1", "x")}, llm, e, PromptLibrary::builtin());
    EXPECT_EQ(r.graph.edge_count(), 0U);
    EXPECT_FALSE(r.report.warnings.empty());
}

TEST(ExtractGraph, ManyFragmentsAreSummarizedOnce) {
    std::vector<ChatFixture> fixtures;
    std::vector<Chunk> chunks;
    for (int i = 0; i < 4; ++i) {
        fixtures.push_back({"extract", i, std::nullopt, extraction({entity("A", "fragment " + std::to_string(i))})});
        chunks.push_back(chunk("c" + std::to_string(i), "t"));
    }
    fixtures.push_back({"summarize", 0, std::nullopt, "A, summarized."});
    ScriptedChatProvider llm(fixtures);
    HashingEmbedder e(8);
    ExtractionParams params;
    params.summarize_threshold = 3;
    ExchangeLog log;
    const auto r = extract_graph(chunks, llm, e, PromptLibrary::builtin(), params, &log);
    EXPECT_EQ(r.graph.node("a").description, "A, summarized.");
    std::size_t summaries = 0;
    for (const auto& x : log.exchanges()) {
        summaries += x.tag == "summarize" ? 1 : 0;
    }
    EXPECT_EQ(summaries, 1U);
}
