#include "hypermem/embedding.hpp"
#include "hypermem/embedding_providers.hpp"
#include "hypermem/error.hpp"
#include "hypermem/text.hpp"
#include "support.hpp"

#include <boost/multiprecision/cpp_dec_float.hpp>
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace hypermem;
using hypermem::testing::random_vector;
using hypermem::testing::TempDir;

namespace {

using Big = boost::multiprecision::cpp_dec_float_50;

double oracle_cosine(const Vector& a, const Vector& b) {
    Big dot = 0;
    Big na = 0;
    Big nb = 0;
    for (std::size_t i = 0; i < a.dim(); ++i) {
        const Big x = a.values()[i];
        const Big y = b.values()[i];
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    return static_cast<double>(dot / (sqrt(na) * sqrt(nb)));
}

// Full sort by descending score, ascending id on ties.
std::vector<std::string> oracle_top_k(const Vector& q, std::vector<std::string> ids, const VectorIndex& index,
                                      std::size_t k) {
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    std::vector<std::pair<double, std::string>> scored;
    for (const auto& id : ids) {
        scored.emplace_back(oracle_cosine(q, index.at(id)), id);
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

class FailingEmbedder : public EmbeddingProvider {
public:
    std::size_t dimension() override { return 2; }
    std::vector<Vector> embed_batch(std::span<const std::string>) override {
        ++calls;
        throw ProviderError("down");
    }
    std::string describe() const override { return "failing"; }
    int calls = 0;
};

class CountingEmbedder : public EmbeddingProvider {
public:
    std::size_t dimension() override { return inner.dimension(); }
    std::vector<Vector> embed_batch(std::span<const std::string> texts) override {
        seen += texts.size();
        return inner.embed_batch(texts);
    }
    std::string describe() const override { return inner.describe(); }
    HashingEmbedder inner{16};
    std::size_t seen = 0;
};

}  // namespace

TEST(Vector, RejectsEmptyAndNonFinite) {
    EXPECT_THROW(Vector(std::vector<float>{}), InvalidArgument);
    EXPECT_THROW((Vector{1.0F, NAN}), InvalidArgument);
    EXPECT_THROW((Vector{INFINITY}), InvalidArgument);
}

TEST(Cosine, SelfSimilarityIsOne) {
    const Vector a{0.3F, -2.0F, 5.5F};
    EXPECT_NEAR(cosine_similarity(a, a), 1.0, 1e-9);
}

TEST(Cosine, OrthogonalIsZero) {
    EXPECT_EQ(cosine_similarity(Vector{1.0F, 0.0F}, Vector{0.0F, 1.0F}), 0.0);
}

TEST(Cosine, MatchesArbitraryPrecisionOracle) {
    const Vector a{1.0F, 2.0F, 3.0F};
    const Vector b{4.0F, 5.0F, 6.0F};
    EXPECT_NEAR(cosine_similarity(a, b), oracle_cosine(a, b), 1e-9);
    EXPECT_NEAR(cosine_similarity(a, b), 32.0 / std::sqrt(14.0 * 77.0), 1e-12);
}

TEST(Cosine, SymmetricOnRandomPairs) {
    std::mt19937_64 rng(1);
    for (int i = 0; i < 500; ++i) {
        const auto a = random_vector(rng, 12);
        const auto b = random_vector(rng, 12);
        EXPECT_EQ(cosine_similarity(a, b), cosine_similarity(b, a));
        EXPECT_NEAR(cosine_similarity(a, b), oracle_cosine(a, b), 1e-9);
    }
}

TEST(Cosine, DimensionMismatchAndZeroVectorThrow) {
    EXPECT_THROW(cosine_similarity(Vector{1.0F, 0.0F}, Vector{1.0F, 0.0F, 0.0F}), DimensionMismatch);
    EXPECT_THROW(cosine_similarity(Vector{0.0F, 0.0F}, Vector{1.0F, 0.0F}), InvalidArgument);
}

TEST(TopK, EmptyCandidates) {
    VectorIndex index;
    index.upsert("a", Vector{1.0F});
    EXPECT_TRUE(top_k(Vector{1.0F}, {}, index, 3).empty());
}

TEST(TopK, ExhaustionReturnsSortedPermutation) {
    VectorIndex index;
    index.upsert("a", Vector{1.0F, 0.0F});
    index.upsert("b", Vector{0.0F, 1.0F});
    index.upsert("c", Vector{1.0F, 1.0F});
    const std::vector<std::string> ids = {"b", "a", "c"};
    EXPECT_EQ(top_k(Vector{1.0F, 0.1F}, ids, index, 10), (std::vector<std::string>{"a", "c", "b"}));
}

TEST(TopK, TiesBreakByAscendingId) {
    VectorIndex index;
    for (const auto* id : {"d", "b", "c", "a"}) {
        index.upsert(id, Vector{2.0F, 1.0F});
    }
    const std::vector<std::string> ids = {"d", "c", "b", "a"};
    EXPECT_EQ(top_k(Vector{1.0F, 1.0F}, ids, index, 3), (std::vector<std::string>{"a", "b", "c"}));
}

TEST(TopK, RandomFiftyMatchesFullSort) {
    std::mt19937_64 rng(50);
    for (int trial = 0; trial < 50; ++trial) {
        VectorIndex index;
        std::vector<std::string> ids;
        for (int i = 0; i < 50; ++i) {
            ids.push_back("e" + std::to_string(i));
            index.upsert(ids.back(), random_vector(rng, 8));
        }
        const auto q = random_vector(rng, 8);
        EXPECT_EQ(top_k(q, ids, index, 5), oracle_top_k(q, ids, index, 5));
    }
}

TEST(TopK, InvariantUnderPositiveQueryScaling) {
    std::mt19937_64 rng(9);
    VectorIndex index;
    std::vector<std::string> ids;
    for (int i = 0; i < 30; ++i) {
        ids.push_back("e" + std::to_string(i));
        index.upsert(ids.back(), random_vector(rng, 6));
    }
    const auto q = random_vector(rng, 6);
    std::vector<float> scaled(q.values().begin(), q.values().end());
    for (auto& x : scaled) {
        x *= 4.0F;
    }
    EXPECT_EQ(top_k(q, ids, index, 7), top_k(Vector(scaled), ids, index, 7));
}

TEST(TopK, UnknownCandidateNamesId) {
    VectorIndex index;
    index.upsert("a", Vector{1.0F});
    const std::vector<std::string> ids = {"a", "ghost"};
    try {
        top_k(Vector{1.0F}, ids, index, 1);
        FAIL() << "expected UnknownId";
    } catch (const UnknownId& e) {
        EXPECT_EQ(e.id(), "ghost");
    }
}

TEST(VectorIndex, DimensionIsFixedByFirstInsert) {
    VectorIndex index;
    index.upsert("a", Vector{1.0F, 2.0F});
    EXPECT_EQ(index.dim(), 2U);
    EXPECT_THROW(index.upsert("b", Vector{1.0F}), DimensionMismatch);
}

TEST(Embed, EmptyBatch) {
    HashingEmbedder e(8);
    EXPECT_TRUE(embed({}, e).empty());
}

TEST(Embed, ScriptedFixtureVectors) {
    ScriptedEmbedder e;
    e.add("cat", Vector{1.0F, 0.0F});
    e.add("dog", Vector{0.0F, 1.0F});
    const std::vector<std::string> texts = {"cat", "dog"};
    const auto out = embed(texts, e);
    ASSERT_EQ(out.size(), 2U);
    EXPECT_EQ(out[0], (Vector{1.0F, 0.0F}));
    EXPECT_EQ(out[1], (Vector{0.0F, 1.0F}));
}

TEST(Embed, ScriptedMissAndHashLookup) {
    ScriptedEmbedder e;
    e.add_hash(sha256_hex("by hash"), Vector{0.5F, 0.5F});
    EXPECT_EQ(embed_one("by hash", e), (Vector{0.5F, 0.5F}));
    EXPECT_THROW(embed_one("missing", e), FixtureMiss);
}

TEST(Embed, ScriptedFromFile) {
    TempDir dir;
    hypermem::testing::spit(dir / "e.jsonl", R"({"text":"cat","vector":[1,0]})"
                                             "\n"
                                             R"({"text":"dog","vector":[0,1]})"
                                             "\n");
    auto e = ScriptedEmbedder::from_file(dir / "e.jsonl");
    EXPECT_EQ(e.dimension(), 2U);
    EXPECT_EQ(embed_one("dog", e), (Vector{0.0F, 1.0F}));
}

TEST(Embed, IdenticalTextIsBitwiseIdentical) {
    HashingEmbedder e(64);
    const std::vector<std::string> texts = {"Xodar", "Issus", "Xodar"};
    const auto a = embed(texts, e);
    const auto b = embed(texts, e);
    EXPECT_EQ(a, b);
    EXPECT_EQ(a[0], a[2]);
    EXPECT_EQ(a[0].dim(), 64U);
}

TEST(Embed, HashingNeverReturnsZeroVector) {
    HashingEmbedder e(4);
    for (const auto* t : {"", "   ", "!!!", "a"}) {
        const auto v = embed_one(t, e);
        EXPECT_TRUE(std::any_of(v.values().begin(), v.values().end(), [](float x) { return x != 0.0F; })) << t;
    }
}

TEST(Embed, BatchesPreserveOrder) {
    HashingEmbedder e(16);
    std::vector<std::string> texts;
    for (int i = 0; i < 100; ++i) {
        texts.push_back("text " + std::to_string(i));
    }
    EmbedOptions opts;
    opts.batch_size = 7;
    const auto out = embed(texts, e, opts);
    ASSERT_EQ(out.size(), 100U);
    for (int i = 0; i < 100; ++i) {
        EXPECT_EQ(out[i], embed_one(texts[i], e));
    }
}

TEST(Embed, FailureAfterRetriesCarriesBatch) {
    FailingEmbedder e;
    EmbedOptions opts;
    opts.max_retries = 2;
    opts.initial_backoff = std::chrono::milliseconds(1);
    const std::vector<std::string> texts = {"a", "b"};
    try {
        embed(texts, e, opts);
        FAIL() << "expected RetrievalUnavailable";
    } catch (const RetrievalUnavailable& err) {
        EXPECT_EQ(err.failed_batch(), texts);
    }
    EXPECT_EQ(e.calls, 3);
}

TEST(CachingEmbedder, AvoidsRepeatCallsAndPersists) {
    TempDir dir;
    auto inner = std::make_shared<CountingEmbedder>();
    CachingEmbedder cache(inner);
    const std::vector<std::string> texts = {"a", "b", "a"};
    const auto first = embed(texts, cache);
    const auto second = embed(texts, cache);
    EXPECT_EQ(first, second);
    EXPECT_EQ(inner->seen, 2U);
    cache.save(dir.path());

    auto inner2 = std::make_shared<CountingEmbedder>();
    CachingEmbedder reloaded(inner2);
    reloaded.load(dir.path());
    EXPECT_EQ(embed(texts, reloaded), first);
    EXPECT_EQ(inner2->seen, 0U);
}
