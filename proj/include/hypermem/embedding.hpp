#pragma once

#include <chrono>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace hypermem {

/// Dense embedding with at least one component, all finite.
class Vector {
public:
    Vector() = default;
    /// Throws InvalidArgument if `values` is empty or holds a non-finite value.
    explicit Vector(std::vector<float> values);
    Vector(std::initializer_list<float> values) : Vector(std::vector<float>(values)) {}

    std::size_t dim() const noexcept { return values_.size(); }
    std::span<const float> values() const noexcept { return values_; }
    bool empty() const noexcept { return values_.empty(); }

    bool operator==(const Vector&) const = default;

private:
    std::vector<float> values_;
};

/// dot(a,b) / (|a| |b|), accumulated in double precision.
/// Throws DimensionMismatch when dims differ and InvalidArgument for a zero vector.
double cosine_similarity(const Vector& a, const Vector& b);

/// Exact (brute force) vector store keyed by item id.
class VectorIndex {
public:
    VectorIndex() = default;
    explicit VectorIndex(std::size_t dim) : dim_(dim) {}

    /// Inserts or replaces. The first insertion fixes the dimension.
    void upsert(const std::string& id, Vector v);
    bool contains(const std::string& id) const { return entries_.count(id) != 0; }
    const Vector& at(const std::string& id) const;
    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return entries_.size(); }
    const std::map<std::string, Vector>& entries() const noexcept { return entries_; }

private:
    std::size_t dim_ = 0;
    std::map<std::string, Vector> entries_;
};

struct ScoredId {
    std::string id;
    double score = 0.0;

    bool operator==(const ScoredId&) const = default;
};

/// Every distinct candidate scored against `query`, sorted by descending
/// score with ties broken by ascending id. Throws UnknownId for a candidate
/// missing from the index.
std::vector<ScoredId> rank_candidates(const Vector& query, std::span<const std::string> candidates,
                                      const VectorIndex& index);

/// The `k` best candidates under rank_candidates ordering (all of them when
/// fewer than k).
std::vector<std::string> top_k(const Vector& query, std::span<const std::string> candidates,
                               const VectorIndex& index, std::size_t k);

/// Source of embeddings. Implementations must be order preserving.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    /// Dimension of every vector this provider returns. May contact the provider.
    virtual std::size_t dimension() = 0;
    virtual std::vector<Vector> embed_batch(std::span<const std::string> texts) = 0;
    /// Stable description recorded in index manifests, e.g. "hashing:dim=256".
    virtual std::string describe() const = 0;
};

struct EmbedOptions {
    std::size_t batch_size = 64;
    int max_retries = 3;
    std::chrono::milliseconds initial_backoff{200};
};

/// Embeds `texts` in batches with bounded retries on ProviderError. A batch
/// that still fails raises RetrievalUnavailable carrying that batch.
std::vector<Vector> embed(std::span<const std::string> texts, EmbeddingProvider& provider,
                          const EmbedOptions& options = {});

Vector embed_one(const std::string& text, EmbeddingProvider& provider);

}  // namespace hypermem
