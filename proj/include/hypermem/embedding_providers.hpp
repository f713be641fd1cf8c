#pragma once

#include "hypermem/embedding.hpp"
#include "hypermem/http.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

namespace hypermem {

/// Deterministic local embedder: signed feature hashing of lowercased word
/// tokens into `dim` buckets, L2 normalized. Never returns a zero vector.
class HashingEmbedder : public EmbeddingProvider {
public:
    explicit HashingEmbedder(std::size_t dim = 256);
    std::size_t dimension() override { return dim_; }
    std::vector<Vector> embed_batch(std::span<const std::string> texts) override;
    std::string describe() const override;

private:
    std::size_t dim_;
};

/// Replays vectors from a fixture: records {"text": ..., "vector": [...]} or
/// {"sha256": ..., "vector": [...]}. Exact text matches win over hash matches;
/// a miss raises FixtureMiss.
class ScriptedEmbedder : public EmbeddingProvider {
public:
    ScriptedEmbedder() = default;
    static ScriptedEmbedder from_file(const std::filesystem::path& path);

    void add(const std::string& text, Vector v);
    void add_hash(const std::string& sha256, Vector v);

    std::size_t dimension() override;
    std::vector<Vector> embed_batch(std::span<const std::string> texts) override;
    std::string describe() const override { return "scripted:" + source_; }

private:
    void check_dim(const Vector& v);

    std::string source_ = "inline";
    std::size_t dim_ = 0;
    std::map<std::string, Vector> by_text_;
    std::map<std::string, Vector> by_hash_;
};

/// OpenAI-compatible `/embeddings` client.
class OpenAIEmbedder : public EmbeddingProvider {
public:
    /// `dim` of 0 means unknown: the first call to dimension() probes the endpoint.
    OpenAIEmbedder(HttpEndpoint endpoint, std::string model, std::size_t dim = 0);
    std::size_t dimension() override;
    std::vector<Vector> embed_batch(std::span<const std::string> texts) override;
    std::string describe() const override { return "openai:" + model_; }

private:
    HttpEndpoint endpoint_;
    std::string model_;
    std::size_t dim_;
};

/// Content-hash keyed cache in front of another provider. Thread safe.
class CachingEmbedder : public EmbeddingProvider {
public:
    explicit CachingEmbedder(std::shared_ptr<EmbeddingProvider> inner);

    std::size_t dimension() override;
    std::vector<Vector> embed_batch(std::span<const std::string> texts) override;
    std::string describe() const override { return inner_->describe(); }

    std::size_t cached() const;
    std::size_t misses() const { return misses_; }

    /// Persists as `embedding_cache.jsonl` + `embedding_cache.f32` under `dir`.
    void save(const std::filesystem::path& dir) const;
    /// Loads a cache written by save(); a missing cache is not an error.
    void load(const std::filesystem::path& dir);

private:
    std::shared_ptr<EmbeddingProvider> inner_;
    mutable std::mutex mutex_;
    std::map<std::string, Vector> cache_;  // sha256(text) -> vector
    std::size_t misses_ = 0;
};

}  // namespace hypermem
