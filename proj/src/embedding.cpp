#include "hypermem/embedding.hpp"

#include "hypermem/error.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <thread>

namespace hypermem {

Vector::Vector(std::vector<float> values) : values_(std::move(values)) {
    if (values_.empty()) {
        throw InvalidArgument("vector must have at least one component");
    }
    for (float v : values_) {
        if (!std::isfinite(v)) {
            throw InvalidArgument("vector component is not finite");
        }
    }
}

double cosine_similarity(const Vector& a, const Vector& b) {
    if (a.dim() != b.dim()) {
        throw DimensionMismatch("cosine_similarity: dimension " + std::to_string(a.dim()) + " vs " +
                                std::to_string(b.dim()));
    }
    double dot = 0.0;
    double na = 0.0;
    double nb = 0.0;
    const auto av = a.values();
    const auto bv = b.values();
    for (std::size_t i = 0; i < av.size(); ++i) {
        const double x = av[i];
        const double y = bv[i];
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if (na == 0.0 || nb == 0.0) {
        throw InvalidArgument("cosine_similarity is undefined for a zero vector");
    }
    const double s = dot / (std::sqrt(na) * std::sqrt(nb));
    return std::clamp(s, -1.0, 1.0);
}

void VectorIndex::upsert(const std::string& id, Vector v) {
    if (v.empty()) {
        throw InvalidArgument("cannot index an empty vector for '" + id + "'");
    }
    if (dim_ == 0) {
        dim_ = v.dim();
    } else if (v.dim() != dim_) {
        throw DimensionMismatch("index holds dimension " + std::to_string(dim_) + ", got " +
                                std::to_string(v.dim()) + " for '" + id + "'");
    }
    entries_.insert_or_assign(id, std::move(v));
}

const Vector& VectorIndex::at(const std::string& id) const {
    auto it = entries_.find(id);
    if (it == entries_.end()) {
        throw UnknownId("vector index", id);
    }
    return it->second;
}

std::vector<ScoredId> rank_candidates(const Vector& query, std::span<const std::string> candidates,
                                      const VectorIndex& index) {
    std::set<std::string> distinct(candidates.begin(), candidates.end());
    std::vector<ScoredId> scored;
    scored.reserve(distinct.size());
    for (const auto& id : distinct) {
        scored.push_back({id, cosine_similarity(query, index.at(id))});
    }
    std::sort(scored.begin(), scored.end(), [](const ScoredId& a, const ScoredId& b) {
        if (a.score != b.score) {
            return a.score > b.score;
        }
        return a.id < b.id;
    });
    return scored;
}

std::vector<std::string> top_k(const Vector& query, std::span<const std::string> candidates,
                               const VectorIndex& index, std::size_t k) {
    auto scored = rank_candidates(query, candidates, index);
    if (scored.size() > k) {
        scored.resize(k);
    }
    std::vector<std::string> ids;
    ids.reserve(scored.size());
    for (auto& s : scored) {
        ids.push_back(std::move(s.id));
    }
    return ids;
}

std::vector<Vector> embed(std::span<const std::string> texts, EmbeddingProvider& provider,
                          const EmbedOptions& options) {
    std::vector<Vector> out;
    out.reserve(texts.size());
    const std::size_t batch = std::max<std::size_t>(1, options.batch_size);
    for (std::size_t begin = 0; begin < texts.size(); begin += batch) {
        const auto slice = texts.subspan(begin, std::min(batch, texts.size() - begin));
        auto backoff = options.initial_backoff;
        for (int attempt = 0;; ++attempt) {
            try {
                auto vectors = provider.embed_batch(slice);
                if (vectors.size() != slice.size()) {
                    throw ProviderError("embedding provider returned " + std::to_string(vectors.size()) +
                                        " vectors for " + std::to_string(slice.size()) + " inputs");
                }
                for (auto& v : vectors) {
                    out.push_back(std::move(v));
                }
                break;
            } catch (const FixtureMiss&) {
                throw;
            } catch (const ProviderError& e) {
                if (attempt >= options.max_retries) {
                    throw RetrievalUnavailable(std::string("embedding failed after retries: ") + e.what(),
                                               std::vector<std::string>(slice.begin(), slice.end()));
                }
                spdlog::warn("embedding batch failed (attempt {}): {}", attempt + 1, e.what());
                std::this_thread::sleep_for(backoff);
                backoff *= 2;
            }
        }
    }
    return out;
}

Vector embed_one(const std::string& text, EmbeddingProvider& provider) {
    const std::string texts[] = {text};
    return std::move(embed(texts, provider).front());
}

}  // namespace hypermem
