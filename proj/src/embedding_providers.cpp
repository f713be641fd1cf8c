#include <algorithm>
#include "hypermem/embedding_providers.hpp"

#include "hypermem/error.hpp"
#include "hypermem/records.hpp"
#include "hypermem/text.hpp"

#include <cmath>
#include <cstdint>

namespace hypermem {

namespace fs = std::filesystem;

namespace {

std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

Vector vector_from_json(const json& j, const std::string& where) {
    if (!j.is_array()) {
        throw FormatError(where + ": vector is not an array");
    }
    std::vector<float> values;
    values.reserve(j.size());
    for (const auto& x : j) {
        if (!x.is_number()) {
            throw FormatError(where + ": vector holds a non-number");
        }
        values.push_back(x.get<float>());
    }
    try {
        return Vector(std::move(values));
    } catch (const InvalidArgument& e) {
        throw FormatError(where + ": " + e.what());
    }
}

}  // namespace

HashingEmbedder::HashingEmbedder(std::size_t dim) : dim_(dim) {
    if (dim_ < 2) {
        throw InvalidArgument("hashing embedder needs dim >= 2");
    }
}

std::vector<Vector> HashingEmbedder::embed_batch(std::span<const std::string> texts) {
    std::vector<Vector> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
        std::vector<double> acc(dim_, 0.0);
        for (const auto& token : tokenize(to_lower_ascii(text))) {
            const auto h = fnv1a64(token);
            acc[h % dim_] += (h >> 63) != 0 ? -1.0 : 1.0;
        }
        double norm = 0.0;
        for (double v : acc) {
            norm += v * v;
        }
        std::vector<float> values(dim_, 0.0f);
        if (norm == 0.0) {
            values[0] = 1.0f;
        } else {
            norm = std::sqrt(norm);
            for (std::size_t i = 0; i < dim_; ++i) {
                values[i] = static_cast<float>(acc[i] / norm);
            }
        }
        out.emplace_back(std::move(values));
    }
    return out;
}

std::string HashingEmbedder::describe() const {
    return "hashing:dim=" + std::to_string(dim_);
}

ScriptedEmbedder ScriptedEmbedder::from_file(const fs::path& path) {
    ScriptedEmbedder e;
    e.source_ = path.filename().string();
    for (const auto& r : read_records(path)) {
        const auto v = vector_from_json(require_field(r, "vector"), path.string());
        if (r.contains("text")) {
            e.add(require_string(r, "text"), v);
        } else if (r.contains("sha256")) {
            e.add_hash(require_string(r, "sha256"), v);
        } else {
            throw FormatError(path.string() + ": record needs 'text' or 'sha256'");
        }
    }
    return e;
}

void ScriptedEmbedder::check_dim(const Vector& v) {
    if (dim_ == 0) {
        dim_ = v.dim();
    } else if (v.dim() != dim_) {
        throw DimensionMismatch("scripted embedding fixture mixes dimensions " + std::to_string(dim_) + " and " +
                                std::to_string(v.dim()));
    }
}

void ScriptedEmbedder::add(const std::string& text, Vector v) {
    check_dim(v);
    by_text_.insert_or_assign(text, std::move(v));
}

void ScriptedEmbedder::add_hash(const std::string& sha256, Vector v) {
    check_dim(v);
    by_hash_.insert_or_assign(sha256, std::move(v));
}

std::size_t ScriptedEmbedder::dimension() {
    if (dim_ == 0) {
        throw FixtureMiss("embedding", "scripted embedder holds no vectors");
    }
    return dim_;
}

std::vector<Vector> ScriptedEmbedder::embed_batch(std::span<const std::string> texts) {
    std::vector<Vector> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
        if (auto it = by_text_.find(text); it != by_text_.end()) {
            out.push_back(it->second);
            continue;
        }
        if (auto it = by_hash_.find(sha256_hex(text)); it != by_hash_.end()) {
            out.push_back(it->second);
            continue;
        }
        throw FixtureMiss("embedding", "no vector for text '" + text.substr(0, 60) + "'");
    }
    return out;
}

OpenAIEmbedder::OpenAIEmbedder(HttpEndpoint endpoint, std::string model, std::size_t dim)
    : endpoint_(std::move(endpoint)), model_(std::move(model)), dim_(dim) {}

std::size_t OpenAIEmbedder::dimension() {
    if (dim_ == 0) {
        const std::string probe[] = {"dimension probe"};
        dim_ = embed_batch(probe).front().dim();
    }
    return dim_;
}

std::vector<Vector> OpenAIEmbedder::embed_batch(std::span<const std::string> texts) {
    if (texts.empty()) {
        return {};
    }
    const json body = {{"model", model_}, {"input", json(std::vector<std::string>(texts.begin(), texts.end()))}};
    const auto res = post_json(endpoint_, "/embeddings", body.dump());
    if (res.status != 200) {
        throw ProviderError("embeddings endpoint returned HTTP " + std::to_string(res.status) + ": " +
                            res.body.substr(0, 200));
    }
    json parsed;
    try {
        parsed = json::parse(res.body);
    } catch (const json::parse_error& e) {
        throw ProviderError(std::string("embeddings response is not JSON: ") + e.what());
    }
    const auto& data = parsed.value("data", json::array());
    if (!data.is_array() || data.size() != texts.size()) {
        throw ProviderError("embeddings response has the wrong number of items");
    }
    std::vector<Vector> out(texts.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto index = data[i].value("index", i);
        if (index >= out.size()) {
            throw ProviderError("embeddings response index out of range");
        }
        try {
            out[index] = vector_from_json(data[i].at("embedding"), "embeddings response");
        } catch (const std::exception& e) {
            throw ProviderError(e.what());
        }
    }
    for (const auto& v : out) {
        if (v.empty()) {
            throw ProviderError("embeddings response skipped an input");
        }
        if (dim_ != 0 && v.dim() != dim_) {
            throw DimensionMismatch("provider returned dimension " + std::to_string(v.dim()) + ", expected " +
                                    std::to_string(dim_));
        }
    }
    return out;
}

CachingEmbedder::CachingEmbedder(std::shared_ptr<EmbeddingProvider> inner) : inner_(std::move(inner)) {
    if (!inner_) {
        throw InvalidArgument("caching embedder needs an inner provider");
    }
}

std::size_t CachingEmbedder::dimension() {
    {
        std::lock_guard lock(mutex_);
        if (!cache_.empty()) {
            return cache_.begin()->second.dim();
        }
    }
    return inner_->dimension();
}

std::vector<Vector> CachingEmbedder::embed_batch(std::span<const std::string> texts) {
    std::vector<Vector> out(texts.size());
    std::vector<std::string> keys(texts.size());
    std::vector<std::string> missing;
    std::vector<std::size_t> missing_pos;
    {
        std::lock_guard lock(mutex_);
        for (std::size_t i = 0; i < texts.size(); ++i) {
            keys[i] = sha256_hex(texts[i]);
            if (auto it = cache_.find(keys[i]); it != cache_.end()) {
                out[i] = it->second;
            } else if (std::find(missing.begin(), missing.end(), texts[i]) == missing.end()) {
                missing.push_back(texts[i]);
                missing_pos.push_back(i);
            }
        }
    }
    if (!missing.empty()) {
        auto fresh = inner_->embed_batch(missing);
        if (fresh.size() != missing.size()) {
            throw ProviderError("inner embedding provider returned the wrong number of vectors");
        }
        std::lock_guard lock(mutex_);
        misses_ += missing.size();
        for (std::size_t k = 0; k < fresh.size(); ++k) {
            cache_.insert_or_assign(keys[missing_pos[k]], fresh[k]);
            out[missing_pos[k]] = std::move(fresh[k]);
        }
        for (std::size_t i = 0; i < texts.size(); ++i) {
            if (out[i].dim() == 0) {
                out[i] = cache_.at(keys[i]);
            }
        }
    }
    return out;
}

std::size_t CachingEmbedder::cached() const {
    std::lock_guard lock(mutex_);
    return cache_.size();
}

void CachingEmbedder::save(const fs::path& dir) const {
    std::lock_guard lock(mutex_);
    std::vector<json> records;
    std::vector<std::vector<float>> rows;
    for (const auto& [key, v] : cache_) {
        records.push_back({{"sha256", key}, {"row", rows.size()}, {"dim", v.dim()}});
        rows.emplace_back(v.values().begin(), v.values().end());
    }
    write_records(dir / "embedding_cache.jsonl", records);
    write_float32_rows(dir / "embedding_cache.f32", rows);
}

void CachingEmbedder::load(const fs::path& dir) {
    if (!fs::exists(dir / "embedding_cache.jsonl")) {
        return;
    }
    const auto records = read_records(dir / "embedding_cache.jsonl");
    if (records.empty()) {
        return;
    }
    const auto dim = static_cast<std::size_t>(require_int(records.front(), "dim"));
    const auto rows = read_float32_rows(dir / "embedding_cache.f32", dim, records.size());
    std::lock_guard lock(mutex_);
    for (const auto& r : records) {
        const auto row = static_cast<std::size_t>(require_int(r, "row"));
        if (row >= rows.size() || static_cast<std::size_t>(require_int(r, "dim")) != dim) {
            throw FormatError("embedding cache record is inconsistent with its sidecar");
        }
        cache_.insert_or_assign(require_string(r, "sha256"), Vector(rows[row]));
    }
}

}  // namespace hypermem
