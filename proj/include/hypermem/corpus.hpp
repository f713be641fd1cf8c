#pragma once

#include "hypermem/embedding.hpp"
#include "hypermem/text.hpp"

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace hypermem {

using ChunkId = std::string;

/// A contiguous token window of one document. The provenance unit for every
/// graph node, graph edge and memory vertex.
struct Chunk {
    ChunkId id;
    std::string doc_id;
    std::string text;
    std::size_t token_start = 0;
    std::size_t token_end = 0;  // exclusive
    std::optional<Vector> embedding;

    bool operator==(const Chunk&) const = default;
};

struct ChunkingParams {
    std::size_t chunk_size = 200;
    std::size_t overlap = 50;

    bool operator==(const ChunkingParams&) const = default;
};

/// Pure function of (doc_id, token_start, token_end).
ChunkId make_chunk_id(const std::string& doc_id, std::size_t token_start, std::size_t token_end);

/// Windows start every chunk_size - overlap tokens and are clamped to the
/// document end; a window starting at or past the end is not emitted.
/// Chunk text is the source slice from the first token's first byte to the
/// last token's last byte. Throws InvalidArgument when overlap >= chunk_size.
std::vector<Chunk> chunk_document(const std::string& doc_id, const std::string& text,
                                  const ChunkingParams& params, const TokenizerSpec& tokenizer = {});

/// A plain-text source document.
struct Document {
    std::string doc_id;
    std::string text;  // NFC normalized
};

/// Loads every regular `*.txt` file directly under `dir`, sorted by file name.
/// doc_id is the file stem. Text is NFC normalized.
std::vector<Document> load_documents(const std::filesystem::path& dir);

/// Chunks by id, preserving ingestion order for deterministic iteration.
class ChunkStore {
public:
    void add(Chunk chunk);
    bool contains(const ChunkId& id) const { return by_id_.count(id) != 0; }
    const Chunk& at(const ChunkId& id) const;
    const std::vector<Chunk>& chunks() const { return chunks_; }
    std::size_t size() const { return chunks_.size(); }
    bool empty() const { return chunks_.empty(); }

    /// Writes `chunks.jsonl` (id, doc_id, token_start, token_end, text) and,
    /// when every chunk carries an embedding, `chunk_embeddings.f32`.
    void save(const std::filesystem::path& dir) const;
    static ChunkStore load(const std::filesystem::path& dir);

    bool operator==(const ChunkStore& other) const { return chunks_ == other.chunks_; }

private:
    std::vector<Chunk> chunks_;
    std::map<ChunkId, std::size_t> by_id_;
};

}  // namespace hypermem
