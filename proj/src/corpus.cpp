#include "hypermem/corpus.hpp"

#include "hypermem/error.hpp"
#include "hypermem/records.hpp"

#include <algorithm>

namespace hypermem {

namespace fs = std::filesystem;

ChunkId make_chunk_id(const std::string& doc_id, std::size_t token_start, std::size_t token_end) {
    return stable_id("c-", doc_id + '\x1f' + std::to_string(token_start) + '\x1f' + std::to_string(token_end));
}

std::vector<Chunk> chunk_document(const std::string& doc_id, const std::string& text,
                                  const ChunkingParams& params, const TokenizerSpec& tokenizer) {
    if (params.chunk_size == 0) {
        throw InvalidArgument("chunk_size must be positive");
    }
    if (params.overlap >= params.chunk_size) {
        throw InvalidArgument("overlap (" + std::to_string(params.overlap) + ") must be smaller than chunk_size (" +
                              std::to_string(params.chunk_size) + ")");
    }
    const auto spans = tokenize_spans(text, tokenizer);
    const std::size_t stride = params.chunk_size - params.overlap;
    std::vector<Chunk> chunks;
    for (std::size_t start = 0; start < spans.size(); start += stride) {
        const std::size_t end = std::min(start + params.chunk_size, spans.size());
        Chunk c;
        c.doc_id = doc_id;
        c.token_start = start;
        c.token_end = end;
        c.id = make_chunk_id(doc_id, start, end);
        c.text = text.substr(spans[start].begin, spans[end - 1].end - spans[start].begin);
        chunks.push_back(std::move(c));
        if (end == spans.size()) {
            break;
        }
    }
    return chunks;
}

std::vector<Document> load_documents(const fs::path& dir) {
    if (!fs::is_directory(dir)) {
        throw InvalidArgument("corpus path '" + dir.string() + "' is not a directory");
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".txt") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    std::vector<Document> docs;
    for (const auto& f : files) {
        docs.push_back({f.stem().string(), nfc_normalize(read_text_file(f))});
    }
    return docs;
}

void ChunkStore::add(Chunk chunk) {
    auto it = by_id_.find(chunk.id);
    if (it != by_id_.end()) {
        chunks_[it->second] = std::move(chunk);
        return;
    }
    by_id_.emplace(chunk.id, chunks_.size());
    chunks_.push_back(std::move(chunk));
}

const Chunk& ChunkStore::at(const ChunkId& id) const {
    auto it = by_id_.find(id);
    if (it == by_id_.end()) {
        throw UnknownId("chunk", id);
    }
    return chunks_[it->second];
}

void ChunkStore::save(const fs::path& dir) const {
    std::vector<json> records;
    std::vector<std::vector<float>> rows;
    const bool embedded = !chunks_.empty() &&
        std::all_of(chunks_.begin(), chunks_.end(), [](const Chunk& c) { return c.embedding.has_value(); });
    for (const auto& c : chunks_) {
        json r = {{"id", c.id}, {"doc_id", c.doc_id}, {"token_start", c.token_start},
                  {"token_end", c.token_end}, {"text", c.text}};
        if (embedded) {
            r["embedding_row"] = rows.size();
            rows.emplace_back(c.embedding->values().begin(), c.embedding->values().end());
        }
        records.push_back(std::move(r));
    }
    write_records(dir / "chunks.jsonl", records);
    if (embedded) {
        write_float32_rows(dir / "chunk_embeddings.f32", rows);
        write_records(dir / "chunk_embeddings.meta.jsonl", {json{{"dim", rows.front().size()}, {"rows", rows.size()}}});
    } else {
        fs::remove(dir / "chunk_embeddings.f32");
        fs::remove(dir / "chunk_embeddings.meta.jsonl");
    }
}

ChunkStore ChunkStore::load(const fs::path& dir) {
    const auto records = read_records(dir / "chunks.jsonl");
    std::vector<std::vector<float>> rows;
    if (fs::exists(dir / "chunk_embeddings.meta.jsonl")) {
        const auto meta = read_records(dir / "chunk_embeddings.meta.jsonl");
        if (meta.size() != 1) {
            throw FormatError("chunk embedding metadata must hold exactly one record");
        }
        rows = read_float32_rows(dir / "chunk_embeddings.f32", static_cast<std::size_t>(require_int(meta[0], "dim")),
                                 static_cast<std::size_t>(require_int(meta[0], "rows")));
    }
    ChunkStore store;
    for (const auto& r : records) {
        Chunk c;
        c.id = require_string(r, "id");
        c.doc_id = require_string(r, "doc_id");
        c.text = require_string(r, "text");
        c.token_start = static_cast<std::size_t>(require_int(r, "token_start"));
        c.token_end = static_cast<std::size_t>(require_int(r, "token_end"));
        if (c.token_end <= c.token_start) {
            throw FormatError("chunk '" + c.id + "' has an empty token range");
        }
        if (c.id != make_chunk_id(c.doc_id, c.token_start, c.token_end)) {
            throw FormatError("chunk '" + c.id + "' id does not match its (doc_id, offsets)");
        }
        if (r.contains("embedding_row")) {
            const auto row = static_cast<std::size_t>(require_int(r, "embedding_row"));
            if (row >= rows.size()) {
                throw FormatError("chunk '" + c.id + "' references missing embedding row");
            }
            c.embedding = Vector(rows[row]);
        }
        store.add(std::move(c));
    }
    return store;
}

}  // namespace hypermem
