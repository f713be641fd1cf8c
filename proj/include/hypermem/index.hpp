#pragma once

#include "hypermem/corpus.hpp"
#include "hypermem/extraction.hpp"
#include "hypermem/graph.hpp"
#include "hypermem/retrieval.hpp"

#include <filesystem>
#include <string>

namespace hypermem {

/// Frozen query-time view of an index: graph, chunks and vector indexes.
struct KnowledgeBase {
    KnowledgeGraph graph;
    ChunkStore chunks;
    GraphIndexes indexes;
};

/// Embeds every chunk of `chunks` that lacks an embedding.
void embed_chunks(ChunkStore& chunks, EmbeddingProvider& embedder);

/// Assembles a knowledge base from an already extracted graph.
KnowledgeBase make_knowledge_base(KnowledgeGraph graph, ChunkStore chunks);

struct IndexParams {
    ChunkingParams chunking;
    TokenizerSpec tokenizer;
    ExtractionParams extraction;
};

struct IndexBuildResult {
    bool up_to_date = false;  // nothing was written
    std::string content_hash;
    std::size_t documents = 0;
    std::size_t chunks = 0;
    std::size_t nodes = 0;
    std::size_t edges = 0;
    ExtractionReport report;
};

inline constexpr int kIndexSchemaVersion = 1;

/// Offline stage: load `*.txt` documents, chunk, embed chunks, extract and
/// embed the graph, and persist everything under `index_dir` with a
/// manifest. When the manifest already records the same content hash
/// (documents, parameters, provider descriptions) nothing is written.
///
/// Throws InvalidArgument for a corpus without documents and Error when no
/// chunk could be extracted.
IndexBuildResult build_index(const std::filesystem::path& corpus_dir, const std::filesystem::path& index_dir,
                             const IndexParams& params, ChatProvider& llm, EmbeddingProvider& embedder,
                             const PromptLibrary& prompts);

/// Throws ConfigError when no complete index exists at `index_dir`.
KnowledgeBase load_index(const std::filesystem::path& index_dir);

json read_index_manifest(const std::filesystem::path& index_dir);

}  // namespace hypermem
