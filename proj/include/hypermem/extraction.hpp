#pragma once

#include "hypermem/corpus.hpp"
#include "hypermem/graph.hpp"
#include "hypermem/llm.hpp"
#include "hypermem/prompts.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace hypermem {

struct ExtractedEntity {
    std::string name;
    std::string type;
    std::string description;
};

struct ExtractedRelation {
    std::string source;
    std::string target;
    std::string description;
    std::string keywords;
};

/// Parsed tuple-delimited extraction reply.
struct ParsedExtraction {
    std::vector<ExtractedEntity> entities;
    std::vector<ExtractedRelation> relations;
    bool complete = false;            // saw the completion marker
    std::vector<std::string> errors;  // malformed records

    bool ok() const { return complete && errors.empty(); }
};

ParsedExtraction parse_extraction(std::string_view reply);

struct ExtractionParams {
    int max_retries = 2;
    /// Entities with more distinct description fragments than this get one
    /// summarizing LLM call.
    std::size_t summarize_threshold = 8;
    double temperature = kDefaultTemperature;
    int max_output_tokens = kDefaultMaxOutputTokens;
};

struct ExtractionReport {
    std::size_t chunks_total = 0;
    std::size_t chunks_succeeded = 0;
    std::vector<ChunkId> skipped_chunks;
    std::vector<std::string> warnings;
};

struct ExtractionResult {
    KnowledgeGraph graph;
    ExtractionReport report;
};

/// Runs the extraction prompt on every chunk (tag "extract", step = chunk
/// ordinal), unifies entities by normalized name, keeps per-record chunk
/// provenance and embeds all nodes and edges. A chunk whose reply stays
/// unparseable after `max_retries` retries is skipped and reported.
ExtractionResult extract_graph(const std::vector<Chunk>& chunks, ChatProvider& llm, EmbeddingProvider& embedder,
                               const PromptLibrary& prompts, const ExtractionParams& params = {},
                               ExchangeLog* log = nullptr);

}  // namespace hypermem
