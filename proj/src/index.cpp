#include "hypermem/index.hpp"

#include "hypermem/embedding_providers.hpp"
#include "hypermem/error.hpp"
#include "hypermem/text.hpp"

#include <spdlog/spdlog.h>

namespace hypermem {

namespace fs = std::filesystem;

void embed_chunks(ChunkStore& chunks, EmbeddingProvider& embedder) {
    std::vector<std::string> texts;
    for (const auto& c : chunks.chunks()) {
        if (!c.embedding) {
            texts.push_back(c.text);
        }
    }
    auto vectors = embed(texts, embedder);
    ChunkStore out;
    std::size_t k = 0;
    for (auto c : chunks.chunks()) {
        if (!c.embedding) {
            c.embedding = std::move(vectors[k++]);
        }
        out.add(std::move(c));
    }
    chunks = std::move(out);
}

KnowledgeBase make_knowledge_base(KnowledgeGraph graph, ChunkStore chunks) {
    KnowledgeBase kb{std::move(graph), std::move(chunks), {}};
    kb.indexes = build_indexes(kb.graph, kb.chunks);
    return kb;
}

json read_index_manifest(const fs::path& index_dir) {
    const auto path = index_dir / "manifest.json";
    if (!fs::exists(path)) {
        throw ConfigError("no index found at '" + index_dir.string() + "'; run the index command first");
    }
    const auto records = read_records(path);
    if (records.size() != 1 || records[0].value("kind", "") != "index") {
        throw FormatError("'" + path.string() + "' is not an index manifest");
    }
    if (require_int(records[0], "schema_version") != kIndexSchemaVersion) {
        throw FormatError("index at '" + index_dir.string() + "' has an unsupported schema version");
    }
    return records[0];
}

namespace {

std::string content_hash(const std::vector<Document>& docs, const IndexParams& params, const std::string& llm,
                         const std::string& embedder) {
    json key = {{"tokenizer", params.tokenizer.name},
                {"chunk_size", params.chunking.chunk_size},
                {"overlap", params.chunking.overlap},
                {"summarize_threshold", params.extraction.summarize_threshold},
                {"extraction_retries", params.extraction.max_retries},
                {"llm", llm},
                {"embedder", embedder}};
    json documents = json::array();
    for (const auto& d : docs) {
        documents.push_back({d.doc_id, sha256_hex(d.text)});
    }
    key["documents"] = documents;
    return sha256_hex(to_record_line(key));
}

}  // namespace

IndexBuildResult build_index(const fs::path& corpus_dir, const fs::path& index_dir, const IndexParams& params,
                             ChatProvider& llm, EmbeddingProvider& embedder, const PromptLibrary& prompts) {
    require_supported(params.tokenizer);
    const auto docs = load_documents(corpus_dir);
    if (docs.empty()) {
        throw InvalidArgument("no documents (*.txt) found in '" + corpus_dir.string() + "'");
    }
    IndexBuildResult result;
    result.documents = docs.size();
    result.content_hash = content_hash(docs, params, llm.describe(), embedder.describe());

    if (fs::exists(index_dir / "manifest.json")) {
        try {
            const auto manifest = read_index_manifest(index_dir);
            if (manifest.value("content_hash", "") == result.content_hash) {
                result.up_to_date = true;
                const auto& counts = manifest.at("counts");
                result.chunks = counts.at("chunks").get<std::size_t>();
                result.nodes = counts.at("nodes").get<std::size_t>();
                result.edges = counts.at("edges").get<std::size_t>();
                result.report.chunks_total = result.chunks;
                result.report.chunks_succeeded = counts.at("chunks_extracted").get<std::size_t>();
                return result;
            }
        } catch (const FormatError& e) {
            spdlog::warn("rebuilding index: {}", e.what());
        }
    }

    ChunkStore store;
    for (const auto& d : docs) {
        for (auto& c : chunk_document(d.doc_id, d.text, params.chunking, params.tokenizer)) {
            store.add(std::move(c));
        }
    }
    auto cache = std::make_shared<CachingEmbedder>(std::shared_ptr<EmbeddingProvider>(&embedder, [](auto*) {}));
    cache->load(index_dir / "cache");
    embed_chunks(store, *cache);

    ExchangeLog log;
    auto extraction = extract_graph(store.chunks(), llm, *cache, prompts, params.extraction, &log);
    result.report = extraction.report;
    if (extraction.report.chunks_succeeded == 0) {
        throw Error("extraction failed for every chunk (" + std::to_string(store.size()) + " chunks)");
    }
    const auto& g = extraction.graph;
    if (auto problems = g.integrity_violations(&store); !problems.empty()) {
        throw Error("extracted graph is inconsistent: " + problems.front());
    }
    result.chunks = store.size();
    result.nodes = g.node_count();
    result.edges = g.edge_count();

    fs::create_directories(index_dir);
    // The manifest is removed first and written last, so an interrupted
    // build never looks complete.
    fs::remove(index_dir / "manifest.json");
    store.save(index_dir / "chunks");
    save_graph(g, index_dir / "graph");
    cache->save(index_dir / "cache");
    std::vector<json> exchanges;
    for (const auto& e : log.exchanges()) {
        exchanges.push_back(to_json(e));
    }
    write_records(index_dir / "extraction_exchanges.jsonl", exchanges);
    std::vector<json> warnings;
    for (const auto& w : extraction.report.warnings) {
        warnings.push_back({{"warning", w}});
    }
    write_records(index_dir / "extraction_warnings.jsonl", warnings);

    json manifest = {{"kind", "index"},
                     {"schema_version", kIndexSchemaVersion},
                     {"content_hash", result.content_hash},
                     {"tokenizer", params.tokenizer.name},
                     {"chunking", {{"chunk_size", params.chunking.chunk_size}, {"overlap", params.chunking.overlap}}},
                     {"embedder", embedder.describe()},
                     {"embedding_dim", cache->dimension()},
                     {"llm", llm.describe()},
                     {"counts",
                      {{"documents", result.documents},
                       {"chunks", result.chunks},
                       {"chunks_extracted", extraction.report.chunks_succeeded},
                       {"nodes", result.nodes},
                       {"edges", result.edges}}},
                     {"skipped_chunks", extraction.report.skipped_chunks}};
    write_records(index_dir / "manifest.json", {manifest});
    return result;
}

KnowledgeBase load_index(const fs::path& index_dir) {
    const auto manifest = read_index_manifest(index_dir);
    require_supported(TokenizerSpec{require_string(manifest, "tokenizer")});
    auto chunks = ChunkStore::load(index_dir / "chunks");
    auto graph = load_graph(index_dir / "graph");
    if (auto problems = graph.integrity_violations(&chunks); !problems.empty()) {
        throw FormatError("index at '" + index_dir.string() + "' is inconsistent: " + problems.front());
    }
    return make_knowledge_base(std::move(graph), std::move(chunks));
}

}  // namespace hypermem
