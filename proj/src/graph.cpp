#include "hypermem/graph.hpp"

#include "hypermem/error.hpp"
#include "hypermem/records.hpp"
#include "hypermem/text.hpp"

#include <sstream>

namespace hypermem {

namespace fs = std::filesystem;

EntityId normalize_entity_name(std::string_view name) {
    return case_fold(trim(nfc_normalize(name)));
}

EdgeId make_edge_id(const EntityId& source, const EntityId& target, const std::string& description) {
    return stable_id("r-", source + '\x1f' + target + '\x1f' + description);
}

std::string entity_embedding_text(const EntityNode& node) {
    return node.description.empty() ? node.name : node.name + "\n" + node.description;
}

std::string relation_embedding_text(const RelationEdge& edge, const std::string& source_name,
                                    const std::string& target_name) {
    return source_name + "\t" + target_name + "\n" + edge.description;
}

const EntityNode& KnowledgeGraph::node(const EntityId& id) const {
    auto it = nodes_.find(id);
    if (it == nodes_.end()) {
        throw UnknownId("graph node", id);
    }
    return it->second;
}

const RelationEdge& KnowledgeGraph::edge(const EdgeId& id) const {
    auto it = edges_.find(id);
    if (it == edges_.end()) {
        throw UnknownId("graph edge", id);
    }
    return it->second;
}

void KnowledgeGraph::put_node(EntityNode node) {
    if (node.id.empty()) {
        throw InvalidArgument("entity id must not be empty");
    }
    adjacency_.try_emplace(node.id);
    nodes_.insert_or_assign(node.id, std::move(node));
}

void KnowledgeGraph::put_edge(RelationEdge edge) {
    if (edge.source == edge.target) {
        throw InvalidArgument("relation '" + edge.id + "' is a self loop on '" + edge.source + "'");
    }
    if (!has_node(edge.source)) {
        throw UnknownId("relation source", edge.source);
    }
    if (!has_node(edge.target)) {
        throw UnknownId("relation target", edge.target);
    }
    if (auto it = edges_.find(edge.id); it != edges_.end()) {
        it->second.chunk_ids.insert(edge.chunk_ids.begin(), edge.chunk_ids.end());
        if (edge.embedding) {
            it->second.embedding = std::move(edge.embedding);
        }
        return;
    }
    adjacency_[edge.source].insert(edge.id);
    adjacency_[edge.target].insert(edge.id);
    edges_.emplace(edge.id, std::move(edge));
}

void KnowledgeGraph::set_node_embedding(const EntityId& id, Vector v) {
    auto it = nodes_.find(id);
    if (it == nodes_.end()) {
        throw UnknownId("graph node", id);
    }
    it->second.embedding = std::move(v);
}

void KnowledgeGraph::set_edge_embedding(const EdgeId& id, Vector v) {
    auto it = edges_.find(id);
    if (it == edges_.end()) {
        throw UnknownId("graph edge", id);
    }
    it->second.embedding = std::move(v);
}

const std::set<EdgeId>& KnowledgeGraph::incident_edges(const EntityId& id) const {
    auto it = adjacency_.find(id);
    if (it == adjacency_.end()) {
        throw UnknownId("graph node", id);
    }
    return it->second;
}

std::vector<std::string> KnowledgeGraph::integrity_violations(const ChunkStore* chunks) const {
    std::vector<std::string> out;
    for (const auto& [id, e] : edges_) {
        if (!has_node(e.source) || !has_node(e.target)) {
            out.push_back("edge " + id + " has a dangling endpoint");
        }
        if (e.source == e.target) {
            out.push_back("edge " + id + " is a self loop");
        }
        for (const auto* end : {&e.source, &e.target}) {
            auto adj = adjacency_.find(*end);
            if (adj == adjacency_.end() || adj->second.count(id) == 0) {
                out.push_back("edge " + id + " missing from adjacency of " + *end);
            }
        }
        if (chunks != nullptr) {
            for (const auto& c : e.chunk_ids) {
                if (!chunks->contains(c)) {
                    out.push_back("edge " + id + " references unknown chunk " + c);
                }
            }
        }
    }
    for (const auto& [id, edge_ids] : adjacency_) {
        if (!has_node(id)) {
            out.push_back("adjacency entry for unknown node " + id);
        }
        for (const auto& eid : edge_ids) {
            auto it = edges_.find(eid);
            if (it == edges_.end() || (it->second.source != id && it->second.target != id)) {
                out.push_back("adjacency of " + id + " lists non-incident edge " + eid);
            }
        }
    }
    for (const auto& [id, n] : nodes_) {
        if (n.id != id) {
            out.push_back("node keyed " + id + " carries id " + n.id);
        }
        if (chunks != nullptr) {
            for (const auto& c : n.chunk_ids) {
                if (!chunks->contains(c)) {
                    out.push_back("node " + id + " references unknown chunk " + c);
                }
            }
        }
    }
    return out;
}

std::set<EntityId> neighbors(const KnowledgeGraph& g, const EntityId& v) {
    std::set<EntityId> out;
    for (const auto& eid : g.incident_edges(v)) {
        const auto& e = g.edge(eid);
        out.insert(e.source == v ? e.target : e.source);
    }
    out.erase(v);
    return out;
}

namespace {

bool has_fragment(const std::string& description, const std::string& fragment) {
    std::istringstream in(description);
    std::string line;
    while (std::getline(in, line)) {
        if (line == fragment) {
            return true;
        }
    }
    return false;
}

}  // namespace

EntityId upsert_node(KnowledgeGraph& g, const std::string& name, const std::string& description,
                     const std::set<ChunkId>& chunk_ids, const std::vector<RelationSpec>& relations,
                     EmbeddingProvider* embedder) {
    const EntityId id = normalize_entity_name(name);
    if (id.empty()) {
        throw InvalidArgument("entity name must not be empty");
    }
    std::set<EntityId> touched_nodes = {id};
    std::vector<EdgeId> new_edges;

    EntityNode node;
    if (g.has_node(id)) {
        node = g.node(id);
    } else {
        node.id = id;
        node.name = trim(nfc_normalize(name));
    }
    const std::string fragment = trim(description);
    if (!fragment.empty() && !has_fragment(node.description, fragment)) {
        node.description = node.description.empty() ? fragment : node.description + "\n" + fragment;
    }
    node.chunk_ids.insert(chunk_ids.begin(), chunk_ids.end());
    g.put_node(std::move(node));

    for (const auto& rel : relations) {
        const EntityId other = normalize_entity_name(rel.other_name);
        if (other.empty() || other == id) {
            continue;
        }
        if (!g.has_node(other)) {
            EntityNode endpoint;
            endpoint.id = other;
            endpoint.name = trim(nfc_normalize(rel.other_name));
            g.put_node(std::move(endpoint));
            touched_nodes.insert(other);
        }
        RelationEdge e;
        e.source = id;
        e.target = other;
        e.description = trim(rel.description);
        e.chunk_ids = rel.chunk_ids;
        e.id = make_edge_id(e.source, e.target, e.description);
        if (!g.has_edge(e.id)) {
            new_edges.push_back(e.id);
        }
        g.put_edge(std::move(e));
    }

    if (embedder != nullptr) {
        std::vector<std::string> texts;
        for (const auto& nid : touched_nodes) {
            texts.push_back(entity_embedding_text(g.node(nid)));
        }
        for (const auto& eid : new_edges) {
            const auto& e = g.edge(eid);
            texts.push_back(relation_embedding_text(e, g.node(e.source).name, g.node(e.target).name));
        }
        auto vectors = embed(texts, *embedder);
        std::size_t k = 0;
        for (const auto& nid : touched_nodes) {
            g.set_node_embedding(nid, std::move(vectors[k++]));
        }
        for (const auto& eid : new_edges) {
            g.set_edge_embedding(eid, std::move(vectors[k++]));
        }
    }
    return id;
}

namespace {

json string_set(const std::set<std::string>& s) {
    return json(std::vector<std::string>(s.begin(), s.end()));
}

std::set<std::string> read_string_set(const json& record, const char* key) {
    const auto& arr = require_field(record, key);
    if (!arr.is_array()) {
        throw FormatError(std::string("field '") + key + "' is not an array");
    }
    std::set<std::string> out;
    for (const auto& x : arr) {
        if (!x.is_string()) {
            throw FormatError(std::string("field '") + key + "' holds a non-string");
        }
        out.insert(x.get<std::string>());
    }
    return out;
}

}  // namespace

void save_graph(const KnowledgeGraph& g, const fs::path& dir) {
    std::vector<std::vector<float>> rows;
    std::size_t dim = 0;
    auto add_row = [&](const std::optional<Vector>& v) -> json {
        if (!v) {
            return nullptr;
        }
        if (dim == 0) {
            dim = v->dim();
        } else if (v->dim() != dim) {
            throw DimensionMismatch("graph embeddings mix dimensions");
        }
        rows.emplace_back(v->values().begin(), v->values().end());
        return rows.size() - 1;
    };
    std::vector<json> nodes;
    for (const auto& [id, n] : g.nodes()) {
        nodes.push_back({{"id", n.id}, {"name", n.name}, {"description", n.description},
                         {"chunk_ids", string_set(n.chunk_ids)}, {"embedding_row", add_row(n.embedding)}});
    }
    std::vector<json> edges;
    for (const auto& [id, e] : g.edges()) {
        edges.push_back({{"id", e.id}, {"source", e.source}, {"target", e.target}, {"description", e.description},
                         {"chunk_ids", string_set(e.chunk_ids)}, {"embedding_row", add_row(e.embedding)}});
    }
    fs::create_directories(dir);
    write_records(dir / "nodes.jsonl", nodes);
    write_records(dir / "edges.jsonl", edges);
    write_float32_rows(dir / "embeddings.f32", rows);
    const json manifest = {{"kind", "knowledge-graph"},
                           {"schema_version", kGraphSchemaVersion},
                           {"node_count", nodes.size()},
                           {"edge_count", edges.size()},
                           {"embedding_dim", dim},
                           {"embedding_rows", rows.size()}};
    write_text_file(dir / "manifest.json", to_record_line(manifest) + "\n");
}

KnowledgeGraph load_graph(const fs::path& dir) {
    json manifest;
    try {
        manifest = json::parse(read_text_file(dir / "manifest.json"));
    } catch (const json::parse_error& e) {
        throw FormatError("graph manifest is corrupt: " + std::string(e.what()));
    }
    if (!manifest.is_object() || manifest.value("kind", "") != "knowledge-graph") {
        throw FormatError("'" + dir.string() + "' does not hold a knowledge graph");
    }
    const auto version = require_int(manifest, "schema_version");
    if (version != kGraphSchemaVersion) {
        throw FormatError("graph schema version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kGraphSchemaVersion) + ")");
    }
    const auto node_records = read_records(dir / "nodes.jsonl");
    const auto edge_records = read_records(dir / "edges.jsonl");
    if (node_records.size() != static_cast<std::size_t>(require_int(manifest, "node_count")) ||
        edge_records.size() != static_cast<std::size_t>(require_int(manifest, "edge_count"))) {
        throw FormatError("graph record counts do not match the manifest");
    }
    const auto rows = read_float32_rows(dir / "embeddings.f32",
                                        static_cast<std::size_t>(require_int(manifest, "embedding_dim")),
                                        static_cast<std::size_t>(require_int(manifest, "embedding_rows")));
    auto row_of = [&](const json& r) -> std::optional<Vector> {
        const auto& v = require_field(r, "embedding_row");
        if (v.is_null()) {
            return std::nullopt;
        }
        if (!v.is_number_integer() || v.get<long long>() < 0 || static_cast<std::size_t>(v.get<long long>()) >= rows.size()) {
            throw FormatError("embedding_row out of range");
        }
        return Vector(rows[v.get<std::size_t>()]);
    };

    KnowledgeGraph g;
    try {
        for (const auto& r : node_records) {
            EntityNode n;
            n.id = require_string(r, "id");
            n.name = require_string(r, "name");
            n.description = require_string(r, "description");
            n.chunk_ids = read_string_set(r, "chunk_ids");
            n.embedding = row_of(r);
            if (g.has_node(n.id)) {
                throw FormatError("duplicate node id '" + n.id + "'");
            }
            g.put_node(std::move(n));
        }
        for (const auto& r : edge_records) {
            RelationEdge e;
            e.id = require_string(r, "id");
            e.source = require_string(r, "source");
            e.target = require_string(r, "target");
            e.description = require_string(r, "description");
            e.chunk_ids = read_string_set(r, "chunk_ids");
            e.embedding = row_of(r);
            if (g.has_edge(e.id)) {
                throw FormatError("duplicate edge id '" + e.id + "'");
            }
            g.put_edge(std::move(e));
        }
    } catch (const FormatError&) {
        throw;
    } catch (const Error& e) {
        throw FormatError(std::string("graph records are inconsistent: ") + e.what());
    }
    return g;
}

}  // namespace hypermem
