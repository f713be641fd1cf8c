#include "hypermem/memory.hpp"

#include "hypermem/error.hpp"
#include "hypermem/text.hpp"

#include <algorithm>
#include <functional>
#include <sstream>

namespace hypermem {

bool point_id_less(const PointId& a, const PointId& b) {
    if (a.size() != b.size()) {
        return a.size() < b.size();
    }
    return a < b;
}

json to_json(const MemoryDelta& d) {
    json updates = json::array();
    for (const auto& u : d.updates) {
        updates.push_back({{"point", u.point}, {"description", u.description}});
    }
    json insertions = json::array();
    for (const auto& ins : d.insertions) {
        json prov = json::object();
        for (const auto& [name, chunks] : ins.provenance) {
            prov[name] = chunks;
        }
        insertions.push_back(
            {{"description", ins.description}, {"entities", ins.vertex_names}, {"provenance", prov}});
    }
    json merges = json::array();
    for (const auto& m : d.merges) {
        merges.push_back({{"points", {m.first, m.second}}, {"description", m.description}});
    }
    return {{"updates", updates}, {"insertions", insertions}, {"merges", merges}};
}

MemoryDelta delta_from_json(const json& j) {
    MemoryDelta d;
    try {
        for (const auto& u : j.at("updates")) {
            d.updates.push_back({u.at("point").get<std::string>(), u.at("description").get<std::string>()});
        }
        for (const auto& ins : j.at("insertions")) {
            InsertProposal p;
            p.description = ins.at("description").get<std::string>();
            p.vertex_names = ins.at("entities").get<std::vector<std::string>>();
            for (const auto& [name, chunks] : ins.at("provenance").items()) {
                p.provenance[name] = chunks.get<std::set<ChunkId>>();
            }
            d.insertions.push_back(std::move(p));
        }
        for (const auto& m : j.at("merges")) {
            const auto& pts = m.at("points");
            d.merges.push_back(
                {pts.at(0).get<std::string>(), pts.at(1).get<std::string>(), m.at("description").get<std::string>()});
        }
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed memory delta: ") + e.what());
    }
    return d;
}

std::size_t DeltaReport::applied(const std::string& kind) const {
    return static_cast<std::size_t>(
        std::count_if(items.begin(), items.end(), [&](const auto& i) { return i.applied && i.kind == kind; }));
}

std::size_t DeltaReport::rejected() const {
    return static_cast<std::size_t>(std::count_if(items.begin(), items.end(), [](const auto& i) { return !i.applied; }));
}

json to_json(const DeltaReport& r) {
    json items = json::array();
    for (const auto& i : r.items) {
        json item = {{"kind", i.kind}, {"index", i.index}, {"applied", i.applied}};
        if (!i.reason.empty()) {
            item["reason"] = i.reason;
        }
        if (i.point) {
            item["point"] = *i.point;
        }
        items.push_back(std::move(item));
    }
    return items;
}

PointId MemoryHypergraph::next_point_id() {
    return "P" + std::to_string(next_seq_++);
}

void MemoryHypergraph::link(const MemoryPoint& p) {
    for (const auto& v : p.vertex_ids) {
        incidence_[v].insert(p.id);
    }
}

void MemoryHypergraph::unlink(const MemoryPoint& p) {
    for (const auto& v : p.vertex_ids) {
        auto it = incidence_.find(v);
        if (it != incidence_.end()) {
            it->second.erase(p.id);
        }
    }
}

const MemoryVertex& MemoryHypergraph::vertex(const EntityId& id) const {
    auto it = vertices_.find(id);
    if (it == vertices_.end()) {
        throw UnknownId("memory vertex", id);
    }
    return it->second;
}

const MemoryPoint& MemoryHypergraph::point(const PointId& id) const {
    if (auto it = points_.find(id); it != points_.end()) {
        return it->second;
    }
    if (auto it = retired_.find(id); it != retired_.end()) {
        return it->second;
    }
    throw UnknownId("memory point", id);
}

std::optional<PointId> MemoryHypergraph::live_successor(const PointId& id) const {
    PointId cur = id;
    // Lineage is acyclic, so this walk terminates.
    while (!is_live(cur)) {
        auto it = successor_.find(cur);
        if (it == successor_.end()) {
            return std::nullopt;
        }
        cur = it->second;
    }
    return cur;
}

std::set<EntityId> MemoryHypergraph::vertex_ids() const {
    std::set<EntityId> out;
    for (const auto& [id, v] : vertices_) {
        out.insert(id);
    }
    return out;
}

std::set<ChunkId> MemoryHypergraph::chunk_ids() const {
    std::set<ChunkId> out;
    for (const auto& [id, v] : vertices_) {
        out.insert(v.chunk_ids.begin(), v.chunk_ids.end());
    }
    return out;
}

void MemoryHypergraph::apply_update(const PointId& id, const std::string& description) {
    auto it = points_.find(id);
    if (it == points_.end()) {
        throw UnknownId(is_retired(id) ? "retired memory point" : "memory point", id);
    }
    auto desc = trim(description);
    if (desc.empty()) {
        throw InvalidArgument("update of " + id + " has an empty description");
    }
    it->second.description = std::move(desc);
    it->second.updated_step = step_;
}

MemoryVertex& MemoryHypergraph::admit(KnowledgeGraph* g, const std::string& name, const std::set<ChunkId>& provenance,
                                      const std::vector<std::string>& co_members, const std::string& description,
                                      EmbeddingProvider* embedder) {
    const EntityId id = normalize_entity_name(name);
    if (auto it = vertices_.find(id); it != vertices_.end()) {
        it->second.chunk_ids.insert(provenance.begin(), provenance.end());
        return it->second;
    }
    MemoryVertex v{id, trim(name), "", provenance};
    if (g != nullptr) {
        if (!g->has_node(id)) {
            std::vector<RelationSpec> relations;
            for (const auto& other : co_members) {
                if (normalize_entity_name(other) != id) {
                    relations.push_back({other, description, provenance});
                }
            }
            upsert_node(*g, v.name, "", provenance, relations, embedder);
        }
        const auto& node = g->node(id);
        v.name = node.name;
        v.description = node.description;
        v.chunk_ids.insert(node.chunk_ids.begin(), node.chunk_ids.end());
    }
    return vertices_.emplace(id, std::move(v)).first->second;
}

PointId MemoryHypergraph::apply_insert(KnowledgeGraph* g, const InsertProposal& proposal,
                                       EmbeddingProvider* embedder) {
    const auto desc = trim(proposal.description);
    if (desc.empty()) {
        throw InvalidArgument("insertion has an empty description");
    }
    std::vector<std::string> names;
    std::set<EntityId> ids;
    for (const auto& raw : proposal.vertex_names) {
        const auto name = trim(raw);
        const auto id = normalize_entity_name(name);
        if (id.empty()) {
            throw InvalidArgument("insertion names an empty entity");
        }
        if (ids.insert(id).second) {
            names.push_back(name);
        }
    }
    if (ids.size() < 2) {
        throw DegenerateHyperedge("a memory point needs at least two distinct entities, got " +
                                  std::to_string(ids.size()));
    }
    for (const auto& name : names) {
        std::set<ChunkId> prov;
        if (auto it = proposal.provenance.find(name); it != proposal.provenance.end()) {
            prov = it->second;
        }
        admit(g, name, prov, names, desc, embedder);
    }
    MemoryPoint p{next_point_id(), desc, ids, std::nullopt, step_, step_};
    link(p);
    const auto id = p.id;
    points_.emplace(id, std::move(p));
    return id;
}

PointId MemoryHypergraph::apply_merge(const PointId& first, const PointId& second, const std::string& description) {
    if (first == second) {
        throw InvalidArgument("cannot merge memory point " + first + " with itself");
    }
    for (const auto& id : {first, second}) {
        if (!is_live(id)) {
            throw UnknownId(is_retired(id) ? "retired memory point" : "memory point", id);
        }
    }
    const auto desc = trim(description);
    if (desc.empty()) {
        throw InvalidArgument("merge of " + first + " and " + second + " has an empty description");
    }
    MemoryPoint child{next_point_id(), desc, points_.at(first).vertex_ids, std::make_pair(first, second), step_,
                      step_};
    const auto& other = points_.at(second).vertex_ids;
    child.vertex_ids.insert(other.begin(), other.end());
    if (!keep_merge_parents_) {
        for (const auto& id : {first, second}) {
            auto node = points_.extract(id);
            unlink(node.mapped());
            retired_.insert(std::move(node));
            successor_[id] = child.id;
        }
    }
    link(child);
    const auto id = child.id;
    points_.emplace(id, std::move(child));
    return id;
}

DeltaReport MemoryHypergraph::apply_delta(KnowledgeGraph* g, const MemoryDelta& delta, EmbeddingProvider* embedder) {
    DeltaReport report;
    auto attempt = [&](const std::string& kind, std::size_t index, auto&& fn) {
        DeltaItemResult r{kind, index, false, "", std::nullopt};
        try {
            r.point = fn();
            r.applied = true;
        } catch (const Error& e) {
            r.reason = e.what();
        }
        report.items.push_back(std::move(r));
    };
    for (std::size_t i = 0; i < delta.updates.size(); ++i) {
        const auto& u = delta.updates[i];
        attempt("update", i, [&] {
            apply_update(u.point, u.description);
            return u.point;
        });
    }
    for (std::size_t i = 0; i < delta.insertions.size(); ++i) {
        attempt("insert", i, [&] { return apply_insert(g, delta.insertions[i], embedder); });
    }
    for (std::size_t i = 0; i < delta.merges.size(); ++i) {
        const auto& m = delta.merges[i];
        attempt("merge", i, [&] { return apply_merge(m.first, m.second, m.description); });
    }
    return report;
}

std::vector<std::string> MemoryHypergraph::invariant_violations(const KnowledgeGraph* g) const {
    std::vector<std::string> out;
    if (g != nullptr) {
        for (const auto& [id, v] : vertices_) {
            if (!g->has_node(id)) {
                out.push_back("vertex '" + id + "' is missing from the graph");
            }
        }
    }
    std::map<EntityId, std::set<PointId>> expected;
    for (const auto& [id, p] : points_) {
        if (p.vertex_ids.size() < 2) {
            out.push_back("point " + id + " has fewer than two vertices");
        }
        if (p.description.empty()) {
            out.push_back("point " + id + " has an empty description");
        }
        for (const auto& v : p.vertex_ids) {
            if (!has_vertex(v)) {
                out.push_back("point " + id + " references unknown vertex '" + v + "'");
            }
            expected[v].insert(id);
        }
    }
    std::map<EntityId, std::set<PointId>> actual;
    for (const auto& [v, pts] : incidence_) {
        if (!pts.empty()) {
            actual.emplace(v, pts);
        }
    }
    if (actual != expected) {
        out.push_back("incidence is inconsistent with the live points");
    }
    auto check_lineage = [&](const MemoryPoint& p) {
        if (!p.lineage) {
            return;
        }
        const auto& [a, b] = *p.lineage;
        if (a == b) {
            out.push_back("point " + p.id + " has identical merge parents");
        }
        std::set<EntityId> uni;
        for (const auto& parent : {a, b}) {
            const bool live = is_live(parent);
            if (!live && !is_retired(parent)) {
                out.push_back("point " + p.id + " has unknown parent " + parent);
                return;
            }
            if (live && !keep_merge_parents_) {
                out.push_back("merge parent " + parent + " of " + p.id + " is still live");
            }
            const auto& pv = point(parent).vertex_ids;
            uni.insert(pv.begin(), pv.end());
        }
        if (uni != p.vertex_ids) {
            out.push_back("point " + p.id + " is not the union of its parents");
        }
    };
    for (const auto& [id, p] : points_) {
        check_lineage(p);
    }
    for (const auto& [id, p] : retired_) {
        if (points_.count(id) != 0) {
            out.push_back("point " + id + " is both live and retired");
        }
        check_lineage(p);
    }
    // Lineage must be acyclic: depth-first search with colouring.
    std::map<PointId, int> colour;
    std::function<bool(const PointId&)> cyclic = [&](const PointId& id) {
        auto& c = colour[id];
        if (c == 1) {
            return true;
        }
        if (c == 2) {
            return false;
        }
        c = 1;
        const MemoryPoint* p = nullptr;
        if (auto it = points_.find(id); it != points_.end()) {
            p = &it->second;
        } else if (auto jt = retired_.find(id); jt != retired_.end()) {
            p = &jt->second;
        }
        if (p != nullptr && p->lineage && (cyclic(p->lineage->first) || cyclic(p->lineage->second))) {
            return true;
        }
        colour[id] = 2;
        return false;
    };
    for (const auto* pool : {&points_, &retired_}) {
        for (const auto& [id, p] : *pool) {
            if (cyclic(id)) {
                out.push_back("lineage cycle through point " + id);
                break;
            }
        }
    }
    return out;
}

namespace {

json point_record(const MemoryPoint& p, const char* status) {
    json lineage = nullptr;
    if (p.lineage) {
        lineage = {p.lineage->first, p.lineage->second};
    }
    return {{"kind", "point"},         {"status", status},          {"id", p.id},
            {"description", p.description}, {"vertex_ids", p.vertex_ids}, {"lineage", lineage},
            {"created_step", p.created_step}, {"updated_step", p.updated_step}};
}

MemoryPoint point_from_record(const json& r) {
    MemoryPoint p;
    p.id = require_string(r, "id");
    p.description = require_string(r, "description");
    p.created_step = static_cast<int>(require_int(r, "created_step"));
    p.updated_step = static_cast<int>(require_int(r, "updated_step"));
    try {
        p.vertex_ids = require_field(r, "vertex_ids").get<std::set<EntityId>>();
        const auto& lineage = require_field(r, "lineage");
        if (!lineage.is_null()) {
            p.lineage = std::make_pair(lineage.at(0).get<std::string>(), lineage.at(1).get<std::string>());
        }
    } catch (const json::exception& e) {
        throw FormatError("memory point " + p.id + ": " + e.what());
    }
    return p;
}

std::vector<const MemoryPoint*> sorted_points(const std::map<PointId, MemoryPoint>& pool) {
    std::vector<const MemoryPoint*> out;
    for (const auto& [id, p] : pool) {
        out.push_back(&p);
    }
    std::sort(out.begin(), out.end(), [](const auto* a, const auto* b) { return point_id_less(a->id, b->id); });
    return out;
}

}  // namespace

std::vector<json> MemoryHypergraph::to_records() const {
    std::vector<json> out;
    out.push_back({{"kind", "meta"},
                   {"schema_version", 1},
                   {"step", step_},
                   {"next_seq", next_seq_},
                   {"keep_merge_parents", keep_merge_parents_}});
    for (const auto& [id, v] : vertices_) {
        out.push_back({{"kind", "vertex"},
                       {"entity_id", id},
                       {"name", v.name},
                       {"description", v.description},
                       {"chunk_ids", v.chunk_ids}});
    }
    for (const auto* p : sorted_points(points_)) {
        out.push_back(point_record(*p, "live"));
    }
    for (const auto* p : sorted_points(retired_)) {
        out.push_back(point_record(*p, "retired"));
    }
    return out;
}

MemoryHypergraph MemoryHypergraph::from_records(const std::vector<json>& records) {
    if (records.empty() || !records.front().contains("kind") || records.front()["kind"] != "meta") {
        throw FormatError("memory snapshot must start with a meta record");
    }
    const auto& meta = records.front();
    if (require_int(meta, "schema_version") != 1) {
        throw FormatError("unsupported memory snapshot version");
    }
    MemoryHypergraph m(require_field(meta, "keep_merge_parents").get<bool>());
    m.step_ = static_cast<int>(require_int(meta, "step"));
    m.next_seq_ = static_cast<long>(require_int(meta, "next_seq"));
    for (std::size_t i = 1; i < records.size(); ++i) {
        const auto& r = records[i];
        const auto kind = require_string(r, "kind");
        if (kind == "vertex") {
            MemoryVertex v{require_string(r, "entity_id"), require_string(r, "name"), require_string(r, "description"),
                           require_field(r, "chunk_ids").get<std::set<ChunkId>>()};
            m.vertices_.emplace(v.entity_id, std::move(v));
        } else if (kind == "point") {
            auto p = point_from_record(r);
            const auto status = require_string(r, "status");
            if (status == "live") {
                m.link(p);
                m.points_.emplace(p.id, std::move(p));
            } else if (status == "retired") {
                m.retired_.emplace(p.id, std::move(p));
            } else {
                throw FormatError("memory point " + p.id + " has unknown status '" + status + "'");
            }
        } else {
            throw FormatError("unknown memory record kind '" + kind + "'");
        }
    }
    for (const auto* pool : {&m.points_, &m.retired_}) {
        for (const auto& [id, p] : *pool) {
            if (p.lineage && !m.keep_merge_parents_) {
                m.successor_[p.lineage->first] = id;
                m.successor_[p.lineage->second] = id;
            }
        }
    }
    if (auto problems = m.invariant_violations(); !problems.empty()) {
        throw FormatError("memory snapshot is inconsistent: " + problems.front());
    }
    return m;
}

bool MemoryHypergraph::operator==(const MemoryHypergraph& other) const {
    return keep_merge_parents_ == other.keep_merge_parents_ && next_seq_ == other.next_seq_ &&
           vertices_ == other.vertices_ && points_ == other.points_ && retired_ == other.retired_;
}

double avg_entities_per_hyperedge(const MemoryHypergraph& m) {
    if (m.points().empty()) {
        return 0.0;
    }
    double total = 0.0;
    for (const auto& [id, p] : m.points()) {
        total += static_cast<double>(p.vertex_ids.size());
    }
    return total / static_cast<double>(m.points().size());
}

std::set<EntityId> memory_neighbors(const MemoryHypergraph& m, const EntityId& v) {
    if (!m.has_vertex(v)) {
        throw UnknownId("memory vertex", v);
    }
    std::set<EntityId> out;
    if (auto it = m.incidence().find(v); it != m.incidence().end()) {
        for (const auto& pid : it->second) {
            const auto& members = m.points().at(pid).vertex_ids;
            out.insert(members.begin(), members.end());
        }
    }
    out.erase(v);
    return out;
}

namespace {

std::string one_line(const std::string& s) {
    std::string out;
    for (char c : s) {
        out += (c == '\n' || c == '\r') ? ' ' : c;
    }
    return out;
}

}  // namespace

std::string render_memory(const MemoryHypergraph& m) {
    if (m.points().empty() && m.vertices().empty()) {
        return kEmptyMemoryText;
    }
    std::vector<const MemoryPoint*> pts;
    for (const auto& [id, p] : m.points()) {
        pts.push_back(&p);
    }
    std::sort(pts.begin(), pts.end(), [](const auto* a, const auto* b) {
        if (a->created_step != b->created_step) {
            return a->created_step < b->created_step;
        }
        return point_id_less(a->id, b->id);
    });
    std::ostringstream out;
    out << "Memory points:\n";
    if (pts.empty()) {
        out << "(none)\n";
    }
    for (const auto* p : pts) {
        out << "[" << p->id << "] " << one_line(p->description) << "\n  Entities: ";
        bool first = true;
        for (const auto& v : p->vertex_ids) {
            out << (first ? "" : "; ") << m.vertex(v).name;
            first = false;
        }
        out << "\n";
    }
    out << "\nEntities:\n";
    for (const auto& [id, v] : m.vertices()) {
        out << "- " << v.name;
        if (!v.description.empty()) {
            out << ": " << one_line(v.description);
        }
        out << "\n";
    }
    auto s = out.str();
    s.pop_back();
    return s;
}

}  // namespace hypermem
