#include "hypermem/session.hpp"

#include "hypermem/error.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdio>
#include <limits>

namespace hypermem {

namespace fs = std::filesystem;

std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::adaptive:
            return "adaptive";
        case Strategy::global_only:
            return "global-only";
        case Strategy::local_only:
            return "local-only";
    }
    return "adaptive";
}

Strategy strategy_from_string(const std::string& s) {
    if (s == "adaptive") {
        return Strategy::adaptive;
    }
    if (s == "global-only") {
        return Strategy::global_only;
    }
    if (s == "local-only") {
        return Strategy::local_only;
    }
    throw ConfigError("unknown strategy '" + s + "' (expected adaptive, global-only or local-only)");
}

void validate(const SessionConfig& c) {
    if (c.max_steps < 1) {
        throw ConfigError("max_steps must be at least 1");
    }
    if (c.max_subqueries < 1) {
        throw ConfigError("max_subqueries must be at least 1");
    }
    if (c.retrieval.n_v < 1) {
        throw ConfigError("n_v must be at least 1");
    }
    if (c.temperature < 0.0) {
        throw ConfigError("temperature must be >= 0");
    }
    if (c.max_output_tokens < 1) {
        throw ConfigError("max_output_tokens must be positive");
    }
}

json to_json(const SessionConfig& c) {
    return {{"max_steps", c.max_steps},
            {"max_subqueries", c.max_subqueries},
            {"n_v", c.retrieval.n_v},
            {"n_e", c.retrieval.n_e},
            {"n_d", c.retrieval.n_d},
            {"strategy", to_string(c.strategy)},
            {"enable_update", c.enable_update},
            {"enable_merge", c.enable_merge},
            {"keep_merge_parents", c.keep_merge_parents},
            {"chunk_budget", c.chunk_budget},
            {"forced_answer_every_step", c.forced_answer_every_step},
            {"temperature", c.temperature},
            {"max_output_tokens", c.max_output_tokens}};
}

SessionConfig session_config_from_json(const json& j) {
    if (!j.is_object()) {
        throw ConfigError("session config must be an object");
    }
    SessionConfig c;
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "max_steps") {
                c.max_steps = value.get<int>();
            } else if (key == "max_subqueries") {
                c.max_subqueries = value.get<std::size_t>();
            } else if (key == "n_v") {
                c.retrieval.n_v = value.get<std::size_t>();
            } else if (key == "n_e") {
                c.retrieval.n_e = value.get<std::size_t>();
            } else if (key == "n_d") {
                c.retrieval.n_d = value.get<std::size_t>();
            } else if (key == "strategy") {
                c.strategy = strategy_from_string(value.get<std::string>());
            } else if (key == "enable_update") {
                c.enable_update = value.get<bool>();
            } else if (key == "enable_merge") {
                c.enable_merge = value.get<bool>();
            } else if (key == "keep_merge_parents") {
                c.keep_merge_parents = value.get<bool>();
            } else if (key == "chunk_budget") {
                c.chunk_budget = value.get<std::size_t>();
            } else if (key == "forced_answer_every_step") {
                c.forced_answer_every_step = value.get<bool>();
            } else if (key == "temperature") {
                c.temperature = value.get<double>();
            } else if (key == "max_output_tokens") {
                c.max_output_tokens = value.get<int>();
            } else {
                throw ConfigError("unknown session setting '" + key + "'");
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid session setting: ") + e.what());
    }
    validate(c);
    return c;
}

namespace {

json report_items_to_json(const DeltaReport& r) {
    return to_json(r);
}

DeltaReport report_from_json(const json& j) {
    DeltaReport r;
    for (const auto& item : j) {
        DeltaItemResult i;
        i.kind = require_string(item, "kind");
        i.index = static_cast<std::size_t>(require_int(item, "index"));
        i.applied = require_field(item, "applied").get<bool>();
        i.reason = item.value("reason", "");
        if (item.contains("point")) {
            i.point = item["point"].get<std::string>();
        }
        r.items.push_back(std::move(i));
    }
    return r;
}

json optional_json(const std::optional<std::string>& s) {
    return s ? json(*s) : json(nullptr);
}

}  // namespace

json to_json(const StepRecord& s) {
    json concerns = json::array();
    for (const auto& c : s.concerns) {
        concerns.push_back(to_json(c));
    }
    json retrievals = json::array();
    for (const auto& r : s.retrievals) {
        retrievals.push_back({{"subquery", to_json(r.subquery)},
                              {"requested_anchor", optional_json(r.requested_anchor)},
                              {"fell_back_to_global", r.fell_back_to_global},
                              {"note", r.note},
                              {"entities", r.entities},
                              {"relations", r.relations},
                              {"chunks", r.chunks}});
    }
    return {{"step", s.step},
            {"seed", s.seed},
            {"sufficient", s.sufficient ? json(*s.sufficient) : json(nullptr)},
            {"concerns", concerns},
            {"retrievals", retrievals},
            {"delta", to_json(s.delta)},
            {"dropped", s.dropped},
            {"report", report_items_to_json(s.report)},
            {"answer", optional_json(s.answer)},
            {"warnings", s.warnings},
            {"prompt_tokens", s.prompt_tokens},
            {"completion_tokens", s.completion_tokens}};
}

StepRecord step_record_from_json(const json& j) {
    StepRecord s;
    try {
        s.step = j.at("step").get<int>();
        s.seed = j.at("seed").get<bool>();
        if (!j.at("sufficient").is_null()) {
            s.sufficient = j["sufficient"].get<bool>();
        }
        for (const auto& c : j.at("concerns")) {
            Concern concern{c.at("text").get<std::string>(), std::nullopt};
            if (!c.at("target").is_null()) {
                concern.target = c["target"].get<std::string>();
            }
            s.concerns.push_back(std::move(concern));
        }
        for (const auto& r : j.at("retrievals")) {
            RetrievalRecord rec;
            rec.subquery = subquery_from_json(r.at("subquery"));
            if (!r.at("requested_anchor").is_null()) {
                rec.requested_anchor = r["requested_anchor"].get<std::string>();
            }
            rec.fell_back_to_global = r.at("fell_back_to_global").get<bool>();
            rec.note = r.at("note").get<std::string>();
            rec.entities = r.at("entities").get<std::vector<EntityId>>();
            rec.relations = r.at("relations").get<std::vector<EdgeId>>();
            rec.chunks = r.at("chunks").get<std::vector<ChunkId>>();
            s.retrievals.push_back(std::move(rec));
        }
        s.delta = delta_from_json(j.at("delta"));
        s.dropped = j.at("dropped").get<std::vector<std::string>>();
        s.report = report_from_json(j.at("report"));
        if (!j.at("answer").is_null()) {
            s.answer = j["answer"].get<std::string>();
        }
        s.warnings = j.at("warnings").get<std::vector<std::string>>();
        s.prompt_tokens = j.at("prompt_tokens").get<int>();
        s.completion_tokens = j.at("completion_tokens").get<int>();
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed step record: ") + e.what());
    }
    return s;
}

namespace {

class SessionRunner {
public:
    SessionRunner(const std::string& query, const KnowledgeBase& kb, const SessionConfig& config,
                  const SessionProviders& providers, const SessionOptions& options)
        : query_(query), config_(config), providers_(providers), options_(options), graph_(kb.graph),
          indexes_(kb.indexes), chunks_(kb.chunks),
          gateway_(providers.llm, providers.prompts, &log_, config.temperature, config.max_output_tokens),
          memory_(config.keep_merge_parents) {
        validate(config);
        trace_.query = query;
        trace_.config = config;
        trace_.llm = providers.llm.describe();
        trace_.embedder = providers.embedder.describe();
    }

    SessionTrace run(bool stepwise) {
        try {
            if (stepwise) {
                run_stepwise();
            } else {
                run_loop();
            }
        } catch (...) {
            if (options_.trace_dir) {
                finish_trace();
                trace_.termination = "error";
                try {
                    write_trace(trace_, *options_.trace_dir, options_.write_timing);
                } catch (const std::exception& e) {
                    spdlog::error("could not persist partial trace: {}", e.what());
                }
            }
            throw;
        }
        finish_trace();
        if (options_.trace_dir) {
            write_trace(trace_, *options_.trace_dir, options_.write_timing);
        }
        return std::move(trace_);
    }

private:
    void run_loop() {
        seed_step();
        int t = 1;
        for (;; ++t) {
            if (t >= config_.max_steps) {
                trace_.termination = "step-cap";
                break;
            }
            gateway_.set_step(t);
            StepRecord rec;
            rec.step = t;
            const bool sufficient = gateway_.judge_sufficiency(memory_, query_);
            if (sufficient) {
                trace_.termination = "sufficient";
                break;
            }
            rec.sufficient = false;
            rec.concerns = gateway_.raise_concerns(memory_, query_, config_.max_subqueries);
            auto subqueries = gateway_.generate_subqueries(rec.concerns, memory_, query_, config_.max_subqueries);
            evolve(std::move(rec), std::move(subqueries));
        }
        trace_.answer = answer(t);
    }

    void run_stepwise() {
        seed_step();
        trace_.steps.back().answer = answer(0);
        for (int t = 1; t < config_.max_steps; ++t) {
            gateway_.set_step(t);
            StepRecord rec;
            rec.step = t;
            rec.concerns = gateway_.raise_concerns(memory_, query_, config_.max_subqueries);
            auto subqueries = gateway_.generate_subqueries(rec.concerns, memory_, query_, config_.max_subqueries);
            evolve(std::move(rec), std::move(subqueries));
            trace_.steps.back().answer = answer(t);
        }
        for (const auto& s : trace_.steps) {
            trace_.stepwise_answers.push_back(*s.answer);
        }
        trace_.answer = trace_.stepwise_answers.back();
        trace_.termination = "step-cap";
    }

    void seed_step() {
        gateway_.set_step(0);
        query_vector_ = embed_one(query_, providers_.embedder);
        StepRecord rec;
        rec.step = 0;
        rec.seed = true;
        Subquery seed;
        seed.text = query_;
        seed.mode = SubqueryMode::global;
        seed.origin_step = 0;
        seed.seed = true;
        evolve(std::move(rec), {seed});
    }

    std::string answer(int step) {
        gateway_.set_step(step);
        const auto chunks =
            select_answer_chunks(memory_, query_vector_, config_.chunk_budget, indexes_.chunks, chunks_);
        return gateway_.generate_response(memory_, query_, chunks);
    }

    std::optional<PointId> most_similar_point(const Vector& q) const {
        std::vector<PointId> ids;
        for (const auto& [id, p] : memory_.points()) {
            ids.push_back(id);
        }
        std::sort(ids.begin(), ids.end(), point_id_less);
        std::optional<PointId> best;
        double best_score = -std::numeric_limits<double>::infinity();
        for (const auto& id : ids) {
            double score = -std::numeric_limits<double>::infinity();
            for (const auto& v : memory_.points().at(id).vertex_ids) {
                if (indexes_.entities.contains(v)) {
                    score = std::max(score, cosine_similarity(q, indexes_.entities.at(v)));
                }
            }
            if (!best || score > best_score) {
                best = id;
                best_score = score;
            }
        }
        return best;
    }

    RetrievalRecord retrieve(Subquery q, const Vector& qv, std::vector<Evidence>& evidence) {
        RetrievalRecord rec;
        if (!q.seed && config_.strategy == Strategy::global_only && q.mode == SubqueryMode::local) {
            rec.note = "strategy global-only: local subquery issued as global";
            q.mode = SubqueryMode::global;
            q.anchor.reset();
        }
        if (!q.seed && config_.strategy == Strategy::local_only && q.mode == SubqueryMode::global) {
            q.mode = SubqueryMode::local;
            q.anchor = most_similar_point(qv);
            rec.note = q.anchor ? "strategy local-only: anchored to most similar point " + *q.anchor
                                : "strategy local-only: no live point to anchor";
        }
        if (q.seed) {
            rec.note = "seed step";
        }

        std::set<EntityId> candidates;
        if (q.mode == SubqueryMode::local && q.anchor) {
            try {
                const auto live = resolve_anchor(memory_, *q.anchor);
                if (live != *q.anchor) {
                    rec.requested_anchor = q.anchor;
                    q.anchor = live;
                }
            } catch (const StaleAnchor&) {
                rec.requested_anchor = q.anchor;
                q.anchor = config_.strategy == Strategy::local_only ? most_similar_point(qv) : std::nullopt;
                if (!q.anchor) {
                    q.mode = SubqueryMode::global;
                }
                rec.note = "stale anchor " + *rec.requested_anchor + " replaced";
            }
        }
        if (q.mode == SubqueryMode::local && q.anchor) {
            candidates = local_candidates(memory_, graph_, *q.anchor);
            if (candidates.empty() && config_.strategy != Strategy::local_only) {
                spdlog::info("step {}: empty neighborhood around {}; exploring globally", q.origin_step, *q.anchor);
                rec.fell_back_to_global = true;
                rec.requested_anchor = q.anchor;
                rec.note = "empty local neighborhood: fell back to global exploration";
                q.mode = SubqueryMode::global;
                q.anchor.reset();
            }
        }
        if (q.mode == SubqueryMode::global) {
            candidates = global_candidates(memory_, graph_);
        }
        const auto result = retrieve_entities(std::span(&qv, 1), candidates, config_.retrieval.n_v, indexes_.entities);
        if (options_.observer) {
            options_.observer({q.origin_step, q, memory_, graph_, candidates, result});
        }
        auto ev = gather_evidence(result, graph_, qv, config_.retrieval.n_e, config_.retrieval.n_d, indexes_, chunks_);
        rec.entities.assign(result.begin(), result.end());
        for (const auto& e : ev.relations) {
            rec.relations.push_back(e.id);
        }
        for (const auto& c : ev.chunks) {
            rec.chunks.push_back(c.id);
        }
        ev.subquery = q;
        rec.subquery = std::move(q);
        evidence.push_back(std::move(ev));
        return rec;
    }

    void evolve(StepRecord rec, std::vector<Subquery> subqueries) {
        memory_.begin_step(rec.step);
        std::vector<std::string> texts;
        for (const auto& q : subqueries) {
            texts.push_back(q.text);
        }
        const auto vectors = embed(texts, providers_.embedder);
        std::vector<Evidence> evidence;
        for (std::size_t i = 0; i < subqueries.size(); ++i) {
            rec.retrievals.push_back(retrieve(subqueries[i], vectors[i], evidence));
        }
        auto proposal = gateway_.propose_memory_delta(memory_, graph_, evidence, query_,
                                                      {config_.enable_update, config_.enable_merge});
        rec.delta = std::move(proposal.delta);
        rec.dropped = std::move(proposal.dropped);
        rec.report = memory_.apply_delta(&graph_, rec.delta, &providers_.embedder);
        refresh_indexes();
        rec.warnings = gateway_.warnings();
        gateway_.clear_warnings();
        trace_.steps.push_back(std::move(rec));
        trace_.snapshots.push_back(memory_);
    }

    /// Forced insertions add nodes and edges to the session graph.
    void refresh_indexes() {
        for (const auto& [id, n] : graph_.nodes()) {
            if (n.embedding && (!indexes_.entities.contains(id) || !(indexes_.entities.at(id) == *n.embedding))) {
                indexes_.entities.upsert(id, *n.embedding);
            }
        }
        for (const auto& [id, e] : graph_.edges()) {
            if (e.embedding && !indexes_.relations.contains(id)) {
                indexes_.relations.upsert(id, *e.embedding);
            }
        }
    }

    void finish_trace() {
        trace_.exchanges = log_.exchanges();
        trace_.latencies = log_.latencies();
        for (auto& s : trace_.steps) {
            s.prompt_tokens = 0;
            s.completion_tokens = 0;
            for (const auto& e : trace_.exchanges) {
                if (e.step == s.step) {
                    s.prompt_tokens += e.prompt_tokens;
                    s.completion_tokens += e.completion_tokens;
                }
            }
        }
    }

    const std::string& query_;
    const SessionConfig& config_;
    SessionProviders providers_;
    const SessionOptions& options_;
    KnowledgeGraph graph_;
    GraphIndexes indexes_;
    const ChunkStore& chunks_;
    ExchangeLog log_;
    LlmGateway gateway_;
    MemoryHypergraph memory_;
    Vector query_vector_;
    SessionTrace trace_;
};

}  // namespace

SessionTrace run_session(const std::string& query, const KnowledgeBase& kb, const SessionConfig& config,
                         const SessionProviders& providers, const SessionOptions& options) {
    return SessionRunner(query, kb, config, providers, options).run(false);
}

SessionTrace run_stepwise(const std::string& query, const KnowledgeBase& kb, const SessionConfig& config,
                          const SessionProviders& providers, const SessionOptions& options) {
    SessionConfig c = config;
    c.forced_answer_every_step = true;
    return SessionRunner(query, kb, c, providers, options).run(true);
}

namespace {

std::string first_difference(const MemoryHypergraph& got, const MemoryHypergraph& want) {
    if (got.vertices() != want.vertices()) {
        return "vertex sets differ";
    }
    for (const auto& [id, p] : want.points()) {
        if (!got.is_live(id)) {
            return "point " + id + " is missing";
        }
        if (!(got.points().at(id) == p)) {
            return "point " + id + " differs";
        }
    }
    if (got.points().size() != want.points().size()) {
        return "live point counts differ";
    }
    if (got.retired() != want.retired()) {
        return "retired points differ";
    }
    return "point id sequence differs";
}

}  // namespace

MemoryHypergraph replay_trace(const SessionTrace& trace, const KnowledgeGraph& g) {
    KnowledgeGraph graph = g;
    MemoryHypergraph m(trace.config.keep_merge_parents);
    for (std::size_t i = 0; i < trace.steps.size(); ++i) {
        const auto& step = trace.steps[i];
        if (step.step != static_cast<int>(i)) {
            throw ReplayDivergence(step.step, "step indices are not contiguous");
        }
        m.begin_step(step.step);
        m.apply_delta(&graph, step.delta, nullptr);
        if (i >= trace.snapshots.size()) {
            throw ReplayDivergence(step.step, "no recorded memory snapshot");
        }
        if (!(m == trace.snapshots[i])) {
            throw ReplayDivergence(step.step, first_difference(m, trace.snapshots[i]));
        }
    }
    return m;
}

fs::path snapshot_path(const fs::path& trace_dir, int step) {
    char name[32];
    std::snprintf(name, sizeof name, "step-%03d.jsonl", step);
    return trace_dir / "memory" / name;
}

std::vector<int> available_snapshots(const fs::path& trace_dir) {
    std::vector<int> steps;
    const auto dir = trace_dir / "memory";
    if (!fs::is_directory(dir)) {
        return steps;
    }
    for (const auto& entry : fs::directory_iterator(dir)) {
        const auto name = entry.path().filename().string();
        int step = 0;
        char tail[8] = {};
        if (std::sscanf(name.c_str(), "step-%d.%7s", &step, tail) == 2 && std::string(tail) == "jsonl") {
            steps.push_back(step);
        }
    }
    std::sort(steps.begin(), steps.end());
    return steps;
}

void write_trace(const SessionTrace& trace, const fs::path& dir, bool write_timing) {
    fs::create_directories(dir);
    fs::remove_all(dir / "memory");
    fs::create_directories(dir / "memory");
    write_records(dir / "config.jsonl", {json{{"kind", "session"},
                                              {"query", trace.query},
                                              {"llm", trace.llm},
                                              {"embedder", trace.embedder},
                                              {"config", to_json(trace.config)}}});
    std::vector<json> steps;
    for (const auto& s : trace.steps) {
        steps.push_back(to_json(s));
    }
    write_records(dir / "steps.jsonl", steps);
    for (std::size_t i = 0; i < trace.snapshots.size(); ++i) {
        write_records(snapshot_path(dir, trace.steps.at(i).step), trace.snapshots[i].to_records());
    }
    std::vector<json> exchanges;
    for (const auto& e : trace.exchanges) {
        exchanges.push_back(to_json(e));
    }
    write_records(dir / "exchanges.jsonl", exchanges);
    int prompt = 0;
    int completion = 0;
    for (const auto& e : trace.exchanges) {
        prompt += e.prompt_tokens;
        completion += e.completion_tokens;
    }
    const auto* final_memory = trace.final_memory();
    write_records(dir / "answer.jsonl",
                  {json{{"query", trace.query},
                        {"answer", trace.answer},
                        {"termination", trace.termination},
                        {"evolution_steps", trace.steps.size()},
                        {"stepwise_answers", trace.stepwise_answers},
                        {"avg_entities_per_hyperedge",
                         final_memory != nullptr ? avg_entities_per_hyperedge(*final_memory) : 0.0},
                        {"prompt_tokens", prompt},
                        {"completion_tokens", completion}}});
    if (write_timing) {
        std::vector<json> timing;
        for (std::size_t i = 0; i < trace.latencies.size() && i < trace.exchanges.size(); ++i) {
            const auto& e = trace.exchanges[i];
            timing.push_back(
                {{"tag", e.tag}, {"step", e.step}, {"seq", e.seq}, {"latency_ms", trace.latencies[i].count()}});
        }
        write_records(dir / "timing.jsonl", timing);
    } else {
        fs::remove(dir / "timing.jsonl");
    }
}

SessionTrace load_trace(const fs::path& dir) {
    if (!fs::is_directory(dir)) {
        throw ConfigError("trace directory '" + dir.string() + "' does not exist");
    }
    SessionTrace t;
    const auto config = read_records(dir / "config.jsonl");
    if (config.size() != 1) {
        throw FormatError("config.jsonl must hold exactly one record");
    }
    t.query = require_string(config[0], "query");
    t.llm = require_string(config[0], "llm");
    t.embedder = require_string(config[0], "embedder");
    t.config = session_config_from_json(require_field(config[0], "config"));
    for (const auto& r : read_records(dir / "steps.jsonl")) {
        t.steps.push_back(step_record_from_json(r));
    }
    for (const auto& s : t.steps) {
        const auto path = snapshot_path(dir, s.step);
        if (!fs::exists(path)) {
            throw FormatError("missing memory snapshot for step " + std::to_string(s.step));
        }
        t.snapshots.push_back(MemoryHypergraph::from_records(read_records(path)));
    }
    for (const auto& r : read_records(dir / "exchanges.jsonl")) {
        t.exchanges.push_back(exchange_from_json(r));
    }
    const auto answer = read_records(dir / "answer.jsonl");
    if (answer.size() != 1) {
        throw FormatError("answer.jsonl must hold exactly one record");
    }
    t.answer = require_string(answer[0], "answer");
    t.termination = require_string(answer[0], "termination");
    t.stepwise_answers = require_field(answer[0], "stepwise_answers").get<std::vector<std::string>>();
    return t;
}

}  // namespace hypermem
