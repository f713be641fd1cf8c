#include "cli.hpp"

#include "hypermem/config.hpp"
#include "hypermem/error.hpp"
#include "hypermem/eval.hpp"
#include "hypermem/index.hpp"
#include "hypermem/records.hpp"
#include "hypermem/session.hpp"
#include "hypermem/text.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <mutex>
#include <sstream>
#include <thread>

namespace hypermem {

namespace fs = std::filesystem;

namespace {

struct Overrides {
    std::string config;
    std::string strategy;
    int max_steps = 0;
    bool no_merge = false;
    bool no_update = false;
    bool keep_merge_parents = false;
    bool stepwise = false;
    std::string provider;
    std::string judge_provider;
    bool verbose = false;
};

void route_logs_to_stderr(bool verbose) {
    static std::once_flag once;
    std::call_once(once, [] {
        auto logger = spdlog::get("hypermem");
        if (!logger) {
            logger = spdlog::stderr_color_mt("hypermem");
        }
        spdlog::set_default_logger(logger);
    });
    spdlog::set_level(verbose ? spdlog::level::info : spdlog::level::warn);
}

ProjectConfig resolve_config(const Overrides& o) {
    ProjectConfig c = o.config.empty() ? project_config_from_json(json::object(), fs::current_path())
                                       : load_project_config(o.config);
    if (!o.strategy.empty()) {
        c.session.strategy = strategy_from_string(o.strategy);
    }
    if (o.max_steps != 0) {
        c.session.max_steps = o.max_steps;
    }
    if (o.no_merge) {
        c.session.enable_merge = false;
    }
    if (o.no_update) {
        c.session.enable_update = false;
    }
    if (o.keep_merge_parents) {
        c.session.keep_merge_parents = true;
    }
    if (!o.provider.empty()) {
        const bool judge_follows = c.judge == c.llm;
        c.llm = parse_provider_override(o.provider, c.llm);
        if (judge_follows) {
            c.judge = c.llm;
        }
    }
    if (!o.judge_provider.empty()) {
        c.judge = parse_provider_override(o.judge_provider, c.judge);
    }
    validate(c.session);
    return c;
}

std::string lineage_chain(const MemoryHypergraph& m, const PointId& id) {
    std::vector<std::string> links;
    std::vector<PointId> pending{id};
    std::set<PointId> seen;
    while (!pending.empty()) {
        const auto cur = pending.front();
        pending.erase(pending.begin());
        if (!seen.insert(cur).second) {
            continue;
        }
        const auto& p = m.point(cur);
        if (!p.lineage) {
            continue;
        }
        links.push_back(cur + " <- " + p.lineage->first + " + " + p.lineage->second);
        pending.push_back(p.lineage->first);
        pending.push_back(p.lineage->second);
    }
    std::string out;
    for (std::size_t i = 0; i < links.size(); ++i) {
        out += (i ? "; " : "") + links[i];
    }
    return out;
}

std::vector<const MemoryPoint*> ordered(const std::map<PointId, MemoryPoint>& points) {
    std::vector<const MemoryPoint*> out;
    for (const auto& [id, p] : points) {
        out.push_back(&p);
    }
    std::sort(out.begin(), out.end(), [](const auto* a, const auto* b) { return point_id_less(a->id, b->id); });
    return out;
}

std::string members(const MemoryHypergraph& m, const MemoryPoint& p) {
    std::vector<std::string> names;
    for (const auto& v : p.vertex_ids) {
        names.push_back(m.has_vertex(v) ? m.vertex(v).name : v);
    }
    std::sort(names.begin(), names.end());
    std::string out;
    for (std::size_t i = 0; i < names.size(); ++i) {
        out += (i ? "; " : "") + names[i];
    }
    return out;
}

/// Continuation lines of multi-line text are indented under their item.
std::string indented(const std::string& text) {
    std::string out;
    for (char c : text) {
        out += c;
        if (c == '\n') {
            out += "    ";
        }
    }
    return out;
}

}  // namespace

std::string render_inspection(const MemoryHypergraph& m, int step) {
    std::ostringstream out;
    char avg[32];
    std::snprintf(avg, sizeof avg, "%.2f", avg_entities_per_hyperedge(m));
    out << "Memory at step " << step << ": " << m.points().size() << " live points, " << m.retired().size()
        << " retired, " << m.vertices().size() << " vertices, avg entities per point " << avg << "\n";
    out << "\nPoints:\n";
    if (m.points().empty()) {
        out << "  (none)\n";
    }
    for (const auto* p : ordered(m.points())) {
        out << "[" << p->id << "] " << indented(p->description) << "\n";
        out << "  members (" << p->vertex_ids.size() << "): " << members(m, *p) << "\n";
        out << "  steps: created " << p->created_step << ", updated " << p->updated_step << "\n";
        if (p->lineage) {
            out << "  lineage: " << lineage_chain(m, p->id) << "\n";
        }
    }
    if (!m.retired().empty()) {
        out << "\nRetired:\n";
        for (const auto* p : ordered(m.retired())) {
            out << "[" << p->id << "] " << indented(p->description) << "\n";
            out << "  members (" << p->vertex_ids.size() << "): " << members(m, *p) << "\n";
            if (auto s = m.live_successor(p->id)) {
                out << "  merged into: " << *s << "\n";
            }
            if (p->lineage) {
                out << "  lineage: " << lineage_chain(m, p->id) << "\n";
            }
        }
    }
    out << "\nVertices:\n";
    if (m.vertices().empty()) {
        out << "  (none)\n";
    }
    for (const auto& [id, v] : m.vertices()) {
        out << "- " << v.name << " [" << id << "]: " << indented(v.description) << "\n";
        std::string chunks;
        for (const auto& c : v.chunk_ids) {
            chunks += (chunks.empty() ? "" : ", ") + c;
        }
        out << "  chunks: " << (chunks.empty() ? "(none)" : chunks) << "\n";
    }
    return out.str();
}

namespace {

int cmd_index(const ProjectConfig& c, const std::string& corpus, std::ostream& out, std::ostream& err) {
    const fs::path corpus_dir = corpus.empty() ? c.corpus : fs::path(corpus);
    auto llm = make_chat_provider(c.llm);
    auto embedder = make_embedding_provider(c.embedding);
    const auto prompts = make_prompt_library(c);
    const auto r = build_index(corpus_dir, c.index, c.index_params, *llm, *embedder, prompts);
    if (r.up_to_date) {
        out << "up-to-date: " << c.index.string() << "\n";
        return kExitOk;
    }
    for (const auto& w : r.report.warnings) {
        err << "warning: " << w << "\n";
    }
    out << "indexed " << r.documents << " documents: " << r.chunks << " chunks (" << r.report.chunks_succeeded
        << " extracted, " << r.report.skipped_chunks.size() << " skipped), " << r.nodes << " nodes, " << r.edges
        << " edges -> " << c.index.string() << "\n";
    return kExitOk;
}

fs::path default_trace_dir(const ProjectConfig& c, const std::string& query) {
    return c.traces / ("q-" + sha256_hex(query).substr(0, 16));
}

SessionTrace run_one(const std::string& query, const KnowledgeBase& kb, const ProjectConfig& c, bool stepwise,
                     const fs::path& trace_dir) {
    auto llm = make_chat_provider(c.llm);
    auto embedder = make_embedding_provider(c.embedding);
    const auto prompts = make_prompt_library(c);
    SessionOptions opts;
    opts.trace_dir = trace_dir;
    const SessionProviders providers{*llm, *embedder, prompts};
    auto trace = stepwise ? run_stepwise(query, kb, c.session, providers, opts)
                          : run_session(query, kb, c.session, providers, opts);
    write_records(trace_dir / "project.jsonl", {json{{"kind", "project"}, {"config", to_json(c)}}});
    return trace;
}

int cmd_query(const ProjectConfig& c, const std::string& query, const std::string& trace_dir, bool stepwise,
              std::ostream& out, std::ostream& err) {
    if (trim(query).empty()) {
        throw InvalidArgument("query text is empty");
    }
    const auto kb = load_index(c.index);
    const fs::path dir = trace_dir.empty() ? default_trace_dir(c, query) : fs::path(trace_dir);
    const auto trace = run_one(query, kb, c, stepwise, dir);
    if (stepwise) {
        for (std::size_t t = 0; t < trace.stepwise_answers.size(); ++t) {
            out << "[step " << t << "] " << trace.stepwise_answers[t] << "\n";
        }
    } else {
        out << trace.answer << "\n";
    }
    err << "trace: " << dir.string() << "\n";
    return kExitOk;
}

/// Runs sessions for manifest records that carry no prediction yet.
std::vector<json> answer_missing(std::vector<json> raw, const ProjectConfig& c, bool stepwise, std::ostream& err) {
    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (!raw[i].contains("prediction")) {
            todo.push_back(i);
        }
    }
    if (todo.empty()) {
        return raw;
    }
    const auto kb = load_index(c.index);
    std::atomic<std::size_t> next{0};
    std::mutex mu;
    auto worker = [&] {
        for (std::size_t k = next++; k < todo.size(); k = next++) {
            auto& rec = raw[todo[k]];
            const auto query = require_string(rec, "query");
            const auto id = require_string(rec, "query_id");
            const auto dir = fs::absolute(c.traces / ("eval-" + id));
            try {
                const auto trace = run_one(query, kb, c, stepwise, dir);
                std::lock_guard lock(mu);
                rec["prediction"] = trace.answer;
                rec["trace"] = dir.string();
            } catch (const Error& e) {
                std::lock_guard lock(mu);
                err << "record " << id << ": session failed: " << e.what() << "\n";
                rec["prediction"] = "";
                rec["trace"] = dir.string();
            }
        }
    };
    const auto threads = std::max<std::size_t>(1, std::min(c.eval.concurrency, todo.size()));
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < threads; ++t) {
        pool.emplace_back(worker);
    }
    worker();
    for (auto& t : pool) {
        t.join();
    }
    err << "ran " << todo.size() << " sessions for unanswered records\n";
    return raw;
}

int cmd_eval(ProjectConfig c, const std::string& manifest, const std::string& report_path, bool generative,
             bool stepwise, std::ostream& out, std::ostream& err) {
    const fs::path path(manifest);
    if (!fs::exists(path)) {
        throw ConfigError("results manifest '" + path.string() + "' does not exist");
    }
    if (generative) {
        c.eval.score_generative = true;
    }
    auto raw = read_records(path);
    const auto answered = answer_missing(raw, c, stepwise, err);
    const fs::path report = report_path.empty() ? path.parent_path() / "report.jsonl" : fs::path(report_path);
    std::vector<EvalRecord> records;
    for (const auto& r : answered) {
        records.push_back(eval_record_from_json(r, path.parent_path()));
    }
    if (answered != raw) {
        const auto answered_path = report.parent_path() / (report.stem().string() + ".answers.jsonl");
        write_results_manifest(answered_path, records);
        err << "answered manifest: " << answered_path.string() << "\n";
    }
    auto judge = make_chat_provider(c.judge);
    const auto prompts = make_prompt_library(c);
    const auto result = evaluate(records, *judge, prompts, c.eval);
    write_records(report, report_records(result));
    for (const auto& r : result.records) {
        for (const auto& e : r.errors) {
            err << "record " << r.query_id << ": " << e << "\n";
        }
    }
    out << format_summary(result);
    err << "report: " << report.string() << "\n";
    return kExitOk;
}

int cmd_inspect(const std::string& trace_dir, int step, bool final_step, std::ostream& out) {
    const fs::path dir(trace_dir);
    if (!fs::is_directory(dir)) {
        throw ConfigError("trace directory '" + dir.string() + "' does not exist");
    }
    const auto steps = available_snapshots(dir);
    if (steps.empty()) {
        throw ConfigError("trace '" + dir.string() + "' has no memory snapshots");
    }
    const int t = final_step ? steps.back() : step;
    if (std::find(steps.begin(), steps.end(), t) == steps.end()) {
        std::string list;
        for (int s : steps) {
            list += (list.empty() ? "" : ", ") + std::to_string(s);
        }
        throw ConfigError("no memory snapshot for step " + std::to_string(t) + "; available steps: " + list);
    }
    const auto m = MemoryHypergraph::from_records(read_records(snapshot_path(dir, t)));
    out << render_inspection(m, t);
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Hypergraph working memory for multi-step retrieval"};
    app.name("hypermem");
    app.require_subcommand(1);
    app.fallthrough();

    Overrides o;
    app.add_option("--config", o.config, "Project config file (JSON)");
    app.add_option("--strategy", o.strategy, "adaptive | global-only | local-only");
    app.add_option("--max-steps", o.max_steps, "Step cap")->check(CLI::PositiveNumber);
    app.add_flag("--no-merge", o.no_merge, "Disable merging");
    app.add_flag("--no-update", o.no_update, "Disable updates");
    app.add_flag("--keep-merge-parents", o.keep_merge_parents, "Keep merge parents live");
    app.add_flag("--stepwise", o.stepwise, "Answer after every step");
    app.add_option("--provider", o.provider, "Chat provider: scripted:PATH | heuristic | openai");
    app.add_option("--judge-provider", o.judge_provider, "Judge provider, same forms as --provider");
    app.add_flag("-v,--verbose", o.verbose, "Log progress to stderr");

    auto* index = app.add_subcommand("index", "Build the index from a corpus");
    std::string corpus;
    index->add_option("--corpus", corpus, "Corpus directory (*.txt)");

    auto* query = app.add_subcommand("query", "Answer a query and write its trace");
    std::string query_text;
    std::string trace_dir;
    query->add_option("text", query_text, "Query text")->required();
    query->add_option("--trace-dir", trace_dir, "Trace directory");

    auto* eval = app.add_subcommand("eval", "Judge and score a results manifest");
    std::string manifest;
    std::string report;
    bool generative = false;
    eval->add_option("manifest", manifest, "Results manifest (JSONL)")->required();
    eval->add_option("--report", report, "Report path");
    eval->add_flag("--generative", generative, "Also score comprehensiveness and diversity");

    auto* inspect = app.add_subcommand("inspect", "Show a memory snapshot of a trace");
    std::string inspect_dir;
    int step = 0;
    bool final_step = false;
    inspect->add_option("trace_dir", inspect_dir, "Trace directory")->required();
    auto* step_opt = inspect->add_option("--step", step, "Step number")->check(CLI::NonNegativeNumber);
    auto* final_opt = inspect->add_flag("--final", final_step, "Last step");
    step_opt->excludes(final_opt);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUserError;
    }
    if (inspect->parsed() && step_opt->count() == 0 && !final_step) {
        err << "error: inspect needs --step N or --final\n";
        return kExitUserError;
    }

    route_logs_to_stderr(o.verbose);
    try {
        if (inspect->parsed()) {
            return cmd_inspect(inspect_dir, step, final_step, out);
        }
        const auto config = resolve_config(o);
        if (index->parsed()) {
            return cmd_index(config, corpus, out, err);
        }
        if (query->parsed()) {
            return cmd_query(config, query_text, trace_dir, o.stepwise, out, err);
        }
        return cmd_eval(config, manifest, report, generative, o.stepwise, out, err);
    } catch (const ProviderError& e) {
        err << "error: " << e.what() << "\n";
        return kExitEnvironmentError;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUserError;
    } catch (const InvalidArgument& e) {
        err << "error: " << e.what() << "\n";
        return kExitUserError;
    } catch (const FormatError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUserError;
    } catch (const UnknownId& e) {
        err << "error: " << e.what() << "\n";
        return kExitUserError;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitEnvironmentError;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return kExitEnvironmentError;
    }
}

}  // namespace hypermem
