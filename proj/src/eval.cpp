#include "hypermem/eval.hpp"

#include "hypermem/error.hpp"
#include "hypermem/session.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <map>
#include <thread>

namespace hypermem {

namespace fs = std::filesystem;

json to_json(const EvalRecord& r) {
    json j = {{"query_id", r.query_id}, {"query", r.query}, {"prediction", r.prediction}};
    if (r.query_type) {
        j["query_type"] = *r.query_type;
    }
    if (r.reference) {
        j["reference"] = *r.reference;
    }
    if (r.trace) {
        j["trace"] = r.trace->string();
    }
    if (r.source_passage) {
        j["source_passage"] = *r.source_passage;
    }
    return j;
}

EvalRecord eval_record_from_json(const json& j, const fs::path& base_dir) {
    EvalRecord r;
    r.query_id = require_string(j, "query_id");
    r.query = require_string(j, "query");
    r.prediction = require_string(j, "prediction");
    auto opt = [&](const char* key) -> std::optional<std::string> {
        if (j.contains(key) && !j[key].is_null()) {
            return require_string(j, key);
        }
        return std::nullopt;
    };
    r.query_type = opt("query_type");
    r.reference = opt("reference");
    r.source_passage = opt("source_passage");
    if (auto t = opt("trace")) {
        fs::path p(*t);
        r.trace = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
    }
    return r;
}

std::vector<EvalRecord> read_results_manifest(const fs::path& path) {
    if (!fs::exists(path)) {
        throw ConfigError("results manifest '" + path.string() + "' does not exist");
    }
    std::vector<EvalRecord> out;
    for (const auto& r : read_records(path)) {
        out.push_back(eval_record_from_json(r, path.parent_path()));
    }
    return out;
}

void write_results_manifest(const fs::path& path, const std::vector<EvalRecord>& records) {
    std::vector<json> out;
    for (const auto& r : records) {
        out.push_back(to_json(r));
    }
    write_records(path, out);
}

namespace {

/// Sum in ascending order so the result does not depend on input order.
double order_free_mean(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    double sum = 0.0;
    for (double v : values) {
        sum += v;
    }
    return sum / static_cast<double>(values.size());
}

}  // namespace

std::vector<StatsRow> memory_stats(const std::vector<TraceStat>& stats) {
    std::map<std::string, std::vector<const TraceStat*>> groups;
    for (const auto& s : stats) {
        groups[s.group].push_back(&s);
    }
    std::vector<StatsRow> rows;
    for (const auto& [group, members] : groups) {
        StatsRow row;
        row.group = group;
        row.traces = members.size();
        std::vector<double> values;
        std::size_t correct = 0;
        for (const auto* s : members) {
            values.push_back(s->avg_entities);
            if (s->correct) {
                ++row.judged;
                correct += *s->correct ? 1 : 0;
            }
        }
        row.mean_avg_entities = order_free_mean(values);
        if (row.judged > 0) {
            row.accuracy = static_cast<double>(correct) / static_cast<double>(row.judged);
        }
        rows.push_back(row);
    }
    return rows;
}

std::size_t EvalReport::unscored() const {
    std::size_t n = 0;
    for (const auto& r : rows) {
        if (r.group == "all") {
            n += r.comprehensiveness_unscored + r.diversity_unscored;
        }
    }
    return n;
}

std::size_t EvalReport::failed() const {
    return static_cast<std::size_t>(
        std::count_if(records.begin(), records.end(), [](const auto& r) { return !r.errors.empty(); }));
}

namespace {

RecordResult evaluate_one(const EvalRecord& rec, int index, ChatProvider& judge, const PromptLibrary& prompts,
                          const EvalOptions& options, ExchangeLog* log) {
    RecordResult out;
    out.query_id = rec.query_id;
    out.group = rec.query_type.value_or("unlabeled");
    LlmGateway gateway(judge, prompts, log);
    gateway.set_step(index);
    try {
        if (rec.trace) {
            const auto steps = available_snapshots(*rec.trace);
            if (steps.empty()) {
                out.errors.push_back("trace '" + rec.trace->string() + "' has no memory snapshot");
            } else {
                const auto m = MemoryHypergraph::from_records(read_records(snapshot_path(*rec.trace, steps.back())));
                out.avg_entities = avg_entities_per_hyperedge(m);
            }
        }
        if (options.judge_accuracy && rec.reference) {
            const auto j = gateway.judge_accuracy(rec.prediction, *rec.reference);
            out.correct = j.verdict;
            out.judge_parse_failed = j.parse_failed;
        }
        if (options.score_generative) {
            const auto source = rec.source_passage.value_or("");
            out.comprehensiveness =
                gateway.score_generative(rec.prediction, rec.query, source, ScoreDimension::comprehensiveness).score;
            out.diversity = gateway.score_generative(rec.prediction, rec.query, source, ScoreDimension::diversity).score;
        }
    } catch (const Error& e) {
        out.errors.push_back(e.what());
    }
    for (const auto& w : gateway.warnings()) {
        out.errors.push_back(w);
    }
    return out;
}

MetricRow aggregate(const std::string& group, const std::vector<const RecordResult*>& members,
                    const EvalOptions& options) {
    MetricRow row;
    row.group = group;
    row.records = members.size();
    long correct = 0;
    long comp_sum = 0;
    long div_sum = 0;
    std::vector<double> nv;
    for (const auto* r : members) {
        if (r->correct) {
            ++row.judged;
            correct += *r->correct ? 1 : 0;
        }
        if (options.score_generative) {
            if (r->comprehensiveness) {
                ++row.comprehensiveness_scored;
                comp_sum += *r->comprehensiveness;
            } else {
                ++row.comprehensiveness_unscored;
            }
            if (r->diversity) {
                ++row.diversity_scored;
                div_sum += *r->diversity;
            } else {
                ++row.diversity_unscored;
            }
        }
        if (r->avg_entities) {
            nv.push_back(*r->avg_entities);
        }
    }
    if (row.judged > 0) {
        row.accuracy = static_cast<double>(correct) / static_cast<double>(row.judged);
    }
    if (row.comprehensiveness_scored > 0) {
        row.mean_comprehensiveness =
            static_cast<double>(comp_sum) / static_cast<double>(row.comprehensiveness_scored);
    }
    if (row.diversity_scored > 0) {
        row.mean_diversity = static_cast<double>(div_sum) / static_cast<double>(row.diversity_scored);
    }
    row.with_memory = nv.size();
    if (!nv.empty()) {
        row.mean_avg_entities = order_free_mean(nv);
    }
    return row;
}

}  // namespace

EvalReport evaluate(const std::vector<EvalRecord>& records, ChatProvider& judge, const PromptLibrary& prompts,
                    const EvalOptions& options, ExchangeLog* log) {
    EvalReport report;
    if (records.empty()) {
        return report;
    }
    report.records.resize(records.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < records.size(); i = next++) {
            report.records[i] = evaluate_one(records[i], static_cast<int>(i), judge, prompts, options, log);
        }
    };
    const auto threads = std::max<std::size_t>(1, std::min(options.concurrency, records.size()));
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < threads; ++t) {
        pool.emplace_back(worker);
    }
    worker();
    for (auto& t : pool) {
        t.join();
    }

    std::vector<const RecordResult*> all;
    std::map<std::string, std::vector<const RecordResult*>> groups;
    for (const auto& r : report.records) {
        all.push_back(&r);
        groups[r.group].push_back(&r);
    }
    report.rows.push_back(aggregate("all", all, options));
    for (const auto& [group, members] : groups) {
        report.rows.push_back(aggregate(group, members, options));
    }
    return report;
}

namespace {

json opt(const std::optional<double>& v) {
    return v ? json(*v) : json(nullptr);
}

json opt(const std::optional<int>& v) {
    return v ? json(*v) : json(nullptr);
}

std::string fmt(const std::optional<double>& v, int precision = 3) {
    if (!v) {
        return "-";
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", precision, *v);
    return buf;
}

}  // namespace

std::vector<json> report_records(const EvalReport& report) {
    std::vector<json> out;
    for (const auto& row : report.rows) {
        out.push_back({{"kind", "group"},
                       {"group", row.group},
                       {"records", row.records},
                       {"judged", row.judged},
                       {"accuracy", opt(row.accuracy)},
                       {"mean_comprehensiveness", opt(row.mean_comprehensiveness)},
                       {"comprehensiveness_scored", row.comprehensiveness_scored},
                       {"comprehensiveness_unscored", row.comprehensiveness_unscored},
                       {"mean_diversity", opt(row.mean_diversity)},
                       {"diversity_scored", row.diversity_scored},
                       {"diversity_unscored", row.diversity_unscored},
                       {"mean_avg_entities_per_hyperedge", opt(row.mean_avg_entities)},
                       {"with_memory", row.with_memory}});
    }
    for (const auto& r : report.records) {
        out.push_back({{"kind", "record"},
                       {"query_id", r.query_id},
                       {"group", r.group},
                       {"correct", r.correct ? json(*r.correct) : json(nullptr)},
                       {"judge_parse_failed", r.judge_parse_failed},
                       {"comprehensiveness", opt(r.comprehensiveness)},
                       {"diversity", opt(r.diversity)},
                       {"avg_entities_per_hyperedge", opt(r.avg_entities)},
                       {"errors", r.errors}});
    }
    return out;
}

std::string format_summary(const EvalReport& report) {
    std::string out;
    char line[256];
    std::snprintf(line, sizeof line, "%-16s %8s %9s %9s %9s %9s\n", "group", "records", "accuracy", "compr.",
                  "divers.", "avg-N_v");
    out += line;
    for (const auto& r : report.rows) {
        std::snprintf(line, sizeof line, "%-16s %8zu %9s %9s %9s %9s\n", r.group.c_str(), r.records,
                      fmt(r.accuracy).c_str(), fmt(r.mean_comprehensiveness, 2).c_str(),
                      fmt(r.mean_diversity, 2).c_str(), fmt(r.mean_avg_entities, 2).c_str());
        out += line;
    }
    out += "unscored (excluded from means): " + std::to_string(report.unscored()) + "\n";
    out += "records with errors: " + std::to_string(report.failed()) + "\n";
    return out;
}

}  // namespace hypermem
