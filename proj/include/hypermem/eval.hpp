#pragma once

#include "hypermem/gateway.hpp"
#include "hypermem/llm.hpp"
#include "hypermem/prompts.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace hypermem {

/// One answered query of a results manifest.
struct EvalRecord {
    std::string query_id;
    std::string query;
    std::optional<std::string> query_type;  // e.g. "primitive" | "sense-making"
    std::optional<std::string> reference;
    std::string prediction;
    std::optional<std::filesystem::path> trace;  // session trace directory
    std::optional<std::string> source_passage;  // context for generative scoring
};

json to_json(const EvalRecord& r);
EvalRecord eval_record_from_json(const json& j, const std::filesystem::path& base_dir = {});

/// Records {query_id, query, prediction, query_type?, reference?, trace?,
/// source_passage?}. Relative trace paths resolve against the manifest's
/// directory.
std::vector<EvalRecord> read_results_manifest(const std::filesystem::path& path);
void write_results_manifest(const std::filesystem::path& path, const std::vector<EvalRecord>& records);

/// Input row of memory_stats: one final memory's Avg-N_v and its verdict.
struct TraceStat {
    std::string group;
    double avg_entities = 0.0;
    std::optional<bool> correct;
};

struct StatsRow {
    std::string group;
    std::size_t traces = 0;
    double mean_avg_entities = 0.0;
    std::optional<double> accuracy;  // over judged traces
    std::size_t judged = 0;

    bool operator==(const StatsRow&) const = default;
};

/// Per-group mean Avg-N_v and accuracy, ordered by group name. Independent
/// of input order.
std::vector<StatsRow> memory_stats(const std::vector<TraceStat>& stats);

struct RecordResult {
    std::string query_id;
    std::string group;
    std::optional<bool> correct;
    bool judge_parse_failed = false;
    std::optional<int> comprehensiveness;
    std::optional<int> diversity;
    std::optional<double> avg_entities;
    std::vector<std::string> errors;
};

struct MetricRow {
    std::string group;  // "all" for the overall row
    std::size_t records = 0;
    std::size_t judged = 0;
    std::optional<double> accuracy;
    std::optional<double> mean_comprehensiveness;
    std::size_t comprehensiveness_scored = 0;
    std::size_t comprehensiveness_unscored = 0;
    std::optional<double> mean_diversity;
    std::size_t diversity_scored = 0;
    std::size_t diversity_unscored = 0;
    std::optional<double> mean_avg_entities;
    std::size_t with_memory = 0;
};

struct EvalReport {
    std::vector<RecordResult> records;  // manifest order
    std::vector<MetricRow> rows;        // "all" first, then groups by name
    std::size_t unscored() const;
    std::size_t failed() const;
};

struct EvalOptions {
    bool judge_accuracy = true;
    bool score_generative = false;
    std::size_t concurrency = 4;
};

/// Judges and scores every record. The judge sees record i as step i, so
/// scripted fixtures are keyed by record index. Records without a reference
/// are not judged; unscored replies are excluded from means and counted.
/// A failing record is reported and does not stop the batch.
EvalReport evaluate(const std::vector<EvalRecord>& records, ChatProvider& judge, const PromptLibrary& prompts,
                    const EvalOptions& options = {}, ExchangeLog* log = nullptr);

std::vector<json> report_records(const EvalReport& report);
std::string format_summary(const EvalReport& report);

}  // namespace hypermem
