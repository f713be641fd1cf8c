#pragma once

#include "hypermem/gateway.hpp"
#include "hypermem/index.hpp"
#include "hypermem/memory.hpp"
#include "hypermem/retrieval.hpp"

#include <chrono>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace hypermem {

enum class Strategy { adaptive, global_only, local_only };

std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& s);

struct SessionConfig {
    int max_steps = 6;
    std::size_t max_subqueries = 3;
    RetrievalParams retrieval;
    Strategy strategy = Strategy::adaptive;
    bool enable_update = true;
    bool enable_merge = true;
    bool keep_merge_parents = false;
    std::size_t chunk_budget = 10;
    bool forced_answer_every_step = false;
    double temperature = kDefaultTemperature;
    int max_output_tokens = kDefaultMaxOutputTokens;

    bool operator==(const SessionConfig&) const = default;
};

/// Throws ConfigError for out-of-range values.
void validate(const SessionConfig& config);
json to_json(const SessionConfig& config);
/// Missing keys keep their defaults; unknown keys are rejected.
SessionConfig session_config_from_json(const json& j);

/// One subquery's retrieval as executed.
struct RetrievalRecord {
    Subquery subquery;                      // after strategy enforcement and anchor remapping
    std::optional<PointId> requested_anchor;  // anchor before remapping, when it differed
    bool fell_back_to_global = false;
    std::string note;
    std::vector<EntityId> entities;
    std::vector<EdgeId> relations;
    std::vector<ChunkId> chunks;
};

struct StepRecord {
    int step = 0;
    bool seed = false;
    std::optional<bool> sufficient;  // verdict judged before this step's retrieval
    std::vector<Concern> concerns;
    std::vector<RetrievalRecord> retrievals;
    MemoryDelta delta;
    std::vector<std::string> dropped;
    DeltaReport report;
    std::optional<std::string> answer;  // forced answers only
    std::vector<std::string> warnings;
    int prompt_tokens = 0;
    int completion_tokens = 0;
};

json to_json(const StepRecord& s);
StepRecord step_record_from_json(const json& j);

struct SessionTrace {
    std::string query;
    SessionConfig config;
    std::string llm;       // provider descriptions
    std::string embedder;
    std::vector<StepRecord> steps;
    std::vector<MemoryHypergraph> snapshots;  // memory after each step
    std::vector<Exchange> exchanges;
    std::vector<std::chrono::milliseconds> latencies;
    std::string answer;
    std::string termination;  // "sufficient" | "step-cap"
    std::vector<std::string> stepwise_answers;

    const MemoryHypergraph* final_memory() const { return snapshots.empty() ? nullptr : &snapshots.back(); }
};

struct SessionProviders {
    ChatProvider& llm;
    EmbeddingProvider& embedder;
    const PromptLibrary& prompts;
};

/// What the orchestrator saw when it ran one retrieval; for auditing tools.
struct RetrievalObservation {
    int step = 0;
    const Subquery& subquery;
    const MemoryHypergraph& memory;
    const KnowledgeGraph& graph;
    const std::set<EntityId>& candidates;
    const std::set<EntityId>& result;
};

using RetrievalObserver = std::function<void(const RetrievalObservation&)>;

struct SessionOptions {
    /// When set, the trace is persisted here (also when the session fails).
    std::optional<std::filesystem::path> trace_dir;
    bool write_timing = true;
    RetrievalObserver observer;
};

/// The multi-step loop. Step 0 retrieves with the target query as a global
/// seed and evolves memory. Each later step t judges sufficiency, and unless
/// memory suffices raises concerns, generates subqueries, retrieves and
/// evolves; at t == max_steps the loop stops without judging. The graph is
/// copied per session, so forced insertions never leak into `kb`.
SessionTrace run_session(const std::string& query, const KnowledgeBase& kb, const SessionConfig& config,
                         const SessionProviders& providers, const SessionOptions& options = {});

/// Like run_session but never judges sufficiency: after every step
/// 0..max_steps-1 an answer (tag "answer", step t) is generated from the
/// memory of that step.
SessionTrace run_stepwise(const std::string& query, const KnowledgeBase& kb, const SessionConfig& config,
                          const SessionProviders& providers, const SessionOptions& options = {});

/// Re-applies every recorded delta from an empty memory, checking each
/// step's snapshot. Throws ReplayDivergence at the first mismatch.
MemoryHypergraph replay_trace(const SessionTrace& trace, const KnowledgeGraph& g);

/// Trace directory: config.jsonl, steps.jsonl, memory/step-NNN.jsonl,
/// exchanges.jsonl, answer.jsonl and, optionally, timing.jsonl.
void write_trace(const SessionTrace& trace, const std::filesystem::path& dir, bool write_timing = true);
SessionTrace load_trace(const std::filesystem::path& dir);

std::filesystem::path snapshot_path(const std::filesystem::path& trace_dir, int step);
/// Steps with a memory snapshot in `trace_dir`, ascending.
std::vector<int> available_snapshots(const std::filesystem::path& trace_dir);

}  // namespace hypermem
