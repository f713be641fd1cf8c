#pragma once

#include "hypermem/llm.hpp"
#include "hypermem/memory.hpp"
#include "hypermem/prompts.hpp"
#include "hypermem/retrieval.hpp"

#include <optional>
#include <string>
#include <vector>

namespace hypermem {

struct Concern {
    std::string text;
    std::optional<PointId> target;

    bool operator==(const Concern&) const = default;
};

json to_json(const Concern& c);

/// Output of the two evolution turns. `dropped` lists proposals rejected
/// during validation, each with its reason.
struct DeltaProposal {
    MemoryDelta delta;
    std::vector<std::string> dropped;
};

struct EvolutionSwitches {
    bool enable_update = true;
    bool enable_merge = true;
};

/// Verdict of the accuracy judge.
struct Judgement {
    bool verdict = false;
    bool parse_failed = false;
};

enum class ScoreDimension { comprehensiveness, diversity };
std::string to_string(ScoreDimension d);

struct Score {
    std::optional<int> level;
    std::optional<int> score;  // empty when unscored
};

/// Structured view of a memory, as handed to providers in ChatRequest::context.
json memory_context(const MemoryHypergraph& m);

/// Every prompt role of the engine on top of one chat provider.
///
/// Each call is tagged with its role and the current step. A structured
/// reply that does not parse gets one reprompt with a format reminder; a
/// second failure degrades as documented per call and is recorded in
/// warnings().
class LlmGateway {
public:
    LlmGateway(ChatProvider& provider, const PromptLibrary& prompts, ExchangeLog* log = nullptr,
               double temperature = kDefaultTemperature, int max_output_tokens = kDefaultMaxOutputTokens);

    void set_step(int step) { step_ = step; }
    int step() const noexcept { return step_; }

    /// Degrades to "not sufficient".
    bool judge_sufficiency(const MemoryHypergraph& m, const std::string& query);

    /// Targets naming a point that is not live are dropped (the concern
    /// stays, untargeted). Degrades to an empty list.
    std::vector<Concern> raise_concerns(const MemoryHypergraph& m, const std::string& query,
                                        std::size_t max_concerns);

    /// At most `max_subqueries`, in reply order. A subquery is local exactly
    /// when its concern is targeted. No concerns means one global subquery
    /// carrying the target query itself (no LLM call). Degrades to one
    /// subquery per concern using the concern text.
    std::vector<Subquery> generate_subqueries(const std::vector<Concern>& concerns, const MemoryHypergraph& m,
                                              const std::string& query, std::size_t max_subqueries);

    /// Turn one ("evolve"): updates and insertions from the evidence. Turn
    /// two ("merge"): merges over the memory as it will look after turn one,
    /// skipped when merging is disabled or fewer than two points would be
    /// live. Invalid items are dropped individually.
    DeltaProposal propose_memory_delta(const MemoryHypergraph& m, const KnowledgeGraph& g,
                                       const std::vector<Evidence>& evidence, const std::string& query,
                                       const EvolutionSwitches& switches = {});

    /// Answer text, verbatim.
    std::string generate_response(const MemoryHypergraph& m, const std::string& query,
                                  const std::vector<Chunk>& chunks);

    /// Degrades to FALSE with parse_failed set.
    Judgement judge_accuracy(const std::string& prediction, const std::string& reference);

    /// Two-step score; unscored when the reply stays unparseable or outside
    /// the chosen level's range.
    Score score_generative(const std::string& prediction, const std::string& query,
                           const std::string& source_passage, ScoreDimension dimension);

    const std::vector<std::string>& warnings() const noexcept { return warnings_; }
    void clear_warnings() { warnings_.clear(); }

private:
    template <typename T, typename Parse>
    std::optional<T> ask(const std::string& tag, const std::string& templ, const std::map<std::string, std::string>& vars,
                         const json& context, const std::string& format, Parse&& parse);
    std::string send(const std::string& tag, std::vector<ChatMessage> messages, const json& context);

    ChatProvider& provider_;
    const PromptLibrary& prompts_;
    ExchangeLog* log_;
    double temperature_;
    int max_output_tokens_;
    int step_ = 0;
    std::vector<std::string> warnings_;
};

/// The union of chunk provenance over the memory's vertices, ranked by
/// cosine to `query` (ties by id) and cut to `budget`.
std::vector<Chunk> select_answer_chunks(const MemoryHypergraph& m, const Vector& query, std::size_t budget,
                                        const VectorIndex& chunk_index, const ChunkStore& chunks);

inline constexpr const char* kNoChunksText = "(no source passages)";

std::string render_chunks(const std::vector<Chunk>& chunks);

}  // namespace hypermem
