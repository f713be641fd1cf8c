#pragma once

#include "hypermem/llm.hpp"

#include <cstddef>
#include <string>

namespace hypermem {

struct HeuristicOptions {
    /// Memory is judged sufficient once it holds this many live points;
    /// 0 means never.
    std::size_t sufficient_after_points = 0;
    /// Cap on insertions proposed per evolution turn.
    std::size_t max_inserts = 4;
};

/// Deterministic rule-based stand-in for a chat model, driven by the
/// structured ChatRequest::context rather than the prompt prose. Used for
/// offline smoke runs and synthetic property tests; it is not a model of
/// answer quality.
///
///  - extract: capitalized word runs are entities; consecutive entities in a
///    sentence are related by that sentence.
///  - concerns: one probe outside memory plus one per most recent point.
///  - evolve: inserts a point for each retrieved relation whose endpoints
///    share no live point, and updates a point when a retrieved relation
///    restates a covered pair.
///  - merge: pairs live points that share an entity, each point at most once.
///  - judge: TRUE when the prediction contains the reference.
class HeuristicChatProvider : public ChatProvider {
public:
    explicit HeuristicChatProvider(HeuristicOptions options = {}) : options_(options) {}
    ChatResponse complete(const ChatRequest& request) override;
    std::string describe() const override { return "heuristic"; }

private:
    HeuristicOptions options_;
};

}  // namespace hypermem
