#pragma once

#include "hypermem/http.hpp"
#include "hypermem/records.hpp"

#include <chrono>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

namespace hypermem {

struct ChatMessage {
    std::string role;  // "system" | "user" | "assistant"
    std::string content;

    bool operator==(const ChatMessage&) const = default;
};

inline constexpr double kDefaultTemperature = 0.8;
inline constexpr int kDefaultMaxOutputTokens = 2048;

struct ChatRequest {
    std::vector<ChatMessage> messages;
    double temperature = kDefaultTemperature;
    int max_output_tokens = kDefaultMaxOutputTokens;
    /// Prompt role label ("sufficiency", "evolve", "judge", ...). Used for
    /// tracing and scripted fixture lookup.
    std::string tag;
    /// Session step (or record ordinal for offline stages).
    int step = 0;
    /// Structured view of what the prompt renders. Never sent over the wire;
    /// rule-based providers read it instead of parsing prose.
    json context = json::object();
};

/// Throws InvalidArgument for a negative temperature, non-positive token cap,
/// or an empty tag.
void validate(const ChatRequest& request);

struct ChatResponse {
    std::string text;
    std::optional<int> prompt_tokens;      // provider usage, when reported
    std::optional<int> completion_tokens;
};

class ChatProvider {
public:
    virtual ~ChatProvider() = default;
    virtual ChatResponse complete(const ChatRequest& request) = 0;
    virtual std::string describe() const = 0;
};

/// One fixture: the reply for the `seq`-th call (0-based) carrying `tag` at
/// `step`. Omitted step/seq act as wildcards.
struct ChatFixture {
    std::string tag;
    std::optional<int> step;
    std::optional<int> seq;
    std::string response;
};

/// Deterministic playback keyed by (tag, step, sequence-within-step).
/// Lookup order: exact, then (tag, step, *), then (tag, *, *). A miss raises
/// FixtureMiss naming the tag.
class ScriptedChatProvider : public ChatProvider {
public:
    ScriptedChatProvider() = default;
    explicit ScriptedChatProvider(std::vector<ChatFixture> fixtures);
    ScriptedChatProvider(ScriptedChatProvider&& other) noexcept;
    /// Records: {"tag": str, "step"?: int, "seq"?: int, "response": str}.
    static ScriptedChatProvider from_file(const std::filesystem::path& path);

    void add(ChatFixture fixture);
    ChatResponse complete(const ChatRequest& request) override;
    std::string describe() const override { return "scripted:" + source_; }
    /// Forgets per-(tag, step) call counters.
    void reset();

private:
    std::string source_ = "inline";
    std::mutex mutex_;
    std::map<std::tuple<std::string, int, int>, std::string> exact_;
    std::map<std::pair<std::string, int>, std::string> by_step_;
    std::map<std::string, std::string> by_tag_;
    std::map<std::pair<std::string, int>, int> calls_;
};

struct RetryPolicy {
    int max_retries = 4;
    std::chrono::milliseconds initial_backoff{500};
};

/// OpenAI-compatible chat-completions client with bounded exponential retry.
class OpenAIChatProvider : public ChatProvider {
public:
    OpenAIChatProvider(HttpEndpoint endpoint, std::string model, RetryPolicy retry = {});
    ChatResponse complete(const ChatRequest& request) override;
    std::string describe() const override { return "openai:" + model_; }

private:
    HttpEndpoint endpoint_;
    std::string model_;
    RetryPolicy retry_;
};

/// A request/response pair as persisted in session traces.
struct Exchange {
    std::string tag;
    int step = 0;
    int seq = 0;
    std::vector<ChatMessage> messages;
    std::string response;
    int prompt_tokens = 0;
    int completion_tokens = 0;

    bool operator==(const Exchange&) const = default;
};

json to_json(const Exchange& e);
Exchange exchange_from_json(const json& j);

/// Append-only, thread-safe log of every LLM call in a session or batch.
/// Wall-clock latency is kept apart from the exchanges so that exchanges stay
/// reproducible under deterministic providers.
class ExchangeLog {
public:
    void append(Exchange e, std::chrono::milliseconds latency);
    std::vector<Exchange> exchanges() const;
    std::vector<std::chrono::milliseconds> latencies() const;
    int next_seq(const std::string& tag, int step) const;
    int total_prompt_tokens() const;
    int total_completion_tokens() const;
    std::size_t size() const;

private:
    mutable std::mutex mutex_;
    std::vector<Exchange> exchanges_;
    std::vector<std::chrono::milliseconds> latencies_;
};

/// Sends `request`, appends the exchange to `log` (when given) and returns
/// the assistant text. Token counts fall back to the tokenizer when the
/// provider reports no usage.
std::string chat(const ChatRequest& request, ChatProvider& provider, ExchangeLog* log);

}  // namespace hypermem
