#include "hypermem/llm.hpp"

#include "hypermem/error.hpp"
#include "hypermem/text.hpp"

#include <spdlog/spdlog.h>

#include <numeric>
#include <thread>

namespace hypermem {

void validate(const ChatRequest& request) {
    if (request.temperature < 0.0) {
        throw InvalidArgument("temperature must be >= 0");
    }
    if (request.max_output_tokens <= 0) {
        throw InvalidArgument("max_output_tokens must be positive");
    }
    if (request.tag.empty()) {
        throw InvalidArgument("chat request needs a tag");
    }
}

ScriptedChatProvider::ScriptedChatProvider(std::vector<ChatFixture> fixtures) {
    for (auto& f : fixtures) {
        add(std::move(f));
    }
}

ScriptedChatProvider::ScriptedChatProvider(ScriptedChatProvider&& other) noexcept {
    std::lock_guard lock(other.mutex_);
    source_ = std::move(other.source_);
    exact_ = std::move(other.exact_);
    by_step_ = std::move(other.by_step_);
    by_tag_ = std::move(other.by_tag_);
    calls_ = std::move(other.calls_);
}

ScriptedChatProvider ScriptedChatProvider::from_file(const std::filesystem::path& path) {
    ScriptedChatProvider p;
    p.source_ = path.filename().string();
    for (const auto& r : read_records(path)) {
        ChatFixture f;
        f.tag = require_string(r, "tag");
        if (r.contains("step")) {
            f.step = static_cast<int>(require_int(r, "step"));
        }
        if (r.contains("seq")) {
            f.seq = static_cast<int>(require_int(r, "seq"));
        }
        f.response = require_string(r, "response");
        p.add(std::move(f));
    }
    return p;
}

void ScriptedChatProvider::add(ChatFixture f) {
    std::lock_guard lock(mutex_);
    if (f.step && f.seq) {
        exact_.insert_or_assign({f.tag, *f.step, *f.seq}, std::move(f.response));
    } else if (f.step) {
        by_step_.insert_or_assign({f.tag, *f.step}, std::move(f.response));
    } else {
        by_tag_.insert_or_assign(f.tag, std::move(f.response));
    }
}

ChatResponse ScriptedChatProvider::complete(const ChatRequest& request) {
    std::lock_guard lock(mutex_);
    const int seq = calls_[{request.tag, request.step}]++;
    if (auto it = exact_.find({request.tag, request.step, seq}); it != exact_.end()) {
        return {it->second, std::nullopt, std::nullopt};
    }
    if (auto it = by_step_.find({request.tag, request.step}); it != by_step_.end()) {
        return {it->second, std::nullopt, std::nullopt};
    }
    if (auto it = by_tag_.find(request.tag); it != by_tag_.end()) {
        return {it->second, std::nullopt, std::nullopt};
    }
    throw FixtureMiss(request.tag, "no response for step " + std::to_string(request.step) + " seq " +
                                       std::to_string(seq));
}

void ScriptedChatProvider::reset() {
    std::lock_guard lock(mutex_);
    calls_.clear();
}

OpenAIChatProvider::OpenAIChatProvider(HttpEndpoint endpoint, std::string model, RetryPolicy retry)
    : endpoint_(std::move(endpoint)), model_(std::move(model)), retry_(retry) {}

ChatResponse OpenAIChatProvider::complete(const ChatRequest& request) {
    json messages = json::array();
    for (const auto& m : request.messages) {
        messages.push_back({{"role", m.role}, {"content", m.content}});
    }
    const json body = {{"model", model_},
                       {"messages", messages},
                       {"temperature", request.temperature},
                       {"max_tokens", request.max_output_tokens}};
    const std::string payload = body.dump();
    auto backoff = retry_.initial_backoff;
    std::string last_error;
    for (int attempt = 0; attempt <= retry_.max_retries; ++attempt) {
        if (attempt > 0) {
            spdlog::warn("chat request '{}' failed ({}); retry {} in {} ms", request.tag, last_error, attempt,
                         backoff.count());
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
        HttpResponse res;
        try {
            res = post_json(endpoint_, "/chat/completions", payload);
        } catch (const ProviderError& e) {
            last_error = e.what();
            continue;
        }
        if (res.status != 200) {
            last_error = "HTTP " + std::to_string(res.status);
            if (is_retryable_status(res.status)) {
                continue;
            }
            throw ProviderError("chat endpoint returned " + last_error + ": " + res.body.substr(0, 300));
        }
        try {
            const auto parsed = json::parse(res.body);
            ChatResponse out;
            const auto& content = parsed.at("choices").at(0).at("message").at("content");
            out.text = content.is_string() ? content.get<std::string>() : std::string();
            if (parsed.contains("usage") && parsed["usage"].is_object()) {
                out.prompt_tokens = parsed["usage"].value("prompt_tokens", 0);
                out.completion_tokens = parsed["usage"].value("completion_tokens", 0);
            }
            return out;
        } catch (const json::exception& e) {
            throw ProviderError(std::string("malformed chat response: ") + e.what());
        }
    }
    throw ProviderError("chat request '" + request.tag + "' failed after retries: " + last_error);
}

json to_json(const Exchange& e) {
    json messages = json::array();
    for (const auto& m : e.messages) {
        messages.push_back({{"role", m.role}, {"content", m.content}});
    }
    return {{"tag", e.tag},
            {"step", e.step},
            {"seq", e.seq},
            {"messages", messages},
            {"response", e.response},
            {"prompt_tokens", e.prompt_tokens},
            {"completion_tokens", e.completion_tokens}};
}

Exchange exchange_from_json(const json& j) {
    Exchange e;
    e.tag = require_string(j, "tag");
    e.step = static_cast<int>(require_int(j, "step"));
    e.seq = static_cast<int>(require_int(j, "seq"));
    for (const auto& m : require_field(j, "messages")) {
        e.messages.push_back({require_string(m, "role"), require_string(m, "content")});
    }
    e.response = require_string(j, "response");
    e.prompt_tokens = static_cast<int>(require_int(j, "prompt_tokens"));
    e.completion_tokens = static_cast<int>(require_int(j, "completion_tokens"));
    return e;
}

void ExchangeLog::append(Exchange e, std::chrono::milliseconds latency) {
    std::lock_guard lock(mutex_);
    exchanges_.push_back(std::move(e));
    latencies_.push_back(latency);
}

std::vector<Exchange> ExchangeLog::exchanges() const {
    std::lock_guard lock(mutex_);
    return exchanges_;
}

std::vector<std::chrono::milliseconds> ExchangeLog::latencies() const {
    std::lock_guard lock(mutex_);
    return latencies_;
}

int ExchangeLog::next_seq(const std::string& tag, int step) const {
    std::lock_guard lock(mutex_);
    int n = 0;
    for (const auto& e : exchanges_) {
        if (e.tag == tag && e.step == step) {
            ++n;
        }
    }
    return n;
}

int ExchangeLog::total_prompt_tokens() const {
    std::lock_guard lock(mutex_);
    return std::accumulate(exchanges_.begin(), exchanges_.end(), 0,
                           [](int acc, const Exchange& e) { return acc + e.prompt_tokens; });
}

int ExchangeLog::total_completion_tokens() const {
    std::lock_guard lock(mutex_);
    return std::accumulate(exchanges_.begin(), exchanges_.end(), 0,
                           [](int acc, const Exchange& e) { return acc + e.completion_tokens; });
}

std::size_t ExchangeLog::size() const {
    std::lock_guard lock(mutex_);
    return exchanges_.size();
}

std::string chat(const ChatRequest& request, ChatProvider& provider, ExchangeLog* log) {
    validate(request);
    const auto started = std::chrono::steady_clock::now();
    ChatResponse response = provider.complete(request);
    const auto latency =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started);
    if (log != nullptr) {
        Exchange e;
        e.tag = request.tag;
        e.step = request.step;
        e.seq = log->next_seq(request.tag, request.step);
        e.messages = request.messages;
        e.response = response.text;
        if (response.prompt_tokens) {
            e.prompt_tokens = *response.prompt_tokens;
        } else {
            for (const auto& m : request.messages) {
                e.prompt_tokens += static_cast<int>(count_tokens(m.content));
            }
        }
        e.completion_tokens = response.completion_tokens ? *response.completion_tokens
                                                         : static_cast<int>(count_tokens(response.text));
        log->append(std::move(e), latency);
    }
    return std::move(response.text);
}

}  // namespace hypermem
