#include "hypermem/config.hpp"

#include "hypermem/embedding_providers.hpp"
#include "hypermem/error.hpp"
#include "hypermem/heuristic_provider.hpp"

#include <cstdlib>
#include <set>

namespace hypermem {

namespace fs = std::filesystem;

namespace {

void reject_unknown(const json& j, const char* section, std::initializer_list<const char*> known) {
    if (!j.is_object()) {
        throw ConfigError(std::string("config section '") + section + "' must be an object");
    }
    const std::set<std::string> allowed(known.begin(), known.end());
    for (const auto& [key, value] : j.items()) {
        if (allowed.count(key) == 0) {
            throw ConfigError(std::string("unknown key '") + key + "' in config section '" + section + "'");
        }
    }
}

fs::path resolve(const fs::path& p, const fs::path& base) {
    return p.is_relative() && !base.empty() ? base / p : p;
}

ChatProviderSpec chat_spec(const json& j, ChatProviderSpec spec, const fs::path& base, const char* section) {
    reject_unknown(j, section,
                   {"kind", "base_url", "model", "api_key_env", "fixtures", "sufficient_after_points"});
    spec.kind = j.value("kind", spec.kind);
    spec.base_url = j.value("base_url", spec.base_url);
    spec.model = j.value("model", spec.model);
    spec.api_key_env = j.value("api_key_env", spec.api_key_env);
    if (j.contains("fixtures")) {
        spec.fixtures = resolve(j["fixtures"].get<std::string>(), base);
    }
    spec.sufficient_after_points = j.value("sufficient_after_points", spec.sufficient_after_points);
    if (spec.kind != "openai" && spec.kind != "scripted" && spec.kind != "heuristic") {
        throw ConfigError("unknown chat provider kind '" + spec.kind + "'");
    }
    if (spec.kind == "scripted" && spec.fixtures.empty()) {
        throw ConfigError(std::string("scripted provider in '") + section + "' needs a fixtures path");
    }
    return spec;
}

json chat_spec_json(const ChatProviderSpec& s) {
    return {{"kind", s.kind},
            {"base_url", s.base_url},
            {"model", s.model},
            {"api_key_env", s.api_key_env},
            {"fixtures", s.fixtures.string()},
            {"sufficient_after_points", s.sufficient_after_points}};
}

}  // namespace

ProjectConfig project_config_from_json(const json& j, const fs::path& base_dir) {
    ProjectConfig c;
    c.corpus = resolve(c.corpus, base_dir);
    c.index = resolve(c.index, base_dir);
    c.traces = resolve(c.traces, base_dir);
    try {
        reject_unknown(j, "root",
                       {"paths", "tokenizer", "chunking", "extraction", "retrieval", "session", "providers", "eval"});
        if (j.contains("paths")) {
            const auto& p = j["paths"];
            reject_unknown(p, "paths", {"corpus", "index", "traces", "prompts"});
            if (p.contains("corpus")) c.corpus = resolve(p["corpus"].get<std::string>(), base_dir);
            if (p.contains("index")) c.index = resolve(p["index"].get<std::string>(), base_dir);
            if (p.contains("traces")) c.traces = resolve(p["traces"].get<std::string>(), base_dir);
            if (p.contains("prompts")) c.prompts_dir = resolve(p["prompts"].get<std::string>(), base_dir);
        }
        if (j.contains("tokenizer")) {
            c.index_params.tokenizer.name = j["tokenizer"].get<std::string>();
            require_supported(c.index_params.tokenizer);
        }
        if (j.contains("chunking")) {
            const auto& ch = j["chunking"];
            reject_unknown(ch, "chunking", {"chunk_size", "overlap"});
            c.index_params.chunking.chunk_size = ch.value("chunk_size", c.index_params.chunking.chunk_size);
            c.index_params.chunking.overlap = ch.value("overlap", c.index_params.chunking.overlap);
        }
        if (c.index_params.chunking.overlap >= c.index_params.chunking.chunk_size) {
            throw ConfigError("chunking overlap must be smaller than chunk_size");
        }
        if (j.contains("extraction")) {
            const auto& ex = j["extraction"];
            reject_unknown(ex, "extraction", {"max_retries", "summarize_threshold"});
            c.index_params.extraction.max_retries = ex.value("max_retries", c.index_params.extraction.max_retries);
            c.index_params.extraction.summarize_threshold =
                ex.value("summarize_threshold", c.index_params.extraction.summarize_threshold);
        }
        json session = j.value("session", json::object());
        if (j.contains("retrieval")) {
            const auto& r = j["retrieval"];
            reject_unknown(r, "retrieval", {"n_v", "n_e", "n_d"});
            for (const auto& [k, v] : r.items()) {
                session[k] = v;
            }
        }
        c.session = session_config_from_json(session);
        c.index_params.extraction.temperature = c.session.temperature;
        c.index_params.extraction.max_output_tokens = c.session.max_output_tokens;
        if (j.contains("providers")) {
            const auto& p = j["providers"];
            reject_unknown(p, "providers", {"llm", "judge", "embedding"});
            if (p.contains("llm")) c.llm = chat_spec(p["llm"], c.llm, base_dir, "providers.llm");
            c.judge = p.contains("judge") ? chat_spec(p["judge"], c.llm, base_dir, "providers.judge") : c.llm;
            if (p.contains("embedding")) {
                const auto& e = p["embedding"];
                reject_unknown(e, "providers.embedding", {"kind", "base_url", "model", "api_key_env", "dim", "fixtures"});
                auto& s = c.embedding;
                s.kind = e.value("kind", s.kind);
                s.base_url = e.value("base_url", s.base_url);
                s.model = e.value("model", s.model);
                s.api_key_env = e.value("api_key_env", s.api_key_env);
                s.dim = e.value("dim", s.dim);
                if (e.contains("fixtures")) s.fixtures = resolve(e["fixtures"].get<std::string>(), base_dir);
                if (s.kind != "hashing" && s.kind != "openai" && s.kind != "scripted") {
                    throw ConfigError("unknown embedding provider kind '" + s.kind + "'");
                }
                if (s.kind == "hashing" && s.dim == 0) {
                    throw ConfigError("hashing embedder needs a positive dim");
                }
            }
        }
        if (j.contains("eval")) {
            const auto& e = j["eval"];
            reject_unknown(e, "eval", {"concurrency", "judge_accuracy", "score_generative"});
            c.eval.concurrency = e.value("concurrency", c.eval.concurrency);
            c.eval.judge_accuracy = e.value("judge_accuracy", c.eval.judge_accuracy);
            c.eval.score_generative = e.value("score_generative", c.eval.score_generative);
            if (c.eval.concurrency == 0) {
                throw ConfigError("eval concurrency must be at least 1");
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid config value: ") + e.what());
    }
    return c;
}

ProjectConfig load_project_config(const fs::path& path) {
    if (!fs::exists(path)) {
        throw ConfigError("config file '" + path.string() + "' does not exist");
    }
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
        throw ConfigError("config file '" + path.string() + "' is not valid JSON: " + e.what());
    }
    return project_config_from_json(j, path.parent_path());
}

json to_json(const ProjectConfig& c) {
    json session = to_json(c.session);
    json paths = {{"corpus", c.corpus.string()}, {"index", c.index.string()}, {"traces", c.traces.string()}};
    if (c.prompts_dir) {
        paths["prompts"] = c.prompts_dir->string();
    }
    return {{"paths", paths},
            {"tokenizer", c.index_params.tokenizer.name},
            {"chunking",
             {{"chunk_size", c.index_params.chunking.chunk_size}, {"overlap", c.index_params.chunking.overlap}}},
            {"extraction",
             {{"max_retries", c.index_params.extraction.max_retries},
              {"summarize_threshold", c.index_params.extraction.summarize_threshold}}},
            {"session", session},
            {"providers",
             {{"llm", chat_spec_json(c.llm)},
              {"judge", chat_spec_json(c.judge)},
              {"embedding",
               {{"kind", c.embedding.kind},
                {"base_url", c.embedding.base_url},
                {"model", c.embedding.model},
                {"api_key_env", c.embedding.api_key_env},
                {"dim", c.embedding.dim},
                {"fixtures", c.embedding.fixtures.string()}}}}},
            {"eval",
             {{"concurrency", c.eval.concurrency},
              {"judge_accuracy", c.eval.judge_accuracy},
              {"score_generative", c.eval.score_generative}}}};
}

ChatProviderSpec parse_provider_override(const std::string& value, const ChatProviderSpec& base) {
    ChatProviderSpec spec = base;
    if (value == "heuristic" || value == "openai") {
        spec.kind = value;
    } else if (value.rfind("scripted:", 0) == 0 && value.size() > 9) {
        spec.kind = "scripted";
        spec.fixtures = value.substr(9);
    } else {
        throw ConfigError("--provider expects scripted:PATH, heuristic or openai, got '" + value + "'");
    }
    return spec;
}

namespace {

std::string api_key(const std::string& env) {
    if (env.empty()) {
        return "";
    }
    const char* v = std::getenv(env.c_str());
    return v != nullptr ? v : "";
}

}  // namespace

std::unique_ptr<ChatProvider> make_chat_provider(const ChatProviderSpec& spec) {
    if (spec.kind == "scripted") {
        if (!fs::exists(spec.fixtures)) {
            throw ConfigError("chat fixture file '" + spec.fixtures.string() + "' does not exist");
        }
        return std::make_unique<ScriptedChatProvider>(ScriptedChatProvider::from_file(spec.fixtures));
    }
    if (spec.kind == "heuristic") {
        HeuristicOptions o;
        o.sufficient_after_points = spec.sufficient_after_points;
        return std::make_unique<HeuristicChatProvider>(o);
    }
    return std::make_unique<OpenAIChatProvider>(HttpEndpoint{spec.base_url, api_key(spec.api_key_env)}, spec.model);
}

std::unique_ptr<EmbeddingProvider> make_embedding_provider(const EmbeddingProviderSpec& spec) {
    if (spec.kind == "hashing") {
        return std::make_unique<HashingEmbedder>(spec.dim);
    }
    if (spec.kind == "scripted") {
        if (!fs::exists(spec.fixtures)) {
            throw ConfigError("embedding fixture file '" + spec.fixtures.string() + "' does not exist");
        }
        return std::make_unique<ScriptedEmbedder>(ScriptedEmbedder::from_file(spec.fixtures));
    }
    return std::make_unique<OpenAIEmbedder>(HttpEndpoint{spec.base_url, api_key(spec.api_key_env)}, spec.model,
                                            spec.dim);
}

PromptLibrary make_prompt_library(const ProjectConfig& c) {
    return c.prompts_dir ? PromptLibrary::with_overrides(*c.prompts_dir) : PromptLibrary::builtin();
}

}  // namespace hypermem
