#pragma once

#include "hypermem/embedding.hpp"
#include "hypermem/eval.hpp"
#include "hypermem/index.hpp"
#include "hypermem/llm.hpp"
#include "hypermem/session.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

namespace hypermem {

/// Chat provider settings. kind: "openai" | "scripted" | "heuristic".
struct ChatProviderSpec {
    std::string kind = "openai";
    std::string base_url = "https://api.openai.com/v1";
    std::string model = "gpt-4o";
    std::string api_key_env = "OPENAI_API_KEY";
    std::filesystem::path fixtures;  // scripted only
    std::size_t sufficient_after_points = 0;  // heuristic only

    bool operator==(const ChatProviderSpec&) const = default;
};

/// Embedding provider settings. kind: "hashing" | "openai" | "scripted".
struct EmbeddingProviderSpec {
    std::string kind = "hashing";
    std::string base_url = "https://api.openai.com/v1";
    std::string model = "text-embedding-3-small";
    std::string api_key_env = "OPENAI_API_KEY";
    std::size_t dim = 256;  // hashing; 0 means probe for openai
    std::filesystem::path fixtures;

    bool operator==(const EmbeddingProviderSpec&) const = default;
};

struct ProjectConfig {
    std::filesystem::path corpus = "corpus";
    std::filesystem::path index = "index";
    std::filesystem::path traces = "traces";
    std::optional<std::filesystem::path> prompts_dir;
    IndexParams index_params;
    SessionConfig session;
    ChatProviderSpec llm;
    ChatProviderSpec judge;
    EmbeddingProviderSpec embedding;
    EvalOptions eval;
};

/// Parses a JSON config. Relative paths resolve against `base_dir`.
/// Unknown keys and invalid values raise ConfigError.
ProjectConfig project_config_from_json(const json& j, const std::filesystem::path& base_dir);
ProjectConfig load_project_config(const std::filesystem::path& path);
json to_json(const ProjectConfig& c);

/// "scripted:PATH" or "heuristic" (also "openai").
ChatProviderSpec parse_provider_override(const std::string& value, const ChatProviderSpec& base);

/// API keys come from the environment variable named in the spec.
std::unique_ptr<ChatProvider> make_chat_provider(const ChatProviderSpec& spec);
std::unique_ptr<EmbeddingProvider> make_embedding_provider(const EmbeddingProviderSpec& spec);

PromptLibrary make_prompt_library(const ProjectConfig& c);

}  // namespace hypermem
