#pragma once

#include "hypermem/llm.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace hypermem {

/// Prompt templates by role name ("sufficiency", "evolve", ...).
///
/// Template syntax: lines starting with `%%` are asset comments; `[system]`
/// and `[user]` lines open message sections; `{{name}}` is substituted.
class PromptLibrary {
public:
    /// Templates compiled in from assets/prompts.
    static PromptLibrary builtin();
    /// Built-in templates overridden by any `<name>.txt` found in `dir`.
    static PromptLibrary with_overrides(const std::filesystem::path& dir);

    bool has(const std::string& name) const { return templates_.count(name) != 0; }
    const std::string& raw(const std::string& name) const;
    std::vector<std::string> names() const;

    /// Throws InvalidArgument for an unknown template, a placeholder without
    /// a value, or a template without any message section.
    std::vector<ChatMessage> render(const std::string& name, const std::map<std::string, std::string>& vars) const;

    void set(const std::string& name, std::string text) { templates_[name] = std::move(text); }

private:
    std::map<std::string, std::string> templates_;
};

/// One level of a two-step scoring rubric: scores for `level` lie in [low, high].
struct ScoreLevel {
    int level = 0;
    int low = 0;
    int high = 0;

    bool operator==(const ScoreLevel&) const = default;
};

/// Reads "Level N (lo-hi)" lines from a scoring template. Throws ConfigError
/// when none are present or a range is outside [0, 100].
std::vector<ScoreLevel> parse_score_levels(const std::string& template_text);

}  // namespace hypermem
