#include "hypermem/prompts.hpp"

#include "hypermem/error.hpp"
#include "hypermem/records.hpp"
#include "hypermem/text.hpp"

#include <regex>
#include <sstream>

namespace hypermem {

// Generated from assets/prompts at build time.
const std::map<std::string, std::string>& embedded_prompt_assets();

PromptLibrary PromptLibrary::builtin() {
    PromptLibrary lib;
    lib.templates_ = embedded_prompt_assets();
    return lib;
}

PromptLibrary PromptLibrary::with_overrides(const std::filesystem::path& dir) {
    PromptLibrary lib = builtin();
    if (!std::filesystem::is_directory(dir)) {
        throw ConfigError("prompt directory '" + dir.string() + "' does not exist");
    }
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".txt") {
            lib.templates_[entry.path().stem().string()] = read_text_file(entry.path());
        }
    }
    return lib;
}

const std::string& PromptLibrary::raw(const std::string& name) const {
    auto it = templates_.find(name);
    if (it == templates_.end()) {
        throw InvalidArgument("unknown prompt template '" + name + "'");
    }
    return it->second;
}

std::vector<std::string> PromptLibrary::names() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : templates_) {
        out.push_back(k);
    }
    return out;
}

namespace {

std::string substitute(const std::string& name, const std::string& body,
                       const std::map<std::string, std::string>& vars) {
    std::string out;
    std::size_t pos = 0;
    while (true) {
        const auto open = body.find("{{", pos);
        if (open == std::string::npos) {
            out.append(body, pos, std::string::npos);
            break;
        }
        const auto close = body.find("}}", open + 2);
        if (close == std::string::npos) {
            throw InvalidArgument("prompt '" + name + "' has an unterminated placeholder");
        }
        out.append(body, pos, open - pos);
        const std::string key = body.substr(open + 2, close - open - 2);
        auto it = vars.find(key);
        if (it == vars.end()) {
            throw InvalidArgument("prompt '" + name + "' needs a value for '" + key + "'");
        }
        out += it->second;
        pos = close + 2;
    }
    return out;
}

}  // namespace

std::vector<ChatMessage> PromptLibrary::render(const std::string& name,
                                               const std::map<std::string, std::string>& vars) const {
    std::istringstream in(raw(name));
    std::vector<ChatMessage> messages;
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("%%", 0) == 0) {
            continue;
        }
        const auto t = trim(line);
        if (t == "[system]" || t == "[user]" || t == "[assistant]") {
            messages.push_back({t.substr(1, t.size() - 2), ""});
            continue;
        }
        if (messages.empty()) {
            if (!t.empty()) {
                throw InvalidArgument("prompt '" + name + "' has text before its first section");
            }
            continue;
        }
        messages.back().content += line + "\n";
    }
    if (messages.empty()) {
        throw InvalidArgument("prompt '" + name + "' has no message sections");
    }
    for (auto& m : messages) {
        m.content = trim(substitute(name, m.content, vars));
    }
    return messages;
}

std::vector<ScoreLevel> parse_score_levels(const std::string& template_text) {
    static const std::regex level_re(R"(Level\s+(\d+)\s*\(\s*(\d+)\s*-\s*(\d+)\s*\))");
    std::vector<ScoreLevel> levels;
    for (auto it = std::sregex_iterator(template_text.begin(), template_text.end(), level_re);
         it != std::sregex_iterator(); ++it) {
        ScoreLevel l{std::stoi((*it)[1]), std::stoi((*it)[2]), std::stoi((*it)[3])};
        if (l.low < 0 || l.high > 100 || l.low > l.high) {
            throw ConfigError("score level " + std::to_string(l.level) + " has an invalid range");
        }
        levels.push_back(l);
    }
    if (levels.empty()) {
        throw ConfigError("scoring template declares no levels");
    }
    return levels;
}

}  // namespace hypermem
