#include "hypermem/grammar.hpp"

#include "hypermem/text.hpp"

#include <cctype>
#include <sstream>

namespace hypermem {

namespace {

bool is_key(std::string_view s) {
    if (s.empty() || std::isupper(static_cast<unsigned char>(s[0])) == 0) {
        return false;
    }
    for (char c : s) {
        if (std::isupper(static_cast<unsigned char>(c)) == 0 && c != '_') {
            return false;
        }
    }
    return true;
}

std::optional<std::string> block_header(std::string_view line) {
    const std::string t = trim(line);
    if (t.size() > 4 && t.rfind("[[", 0) == 0 && t.compare(t.size() - 2, 2, "]]") == 0) {
        std::string type = t.substr(2, t.size() - 4);
        if (is_key(type)) {
            return type;
        }
    }
    return std::nullopt;
}

std::optional<std::pair<std::string, std::string>> field_line(std::string_view line) {
    const auto colon = line.find(':');
    if (colon == std::string_view::npos) {
        return std::nullopt;
    }
    std::string key = trim(line.substr(0, colon));
    // Tolerate markdown emphasis such as **TEXT**:
    while (!key.empty() && key.front() == '*') key.erase(key.begin());
    while (!key.empty() && key.back() == '*') key.pop_back();
    if (!is_key(key)) {
        return std::nullopt;
    }
    return std::make_pair(key, trim(line.substr(colon + 1)));
}

bool is_fence(std::string_view line) {
    return trim(line).rfind("```", 0) == 0;
}

}  // namespace

std::optional<std::string> Block::field(std::string_view key) const {
    for (const auto& [k, v] : fields) {
        if (k == key) {
            return v;
        }
    }
    return std::nullopt;
}

BlockParse parse_blocks(std::string_view text) {
    BlockParse out;
    std::optional<Block> current;
    auto finish = [&] {
        if (!current) {
            return;
        }
        for (auto& [k, v] : current->fields) {
            v = trim(v);
        }
        if (current->fields.empty()) {
            out.errors.push_back("block [[" + current->type + "]] has no fields");
        } else {
            out.blocks.push_back(std::move(*current));
        }
        current.reset();
    };
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (is_fence(line)) {
            continue;
        }
        if (auto type = block_header(line)) {
            finish();
            current = Block{*type, {}};
            continue;
        }
        if (!current) {
            continue;
        }
        if (auto f = field_line(line)) {
            current->fields.push_back(std::move(*f));
        } else if (!current->fields.empty()) {
            current->fields.back().second += "\n" + line;
        } else if (!trim(line).empty()) {
            out.errors.push_back("block [[" + current->type + "]] has text before its first field");
        }
    }
    finish();
    return out;
}

std::string render_blocks(const std::vector<Block>& blocks) {
    std::string out;
    for (const auto& b : blocks) {
        out += "[[" + b.type + "]]\n";
        for (const auto& [k, v] : b.fields) {
            out += k + ": " + v + "\n";
        }
        out += "\n";
    }
    return out;
}

std::optional<std::string> find_field(std::string_view text, std::string_view key) {
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        if (auto f = field_line(line); f && f->first == key) {
            return f->second;
        }
    }
    return std::nullopt;
}

std::vector<std::string> split_list(std::string_view value) {
    std::vector<std::string> out;
    std::string item;
    auto flush = [&] {
        auto t = trim(item);
        if (!t.empty()) {
            out.push_back(std::move(t));
        }
        item.clear();
    };
    for (char c : value) {
        if (c == ';' || c == '\n') {
            flush();
        } else {
            item += c;
        }
    }
    flush();
    return out;
}

bool is_none_reply(std::string_view text) {
    const auto t = trim(text);
    return t == "NONE" || t == "None" || t == "none";
}

}  // namespace hypermem
