#include "hypermem/heuristic_provider.hpp"

#include "hypermem/graph.hpp"
#include "hypermem/text.hpp"

#include <algorithm>
#include <cctype>
#include <set>

namespace hypermem {

namespace {

const std::set<std::string>& stopwords() {
    static const std::set<std::string> words = {
        "A",    "An",   "And",   "As",   "At",    "But",  "By",   "For",  "From", "He",   "Her",  "His",
        "How",  "I",    "If",    "In",   "It",    "Its",  "My",   "No",   "Not",  "Of",   "On",   "Or",
        "She",  "So",   "That",  "The",  "Their", "Then", "There", "These", "They", "This", "Those", "To",
        "We",   "What", "When",  "Where", "Which", "While", "Who", "Why",  "With", "You",  "Yet"};
    return words;
}

std::string clean(std::string s) {
    for (char& c : s) {
        if (c == '\n' || c == '\r' || c == '\t') {
            c = ' ';
        }
    }
    for (const std::string bad : {"<|>", "##", "<|COMPLETE|>"}) {
        for (auto pos = s.find(bad); pos != std::string::npos; pos = s.find(bad)) {
            s.replace(pos, bad.size(), " ");
        }
    }
    return trim(s);
}

std::vector<std::string> sentences(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (c == '\n' && !cur.empty() && cur.back() == '\n') {
            out.push_back(cur);
            cur.clear();
            continue;
        }
        cur += c;
        if (c == '.' || c == '!' || c == '?') {
            out.push_back(cur);
            cur.clear();
        }
    }
    out.push_back(cur);
    std::vector<std::string> kept;
    for (auto& s : out) {
        auto t = clean(s);
        if (!t.empty()) {
            kept.push_back(std::move(t));
        }
    }
    return kept;
}

/// Runs of capitalized words, with leading stopwords removed.
std::vector<std::string> capitalized_runs(const std::string& sentence) {
    std::vector<std::string> runs;
    std::vector<std::string> run;
    auto flush = [&] {
        while (!run.empty() && stopwords().count(run.front()) != 0) {
            run.erase(run.begin());
        }
        if (!run.empty()) {
            std::string name = run.front();
            for (std::size_t i = 1; i < run.size(); ++i) {
                name += " " + run[i];
            }
            runs.push_back(name);
        }
        run.clear();
    };
    std::size_t i = 0;
    while (i < sentence.size()) {
        const auto c = static_cast<unsigned char>(sentence[i]);
        if (std::isalpha(c) != 0) {
            std::size_t j = i;
            while (j < sentence.size() &&
                   (std::isalnum(static_cast<unsigned char>(sentence[j])) != 0 || sentence[j] == '\'')) {
                ++j;
            }
            std::string word = sentence.substr(i, j - i);
            if (std::isupper(c) != 0) {
                run.push_back(word);
            } else {
                flush();
            }
            i = j;
            if (i < sentence.size() && sentence[i] != ' ') {
                flush();
            }
        } else {
            if (c != ' ') {
                flush();
            }
            ++i;
        }
    }
    flush();
    return runs;
}

std::string extract_reply(const std::string& text) {
    std::vector<std::string> records;
    std::set<EntityId> declared;
    std::set<std::string> related;
    for (const auto& s : sentences(text)) {
        std::vector<std::string> ents;
        for (const auto& name : capitalized_runs(s)) {
            const auto id = normalize_entity_name(name);
            if (std::none_of(ents.begin(), ents.end(), [&](const auto& e) { return normalize_entity_name(e) == id; })) {
                ents.push_back(name);
            }
            if (declared.insert(id).second) {
                records.push_back("(\"entity\"<|>" + name + "<|>concept<|>" + s + ")");
            }
        }
        for (std::size_t i = 0; i + 1 < ents.size(); ++i) {
            const auto key = normalize_entity_name(ents[i]) + "\x1f" + normalize_entity_name(ents[i + 1]) + "\x1f" + s;
            if (related.insert(key).second) {
                records.push_back("(\"relationship\"<|>" + ents[i] + "<|>" + ents[i + 1] + "<|>" + s + "<|>" +
                                  "co-occurrence<|>1)");
            }
        }
    }
    std::string out;
    for (const auto& r : records) {
        out += r + "\n##\n";
    }
    return out + "<|COMPLETE|>";
}

/// Concatenates the sentences of `a` and `b`, each distinct sentence once.
std::string join_sentences(const std::string& a, const std::string& b) {
    std::vector<std::string> seen;
    std::string out;
    for (const auto* text : {&a, &b}) {
        std::size_t start = 0;
        while (start < text->size()) {
            auto end = text->find(". ", start);
            end = end == std::string::npos ? text->size() : end + 1;
            const auto sentence = trim(std::string_view(*text).substr(start, end - start));
            start = end;
            if (sentence.empty() || std::find(seen.begin(), seen.end(), sentence) != seen.end()) {
                continue;
            }
            seen.push_back(sentence);
            out += (out.empty() ? "" : " ") + sentence;
        }
    }
    return out;
}

std::string shorten(const std::string& s, std::size_t limit) {
    if (s.size() <= limit) {
        return s;
    }
    auto cut = s.rfind(' ', limit);
    if (cut == std::string::npos || cut == 0) {
        cut = limit;
    }
    return s.substr(0, cut) + " ...";
}

std::set<EntityId> entity_ids(const json& point) {
    return point.at("entity_ids").get<std::set<EntityId>>();
}

std::string evolve_reply(const json& ctx, std::size_t max_inserts) {
    const auto& points = ctx.at("points");
    const bool insert_only = ctx.value("insert_only", false);
    std::string out;
    std::size_t inserts = 0;
    std::set<std::string> updated;
    std::set<std::pair<EntityId, EntityId>> planned;
    for (const auto& r : ctx.at("evidence").at("relations")) {
        const auto src = r.at("source").get<std::string>();
        const auto tgt = r.at("target").get<std::string>();
        const auto desc = r.at("description").get<std::string>();
        const auto a = normalize_entity_name(src);
        const auto b = normalize_entity_name(tgt);
        const json* covering = nullptr;
        for (const auto& p : points) {
            const auto ids = entity_ids(p);
            if (ids.count(a) != 0 && ids.count(b) != 0) {
                covering = &p;
                break;
            }
        }
        if (covering != nullptr) {
            const auto id = covering->at("id").get<std::string>();
            const auto old = covering->at("description").get<std::string>();
            if (!insert_only && old.find(desc) == std::string::npos && updated.insert(id).second) {
                out += "[[UPDATE]]\nPOINT: " + id + "\nDESCRIPTION: " + shorten(old + " " + desc, 600) + "\n\n";
            }
            continue;
        }
        if (inserts < max_inserts && planned.insert(std::minmax(a, b)).second) {
            out += "[[INSERT]]\nENTITIES: " + src + "; " + tgt + "\nDESCRIPTION: " + desc + "\n\n";
            ++inserts;
        }
    }
    return out.empty() ? "NONE" : out;
}

std::string merge_reply(const json& ctx) {
    const auto& points = ctx.at("points");
    std::set<std::size_t> used;
    std::string out;
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (used.count(i) != 0) {
            continue;
        }
        const auto ids_i = entity_ids(points[i]);
        for (std::size_t j = i + 1; j < points.size(); ++j) {
            if (used.count(j) != 0) {
                continue;
            }
            const auto ids_j = entity_ids(points[j]);
            const bool shared = std::any_of(ids_j.begin(), ids_j.end(), [&](const auto& v) { return ids_i.count(v); });
            if (shared) {
                used.insert(i);
                used.insert(j);
                const auto desc = join_sentences(points[i].at("description").get<std::string>(),
                                                 points[j].at("description").get<std::string>());
                out += "[[MERGE]]\nPOINTS: " + points[i].at("id").get<std::string>() + "; " +
                       points[j].at("id").get<std::string>() + "\nDESCRIPTION: " + shorten(desc, 600) + "\n\n";
                break;
            }
        }
    }
    return out.empty() ? "NONE" : out;
}

std::string concerns_reply(const json& ctx) {
    const auto& points = ctx.at("points");
    const auto max = std::max<std::size_t>(1, ctx.value("max_concerns", std::size_t{3}));
    const auto query = ctx.at("query").get<std::string>();
    std::string out = "[[CONCERN]]\nTARGET: NONE\nTEXT: What other parts of the document bear on: " + query + "\n\n";
    std::size_t n = 1;
    for (auto it = points.rbegin(); it != points.rend() && n < max; ++it, ++n) {
        std::string names;
        for (const auto& e : it->at("entities")) {
            names += (names.empty() ? "" : ", ") + e.get<std::string>();
        }
        out += "[[CONCERN]]\nTARGET: " + it->at("id").get<std::string>() + "\nTEXT: What else connects " + names +
               "?\n\n";
    }
    return out;
}

std::string subqueries_reply(const json& ctx) {
    std::string out;
    const auto& concerns = ctx.at("concerns");
    for (std::size_t i = 0; i < concerns.size(); ++i) {
        out += "[[SUBQUERY]]\nCONCERN: " + std::to_string(i + 1) +
               "\nTEXT: " + concerns[i].at("text").get<std::string>() + "\n\n";
    }
    return out;
}

std::string answer_reply(const json& ctx) {
    const auto& points = ctx.at("points");
    if (points.empty()) {
        return "No relevant information was found.";
    }
    std::string out = "Based on the memory: ";
    for (std::size_t i = 0; i < points.size() && i < 3; ++i) {
        out += (i == 0 ? "" : " ") + points[i].at("description").get<std::string>();
    }
    return shorten(out, 800);
}

std::string score_reply(const json& ctx) {
    const auto& levels = ctx.at("levels");
    const auto& mid = levels.at(levels.size() / 2);
    const int low = mid.at("low").get<int>();
    const int high = mid.at("high").get<int>();
    return "LEVEL: " + std::to_string(mid.at("level").get<int>()) + "\nSCORE: " + std::to_string((low + high) / 2);
}

}  // namespace

ChatResponse HeuristicChatProvider::complete(const ChatRequest& request) {
    const auto& ctx = request.context;
    const auto& tag = request.tag;
    std::string text;
    if (tag == "extract") {
        text = extract_reply(ctx.at("chunk_text").get<std::string>());
    } else if (tag == "summarize") {
        const auto fragments = ctx.at("fragments").get<std::vector<std::string>>();
        text = fragments.empty() ? "" : fragments.front();
        for (std::size_t i = 1; i < fragments.size() && i < 3; ++i) {
            text += " " + fragments[i];
        }
    } else if (tag == "sufficiency") {
        const bool enough = options_.sufficient_after_points > 0 &&
                            ctx.at("points").size() >= options_.sufficient_after_points;
        text = enough ? "SUFFICIENT: YES" : "SUFFICIENT: NO";
    } else if (tag == "concerns") {
        text = concerns_reply(ctx);
    } else if (tag == "subqueries") {
        text = subqueries_reply(ctx);
    } else if (tag == "evolve") {
        text = evolve_reply(ctx, options_.max_inserts);
    } else if (tag == "merge") {
        text = merge_reply(ctx);
    } else if (tag == "answer") {
        text = answer_reply(ctx);
    } else if (tag == "judge") {
        const auto pred = to_lower_ascii(ctx.at("prediction").get<std::string>());
        const auto ref = to_lower_ascii(trim(ctx.at("reference").get<std::string>()));
        text = pred.find(ref) != std::string::npos ? "VERDICT: TRUE" : "VERDICT: FALSE";
    } else if (tag.rfind("score-", 0) == 0) {
        text = score_reply(ctx);
    } else {
        text = "NONE";
    }
    return {text, std::nullopt, std::nullopt};
}

}  // namespace hypermem
