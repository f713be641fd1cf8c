#include "support.hpp"

#include <atomic>
#include <fstream>
#include <sstream>

namespace hypermem::testing {

namespace fs = std::filesystem;

fs::path fixture(const std::string& relative) {
    return fs::path(HYPERMEM_FIXTURES) / relative;
}

TempDir::TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = fs::temp_directory_path() /
            ("hypermem-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    fs::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream(path, std::ios::binary) << text;
}

std::map<std::string, std::string> tree_contents(const fs::path& dir, const std::set<std::string>& skip) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file() && skip.count(e.path().filename().string()) == 0) {
            out[fs::relative(e.path(), dir).generic_string()] = slurp(e.path());
        }
    }
    return out;
}

void copy_tree(const fs::path& from, const fs::path& to) {
    fs::create_directories(to);
    fs::copy(from, to, fs::copy_options::recursive | fs::copy_options::overwrite_existing);
}

Vector random_vector(std::mt19937_64& rng, std::size_t dim) {
    std::uniform_real_distribution<float> u(-1.0F, 1.0F);
    std::vector<float> v(dim);
    for (;;) {
        bool nonzero = false;
        for (auto& x : v) {
            x = u(rng);
            nonzero = nonzero || x != 0.0F;
        }
        if (nonzero) {
            return Vector(v);
        }
    }
}

namespace {

const std::vector<std::string> kSyllables = {"kor", "van", "dast", "mir", "el", "tha", "bryn", "os", "ka",  "lun",
                                             "ves", "ari", "dor", "quil", "sen", "ul", "gar", "rhe", "tam", "ix"};
const std::vector<std::string> kVerbs = {"traded with", "argued with", "sailed beside", "betrayed",
                                         "sheltered",   "wrote to",    "feared",        "trained"};

std::string capitalized(std::string s) {
    s[0] = static_cast<char>(s[0] - 'a' + 'A');
    return s;
}

}  // namespace

SyntheticCorpus synthetic_corpus(std::uint64_t seed, std::size_t entities, std::size_t sentences,
                                 std::size_t queries) {
    std::mt19937_64 rng(seed);
    auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
    SyntheticCorpus c;
    std::set<std::string> seen;
    while (c.entities.size() < entities) {
        const auto name = capitalized(kSyllables[pick(kSyllables.size())] + kSyllables[pick(kSyllables.size())]) +
                          " " + capitalized(kSyllables[pick(kSyllables.size())] + kSyllables[pick(kSyllables.size())]);
        if (seen.insert(name).second) {
            c.entities.push_back(name);
        }
    }
    std::string doc;
    for (std::size_t s = 0; s < sentences; ++s) {
        const auto a = pick(entities);
        auto b = pick(entities);
        while (b == a) {
            b = pick(entities);
        }
        std::string sentence = c.entities[a] + " " + kVerbs[pick(kVerbs.size())] + " " + c.entities[b];
        if (pick(3) == 0) {
            auto d = pick(entities);
            if (d != a && d != b) {
                sentence += " and " + c.entities[d];
            }
        }
        doc += sentence + ". ";
        if ((s + 1) % 12 == 0) {
            c.documents.push_back(doc);
            doc.clear();
        }
    }
    if (!doc.empty()) {
        c.documents.push_back(doc);
    }
    for (std::size_t q = 0; q < queries; ++q) {
        c.queries.push_back("How is " + c.entities[pick(entities)] + " connected to " + c.entities[pick(entities)] +
                            "?");
    }
    return c;
}

void write_corpus(const SyntheticCorpus& corpus, const fs::path& dir) {
    fs::create_directories(dir);
    for (std::size_t i = 0; i < corpus.documents.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "doc-%03zu.txt", i);
        spit(dir / name, corpus.documents[i]);
    }
}

KnowledgeGraph graph_of(const std::vector<std::string>& names,
                        const std::vector<std::tuple<std::string, std::string, std::string>>& edges) {
    KnowledgeGraph g;
    for (const auto& n : names) {
        EntityNode node;
        node.id = normalize_entity_name(n);
        node.name = n;
        node.description = n + " description";
        node.chunk_ids = {"c-" + node.id};
        g.put_node(node);
    }
    for (const auto& [s, t, d] : edges) {
        RelationEdge e;
        e.source = normalize_entity_name(s);
        e.target = normalize_entity_name(t);
        e.description = d;
        e.id = make_edge_id(e.source, e.target, d);
        g.put_edge(e);
    }
    return g;
}

PointId insert_point(MemoryHypergraph& m, const std::vector<std::string>& names, const std::string& description) {
    InsertProposal p;
    p.description = description;
    p.vertex_names = names;
    return m.apply_insert(nullptr, p);
}

KnowledgeBase build_fixture_index(const std::string& name, const std::filesystem::path& index_dir) {
    const auto config = load_project_config(fixture(name) / "config.json");
    auto llm = make_chat_provider(config.llm);
    auto embedder = make_embedding_provider(config.embedding);
    const auto prompts = make_prompt_library(config);
    build_index(config.corpus, index_dir, config.index_params, *llm, *embedder, prompts);
    return load_index(index_dir);
}

}  // namespace hypermem::testing
