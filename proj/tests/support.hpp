#pragma once

#include "hypermem/config.hpp"
#include "hypermem/embedding.hpp"
#include "hypermem/graph.hpp"
#include "hypermem/index.hpp"
#include "hypermem/memory.hpp"

#include <filesystem>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace hypermem::testing {

std::filesystem::path fixture(const std::string& relative);

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

private:
    std::filesystem::path path_;
};

std::string slurp(const std::filesystem::path& path);
void spit(const std::filesystem::path& path, const std::string& text);

/// Relative path -> bytes for every regular file under `dir`, minus files
/// whose name is in `skip`.
std::map<std::string, std::string> tree_contents(const std::filesystem::path& dir,
                                                 const std::set<std::string>& skip = {});

void copy_tree(const std::filesystem::path& from, const std::filesystem::path& to);

/// Uniform components in [-1, 1), never all zero.
Vector random_vector(std::mt19937_64& rng, std::size_t dim);

/// Synthetic corpus: every sentence starts with a capitalized entity name and
/// mentions two or three entities, so rule-based extraction finds them.
struct SyntheticCorpus {
    std::vector<std::string> entities;
    std::vector<std::string> documents;
    std::vector<std::string> queries;
};
SyntheticCorpus synthetic_corpus(std::uint64_t seed, std::size_t entities, std::size_t sentences,
                                 std::size_t queries);
void write_corpus(const SyntheticCorpus& corpus, const std::filesystem::path& dir);

/// Unembedded graph: each node has the single provenance chunk "c-<id>";
/// edges are (source, target, description) by display name.
KnowledgeGraph graph_of(const std::vector<std::string>& names,
                        const std::vector<std::tuple<std::string, std::string, std::string>>& edges);

/// Inserts points over entity names with a null graph, returning their ids.
PointId insert_point(MemoryHypergraph& m, const std::vector<std::string>& names, const std::string& description);

/// Builds the index of fixture project `name` (a directory under the fixture
/// root holding config.json) into `index_dir` and loads it.
KnowledgeBase build_fixture_index(const std::string& name, const std::filesystem::path& index_dir);

}  // namespace hypermem::testing
