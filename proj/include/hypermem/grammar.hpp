#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace hypermem {

/// Line-oriented tagged output format used for every structured LLM reply:
///
///     [[INSERT]]
///     ENTITIES: Xodar; Issus
///     DESCRIPTION: first line
///     continuation lines belong to the previous field
///
/// Text outside blocks is ignored, as are markdown fence lines.
struct Block {
    std::string type;
    std::vector<std::pair<std::string, std::string>> fields;

    /// First value for `key`, if present.
    std::optional<std::string> field(std::string_view key) const;

    bool operator==(const Block&) const = default;
};

struct BlockParse {
    std::vector<Block> blocks;
    std::vector<std::string> errors;  // grammar-level problems, one per bad block
};

BlockParse parse_blocks(std::string_view text);
std::string render_blocks(const std::vector<Block>& blocks);

/// Value of the first `KEY: value` line anywhere in `text`.
std::optional<std::string> find_field(std::string_view text, std::string_view key);

/// Splits "a; b;c" on ';' (and newlines), trimming and dropping empty items.
std::vector<std::string> split_list(std::string_view value);

/// True when the reply explicitly declares that nothing applies ("NONE").
bool is_none_reply(std::string_view text);

}  // namespace hypermem
