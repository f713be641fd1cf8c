#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace hypermem {

/// Byte range of one token inside the text it was produced from.
struct TokenSpan {
    std::size_t begin = 0;
    std::size_t end = 0;
};

/// Identifies a tokenizer. Recorded in index manifests so indexes are
/// self-describing; only the whitespace+punctuation tokenizer ships.
struct TokenizerSpec {
    std::string name = "whitespace-punct-v1";

    bool operator==(const TokenizerSpec&) const = default;
};

/// Throws ConfigError for tokenizer names this build does not know.
void require_supported(const TokenizerSpec& spec);

/// Words are maximal runs of ASCII alphanumerics, '_' and non-ASCII bytes;
/// every other printable ASCII character is a token of its own; whitespace
/// and control characters separate tokens.
std::vector<TokenSpan> tokenize_spans(std::string_view text, const TokenizerSpec& spec = {});

std::vector<std::string> tokenize(std::string_view text, const TokenizerSpec& spec = {});

/// The tokenizer's joining rule: tokens separated by a single space.
std::string join_tokens(const std::vector<std::string>& tokens);

std::size_t count_tokens(std::string_view text, const TokenizerSpec& spec = {});

/// Unicode NFC normalization. Throws InvalidArgument on malformed UTF-8.
std::string nfc_normalize(std::string_view text);

/// Lowercase hex SHA-256 of the bytes of `data`.
std::string sha256_hex(std::string_view data);

/// Short stable id: `prefix` followed by the first 16 hex digits of sha256(key).
std::string stable_id(std::string_view prefix, std::string_view key);

/// Full Unicode case folding (ICU default folding options).
std::string case_fold(std::string_view text);

std::string trim(std::string_view s);
std::string to_lower_ascii(std::string_view s);

}  // namespace hypermem
