#pragma once

#include <nlohmann/json.hpp>

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace hypermem {

using json = nlohmann::json;

/// Canonical single-line encoding of one record: sorted keys, no whitespace.
std::string to_record_line(const json& record);

/// Writes one record per line. The file is written to a temporary sibling and
/// renamed into place so readers never observe a partial file.
void write_records(const std::filesystem::path& path, const std::vector<json>& records);

/// Reads a line-delimited record file. Blank lines are skipped; a malformed
/// line raises FormatError naming the file and line number.
std::vector<json> read_records(const std::filesystem::path& path);

void write_text_file(const std::filesystem::path& path, const std::string& contents);
std::string read_text_file(const std::filesystem::path& path);

/// Little-endian float32 sidecar: rows of `dim` floats, row i at byte offset i*dim*4.
void write_float32_rows(const std::filesystem::path& path, const std::vector<std::vector<float>>& rows);
std::vector<std::vector<float>> read_float32_rows(const std::filesystem::path& path, std::size_t dim,
                                                  std::size_t expected_rows);

/// Required-field accessors that raise FormatError instead of json exceptions.
const json& require_field(const json& record, const char* key);
std::string require_string(const json& record, const char* key);
long long require_int(const json& record, const char* key);

}  // namespace hypermem
